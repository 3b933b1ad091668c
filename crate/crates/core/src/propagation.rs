//! Long-time unitary evolution `e^{-iHt}|ψ>`.
//!
//! Two engines:
//!
//! * [`Engine::DenseEig`] diagonalizes H once per σ_z^tot sector (every
//!   Hamiltonian built here conserves σ_z^tot, including the anisotropic
//!   one) and applies exact eigenphases. Phases are reduced modulo 2π with
//!   an exact product and a split 2π so huge times such as `t = 2^Nn` keep
//!   full accuracy. Spectra are cached per chain.
//! * [`Engine::Krylov`] steps with a Lanczos basis and an a posteriori error
//!   estimate, halving the step whenever the local budget is exceeded.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{z_sectors, ChainSpec, HamiltonianAction};
use crate::spin::{global_axis_cycle_mut, CycleDirection, StateVector};

/// Default qubit limit for the dense engine.
pub const DEFAULT_DENSE_LIMIT: usize = 13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    DenseEig,
    Krylov,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::DenseEig => "dense_eig",
            Engine::Krylov => "krylov",
        }
    }
}

impl std::str::FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense_eig" | "dense" => Ok(Engine::DenseEig),
            "krylov" => Ok(Engine::Krylov),
            other => Err(Error::Config(format!("unknown engine '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PropagatorConfig {
    pub engine: Engine,
    /// Evolution time in units of 1/J.
    pub time: f64,
    pub krylov_dim: usize,
    /// Total error budget of the Krylov engine over the whole evolution.
    pub step_tolerance: f64,
    pub dense_qubit_limit: usize,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        PropagatorConfig {
            engine: Engine::DenseEig,
            time: 0.0,
            krylov_dim: 30,
            step_tolerance: 1e-12,
            dense_qubit_limit: DEFAULT_DENSE_LIMIT,
        }
    }
}

impl PropagatorConfig {
    pub fn dense(time: f64) -> Self {
        PropagatorConfig { time, ..Default::default() }
    }

    pub fn krylov(time: f64) -> Self {
        PropagatorConfig { engine: Engine::Krylov, time, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.step_tolerance.is_nan() || self.step_tolerance <= 0.0 {
            return Err(Error::Config("step tolerance must be positive".into()));
        }
        if self.krylov_dim < 2 {
            return Err(Error::Config("Krylov dimension must be at least 2".into()));
        }
        if !self.time.is_finite() {
            return Err(Error::Config("evolution time must be finite".into()));
        }
        Ok(())
    }
}

/// Diagnostics of one evolution.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EvolveReport {
    pub steps: usize,
    pub rejected_steps: usize,
    /// Lanczos runs that terminated early on an invariant subspace.
    pub breakdowns: usize,
    pub error_estimate: f64,
}

const TAU_HI: f64 = std::f64::consts::TAU;
const TAU_LO: f64 = 2.449_293_598_294_706_4e-16;

/// `(energy · time) mod 2π` in `[-π, π)`, computed from the exact product.
pub fn reduced_phase(energy: f64, time: f64) -> f64 {
    let p = energy * time;
    let err = energy.mul_add(time, -p);
    let k = (p / TAU_HI).round();
    let r = (-k).mul_add(TAU_HI, p);
    let r = (-k).mul_add(TAU_LO, r) + err;
    // one more wrap in case rounding pushed r outside the interval
    r - TAU_HI * (r / TAU_HI).round()
}

#[derive(Debug, Clone)]
struct SectorEigen {
    indices: Vec<usize>,
    energies: DVector<f64>,
    vectors: DMatrix<f64>,
}

/// Full spectrum of H, one real-symmetric eigendecomposition per σ_z^tot
/// sector.
#[derive(Debug, Clone)]
pub struct SectorSpectrum {
    num_qubits: usize,
    sectors: Vec<SectorEigen>,
}

impl SectorSpectrum {
    pub fn compute(h: &HamiltonianAction) -> Result<Self> {
        let groups = if h.conserves_z() { z_sectors(h.num_qubits()) } else { vec![(0..h.dim()).collect()] };
        let sectors = groups
            .into_iter()
            .map(|indices| {
                let block = h.sector_block(&indices)?;
                let eig = block.symmetric_eigen();
                if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Numerical("non-finite eigenvalue in sector".into()));
                }
                Ok(SectorEigen { indices, energies: eig.eigenvalues, vectors: eig.eigenvectors })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SectorSpectrum { num_qubits: h.num_qubits(), sectors })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    /// All eigenvalues, ascending.
    pub fn energies(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.sectors.iter().flat_map(|s| s.energies.iter().copied()).collect();
        e.sort_by(f64::total_cmp);
        e
    }

    /// `e^{-iHt}|ψ>` with exact eigenphases.
    pub fn evolve(&self, state: &StateVector, time: f64) -> StateVector {
        let mut out = StateVector::zeros(self.num_qubits);
        for s in &self.sectors {
            let (re, im) = gather(state.amplitudes(), &s.indices);
            // coefficients in the eigenbasis
            let cre = s.vectors.tr_mul(&re);
            let cim = s.vectors.tr_mul(&im);
            let mut pre = DVector::zeros(cre.len());
            let mut pim = DVector::zeros(cre.len());
            for k in 0..cre.len() {
                let phase = C64::from_polar(1.0, -reduced_phase(s.energies[k], time));
                let c = C64::new(cre[k], cim[k]) * phase;
                pre[k] = c.re;
                pim[k] = c.im;
            }
            let re = &s.vectors * pre;
            let im = &s.vectors * pim;
            scatter(out.amplitudes_mut(), &s.indices, &re, &im);
        }
        out
    }

    /// Dense per-sector unitaries `e^{-iH dt}` for repeated short steps.
    pub fn step_operator(&self, dt: f64) -> StepOperator {
        let blocks = self
            .sectors
            .iter()
            .map(|s| {
                let d = s.indices.len();
                let v = s.vectors.map(|x| C64::new(x, 0.0));
                let mut scaled = v.clone();
                for k in 0..d {
                    let phase = C64::from_polar(1.0, -reduced_phase(s.energies[k], dt));
                    scaled.column_mut(k).iter_mut().for_each(|x| *x *= phase);
                }
                (s.indices.clone(), scaled * v.transpose())
            })
            .collect();
        StepOperator { num_qubits: self.num_qubits, blocks }
    }
}

fn gather(amps: &[C64], indices: &[usize]) -> (DVector<f64>, DVector<f64>) {
    let re = DVector::from_iterator(indices.len(), indices.iter().map(|&k| amps[k].re));
    let im = DVector::from_iterator(indices.len(), indices.iter().map(|&k| amps[k].im));
    (re, im)
}

fn scatter(amps: &mut [C64], indices: &[usize], re: &DVector<f64>, im: &DVector<f64>) {
    for (p, &k) in indices.iter().enumerate() {
        amps[k] = C64::new(re[p], im[p]);
    }
}

/// Block-diagonal unitary acting sector by sector.
#[derive(Debug, Clone)]
pub struct StepOperator {
    num_qubits: usize,
    blocks: Vec<(Vec<usize>, DMatrix<C64>)>,
}

impl StepOperator {
    pub fn apply(&self, state: &mut StateVector) {
        debug_assert_eq!(state.num_qubits(), self.num_qubits);
        let amps = state.amplitudes_mut();
        for (indices, u) in &self.blocks {
            let v = DVector::from_iterator(indices.len(), indices.iter().map(|&k| amps[k]));
            let w = u * v;
            for (p, &k) in indices.iter().enumerate() {
                amps[k] = w[p];
            }
        }
    }
}

/// Read-shared, write-once cache of spectra keyed by chain parameters.
#[derive(Debug, Default)]
pub struct SpectrumCache {
    entries: RwLock<HashMap<String, Arc<SectorSpectrum>>>,
}

impl SpectrumCache {
    pub fn global() -> &'static SpectrumCache {
        static CACHE: OnceLock<SpectrumCache> = OnceLock::new();
        CACHE.get_or_init(SpectrumCache::default)
    }

    pub fn get_or_compute(&self, h: &HamiltonianAction) -> Result<Arc<SectorSpectrum>> {
        let key = cache_key(h.spec());
        if let Some(s) = self.entries.read().expect("spectrum cache poisoned").get(&key) {
            return Ok(Arc::clone(s));
        }
        let spectrum = Arc::new(SectorSpectrum::compute(h)?);
        let mut entries = self.entries.write().expect("spectrum cache poisoned");
        Ok(Arc::clone(entries.entry(key).or_insert(spectrum)))
    }

    pub fn clear(&self) {
        self.entries.write().expect("spectrum cache poisoned").clear();
    }
}

fn cache_key(spec: &ChainSpec) -> String {
    format!(
        "{}x{}|{:?}|{:016x}|{:016x}|{}|{}",
        spec.copies,
        spec.sites_per_copy,
        spec.boundary,
        spec.coupling.to_bits(),
        spec.delta.to_bits(),
        spec.overall_sign,
        spec.next_nearest
    )
}

fn check_dense_guard(h: &HamiltonianAction, limit: usize) -> Result<()> {
    if h.num_qubits() > limit {
        return Err(Error::Resource(format!(
            "dense eigendecomposition of {} qubits exceeds the {limit}-qubit guard",
            h.num_qubits()
        )));
    }
    Ok(())
}

/// `e^{-iHt}|ψ>` with the configured engine.
pub fn evolve(state: &StateVector, h: &HamiltonianAction, cfg: &PropagatorConfig) -> Result<StateVector> {
    evolve_with_report(state, h, cfg).map(|(s, _)| s)
}

pub fn evolve_with_report(
    state: &StateVector,
    h: &HamiltonianAction,
    cfg: &PropagatorConfig,
) -> Result<(StateVector, EvolveReport)> {
    cfg.validate()?;
    if state.num_qubits() != h.num_qubits() {
        return Err(Error::Domain(format!("state has {} qubits, Hamiltonian {}", state.num_qubits(), h.num_qubits())));
    }
    if cfg.time == 0.0 {
        return Ok((state.clone(), EvolveReport::default()));
    }
    match cfg.engine {
        Engine::DenseEig => {
            check_dense_guard(h, cfg.dense_qubit_limit)?;
            let spectrum = SpectrumCache::global().get_or_compute(h)?;
            let out = spectrum.evolve(state, cfg.time);
            Ok((out, EvolveReport { steps: 1, ..Default::default() }))
        }
        Engine::Krylov => krylov_evolve(state, h, cfg.time, cfg.krylov_dim, cfg.step_tolerance),
    }
}

struct LanczosBasis {
    vectors: Vec<Vec<C64>>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    /// Residual norm after the last vector; zero on an invariant subspace.
    residual: f64,
}

fn lanczos(h: &HamiltonianAction, start: &[C64], max_dim: usize) -> LanczosBasis {
    let dim = start.len();
    let norm = start.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    let mut vectors: Vec<Vec<C64>> = vec![start.iter().map(|a| a / norm).collect()];
    let mut alpha = Vec::new();
    let mut beta = Vec::new();
    let mut w = vec![C64::new(0.0, 0.0); dim];
    let mut residual = 0.0;
    let max_dim = max_dim.min(dim);
    for j in 0..max_dim {
        h.apply_into(&vectors[j], &mut w);
        let a: f64 = vectors[j].iter().zip(&w).map(|(v, x)| (v.conj() * x).re).sum();
        alpha.push(a);
        // full reorthogonalization, twice
        for _ in 0..2 {
            for v in &vectors {
                let proj: C64 = v.iter().zip(&w).map(|(p, x)| p.conj() * x).sum();
                w.iter_mut().zip(v).for_each(|(x, p)| *x -= proj * p);
            }
        }
        let b = w.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        residual = b;
        if j + 1 == max_dim || b < 1e-13 * (1.0 + a.abs()) {
            if b < 1e-13 * (1.0 + a.abs()) {
                residual = 0.0;
            }
            break;
        }
        beta.push(b);
        vectors.push(w.iter().map(|x| x / b).collect());
    }
    LanczosBasis { vectors, alpha, beta, residual }
}

fn krylov_evolve(
    state: &StateVector,
    h: &HamiltonianAction,
    time: f64,
    krylov_dim: usize,
    tolerance: f64,
) -> Result<(StateVector, EvolveReport)> {
    let mut report = EvolveReport::default();
    let mut psi = state.amplitudes().to_vec();
    let sign = time.signum();
    let total = time.abs();
    let mut remaining = total;
    let mut tau = total;
    while remaining > 0.0 {
        let norm = psi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        let basis = lanczos(h, &psi, krylov_dim);
        let m = basis.alpha.len();
        let tri = DMatrix::from_fn(m, m, |r, c| {
            if r == c {
                basis.alpha[r]
            } else if r + 1 == c {
                basis.beta[r]
            } else if c + 1 == r {
                basis.beta[c]
            } else {
                0.0
            }
        });
        let eig = tri.symmetric_eigen();
        let happy = basis.residual == 0.0;
        if happy {
            report.breakdowns += 1;
        }
        tau = tau.min(remaining);
        let coeffs = loop {
            // y = exp(-i sign tau T) e1
            let y: Vec<C64> = (0..m)
                .map(|r| {
                    (0..m)
                        .map(|k| {
                            let phase = C64::from_polar(1.0, -sign * eig.eigenvalues[k] * tau);
                            phase * eig.eigenvectors[(r, k)] * eig.eigenvectors[(0, k)]
                        })
                        .sum()
                })
                .collect();
            let err = if happy { 0.0 } else { basis.residual * y[m - 1].norm() };
            let budget = tolerance * tau / total;
            if err <= budget || tau < 1e-12 * total {
                if err > budget {
                    return Err(Error::Numerical(format!(
                        "Krylov step underflow: error {err:.3e} above budget {budget:.3e}"
                    )));
                }
                report.error_estimate += err;
                break y;
            }
            report.rejected_steps += 1;
            tau *= 0.5;
        };
        psi.iter_mut().for_each(|a| *a = C64::new(0.0, 0.0));
        for (v, c) in basis.vectors.iter().zip(&coeffs) {
            let c = c * norm;
            psi.iter_mut().zip(v).for_each(|(a, x)| *a += c * x);
        }
        remaining -= tau;
        if remaining < 1e-14 * total {
            remaining = 0.0;
        }
        report.steps += 1;
        tau = if happy { remaining } else { tau * 1.5 };
    }
    Ok((StateVector::new(psi)?, report))
}

/// `3 · 2^Nn + 1` segments, one rotation between consecutive segments.
pub fn default_echo_steps(num_qubits: usize) -> usize {
    3 * (1usize << num_qubits) + 1
}

/// Evolves for total time `t` in `num_steps` equal segments, applying the
/// forward axis cycle (x → y → z → x) between consecutive segments.
///
/// When the number of applied rotations is not a multiple of three, a final
/// backward correction returns the frame to the lab axes, so the net frame
/// rotation is always the identity.
pub fn evolve_with_rotation_echo(
    state: &StateVector,
    h_aniso: &HamiltonianAction,
    t: f64,
    num_steps: usize,
) -> Result<StateVector> {
    evolve_with_rotation_echo_guarded(state, h_aniso, t, num_steps, DEFAULT_DENSE_LIMIT)
}

pub fn evolve_with_rotation_echo_guarded(
    state: &StateVector,
    h_aniso: &HamiltonianAction,
    t: f64,
    num_steps: usize,
    dense_qubit_limit: usize,
) -> Result<StateVector> {
    if num_steps == 0 {
        return Err(Error::Config("rotation echo needs at least one step".into()));
    }
    if state.num_qubits() != h_aniso.num_qubits() {
        return Err(Error::Domain("state and Hamiltonian sizes differ".into()));
    }
    check_dense_guard(h_aniso, dense_qubit_limit)?;
    let spectrum = SpectrumCache::global().get_or_compute(h_aniso)?;
    let step = spectrum.step_operator(t / num_steps as f64);
    let mut psi = state.clone();
    for k in 0..num_steps {
        step.apply(&mut psi);
        if k + 1 < num_steps {
            global_axis_cycle_mut(&mut psi, CycleDirection::Forward);
        }
    }
    for _ in 0..(num_steps - 1) % 3 {
        global_axis_cycle_mut(&mut psi, CycleDirection::Backward);
    }
    Ok(psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{build_hamiltonian, Boundary};

    #[test]
    fn phase_reduction_matches_naive_for_small_products() {
        for &(e, t) in &[(1.3, 2.0), (-7.25, 3.5), (0.0, 100.0), (12.0, 4096.0)] {
            let r = reduced_phase(e, t);
            let naive = (e * t).rem_euclid(TAU_HI);
            let diff = (r - naive).rem_euclid(TAU_HI);
            assert!(diff.min(TAU_HI - diff) < 1e-9, "{e} {t}: {r} vs {naive}");
            assert!((-std::f64::consts::PI..=std::f64::consts::PI).contains(&r));
        }
    }

    #[test]
    fn zero_time_is_identity() {
        let h = build_hamiltonian(&ChainSpec::pairs(4, Boundary::Periodic)).unwrap();
        let psi = StateVector::basis(4, 5);
        for cfg in [PropagatorConfig::dense(0.0), PropagatorConfig::krylov(0.0)] {
            assert_eq!(evolve(&psi, &h, &cfg).unwrap(), psi);
        }
    }

    #[test]
    fn dense_guard_is_enforced() {
        let h = build_hamiltonian(&ChainSpec::pairs(6, Boundary::Periodic)).unwrap();
        let cfg = PropagatorConfig { dense_qubit_limit: 4, ..PropagatorConfig::dense(1.0) };
        assert!(matches!(evolve(&StateVector::basis(6, 1), &h, &cfg), Err(Error::Resource(_))));
    }

    #[test]
    fn bad_config_rejected() {
        let cfg = PropagatorConfig { krylov_dim: 1, ..PropagatorConfig::krylov(1.0) };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let cfg = PropagatorConfig { step_tolerance: 0.0, ..PropagatorConfig::krylov(1.0) };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn echo_needs_a_step() {
        let h = build_hamiltonian(&ChainSpec::anisotropic(2, 2, 0.99)).unwrap();
        assert!(evolve_with_rotation_echo(&StateVector::basis(4, 0), &h, 1.0, 0).is_err());
        assert_eq!(default_echo_steps(6), 193);
    }
}
