//! Thermal predictions for the system of interest and the distances used to
//! score them.
//!
//! The NATS is `exp(-β(H_S - Σ_α μ_α σ_α^S)) / Z`. β and μ_α come from the
//! first-order high-temperature expansion of the defining equations; the
//! small-parameter report tells when that expansion is trustworthy.

use nalgebra::DVector;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{Boundary, ChainSpec};
use crate::linalg::{self, CMatrix};
use crate::spin::{PauliAxis, PauliLabel, PauliString, StateVector};

/// Eigenvalues of ρ below this count as zero in `0 · log 0 = 0`.
pub const EIGENVALUE_CLAMP: f64 = 1e-12;
/// Weight of ρ on a null direction of σ that triggers a support error.
pub const SUPPORT_WEIGHT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalParams {
    pub beta: f64,
    /// μ_x, μ_y, μ_z
    pub mu: [f64; 3],
}

impl ThermalParams {
    pub fn canonical(beta: f64) -> Self {
        ThermalParams { beta, mu: [0.0; 3] }
    }
}

/// Unit-trace, Hermitian, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    /// Validates `m` and removes round-off: the Hermitian part is kept and
    /// the trace rescaled to exactly one. Tolerances are loose enough to
    /// accept states reduced from evolved vectors.
    pub fn from_matrix(m: CMatrix) -> Result<Self> {
        let d = m.nrows();
        if d == 0 || m.ncols() != d || !d.is_power_of_two() {
            return Err(Error::Domain(format!(
                "density matrix must be square with power-of-two size, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Numerical("non-finite density matrix entry".into()));
        }
        let herr = linalg::hermiticity_error(&m);
        if herr > 1e-8 {
            return Err(Error::Domain(format!("matrix is not Hermitian (deviation {herr:.3e})")));
        }
        let h = linalg::hermitian_part(&m);
        let tr = linalg::trace(&h).re;
        if (tr - 1.0).abs() > 1e-8 {
            return Err(Error::Domain(format!("trace {tr} differs from one")));
        }
        let h = h.unscale(tr);
        let (vals, _) = linalg::hermitian_eigen(&h);
        if vals[0] < -1e-10 {
            return Err(Error::Domain(format!("negative eigenvalue {:.3e}", vals[0])));
        }
        Ok(DensityMatrix(h))
    }

    pub fn from_pure(state: &StateVector) -> Result<Self> {
        let v = DVector::from_column_slice(state.amplitudes());
        Self::from_matrix(&v * v.adjoint())
    }

    pub fn maximally_mixed(num_qubits: usize) -> Self {
        let d = 1 << num_qubits;
        DensityMatrix(CMatrix::identity(d, d).unscale(d as f64))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn num_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> DVector<f64> {
        linalg::hermitian_eigen(&self.0).0
    }

    /// `Tr(ρ O)`
    pub fn expectation(&self, op: &CMatrix) -> C64 {
        linalg::trace(&(&self.0 * op))
    }

    /// `½ ||ρ - σ||_1`
    pub fn trace_distance(&self, other: &DensityMatrix) -> f64 {
        let diff = &self.0 - &other.0;
        0.5 * linalg::hermitian_eigen(&diff).0.iter().map(|v| v.abs()).sum::<f64>()
    }
}

/// β to first order: `-E / Tr(H²)·2^{-Nn}`, with the closed- or
/// periodic-boundary trace.
pub fn analytic_beta(e_tot: f64, spec: &ChainSpec) -> Result<f64> {
    if spec.coupling == 0.0 {
        return Err(Error::Config("coupling J must be nonzero".into()));
    }
    Ok(-e_tot / (bond_trace_factor(spec) * spec.coupling * spec.coupling))
}

/// `Tr(H²) / (2^Nn J²)`: three Pauli products per bond, `2Nn - 3` bonds
/// (closed) or `2Nn` bonds (periodic).
fn bond_trace_factor(spec: &ChainSpec) -> f64 {
    let nq = spec.num_qubits() as f64;
    match spec.boundary {
        Boundary::Closed => 3.0 * (2.0 * nq - 3.0),
        Boundary::Periodic => 6.0 * nq,
    }
}

/// μ_α to first order, `μ_α = S_α / (Nn β)`.
pub fn analytic_mu(s: [f64; 3], e_tot: f64, spec: &ChainSpec) -> Result<[f64; 3]> {
    if spec.coupling == 0.0 {
        return Err(Error::Config("coupling J must be nonzero".into()));
    }
    if e_tot == 0.0 {
        if s.iter().all(|&v| v == 0.0) {
            return Ok([0.0; 3]);
        }
        return Err(Error::DegenerateParameters(
            "zero energy with nonzero charges: the first-order expansion breaks down".into(),
        ));
    }
    let nq = spec.num_qubits() as f64;
    let j2 = spec.coupling * spec.coupling;
    Ok(s.map(|sa| -bond_trace_factor(spec) * sa * j2 / (nq * e_tot)))
}

pub fn analytic_params(s: [f64; 3], e_tot: f64, spec: &ChainSpec) -> Result<ThermalParams> {
    Ok(ThermalParams { beta: analytic_beta(e_tot, spec)?, mu: analytic_mu(s, e_tot, spec)? })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Validity {
    /// below 0.1
    Ok,
    /// between 0.1 and 1
    Marginal,
    /// at least 1
    Violated,
}

impl Validity {
    pub fn of(value: f64) -> Self {
        if value < 0.1 {
            Validity::Ok
        } else if value < 1.0 {
            Validity::Marginal
        } else {
            Validity::Violated
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmallParameter {
    pub name: &'static str,
    pub value: f64,
    pub validity: Validity,
}

/// Dimensionless parameters that must be ≪ 1 for the first-order β, μ.
pub fn small_parameter_report(params: &ThermalParams, spec: &ChainSpec) -> Vec<SmallParameter> {
    let nq = spec.num_qubits() as f64;
    let b = params.beta.abs();
    let j = spec.coupling.abs();
    let mu2: f64 = params.mu.iter().map(|m| m * m).sum();
    let chem = if j == 0.0 { f64::INFINITY } else { 2.0 / 3.0 * b * mu2 / j };
    let chem = if b == 0.0 { 0.0 } else { chem };
    let entries: Vec<(&'static str, f64)> = match spec.boundary {
        Boundary::Closed => vec![
            ("sqrt(3(2Nn-3))|beta|J", (3.0 * (2.0 * nq - 3.0)).sqrt() * b * j),
            ("sqrt(Nn sum mu^2)|beta|", (nq * mu2).sqrt() * b),
            ("(2/3)|beta| sum mu^2/J", chem),
            ("6(Nn-2)/(2Nn-3)|beta|J", 6.0 * (nq - 2.0) / (2.0 * nq - 3.0) * b * j),
            ("4(2Nn-3)/Nn|beta|J", 4.0 * (2.0 * nq - 3.0) / nq * b * j),
        ],
        Boundary::Periodic => vec![
            ("sqrt(6Nn)|beta|J", (6.0 * nq).sqrt() * b * j),
            ("(2/3)|beta| sum mu^2/J", chem),
            ("8|beta|J", 8.0 * b * j),
        ],
    };
    entries.into_iter().map(|(name, value)| SmallParameter { name, value, validity: Validity::of(value) }).collect()
}

pub fn max_small_parameter(report: &[SmallParameter]) -> f64 {
    report.iter().map(|p| p.value).fold(0.0, f64::max)
}

/// Sum of every bond of the chain with both endpoints in `system_sites`, as
/// a dense matrix on those sites. Site `system_sites[0]` becomes the most
/// significant qubit.
pub fn system_hamiltonian(spec: &ChainSpec, system_sites: &[usize]) -> Result<CMatrix> {
    spec.validate()?;
    let nq = spec.num_qubits();
    if system_sites.is_empty() {
        return Err(Error::Domain("empty system".into()));
    }
    if system_sites.iter().any(|&s| s >= nq) {
        return Err(Error::Domain("system site outside the chain".into()));
    }
    let contiguous = system_sites.windows(2).all(|w| w[1] == w[0] + 1);
    if !contiguous {
        return Err(Error::Domain(format!("system sites {system_sites:?} are not contiguous")));
    }
    let n = system_sites.len();
    let local = |site: usize| system_sites.iter().position(|&s| s == site);
    let prefactor = spec.overall_sign as f64 * spec.coupling;
    let d = 1 << n;
    let mut h = CMatrix::zeros(d, d);
    for bond in spec.bonds() {
        let (Some(i), Some(j)) = (local(bond.i), local(bond.j)) else { continue };
        for axis in PauliAxis::ALL {
            let mut labels = vec![PauliLabel::I; n];
            labels[i] = PauliLabel::Axis(axis);
            labels[j] = PauliLabel::Axis(axis);
            let term = linalg::pauli_string_matrix(&PauliString::new(labels));
            h += term.scale(prefactor * bond.weights[axis.index()]);
        }
    }
    Ok(h)
}

/// σ_α^S = Σ_j σ_α^{(j)} on `num_qubits` qubits.
pub fn system_charge(num_qubits: usize, axis: PauliAxis) -> CMatrix {
    let d = 1 << num_qubits;
    (0..num_qubits).fold(CMatrix::zeros(d, d), |acc, j| {
        let mut labels = vec![PauliLabel::I; num_qubits];
        labels[j] = PauliLabel::Axis(axis);
        acc + linalg::pauli_string_matrix(&PauliString::new(labels))
    })
}

pub fn system_charges(num_qubits: usize) -> [CMatrix; 3] {
    PauliAxis::ALL.map(|a| system_charge(num_qubits, a))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ensemble {
    /// all three chemical potentials
    Nats,
    /// none
    Canonical,
    /// μ_z only
    GrandCanonicalZ,
}

impl Ensemble {
    pub const ALL: [Ensemble; 3] = [Ensemble::Nats, Ensemble::Canonical, Ensemble::GrandCanonicalZ];

    fn active(self) -> [bool; 3] {
        match self {
            Ensemble::Nats => [true; 3],
            Ensemble::Canonical => [false; 3],
            Ensemble::GrandCanonicalZ => [false, false, true],
        }
    }
}

/// `exp(-β(H_S - Σ_active μ_α Q_α)) / Z`
pub fn thermal_state(
    h_s: &CMatrix,
    charges: &[CMatrix; 3],
    params: &ThermalParams,
    which: Ensemble,
) -> Result<DensityMatrix> {
    let d = h_s.nrows();
    if h_s.ncols() != d || charges.iter().any(|q| q.nrows() != d || q.ncols() != d) {
        return Err(Error::Domain("thermal-state operands have mismatched dimensions".into()));
    }
    for m in std::iter::once(h_s).chain(charges.iter()) {
        if linalg::hermiticity_error(m) > 1e-10 {
            return Err(Error::Domain("thermal-state operand is not Hermitian".into()));
        }
    }
    let mut generator = h_s.clone();
    for (k, on) in which.active().iter().enumerate() {
        if *on && params.mu[k] != 0.0 {
            generator -= charges[k].scale(params.mu[k]);
        }
    }
    let exponent = generator.scale(-params.beta);
    let (vals, vecs) = linalg::hermitian_eigen(&linalg::hermitian_part(&exponent));
    let shift = vals.max();
    let weights = vals.map(|v| (v - shift).exp());
    let z: f64 = weights.sum();
    let rho = linalg::from_spectrum(&weights.unscale(z), &vecs);
    DensityMatrix::from_matrix(linalg::hermitian_part(&rho))
}

fn check_keep(num_qubits: usize, keep: &[usize]) -> Result<()> {
    if keep.is_empty() {
        return Err(Error::Domain("partial trace must keep at least one qubit".into()));
    }
    for (k, &s) in keep.iter().enumerate() {
        if s >= num_qubits {
            return Err(Error::Index { index: s, num_qubits });
        }
        if keep[..k].contains(&s) {
            return Err(Error::Domain(format!("qubit {s} listed twice")));
        }
    }
    Ok(())
}

/// Splits every basis index into (kept index, traced index).
fn split_indices(num_qubits: usize, keep: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let traced: Vec<usize> = (0..num_qubits).filter(|s| !keep.contains(s)).collect();
    let bit = |i: usize, site: usize| (i >> (num_qubits - 1 - site)) & 1;
    let pack = |i: usize, sites: &[usize]| sites.iter().fold(0, |acc, &s| (acc << 1) | bit(i, s));
    (0..1usize << num_qubits).map(|i| (pack(i, keep), pack(i, &traced))).unzip()
}

/// Reduced state of a pure state on `keep` (in the given order).
pub fn partial_trace_state(state: &StateVector, keep: &[usize]) -> Result<DensityMatrix> {
    let n = state.num_qubits();
    check_keep(n, keep)?;
    let (kept, traced) = split_indices(n, keep);
    let mut m = CMatrix::zeros(1 << keep.len(), 1 << (n - keep.len()));
    for (i, a) in state.amplitudes().iter().enumerate() {
        m[(kept[i], traced[i])] = *a;
    }
    let rho = &m * m.adjoint();
    let tr = linalg::trace(&rho).re;
    DensityMatrix::from_matrix(rho.unscale(tr))
}

/// Reduced state of a density matrix on `keep`.
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let n = rho.num_qubits();
    check_keep(n, keep)?;
    let (kept, traced) = split_indices(n, keep);
    let d = 1 << keep.len();
    let mut out = CMatrix::zeros(d, d);
    let m = rho.matrix();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if traced[i] == traced[j] {
                out[(kept[i], kept[j])] += m[(i, j)];
            }
        }
    }
    DensityMatrix::from_matrix(out)
}

/// `Tr ρ (log ρ - log σ)` in nats.
pub fn relative_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::Domain("relative entropy of states with different dimensions".into()));
    }
    let (r_vals, _) = linalg::hermitian_eigen(rho.matrix());
    let (s_vals, s_vecs) = linalg::hermitian_eigen(sigma.matrix());
    let neg_entropy: f64 = r_vals.iter().filter(|&&l| l > EIGENVALUE_CLAMP).map(|&l| l * l.ln()).sum();
    let mut cross = 0.0;
    for (k, &s) in s_vals.iter().enumerate() {
        let u = s_vecs.column(k);
        let weight = (u.adjoint() * rho.matrix() * u)[(0, 0)].re;
        if s < EIGENVALUE_CLAMP {
            if weight > SUPPORT_WEIGHT {
                return Err(Error::Support { weight });
            }
            continue;
        }
        cross += weight * s.ln();
    }
    Ok((neg_entropy - cross).max(0.0))
}
