//! Heisenberg chain Hamiltonians with nearest and next-nearest bonds.
//!
//! `H = sign · J · Σ_bonds (σ_x σ_x + σ_y σ_y + Δ σ_z σ_z)`. The isotropic
//! experiment uses `sign = +1, Δ = 1`; the anisotropic robustness study uses
//! `sign = -1` with `Δ ≠ 1`.

use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::{add_bond_action, site_mask, StateVector};

/// Dimension guard for dense matrices (`2^14` is the largest chain simulated).
pub const DENSE_QUBIT_LIMIT: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Closed,
    Periodic,
}

impl std::str::FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "closed" | "open" => Ok(Boundary::Closed),
            "periodic" | "pbc" => Ok(Boundary::Periodic),
            other => Err(Error::Config(format!("unknown boundary '{other}'"))),
        }
    }
}

/// Chain geometry and couplings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainSpec {
    /// Number of copies N of the system of interest.
    pub copies: usize,
    /// Qubits per copy, n > 1.
    pub sites_per_copy: usize,
    /// Coupling J.
    pub coupling: f64,
    pub boundary: Boundary,
    /// Isotropy parameter Δ; 1 is isotropic.
    pub delta: f64,
    /// Overall prefactor sign, +1 or -1.
    pub overall_sign: i8,
    /// Include the (j, j+2) bonds that break integrability.
    pub next_nearest: bool,
}

impl Default for ChainSpec {
    fn default() -> Self {
        ChainSpec {
            copies: 3,
            sites_per_copy: 2,
            coupling: 1.0,
            boundary: Boundary::Periodic,
            delta: 1.0,
            overall_sign: 1,
            next_nearest: true,
        }
    }
}

impl ChainSpec {
    /// Isotropic chain with J = 1.
    pub fn heisenberg(copies: usize, sites_per_copy: usize, boundary: Boundary) -> Self {
        ChainSpec { copies, sites_per_copy, boundary, ..ChainSpec::default() }
    }

    /// Isotropic J = 1 chain of `num_qubits` qubits built from two-qubit copies.
    pub fn pairs(num_qubits: usize, boundary: Boundary) -> Self {
        ChainSpec::heisenberg(num_qubits / 2, 2, boundary)
    }

    /// `-J_ex Σ (σσ + σσ + Δ σσ)` with periodic boundaries.
    pub fn anisotropic(copies: usize, sites_per_copy: usize, delta: f64) -> Self {
        ChainSpec {
            copies,
            sites_per_copy,
            delta,
            overall_sign: -1,
            boundary: Boundary::Periodic,
            ..ChainSpec::default()
        }
    }

    pub fn with_coupling(mut self, coupling: f64) -> Self {
        self.coupling = coupling;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_sign(mut self, sign: i8) -> Self {
        self.overall_sign = sign;
        self
    }

    pub fn without_next_nearest(mut self) -> Self {
        self.next_nearest = false;
        self
    }

    /// The isotropic, positive-sign chain with the same geometry and J.
    pub fn isotropic(&self) -> Self {
        ChainSpec { delta: 1.0, overall_sign: 1, ..self.clone() }
    }

    pub fn num_qubits(&self) -> usize {
        self.copies * self.sites_per_copy
    }

    pub fn is_isotropic(&self) -> bool {
        self.delta == 1.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.copies == 0 {
            return Err(Error::Config("number of copies must be positive".into()));
        }
        if self.sites_per_copy < 2 {
            return Err(Error::Config("a copy needs more than one qubit".into()));
        }
        if self.overall_sign != 1 && self.overall_sign != -1 {
            return Err(Error::Config(format!("overall sign must be ±1, got {}", self.overall_sign)));
        }
        if !self.coupling.is_finite() || !self.delta.is_finite() {
            return Err(Error::Config("coupling and isotropy must be finite".into()));
        }
        if self.next_nearest && self.num_qubits() < 4 {
            return Err(Error::Config(format!("next-nearest bonds need at least 4 qubits, got {}", self.num_qubits())));
        }
        if self.num_qubits() > usize::BITS as usize - 2 {
            return Err(Error::Resource(format!("{} qubits cannot be indexed", self.num_qubits())));
        }
        Ok(())
    }

    /// Bonds at range 1 (and 2 when enabled). Periodic chains wrap indices,
    /// so each range contributes exactly `Nn` bonds.
    pub fn bonds(&self) -> Vec<Bond> {
        let nq = self.num_qubits();
        let weights = [1.0, 1.0, self.delta];
        let ranges: &[usize] = if self.next_nearest { &[1, 2] } else { &[1] };
        let mut bonds = Vec::new();
        for &r in ranges {
            match self.boundary {
                Boundary::Closed => {
                    for j in 0..nq.saturating_sub(r) {
                        bonds.push(Bond { i: j, j: j + r, weights });
                    }
                }
                Boundary::Periodic => {
                    for j in 0..nq {
                        bonds.push(Bond { i: j, j: (j + r) % nq, weights });
                    }
                }
            }
        }
        bonds
    }
}

/// One two-site term `Σ_α w_α σ_α^{(i)} σ_α^{(j)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bond {
    pub i: usize,
    pub j: usize,
    pub weights: [f64; 3],
}

/// Flip channel of one bond: amplitude at `k ^ mask` picks up `aligned`
/// when the two bits of `k` agree and `anti` otherwise.
#[derive(Debug, Clone, Copy)]
struct FlipTerm {
    mask: usize,
    aligned: f64,
    anti: f64,
}

/// Matrix-free `H|ψ>`. Immutable after construction and `Sync`.
#[derive(Debug, Clone)]
pub struct HamiltonianAction {
    spec: ChainSpec,
    bonds: Vec<Bond>,
    prefactor: f64,
    diagonal: Vec<f64>,
    flips: Vec<FlipTerm>,
}

/// Builds the matrix-free action for `spec`.
pub fn build_hamiltonian(spec: &ChainSpec) -> Result<HamiltonianAction> {
    HamiltonianAction::new(spec)
}

impl HamiltonianAction {
    pub fn new(spec: &ChainSpec) -> Result<Self> {
        spec.validate()?;
        let nq = spec.num_qubits();
        let bonds = spec.bonds();
        let prefactor = spec.overall_sign as f64 * spec.coupling;

        let mut diagonal = vec![0.0; 1 << nq];
        for b in &bonds {
            let pair = site_mask(nq, b.i) | site_mask(nq, b.j);
            let wz = prefactor * b.weights[2];
            for (k, d) in diagonal.iter_mut().enumerate() {
                let bits = k & pair;
                *d += if bits == 0 || bits == pair { wz } else { -wz };
            }
        }
        // merge bonds that share a mask (periodic chains of 4 qubits double up)
        let mut merged: HashMap<usize, (f64, f64)> = HashMap::new();
        let mut order = Vec::new();
        for b in &bonds {
            let mask = site_mask(nq, b.i) | site_mask(nq, b.j);
            let [wx, wy, _] = b.weights;
            let entry = merged.entry(mask).or_insert_with(|| {
                order.push(mask);
                (0.0, 0.0)
            });
            entry.0 += prefactor * (wx - wy);
            entry.1 += prefactor * (wx + wy);
        }
        let flips = order
            .into_iter()
            .map(|mask| {
                let (aligned, anti) = merged[&mask];
                FlipTerm { mask, aligned, anti }
            })
            .collect();

        Ok(HamiltonianAction { spec: spec.clone(), bonds, prefactor, diagonal, flips })
    }

    pub fn spec(&self) -> &ChainSpec {
        &self.spec
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn num_qubits(&self) -> usize {
        self.spec.num_qubits()
    }

    pub fn dim(&self) -> usize {
        1 << self.num_qubits()
    }

    /// `sign · J`
    pub fn prefactor(&self) -> f64 {
        self.prefactor
    }

    /// Diagonal of H in the computational basis.
    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    /// `output = H · input`.
    pub fn apply_into(&self, input: &[C64], output: &mut [C64]) {
        debug_assert_eq!(input.len(), self.dim());
        debug_assert_eq!(output.len(), self.dim());
        for (k, o) in output.iter_mut().enumerate() {
            let mut acc = input[k] * self.diagonal[k];
            for f in &self.flips {
                let bits = k & f.mask;
                let coef = if bits == 0 || bits == f.mask { f.aligned } else { f.anti };
                if coef != 0.0 {
                    acc += input[k ^ f.mask] * coef;
                }
            }
            *o = acc;
        }
    }

    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        self.check_dim(state)?;
        let mut out = StateVector::zeros(state.num_qubits());
        self.apply_into(state.amplitudes(), out.amplitudes_mut());
        Ok(out)
    }

    /// Reference implementation that sums the per-bond kernels one at a time.
    pub fn apply_bondwise(&self, state: &StateVector) -> Result<StateVector> {
        self.check_dim(state)?;
        let nq = self.num_qubits();
        let mut out = StateVector::zeros(nq);
        for b in &self.bonds {
            let pair = site_mask(nq, b.i) | site_mask(nq, b.j);
            add_bond_action(state.amplitudes(), out.amplitudes_mut(), pair, b.weights, self.prefactor);
        }
        Ok(out)
    }

    fn check_dim(&self, state: &StateVector) -> Result<()> {
        if state.num_qubits() != self.num_qubits() {
            return Err(Error::Domain(format!(
                "state has {} qubits but the Hamiltonian acts on {}",
                state.num_qubits(),
                self.num_qubits()
            )));
        }
        Ok(())
    }

    /// True when H commutes with σ_z^tot, i.e. the xx and yy weights agree
    /// on every bond.
    pub fn conserves_z(&self) -> bool {
        self.flips.iter().all(|f| f.aligned == 0.0)
    }

    /// Dense real-symmetric block of H restricted to the basis states in
    /// `indices` (a union of σ_z^tot sectors, sorted ascending).
    pub fn sector_block(&self, indices: &[usize]) -> Result<DMatrix<f64>> {
        let position: HashMap<usize, usize> = indices.iter().enumerate().map(|(p, &k)| (k, p)).collect();
        let d = indices.len();
        let mut block = DMatrix::<f64>::zeros(d, d);
        for (col, &k) in indices.iter().enumerate() {
            block[(col, col)] += self.diagonal[k];
            for f in &self.flips {
                let bits = k & f.mask;
                let coef = if bits == 0 || bits == f.mask { f.aligned } else { f.anti };
                if coef == 0.0 {
                    continue;
                }
                let row = *position
                    .get(&(k ^ f.mask))
                    .ok_or_else(|| Error::Domain("index set is not closed under the Hamiltonian".into()))?;
                block[(row, col)] += coef;
            }
        }
        Ok(block)
    }
}

/// Basis indices grouped by σ_z^tot eigenvalue; entry `m` holds the states
/// with `m` down spins.
pub fn z_sectors(num_qubits: usize) -> Vec<Vec<usize>> {
    let mut sectors = vec![Vec::new(); num_qubits + 1];
    for k in 0..1usize << num_qubits {
        sectors[k.count_ones() as usize].push(k);
    }
    sectors
}

/// Dense `2^Nn x 2^Nn` matrix of H. H is real in the σ_z basis.
pub fn dense_hamiltonian(spec: &ChainSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    if spec.num_qubits() > DENSE_QUBIT_LIMIT {
        return Err(Error::Resource(format!(
            "dense Hamiltonian of {} qubits exceeds the {DENSE_QUBIT_LIMIT}-qubit guard",
            spec.num_qubits()
        )));
    }
    let h = HamiltonianAction::new(spec)?;
    let all: Vec<usize> = (0..h.dim()).collect();
    h.sector_block(&all)
}

/// `<ψ|H|ψ>`
pub fn energy_expectation(state: &StateVector, h: &HamiltonianAction) -> Result<f64> {
    let hpsi = h.apply(state)?;
    Ok(state.inner(&hpsi).re)
}

/// `<H²> - <H>²`
pub fn energy_variance(state: &StateVector, h: &HamiltonianAction) -> Result<f64> {
    let hpsi = h.apply(state)?;
    let mean = state.inner(&hpsi).re;
    Ok(hpsi.norm_sqr() - mean * mean)
}
