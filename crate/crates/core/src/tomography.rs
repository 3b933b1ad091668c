//! Pauli-basis tomography of a few-qubit reduced state.
//!
//! Each of the `3^n` product bases is measured `shots` times. Frequencies
//! are turned into Pauli expectation values, the state is rebuilt by linear
//! inversion and then projected onto the unit-trace PSD matrices.

use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::spin::{basis_change, dagger, PauliLabel, PauliString};
use crate::state_prep::seeded_rng;
use crate::thermal::DensityMatrix;

/// Outcome counts of one product basis. Outcome `ℓ` is read like a basis
/// index: bit value 0 on a qubit means the `+1` eigenvector of its axis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub basis: PauliString,
    pub counts: Vec<u64>,
    pub shots: u64,
}

impl MeasurementRecord {
    pub fn validate(&self) -> Result<()> {
        if !self.basis.is_measurement_basis() || self.basis.is_empty() {
            return Err(Error::Domain(format!("'{}' is not a measurement basis", self.basis)));
        }
        if self.counts.len() != 1 << self.basis.len() {
            return Err(Error::Domain(format!(
                "basis '{}' needs {} counts, got {}",
                self.basis,
                1 << self.basis.len(),
                self.counts.len()
            )));
        }
        if self.counts.iter().sum::<u64>() != self.shots {
            return Err(Error::Domain(format!("counts of '{}' do not sum to {}", self.basis, self.shots)));
        }
        Ok(())
    }

    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json_line(line: &str) -> Result<Self> {
        let rec: MeasurementRecord = serde_json::from_str(line)?;
        rec.validate()?;
        Ok(rec)
    }
}

/// Outcome probabilities per basis, either estimated or exact.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyTable {
    num_qubits: usize,
    freqs: BTreeMap<PauliString, Vec<f64>>,
}

impl FrequencyTable {
    /// Exact Born probabilities of every basis.
    pub fn exact(rho: &DensityMatrix) -> Self {
        let n = rho.num_qubits();
        let freqs = PauliString::all_bases(n)
            .into_iter()
            .map(|b| {
                let p = outcome_probabilities(rho, &b).expect("generated bases are valid");
                (b, p)
            })
            .collect();
        FrequencyTable { num_qubits: n, freqs }
    }

    /// Empirical frequencies; every basis of the first record's width must
    /// be present with at least one shot.
    pub fn from_records(records: &[MeasurementRecord]) -> Result<Self> {
        let Some(first) = records.first() else {
            return Err(Error::IncompleteData("no measurement records".into()));
        };
        let n = first.basis.len();
        let mut freqs = BTreeMap::new();
        for rec in records {
            rec.validate()?;
            if rec.basis.len() != n {
                return Err(Error::Domain("records cover different numbers of qubits".into()));
            }
            if rec.shots == 0 {
                return Err(Error::IncompleteData(format!("basis '{}' has no shots", rec.basis)));
            }
            let f = rec.counts.iter().map(|&c| c as f64 / rec.shots as f64).collect();
            freqs.insert(rec.basis.clone(), f);
        }
        for b in PauliString::all_bases(n) {
            if !freqs.contains_key(&b) {
                return Err(Error::IncompleteData(format!("missing basis '{b}'")));
            }
        }
        Ok(FrequencyTable { num_qubits: n, freqs })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn get(&self, basis: &PauliString) -> Option<&[f64]> {
        self.freqs.get(basis).map(Vec::as_slice)
    }
}

fn basis_rotation(basis: &PauliString) -> Result<CMatrix> {
    basis.labels().iter().try_fold(CMatrix::identity(1, 1), |acc, l| match l {
        PauliLabel::Axis(a) => Ok(linalg::kron(&acc, &linalg::mat2(&dagger(&basis_change(*a))))),
        PauliLabel::I => Err(Error::Domain(format!("'{basis}' has an identity slot"))),
    })
}

/// `Tr(Π_ℓ ρ)` for every outcome of `basis`.
pub fn outcome_probabilities(rho: &DensityMatrix, basis: &PauliString) -> Result<Vec<f64>> {
    if basis.len() != rho.num_qubits() {
        return Err(Error::Domain(format!("basis '{basis}' does not match a {}-qubit state", rho.num_qubits())));
    }
    let w = basis_rotation(basis)?;
    let rotated = &w * rho.matrix() * w.adjoint();
    Ok(rotated.diagonal().iter().map(|v| v.re.max(0.0)).collect())
}

/// Samples `shots` outcomes. With `shots = 0` all counts are zero.
pub fn simulate_basis_measurement<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    basis: &PauliString,
    shots: u64,
    rng: &mut R,
) -> Result<MeasurementRecord> {
    let probs = outcome_probabilities(rho, basis)?;
    let total: f64 = probs.iter().sum();
    let mut counts = vec![0u64; probs.len()];
    let mut remaining = shots;
    let mut mass = total;
    for (k, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if k + 1 == probs.len() {
            counts[k] = remaining;
            break;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let draw = Binomial::new(remaining, q)
            .map_err(|e| Error::Numerical(format!("binomial sampling failed: {e}")))?
            .sample(rng);
        counts[k] = draw;
        remaining -= draw;
        mass -= p;
    }
    Ok(MeasurementRecord { basis: basis.clone(), counts, shots })
}

/// All `3^n` bases at `shots` each. Basis `k` draws from its own ChaCha
/// stream, so the result does not depend on scheduling.
pub fn simulate_full_tomography(rho: &DensityMatrix, shots: u64, seed: u64) -> Result<Vec<MeasurementRecord>> {
    PauliString::all_bases(rho.num_qubits())
        .into_par_iter()
        .enumerate()
        .map(|(k, b)| {
            let mut rng: ChaCha20Rng = seeded_rng(seed);
            rng.set_stream(k as u64);
            simulate_basis_measurement(rho, &b, shots, &mut rng)
        })
        .collect()
}

/// Estimates of `⟨P⟩` for every non-identity Pauli string. A string with
/// identity slots is averaged over all bases that agree on its other slots.
pub fn expectations_from_frequencies(table: &FrequencyTable) -> Result<BTreeMap<PauliString, f64>> {
    let n = table.num_qubits;
    let mut out = BTreeMap::new();
    for p in PauliString::all(n).into_iter().filter(|p| !p.is_identity()) {
        let mut sum = 0.0;
        let mut count = 0usize;
        for (basis, freqs) in &table.freqs {
            let compatible = p.labels().iter().zip(basis.labels()).all(|(l, b)| *l == PauliLabel::I || l == b);
            if !compatible {
                continue;
            }
            sum += freqs.iter().enumerate().map(|(outcome, f)| f * parity_sign(&p, outcome)).sum::<f64>();
            count += 1;
        }
        if count == 0 {
            return Err(Error::IncompleteData(format!("no basis measures '{p}'")));
        }
        out.insert(p, sum / count as f64);
    }
    Ok(out)
}

/// Product of ±1 eigenvalues over the non-identity slots of `p`.
fn parity_sign(p: &PauliString, outcome: usize) -> f64 {
    let n = p.len();
    let mut minus = 0;
    for (k, l) in p.labels().iter().enumerate() {
        if *l != PauliLabel::I && (outcome >> (n - 1 - k)) & 1 == 1 {
            minus += 1;
        }
    }
    if minus % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `(1/2^n) Σ_P ⟨P⟩ P` with `⟨I⟩ = 1`.
pub fn linear_inversion(expectations: &BTreeMap<PauliString, f64>, num_qubits: usize) -> Result<CMatrix> {
    let d = 1 << num_qubits;
    let mut rho = CMatrix::identity(d, d);
    for p in PauliString::all(num_qubits).into_iter().filter(|p| !p.is_identity()) {
        let Some(&v) = expectations.get(&p) else {
            return Err(Error::IncompleteData(format!("missing expectation of '{p}'")));
        };
        rho += linalg::pauli_string_matrix(&p).scale(v);
    }
    Ok(rho.unscale(d as f64))
}

/// Euclidean projection of `values` onto the probability simplex.
pub fn project_to_simplex(values: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut shift = 0.0;
    for (k, &v) in sorted.iter().enumerate() {
        cumulative += v;
        let candidate = (cumulative - 1.0) / (k + 1) as f64;
        if v - candidate > 0.0 {
            shift = candidate;
        }
    }
    values.iter().map(|v| (v - shift).max(0.0)).collect()
}

/// Nearest unit-trace PSD matrix, in Frobenius norm, to the Hermitian part
/// of `m`.
pub fn project_to_density(m: &CMatrix) -> Result<DensityMatrix> {
    let (vals, vecs) = linalg::hermitian_eigen(&linalg::hermitian_part(m));
    let projected = DVector::from_vec(project_to_simplex(vals.as_slice()));
    DensityMatrix::from_matrix(linalg::hermitian_part(&linalg::from_spectrum(&projected, &vecs)))
}

pub fn reconstruct_state(expectations: &BTreeMap<PauliString, f64>) -> Result<DensityMatrix> {
    let Some(n) = expectations.keys().next().map(PauliString::len) else {
        return Err(Error::IncompleteData("no expectation values".into()));
    };
    project_to_density(&linear_inversion(expectations, n)?)
}

/// Measurement records straight through to a density matrix.
pub fn reconstruct_from_records(records: &[MeasurementRecord]) -> Result<DensityMatrix> {
    reconstruct_state(&expectations_from_frequencies(&FrequencyTable::from_records(records)?)?)
}

/// `Tr(ρ P)`, used as a reference for estimates.
pub fn pauli_expectation(rho: &DensityMatrix, p: &PauliString) -> f64 {
    rho.expectation(&linalg::pauli_string_matrix(p)).re
}
