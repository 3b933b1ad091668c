//! Initial global states: the product-state protocol, random reference
//! states, and the soft-measurement protocol built on binomial-envelope
//! POVMs.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::{
    apply_charge_function, basis_change, charge_distribution, eigenvalue_grid, grid_position, PauliAxis, StateVector,
};

/// Single-qubit eigenstate `|α±>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SingleQubitState {
    pub axis: PauliAxis,
    pub positive: bool,
}

impl SingleQubitState {
    pub const fn new(axis: PauliAxis, positive: bool) -> Self {
        SingleQubitState { axis, positive }
    }

    /// Amplitudes `(<z+|α±>, <z-|α±>)`.
    pub fn amplitudes(self) -> [C64; 2] {
        let v = basis_change(self.axis);
        let col = if self.positive { 0 } else { 1 };
        [v[0][col], v[1][col]]
    }

    /// Bloch vector; `<σ_α>` for each axis.
    pub fn bloch(self) -> [f64; 3] {
        let mut b = [0.0; 3];
        b[self.axis.index()] = if self.positive { 1.0 } else { -1.0 };
        b
    }
}

impl fmt::Display for SingleQubitState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.axis, if self.positive { '+' } else { '-' })
    }
}

impl FromStr for SingleQubitState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (axis, sign) = s.split_at(s.len().saturating_sub(1));
        let positive = match sign {
            "+" => true,
            "-" => false,
            _ => return Err(Error::Domain(format!("invalid single-qubit label '{s}'"))),
        };
        Ok(SingleQubitState { axis: axis.parse()?, positive })
    }
}

/// Per-qubit eigenstate labels of a product state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrepPattern(pub Vec<SingleQubitState>);

impl PrepPattern {
    /// `|x+ z+ x- z- x- z+>` followed by copies of `|z- z+>`.
    pub fn standard(num_qubits: usize) -> Result<Self> {
        if num_qubits < 6 || !num_qubits.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "the standard preparation needs an even number of qubits ≥ 6, got {num_qubits}"
            )));
        }
        use PauliAxis::{X, Z};
        let mut labels = vec![
            SingleQubitState::new(X, true),
            SingleQubitState::new(Z, true),
            SingleQubitState::new(X, false),
            SingleQubitState::new(Z, false),
            SingleQubitState::new(X, false),
            SingleQubitState::new(Z, true),
        ];
        for _ in 0..(num_qubits - 6) / 2 {
            labels.push(SingleQubitState::new(Z, false));
            labels.push(SingleQubitState::new(Z, true));
        }
        Ok(PrepPattern(labels))
    }

    pub fn uniform(num_qubits: usize, label: SingleQubitState) -> Self {
        PrepPattern(vec![label; num_qubits])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `Σ_j` Bloch vectors, the exact `<σ_α^tot>` of the product state.
    pub fn total_bloch(&self) -> [f64; 3] {
        self.0.iter().fold([0.0; 3], |mut acc, q| {
            let b = q.bloch();
            (0..3).for_each(|a| acc[a] += b[a]);
            acc
        })
    }
}

impl fmt::Display for PrepPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels: Vec<String> = self.0.iter().map(|q| q.to_string()).collect();
        write!(f, "{}", labels.join(","))
    }
}

impl FromStr for PrepPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.split(',').map(str::parse).collect::<Result<Vec<_>>>().map(PrepPattern)
    }
}

/// Tensor product of the pattern's single-qubit eigenstates.
pub fn product_state(pattern: &PrepPattern) -> Result<StateVector> {
    if pattern.is_empty() {
        return Err(Error::Domain("empty preparation pattern".into()));
    }
    let mut amps = vec![C64::new(1.0, 0.0)];
    for q in &pattern.0 {
        let [a0, a1] = q.amplitudes();
        amps = amps.iter().flat_map(|&c| [c * a0, c * a1]).collect();
    }
    StateVector::new(amps)
}

/// Deterministic RNG stream for a seed.
pub fn seeded_rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Gaussian random state: real and imaginary parts i.i.d. standard normal,
/// then normalized.
pub fn random_state_with<R: Rng + ?Sized>(num_qubits: usize, rng: &mut R) -> StateVector {
    let amps =
        (0..1usize << num_qubits).map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect();
    let mut state = StateVector::new(amps).expect("power-of-two length");
    state.normalize().expect("a Gaussian vector is nonzero with probability one");
    state
}

pub fn random_state(num_qubits: usize, seed: u64) -> StateVector {
    random_state_with(num_qubits, &mut seeded_rng(seed))
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (1..=k).map(|i| (((n - k + i) as f64) / i as f64).ln()).sum()
}

/// Binomial envelope `f_{Nn}(S, S̃)` with `p↑ = (1 + S̃/Nn)/2` and the
/// convention `0^0 = 1`.
pub fn binomial_envelope(num_qubits: usize, s: i32, s_tilde: i32) -> Result<f64> {
    grid_position(num_qubits, s)?;
    grid_position(num_qubits, s_tilde)?;
    let nn = num_qubits as i32;
    let n_up = ((nn + s) / 2) as usize;
    let n_down = num_qubits - n_up;
    let p_up = 0.5 * (1.0 + s_tilde as f64 / nn as f64);
    let p_down = 0.5 * (1.0 - s_tilde as f64 / nn as f64);
    let mut ln_f = ln_binomial(num_qubits, n_up);
    for (count, p) in [(n_up, p_up), (n_down, p_down)] {
        if count == 0 {
            continue;
        }
        if p == 0.0 {
            return Ok(0.0);
        }
        ln_f += count as f64 * p.ln();
    }
    Ok(ln_f.exp())
}

/// Envelope table `table[i][j] = f(grid[i], grid[j])` over the eigenvalue grid.
pub fn envelope_table(num_qubits: usize) -> Vec<Vec<f64>> {
    let grid = eigenvalue_grid(num_qubits);
    grid.iter()
        .map(|&s| grid.iter().map(|&st| binomial_envelope(num_qubits, s, st).expect("grid point")).collect())
        .collect()
}

/// Outcome of a soft σ_α^tot measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SoftOutcome {
    pub axis: PauliAxis,
    pub value: i32,
}

/// Outcome probabilities `<ψ|M†M|ψ> = Σ_S̃ f(S, S̃) ||P^S̃ ψ||²` over the grid.
pub fn soft_outcome_probabilities(state: &StateVector, axis: PauliAxis) -> Vec<f64> {
    let weights = charge_distribution(state, axis);
    envelope_table(state.num_qubits()).iter().map(|row| row.iter().zip(&weights).map(|(f, w)| f * w).sum()).collect()
}

/// Unnormalized `M_α^S |ψ> = Σ_S̃ √f(S, S̃) P_α^S̃ |ψ>`.
pub fn kraus_apply(state: &StateVector, axis: PauliAxis, outcome: i32) -> Result<StateVector> {
    let n = state.num_qubits();
    grid_position(n, outcome)?;
    Ok(apply_charge_function(state, axis, |st| binomial_envelope(n, outcome, st).expect("grid point").sqrt()))
}

/// Samples a soft σ_α^tot measurement and returns the outcome with the
/// renormalized post-measurement state.
pub fn soft_measure<R: Rng + ?Sized>(
    state: &StateVector,
    axis: PauliAxis,
    rng: &mut R,
) -> Result<(SoftOutcome, StateVector)> {
    let probs = soft_outcome_probabilities(state, axis);
    let grid = eigenvalue_grid(state.num_qubits());
    let total: f64 = probs.iter().sum();
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut pick = probs.len() - 1;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            pick = k;
            break;
        }
    }
    if probs[pick] <= 0.0 {
        return Err(Error::Numerical(format!("sampled zero-probability outcome {}", grid[pick])));
    }
    let mut post = kraus_apply(state, axis, grid[pick])?;
    post.normalize()?;
    Ok((SoftOutcome { axis, value: grid[pick] }, post))
}

/// Soft x, then soft y, then soft z.
pub fn amc_prep_sequence<R: Rng + ?Sized>(state: &StateVector, rng: &mut R) -> Result<([SoftOutcome; 3], StateVector)> {
    let (ox, s) = soft_measure(state, PauliAxis::X, rng)?;
    let (oy, s) = soft_measure(&s, PauliAxis::Y, rng)?;
    let (oz, s) = soft_measure(&s, PauliAxis::Z, rng)?;
    Ok(([ox, oy, oz], s))
}

/// Mean and standard deviation of each σ_α^tot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChargeStats {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

pub fn charge_statistics(state: &StateVector) -> ChargeStats {
    let grid = eigenvalue_grid(state.num_qubits());
    let mut mean = [0.0; 3];
    let mut std = [0.0; 3];
    for axis in PauliAxis::ALL {
        let w = charge_distribution(state, axis);
        let norm: f64 = w.iter().sum();
        let m1: f64 = w.iter().zip(&grid).map(|(p, &s)| p * s as f64).sum::<f64>() / norm;
        let m2: f64 = w.iter().zip(&grid).map(|(p, &s)| p * (s * s) as f64).sum::<f64>() / norm;
        mean[axis.index()] = m1;
        std[axis.index()] = (m2 - m1 * m1).max(0.0).sqrt();
    }
    ChargeStats { mean, std }
}

/// Small parameters of the approximate microcanonical subspace. Reporting
/// metadata only; no subspace projector is built.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmcParameters {
    pub eta_prime: f64,
    pub delta_prime: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub eta: f64,
}

/// One-standard-deviation Gaussian weight, rounded.
pub const DELTA_PRIME: f64 = 0.32;
/// Number of non-Hamiltonian charges.
pub const NUM_CHARGES: f64 = 3.0;

pub fn amc_parameters(copies: usize, scale_constant: f64) -> Result<AmcParameters> {
    amc_parameters_with(copies, scale_constant, 0.01, 1.5)
}

/// `epsilon_margin` is added above `(c+1)δ'`; `eta_ratio > 1` sets `η = ratio · η'`.
pub fn amc_parameters_with(
    copies: usize,
    scale_constant: f64,
    epsilon_margin: f64,
    eta_ratio: f64,
) -> Result<AmcParameters> {
    if copies == 0 {
        return Err(Error::Domain("need at least one copy".into()));
    }
    if epsilon_margin.is_nan() || epsilon_margin <= 0.0 || eta_ratio.is_nan() || eta_ratio <= 1.0 {
        return Err(Error::Domain("margins must make the inequalities strict".into()));
    }
    let eta_prime = scale_constant / (copies as f64).sqrt();
    Ok(AmcParameters {
        eta_prime,
        delta_prime: DELTA_PRIME,
        epsilon: (NUM_CHARGES + 1.0) * DELTA_PRIME + epsilon_margin,
        delta: DELTA_PRIME,
        eta: eta_ratio * eta_prime,
    })
}
