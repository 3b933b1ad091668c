//! Matrix-free Pauli kernels on dense state vectors.
//!
//! Every operator here acts directly on the amplitude array; nothing builds
//! a `2^n x 2^n` matrix. Basis changes for the x and y axes go through the
//! single-qubit unitaries returned by [`basis_change`].

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A 2x2 complex matrix, row-major.
pub type Mat2 = [[C64; 2]; 2];

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Spin component α.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

impl PauliAxis {
    pub const ALL: [PauliAxis; 3] = [PauliAxis::X, PauliAxis::Y, PauliAxis::Z];

    pub fn index(self) -> usize {
        match self {
            PauliAxis::X => 0,
            PauliAxis::Y => 1,
            PauliAxis::Z => 2,
        }
    }

    /// x -> y -> z -> x
    pub fn next(self) -> PauliAxis {
        match self {
            PauliAxis::X => PauliAxis::Y,
            PauliAxis::Y => PauliAxis::Z,
            PauliAxis::Z => PauliAxis::X,
        }
    }

    pub fn prev(self) -> PauliAxis {
        self.next().next()
    }

    pub fn matrix(self) -> Mat2 {
        match self {
            PauliAxis::X => [[ZERO, ONE], [ONE, ZERO]],
            PauliAxis::Y => [[ZERO, -I], [I, ZERO]],
            PauliAxis::Z => [[ONE, ZERO], [ZERO, -ONE]],
        }
    }

    pub fn as_char(self) -> char {
        match self {
            PauliAxis::X => 'x',
            PauliAxis::Y => 'y',
            PauliAxis::Z => 'z',
        }
    }
}

impl fmt::Display for PauliAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

impl FromStr for PauliAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x" => Ok(PauliAxis::X),
            "y" => Ok(PauliAxis::Y),
            "z" => Ok(PauliAxis::Z),
            other => Err(Error::Domain(format!("unknown Pauli axis '{other}'"))),
        }
    }
}

/// One slot of a Pauli string: identity or one of the three Paulis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PauliLabel {
    I,
    Axis(PauliAxis),
}

impl PauliLabel {
    pub const ALL: [PauliLabel; 4] =
        [PauliLabel::I, PauliLabel::Axis(PauliAxis::X), PauliLabel::Axis(PauliAxis::Y), PauliLabel::Axis(PauliAxis::Z)];

    pub fn matrix(self) -> Mat2 {
        match self {
            PauliLabel::I => [[ONE, ZERO], [ZERO, ONE]],
            PauliLabel::Axis(a) => a.matrix(),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            PauliLabel::I => '0',
            PauliLabel::Axis(a) => a.as_char(),
        }
    }

    fn from_char(c: char) -> Result<Self> {
        match c.to_ascii_lowercase() {
            '0' | 'i' => Ok(PauliLabel::I),
            'x' => Ok(PauliLabel::Axis(PauliAxis::X)),
            'y' => Ok(PauliLabel::Axis(PauliAxis::Y)),
            'z' => Ok(PauliLabel::Axis(PauliAxis::Z)),
            other => Err(Error::Domain(format!("invalid Pauli label '{other}'"))),
        }
    }
}

/// Tensor product of per-qubit Pauli labels; slot 0 acts on the first qubit.
///
/// Written as a compact string: `"xz"`, `"0y"` (`0` or `i` for identity).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString(Vec<PauliLabel>);

impl PauliString {
    pub fn new(labels: Vec<PauliLabel>) -> Self {
        PauliString(labels)
    }

    pub fn from_axes(axes: &[PauliAxis]) -> Self {
        PauliString(axes.iter().map(|&a| PauliLabel::Axis(a)).collect())
    }

    pub fn labels(&self) -> &[PauliLabel] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|l| *l == PauliLabel::I)
    }

    /// True when every slot is x, y, or z, i.e. the string names a
    /// measurement basis.
    pub fn is_measurement_basis(&self) -> bool {
        self.0.iter().all(|l| *l != PauliLabel::I)
    }

    /// All `4^n` strings in lexicographic order (identity first).
    pub fn all(n: usize) -> Vec<PauliString> {
        product_strings(n, &PauliLabel::ALL)
    }

    /// All `3^n` measurement bases.
    pub fn all_bases(n: usize) -> Vec<PauliString> {
        product_strings(n, &PauliLabel::ALL[1..])
    }
}

fn product_strings(n: usize, alphabet: &[PauliLabel]) -> Vec<PauliString> {
    let mut out = vec![Vec::with_capacity(n)];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                alphabet.iter().map(move |&l| {
                    let mut v = prefix.clone();
                    v.push(l);
                    v
                })
            })
            .collect();
    }
    out.into_iter().map(PauliString).collect()
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.0 {
            write!(f, "{}", l.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars().map(PauliLabel::from_char).collect::<Result<Vec<_>>>().map(PauliString)
    }
}

impl Serialize for PauliString {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PauliString {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Pure state of `num_qubits` qubits in the σ_z product basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: Vec<C64>,
    num_qubits: usize,
}

impl StateVector {
    /// Wraps an amplitude array. The length must be a power of two; the
    /// vector is not renormalized.
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        let len = amps.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::Domain(format!("state length {len} is not a power of two")));
        }
        let num_qubits = len.trailing_zeros() as usize;
        Ok(StateVector { amps, num_qubits })
    }

    /// Computational basis state `|index>`.
    pub fn basis(num_qubits: usize, index: usize) -> Self {
        let mut amps = vec![ZERO; 1 << num_qubits];
        amps[index] = ONE;
        StateVector { amps, num_qubits }
    }

    pub fn zeros(num_qubits: usize) -> Self {
        StateVector { amps: vec![ZERO; 1 << num_qubits], num_qubits }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Rescales to unit norm and returns the previous norm.
    pub fn normalize(&mut self) -> Result<f64> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::Numerical(format!("cannot normalize state with norm {n}")));
        }
        let inv = 1.0 / n;
        self.amps.iter_mut().for_each(|a| *a *= inv);
        Ok(n)
    }

    /// `<self|other>`
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    /// Euclidean distance `||self - other||`.
    pub fn distance(&self, other: &StateVector) -> f64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
    }

    /// Distance after removing the global phase that best aligns `other`
    /// onto `self`.
    pub fn distance_up_to_phase(&self, other: &StateVector) -> f64 {
        let overlap = other.inner(self);
        let phase = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { ONE };
        self.amps.iter().zip(&other.amps).map(|(a, b)| (a - b * phase).norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scaled(mut self, factor: C64) -> Self {
        self.amps.iter_mut().for_each(|a| *a *= factor);
        self
    }

    fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.num_qubits {
            return Err(Error::Index { index: site, num_qubits: self.num_qubits });
        }
        Ok(())
    }

    /// Bit mask of `site` in a basis index.
    pub fn site_mask(&self, site: usize) -> usize {
        site_mask(self.num_qubits, site)
    }
}

pub(crate) fn site_mask(num_qubits: usize, site: usize) -> usize {
    1 << (num_qubits - 1 - site)
}

/// σ_z^tot eigenvalue of computational basis state `index`.
#[inline]
pub fn z_eigenvalue(num_qubits: usize, index: usize) -> i32 {
    num_qubits as i32 - 2 * index.count_ones() as i32
}

/// Eigenvalues of σ_α^tot, `-n, -n+2, ..., n`, in increasing order.
pub fn eigenvalue_grid(num_qubits: usize) -> Vec<i32> {
    let n = num_qubits as i32;
    (0..=num_qubits as i32).map(|k| -n + 2 * k).collect()
}

/// Position of `eigenvalue` in [`eigenvalue_grid`], or a domain error for
/// wrong parity or magnitude.
pub fn grid_position(num_qubits: usize, eigenvalue: i32) -> Result<usize> {
    let n = num_qubits as i32;
    if eigenvalue.abs() > n || (n + eigenvalue) % 2 != 0 {
        return Err(Error::Domain(format!("eigenvalue {eigenvalue} is not on the grid -{n}, -{n}+2, ..., {n}")));
    }
    Ok(((n + eigenvalue) / 2) as usize)
}

/// Single-qubit unitary `V` with `V σ_z V† = σ_α`. Its columns are
/// `|α+>` and `|α->`.
pub fn basis_change(axis: PauliAxis) -> Mat2 {
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    match axis {
        PauliAxis::X => [[h, h], [h, -h]],
        PauliAxis::Y => [[h, h], [h * I, -h * I]],
        PauliAxis::Z => [[ONE, ZERO], [ZERO, ONE]],
    }
}

pub fn dagger(u: &Mat2) -> Mat2 {
    [[u[0][0].conj(), u[1][0].conj()], [u[0][1].conj(), u[1][1].conj()]]
}

pub fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[ZERO; 2]; 2];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = a[r][0] * b[0][c] + a[r][1] * b[1][c];
        }
    }
    out
}

/// Applies `u` to one qubit in place.
pub fn apply_single_qubit(amps: &mut [C64], num_qubits: usize, site: usize, u: &Mat2) {
    let stride = site_mask(num_qubits, site);
    let dim = amps.len();
    let mut base = 0;
    while base < dim {
        for i0 in base..base + stride {
            let i1 = i0 + stride;
            let (a0, a1) = (amps[i0], amps[i1]);
            amps[i0] = u[0][0] * a0 + u[0][1] * a1;
            amps[i1] = u[1][0] * a0 + u[1][1] * a1;
        }
        base += 2 * stride;
    }
}

/// Applies `u` to every qubit in place.
pub fn apply_all_qubits(amps: &mut [C64], num_qubits: usize, u: &Mat2) {
    for site in 0..num_qubits {
        apply_single_qubit(amps, num_qubits, site, u);
    }
}

/// Applies σ_α to one qubit in place.
pub fn apply_pauli_mut(state: &mut StateVector, axis: PauliAxis, site: usize) -> Result<()> {
    state.check_site(site)?;
    let mask = state.site_mask(site);
    let amps = &mut state.amps;
    match axis {
        PauliAxis::Z => {
            for (i, a) in amps.iter_mut().enumerate() {
                if i & mask != 0 {
                    *a = -*a;
                }
            }
        }
        PauliAxis::X | PauliAxis::Y => {
            for i0 in 0..amps.len() {
                if i0 & mask != 0 {
                    continue;
                }
                let i1 = i0 | mask;
                let (a0, a1) = (amps[i0], amps[i1]);
                if axis == PauliAxis::X {
                    amps[i0] = a1;
                    amps[i1] = a0;
                } else {
                    amps[i0] = -I * a1;
                    amps[i1] = I * a0;
                }
            }
        }
    }
    Ok(())
}

/// σ_α^{(site)} |ψ>.
pub fn apply_pauli(state: &StateVector, axis: PauliAxis, site: usize) -> Result<StateVector> {
    let mut out = state.clone();
    apply_pauli_mut(&mut out, axis, site)?;
    Ok(out)
}

/// σ_α^tot |ψ> = Σ_j σ_α^{(j)} |ψ>. The result is generally not normalized.
pub fn total_spin_apply(state: &StateVector, axis: PauliAxis) -> StateVector {
    let n = state.num_qubits;
    let mut out = StateVector::zeros(n);
    if axis == PauliAxis::Z {
        for (i, (o, a)) in out.amps.iter_mut().zip(&state.amps).enumerate() {
            *o = a * z_eigenvalue(n, i) as f64;
        }
        return out;
    }
    for site in 0..n {
        let mask = site_mask(n, site);
        for (i, o) in out.amps.iter_mut().enumerate() {
            let src = state.amps[i ^ mask];
            *o += match axis {
                PauliAxis::X => src,
                // <i|σ_y|i^mask>: -i when bit is 0, +i when bit is 1
                _ => {
                    if i & mask == 0 {
                        -I * src
                    } else {
                        I * src
                    }
                }
            };
        }
    }
    out
}

/// Applies `g(σ_α^tot)` for a real spectral function `g` of the eigenvalue.
pub fn apply_charge_function<F>(state: &StateVector, axis: PauliAxis, g: F) -> StateVector
where
    F: Fn(i32) -> f64,
{
    let n = state.num_qubits;
    let weights: Vec<f64> = eigenvalue_grid(n).into_iter().map(&g).collect();
    let mut out = state.clone();
    let v = basis_change(axis);
    if axis != PauliAxis::Z {
        apply_all_qubits(&mut out.amps, n, &dagger(&v));
    }
    for (i, a) in out.amps.iter_mut().enumerate() {
        // grid position of z_eigenvalue is n - popcount
        *a *= weights[n - i.count_ones() as usize];
    }
    if axis != PauliAxis::Z {
        apply_all_qubits(&mut out.amps, n, &v);
    }
    out
}

/// Projector onto the eigenvalue-`eigenvalue` eigenspace of σ_α^tot.
pub fn charge_eigenprojector_apply(state: &StateVector, axis: PauliAxis, eigenvalue: i32) -> Result<StateVector> {
    grid_position(state.num_qubits, eigenvalue)?;
    Ok(apply_charge_function(state, axis, |s| if s == eigenvalue { 1.0 } else { 0.0 }))
}

/// Weights `||P_α^S ψ||²` for every S on [`eigenvalue_grid`].
pub fn charge_distribution(state: &StateVector, axis: PauliAxis) -> Vec<f64> {
    let n = state.num_qubits;
    let mut rotated = state.amps.clone();
    if axis != PauliAxis::Z {
        apply_all_qubits(&mut rotated, n, &dagger(&basis_change(axis)));
    }
    let mut weights = vec![0.0; n + 1];
    for (i, a) in rotated.iter().enumerate() {
        weights[n - i.count_ones() as usize] += a.norm_sqr();
    }
    weights
}

/// Σ_α w_α σ_α^{(i)} σ_α^{(j)} |ψ>.
pub fn heisenberg_bond_apply(state: &StateVector, i: usize, j: usize, weights: [f64; 3]) -> Result<StateVector> {
    state.check_site(i)?;
    state.check_site(j)?;
    if i == j {
        return Err(Error::Domain(format!("bond endpoints coincide at qubit {i}")));
    }
    let mut out = StateVector::zeros(state.num_qubits);
    let pair_mask = state.site_mask(i) | state.site_mask(j);
    add_bond_action(&state.amps, &mut out.amps, pair_mask, weights, 1.0);
    Ok(out)
}

/// Accumulates `scale · Σ_α w_α σ_α σ_α` on the bond whose two bits are set
/// in `pair_mask`.
///
/// With aligned bits the xx and yy flips carry `w_x - w_y`; anti-aligned
/// bits carry `w_x + w_y`. The zz term is diagonal.
#[inline]
pub(crate) fn add_bond_action(input: &[C64], output: &mut [C64], pair_mask: usize, weights: [f64; 3], scale: f64) {
    let [wx, wy, wz] = weights;
    let aligned_flip = scale * (wx - wy);
    let anti_flip = scale * (wx + wy);
    let zz = scale * wz;
    for (k, o) in output.iter_mut().enumerate() {
        let bits = k & pair_mask;
        let aligned = bits == 0 || bits == pair_mask;
        let flipped = input[k ^ pair_mask];
        if aligned {
            *o += input[k] * zz + flipped * aligned_flip;
        } else {
            *o += -input[k] * zz + flipped * anti_flip;
        }
    }
}

/// Direction of the global axis cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CycleDirection {
    /// Conjugation maps σ_x → σ_y, σ_y → σ_z, σ_z → σ_x.
    Forward,
    Backward,
}

/// Rotation by 2π/3 about (1,1,1)/√3. `U σ_x U† = σ_y` for the forward
/// direction; backward is the adjoint.
pub fn axis_cycle_unitary(direction: CycleDirection) -> Mat2 {
    let (c, s) = ((PI / 3.0).cos(), (PI / 3.0).sin() / 3f64.sqrt());
    let x = PauliAxis::X.matrix();
    let y = PauliAxis::Y.matrix();
    let z = PauliAxis::Z.matrix();
    let mut u = [[ZERO; 2]; 2];
    for r in 0..2 {
        for col in 0..2 {
            let id = if r == col { ONE } else { ZERO };
            u[r][col] = id * c - I * s * (x[r][col] + y[r][col] + z[r][col]);
        }
    }
    match direction {
        CycleDirection::Forward => u,
        CycleDirection::Backward => dagger(&u),
    }
}

/// Applies the axis-cycle rotation to every qubit in place.
pub fn global_axis_cycle_mut(state: &mut StateVector, direction: CycleDirection) {
    let u = axis_cycle_unitary(direction);
    let n = state.num_qubits;
    apply_all_qubits(&mut state.amps, n, &u);
}

pub fn global_axis_cycle(state: &StateVector, direction: CycleDirection) -> StateVector {
    let mut out = state.clone();
    global_axis_cycle_mut(&mut out, direction);
    out
}
