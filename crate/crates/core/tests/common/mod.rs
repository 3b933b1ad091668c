//! Brute-force references built from Kronecker products and truncated
//! power series, sharing no code paths with the library kernels.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use nats_core::{Boundary, ChainSpec, StateVector, C64};

pub type M = DMatrix<C64>;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn pauli(k: usize) -> M {
    match k {
        0 => M::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(1., 0.)]),
        1 => M::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]),
        2 => M::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)]),
        3 => M::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)]),
        _ => unreachable!(),
    }
}

/// `σ_k` on qubit `site` of `n` (qubit 0 leftmost).
pub fn embed(n: usize, site: usize, op: &M) -> M {
    let mut out = M::identity(1, 1);
    for q in 0..n {
        let f = if q == site { op.clone() } else { M::identity(2, 2) };
        out = out.kronecker(&f);
    }
    out
}

pub fn total_spin(n: usize, axis: usize) -> M {
    let d = 1 << n;
    (0..n).fold(M::zeros(d, d), |acc, s| acc + embed(n, s, &pauli(axis)))
}

/// Bonds listed from scratch: `(j, j+1)` and `(j, j+2)`, wrapped on a ring.
pub fn oracle_bonds(n: usize, boundary: Boundary, next_nearest: bool) -> Vec<(usize, usize)> {
    let mut bonds = Vec::new();
    let ranges: &[usize] = if next_nearest { &[1, 2] } else { &[1] };
    for &r in ranges {
        for j in 0..n {
            match boundary {
                Boundary::Closed if j + r < n => bonds.push((j, j + r)),
                Boundary::Periodic => bonds.push((j, (j + r) % n)),
                _ => {}
            }
        }
    }
    bonds
}

pub fn dense_h(spec: &ChainSpec) -> M {
    let n = spec.num_qubits();
    let d = 1 << n;
    let pre = spec.overall_sign as f64 * spec.coupling;
    let mut h = M::zeros(d, d);
    for (i, j) in oracle_bonds(n, spec.boundary, spec.next_nearest) {
        for (k, w) in [(1, 1.0), (2, 1.0), (3, spec.delta)] {
            h += (embed(n, i, &pauli(k)) * embed(n, j, &pauli(k))).scale(pre * w);
        }
    }
    h
}

fn one_norm(m: &M) -> f64 {
    (0..m.ncols()).map(|c| m.column(c).iter().map(|v| v.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// `exp(a)` by scaling and squaring around a Taylor series.
pub fn expm(a: &M) -> M {
    let norm = one_norm(a);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scaled = a.unscale(2f64.powi(squarings as i32));
    let d = a.nrows();
    let mut term = M::identity(d, d);
    let mut sum = M::identity(d, d);
    for k in 1..30 {
        term = &term * &scaled / c(k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// `e^{-iHt}|ψ>` via the series, in `pieces` equal time slices.
pub fn propagate(h: &M, psi: &StateVector, t: f64, pieces: usize) -> StateVector {
    let u = expm(&h.scale(-t / pieces as f64).map(|v| v * c(0.0, 1.0)));
    let mut v = DVector::from_column_slice(psi.amplitudes());
    for _ in 0..pieces {
        v = &u * v;
    }
    StateVector::new(v.iter().copied().collect()).unwrap()
}

pub fn to_vec(psi: &StateVector) -> DVector<C64> {
    DVector::from_column_slice(psi.amplitudes())
}

/// `Tr_env |ψ><ψ|` for the leading `k` qubits, reading `ψ` as a
/// `2^k × 2^(n-k)` row-major matrix.
pub fn leading_partial_trace(psi: &StateVector, k: usize) -> M {
    let n = psi.num_qubits();
    let rows = 1 << k;
    let cols = 1 << (n - k);
    let m = M::from_row_slice(rows, cols, psi.amplitudes());
    &m * m.adjoint()
}

/// `exp(-β(H - Σ μ_α Q_α)) / Z` with the series exponential.
pub fn thermal_oracle(h: &M, charges: &[M; 3], beta: f64, mu: [f64; 3]) -> M {
    let mut g = h.clone();
    for (q, m) in charges.iter().zip(mu) {
        g -= q.scale(m);
    }
    let e = expm(&g.scale(-beta));
    let z = e.trace();
    e / z
}

pub fn max_abs_diff(a: &M, b: &M) -> f64 {
    (a - b).iter().map(|v| v.norm()).fold(0.0, f64::max)
}
