//! Small dense helpers on nalgebra matrices.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::spin::{Mat2, PauliString};

pub type CMatrix = DMatrix<C64>;

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen(m: &CMatrix) -> (DVector<f64>, CMatrix) {
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = CMatrix::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// `V diag(f(λ)) V†` for Hermitian `m`.
pub fn hermitian_function<F: Fn(f64) -> f64>(m: &CMatrix, f: F) -> CMatrix {
    let (values, vectors) = hermitian_eigen(m);
    from_spectrum(&values.map(f), &vectors)
}

pub fn from_spectrum(values: &DVector<f64>, vectors: &CMatrix) -> CMatrix {
    let mut scaled = vectors.clone();
    for (c, &v) in values.iter().enumerate() {
        scaled.column_mut(c).scale_mut(v);
    }
    scaled * vectors.adjoint()
}

/// Largest entrywise deviation from Hermiticity.
pub fn hermiticity_error(m: &CMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    for r in 0..m.nrows() {
        for c in r..m.ncols() {
            worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    worst
}

/// `(m + m†) / 2`
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|v| C64::new(v, 0.0))
}

pub fn mat2(m: &Mat2) -> CMatrix {
    CMatrix::from_fn(2, 2, |r, c| m[r][c])
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Dense matrix of a Pauli string; slot 0 is the most significant factor.
pub fn pauli_string_matrix(p: &PauliString) -> CMatrix {
    p.labels().iter().fold(CMatrix::identity(1, 1), |acc, l| kron(&acc, &mat2(&l.matrix())))
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// Frobenius inner product `Tr(a† b)`.
pub fn frobenius_inner(a: &CMatrix, b: &CMatrix) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}
