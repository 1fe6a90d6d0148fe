//! Independent reference computations shared by the integration tests.

#![allow(dead_code)]

use hydrosketch::Matrix;
use nalgebra::DMatrix;

pub fn to_nalgebra(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.data())
}

pub fn from_nalgebra(m: &DMatrix<f64>) -> Matrix {
    Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Sylvester Hadamard matrix built by doubling `[[H, H], [H, -H]]`.
pub fn sylvester_hadamard(n: usize) -> DMatrix<f64> {
    assert!(n.is_power_of_two());
    let mut h = DMatrix::from_element(1, 1, 1.0);
    while h.nrows() < n {
        let m = h.nrows();
        let mut next = DMatrix::zeros(2 * m, 2 * m);
        next.view_mut((0, 0), (m, m)).copy_from(&h);
        next.view_mut((0, m), (m, m)).copy_from(&h);
        next.view_mut((m, 0), (m, m)).copy_from(&h);
        next.view_mut((m, m), (m, m)).copy_from(&(-&h));
        h = next;
    }
    h
}

/// `diag(A (AᵀA)⁻¹ Aᵀ)` through a Cholesky solve of the normal equations.
pub fn hat_diagonal(a: &Matrix) -> Vec<f64> {
    let a = to_nalgebra(a);
    let chol = (a.transpose() * &a).cholesky().expect("full column rank");
    let solved = chol.solve(&a.transpose());
    (0..a.nrows())
        .map(|i| a.row(i).dot(&solved.column(i).transpose()))
        .collect()
}

/// Largest singular value.
pub fn svd_norm(m: &Matrix) -> f64 {
    to_nalgebra(m)
        .singular_values()
        .iter()
        .fold(0.0, |acc: f64, s| acc.max(*s))
}

/// Least-squares solution through the normal equations.
pub fn normal_equations(a: &Matrix, b: &Matrix) -> Matrix {
    let (a, b) = (to_nalgebra(a), to_nalgebra(b));
    let chol = (a.transpose() * &a).cholesky().expect("full column rank");
    from_nalgebra(&chol.solve(&(a.transpose() * b)))
}

/// `Pr[|X − mean| ≥ threshold]` for `X ~ Binomial(trials, p)`, summed exactly.
pub fn binomial_two_sided_tail(trials: u64, p: f64, threshold: f64) -> f64 {
    let mean = trials as f64 * p;
    let mut pmf = (1.0 - p).powi(trials as i32);
    let mut tail = 0.0;
    for j in 0..=trials {
        if (j as f64 - mean).abs() >= threshold {
            tail += pmf;
        }
        pmf *= (trials - j) as f64 / (j + 1) as f64 * p / (1.0 - p);
    }
    tail
}

pub fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    if sorted.len().is_multiple_of(2) {
        0.5 * (sorted[mid - 1] + sorted[mid])
    } else {
        sorted[mid]
    }
}
