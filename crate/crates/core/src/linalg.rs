//! Orthonormalization, spectral norms, small symmetric eigenproblems and Haar
//! random unitaries.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::{axpy, dot, norm2, Matrix};
use crate::rng::SeededRng;

/// Relative pivot threshold (against `‖A‖_max`) below which a column counts as dependent.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Iteration cap of [`spectral_norm`].
pub const POWER_ITERATION_CAP: usize = 10_000;

const POWER_ITERATION_TOLERANCE: f64 = 1e-10;

/// A matrix with orthonormal columns spanning the column space of its source.
#[derive(Clone, Debug, PartialEq)]
pub struct OrthonormalBasis {
    u: Matrix,
}

impl OrthonormalBasis {
    pub fn u(&self) -> &Matrix {
        &self.u
    }

    pub fn into_matrix(self) -> Matrix {
        self.u
    }

    pub fn source_rows(&self) -> usize {
        self.u.rows()
    }

    pub fn source_cols(&self) -> usize {
        self.u.cols()
    }

    /// Squared row norms of `U`, i.e. the leverage scores of the source matrix.
    pub fn row_norms_squared(&self) -> Vec<f64> {
        (0..self.u.rows())
            .map(|i| dot(self.u.row(i), self.u.row(i)))
            .collect()
    }
}

/// Thin QR by Gram–Schmidt with one full reorthogonalization pass.
///
/// Returns the orthonormal factor and the `d x d` upper-triangular factor.
pub fn thin_qr(a: &Matrix) -> Result<(OrthonormalBasis, Matrix)> {
    let (rows, cols) = a.shape();
    if cols > rows {
        return Err(Error::DimensionMismatch(format!(
            "thin QR needs rows >= cols, got {rows}x{cols}"
        )));
    }
    let threshold = RANK_TOLERANCE * a.max_abs();
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(cols);
    let mut r = Matrix::zeros(cols, cols);
    for j in 0..cols {
        let mut v = a.column(j);
        for _ in 0..2 {
            for (i, qi) in q.iter().enumerate() {
                let proj = dot(qi, &v);
                axpy(&mut v, -proj, qi);
                r.set(i, j, r.get(i, j) + proj);
            }
        }
        let norm = norm2(&v);
        if !(norm > threshold) {
            return Err(Error::RankDeficient { column: j });
        }
        v.iter_mut().for_each(|x| *x /= norm);
        r.set(j, j, norm);
        q.push(v);
    }
    let u = Matrix::from_fn(rows, cols, |i, j| q[j][i]);
    Ok((OrthonormalBasis { u }, r))
}

/// Orthonormal basis `U` of the column space of a full-column-rank `A`.
pub fn thin_orthonormalize(a: &Matrix) -> Result<OrthonormalBasis> {
    thin_qr(a).map(|(basis, _)| basis)
}

/// Orthogonalizes the columns of a square matrix, keeping leading-column spans.
pub fn gram_schmidt_orthogonalize(g: &Matrix) -> Result<Matrix> {
    if !g.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            g.rows(),
            g.cols()
        )));
    }
    thin_orthonormalize(g).map(OrthonormalBasis::into_matrix)
}

/// Solves `R x = b` for upper-triangular `R` and every column of `b`.
pub fn solve_upper_triangular(r: &Matrix, b: &Matrix) -> Result<Matrix> {
    let n = r.rows();
    if !r.is_square() || b.rows() != n {
        return Err(Error::DimensionMismatch(format!(
            "triangular solve with {}x{} factor and {} right-hand rows",
            r.rows(),
            r.cols(),
            b.rows()
        )));
    }
    let mut x = b.clone();
    for c in 0..b.cols() {
        for i in (0..n).rev() {
            let mut acc = x.get(i, c);
            for k in i + 1..n {
                acc -= r.get(i, k) * x.get(k, c);
            }
            let pivot = r.get(i, i);
            if pivot == 0.0 {
                return Err(Error::RankDeficient { column: i });
            }
            x.set(i, c, acc / pivot);
        }
    }
    Ok(x)
}

/// Least-squares solution of `min ‖A x − b‖₂` through thin QR.
pub fn least_squares(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.rows() != b.rows() {
        return Err(Error::DimensionMismatch(format!(
            "design has {} rows, target has {}",
            a.rows(),
            b.rows()
        )));
    }
    let (basis, r) = thin_qr(a)?;
    let qtb = basis.u().t_matmul(b)?;
    solve_upper_triangular(&r, &qtb)
}

/// Largest singular value by power iteration on `MᵀM` (or `MMᵀ` if smaller).
///
/// The start vector is the normalized all-ones vector; if it lies in the null
/// space, the canonical vector of the largest diagonal entry is used instead.
/// Iteration stops once the eigen-residual drops below `1e-10` relative.
pub fn spectral_norm(m: &Matrix) -> Result<f64> {
    let gram = if m.cols() <= m.rows() {
        m.gram()
    } else {
        m.transpose().gram()
    };
    let n = gram.rows();
    if n == 0 || gram.max_abs() == 0.0 {
        return Ok(0.0);
    }
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut w = symmetric_matvec(&gram, &v);
    if norm2(&w) <= f64::EPSILON * gram.max_abs() {
        let best = (0..n)
            .max_by(|&i, &j| gram.get(i, i).total_cmp(&gram.get(j, j)))
            .unwrap_or(0);
        v = vec![0.0; n];
        v[best] = 1.0;
        w = symmetric_matvec(&gram, &v);
    }
    for _ in 0..POWER_ITERATION_CAP {
        let lambda = dot(&v, &w);
        let residual = w
            .iter()
            .zip(&v)
            .map(|(wi, vi)| (wi - lambda * vi).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual <= POWER_ITERATION_TOLERANCE * lambda.abs() {
            return Ok(lambda.max(0.0).sqrt());
        }
        let norm = norm2(&w);
        if norm == 0.0 {
            return Ok(0.0);
        }
        v = w.iter().map(|x| x / norm).collect();
        w = symmetric_matvec(&gram, &v);
    }
    Err(Error::NoConvergence {
        iterations: POWER_ITERATION_CAP,
    })
}

/// [`spectral_norm`], falling back to a Jacobi eigensolve of the Gram matrix
/// when power iteration stalls on a clustered spectrum.
pub fn spectral_norm_robust(m: &Matrix) -> f64 {
    match spectral_norm(m) {
        Ok(value) => value,
        Err(_) => {
            let gram = if m.cols() <= m.rows() {
                m.gram()
            } else {
                m.transpose().gram()
            };
            symmetric_eigenvalues(&gram)
                .map(|eig| eig.iter().fold(0.0_f64, |a, &l| a.max(l)).sqrt())
                .unwrap_or(f64::NAN)
        }
    }
}

fn symmetric_matvec(m: &Matrix, v: &[f64]) -> Vec<f64> {
    (0..m.rows()).map(|i| dot(m.row(i), v)).collect()
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues(m: &Matrix) -> Result<Vec<f64>> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "eigenvalues need a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let n = m.rows();
    let mut a = m.clone();
    let scale = a.frobenius_norm();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a.get(i, j).powi(2))
            .sum();
        if off.sqrt() <= 1e-15 * scale || scale == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

/// A Haar-distributed orthogonal matrix stored as a product of Householder
/// reflectors and a sign diagonal, applied in `O(n² d)` to an `n x d` matrix.
///
/// The factors are those of the Householder QR of an `n x n` Gaussian matrix
/// with the sign convention that makes the triangular factor positive, which
/// yields exactly the Haar measure.
#[derive(Clone, Debug)]
pub struct HaarUnitary {
    n: usize,
    reflectors: Vec<Vec<f64>>,
    signs: Vec<f64>,
}

impl HaarUnitary {
    pub fn sample(n: usize, rng: SeededRng) -> Self {
        let mut stream = rng.stream();
        let mut reflectors = Vec::with_capacity(n.saturating_sub(1));
        let mut signs = Vec::with_capacity(n);
        for j in 0..n.saturating_sub(1) {
            let mut x: Vec<f64> = (0..n - j).map(|_| stream.sample(StandardNormal)).collect();
            let sign = if x[0] >= 0.0 { 1.0 } else { -1.0 };
            x[0] += sign * norm2(&x);
            let norm = norm2(&x);
            x.iter_mut().for_each(|v| *v /= norm);
            reflectors.push(x);
            signs.push(-sign);
        }
        if n > 0 {
            let last: f64 = stream.sample(StandardNormal);
            signs.push(if last >= 0.0 { 1.0 } else { -1.0 });
        }
        Self {
            n,
            reflectors,
            signs,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `Q · A`.
    pub fn apply(&self, a: &Matrix) -> Result<Matrix> {
        if a.rows() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "unitary of order {} applied to {} rows",
                self.n,
                a.rows()
            )));
        }
        let mut out = a.clone();
        for (i, s) in self.signs.iter().enumerate() {
            out.row_mut(i).iter_mut().for_each(|v| *v *= s);
        }
        let d = a.cols();
        let mut w = vec![0.0; d];
        for (j, v) in self.reflectors.iter().enumerate().rev() {
            w.iter_mut().for_each(|x| *x = 0.0);
            for (offset, &vi) in v.iter().enumerate() {
                axpy(&mut w, vi, out.row(j + offset));
            }
            for (offset, &vi) in v.iter().enumerate() {
                axpy(out.row_mut(j + offset), -2.0 * vi, &w);
            }
        }
        Ok(out)
    }

    pub fn as_dense(&self) -> Matrix {
        self.apply(&Matrix::identity(self.n))
            .expect("identity has matching order")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_is_its_own_basis() {
        let u = thin_orthonormalize(&Matrix::identity(4)).unwrap();
        assert_eq!(u.u(), &Matrix::identity(4));
    }

    #[test]
    fn rescaled_canonical_columns() {
        let a = Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 3.0], vec![0.0, 0.0]]).unwrap();
        let u = thin_orthonormalize(&a).unwrap();
        let expected =
            Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(u.u(), &expected);
    }

    #[test]
    fn dependent_columns_are_rejected() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0]]).unwrap();
        assert!(matches!(
            thin_orthonormalize(&a),
            Err(Error::RankDeficient { column: 1 })
        ));
    }

    #[test]
    fn gram_schmidt_examples() {
        let q = gram_schmidt_orthogonalize(&Matrix::identity(3).scale(2.0)).unwrap();
        assert_eq!(q, Matrix::identity(3));
        let swap = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(gram_schmidt_orthogonalize(&swap).unwrap(), swap);
        assert!(gram_schmidt_orthogonalize(&Matrix::zeros(3, 2)).is_err());
    }

    #[test]
    fn qr_reconstructs_input() {
        let a = Matrix::from_fn(7, 3, |i, j| {
            ((i * 5 + j * 3) % 7) as f64 - 2.5 + (i == j) as u8 as f64
        });
        let (q, r) = thin_qr(&a).unwrap();
        let back = q.u().matmul(&r).unwrap();
        assert!(back.max_abs_diff(&a).unwrap() < 1e-12);
        for i in 0..3 {
            for j in 0..i {
                assert_eq!(r.get(i, j), 0.0);
            }
        }
    }

    #[test]
    fn spectral_norm_examples() {
        assert_abs_diff_eq!(
            spectral_norm(&Matrix::diagonal(&[3.0, 1.0])).unwrap(),
            3.0,
            epsilon = 1e-12
        );
        assert_eq!(spectral_norm(&Matrix::zeros(3, 3)).unwrap(), 0.0);
        // All-ones start vector is orthogonal to the only nonzero direction.
        let m = Matrix::from_rows(&[vec![1.0, -1.0], vec![0.0, 0.0]]).unwrap();
        assert_abs_diff_eq!(spectral_norm(&m).unwrap(), 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn jacobi_on_known_spectrum() {
        let m = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let eig = symmetric_eigenvalues(&m).unwrap();
        assert_abs_diff_eq!(eig[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(eig[1], 3.0, epsilon = 1e-14);
    }

    #[test]
    fn least_squares_consistent_system() {
        let a = Matrix::from_fn(6, 2, |i, j| (i as f64).powi(j as i32));
        let x0 = Matrix::column_vector(vec![1.5, -0.5]);
        let b = a.matmul(&x0).unwrap();
        let x = least_squares(&a, &b).unwrap();
        assert!(x.max_abs_diff(&x0).unwrap() < 1e-12);
    }

    #[test]
    fn haar_unitary_is_orthogonal() {
        let q = HaarUnitary::sample(17, SeededRng::new(3)).as_dense();
        let qtq = q.gram();
        assert!(qtq.max_abs_diff(&Matrix::identity(17)).unwrap() < 1e-12);
        let trivial = HaarUnitary::sample(1, SeededRng::new(3)).as_dense();
        assert_eq!(trivial.get(0, 0).abs(), 1.0);
    }
}
