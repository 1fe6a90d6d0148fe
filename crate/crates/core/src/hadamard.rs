//! Fast Walsh–Hadamard transform over the rows of a matrix.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Applies the unnormalized Sylvester Hadamard matrix `H_N` to every column of `a`.
///
/// Costs `O(N log N)` per column; scaling by `1/√N` is left to the caller.
pub fn fwht_rows(a: &Matrix) -> Result<Matrix> {
    let mut out = a.clone();
    fwht_rows_in_place(&mut out)?;
    Ok(out)
}

pub fn fwht_rows_in_place(a: &mut Matrix) -> Result<()> {
    let n = a.rows();
    if !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo { rows: n });
    }
    let cols = a.cols();
    let data = a.data_mut();
    let mut half = 1;
    while half < n {
        for start in (0..n).step_by(2 * half) {
            for i in start..start + half {
                let (top, bottom) = data.split_at_mut((i + half) * cols);
                let x = &mut top[i * cols..(i + 1) * cols];
                let y = &mut bottom[..cols];
                for (u, v) in x.iter_mut().zip(y.iter_mut()) {
                    let (p, q) = (*u, *v);
                    *u = p + q;
                    *v = p - q;
                }
            }
        }
        half *= 2;
    }
    Ok(())
}

/// Appends zero rows up to the next power of two; returns the original row count.
pub fn pad_to_power_of_two(a: &Matrix) -> (Matrix, usize) {
    let rows = a.rows();
    let target = rows.max(1).next_power_of_two();
    if target == rows {
        return (a.clone(), rows);
    }
    let mut data = a.data().to_vec();
    data.resize(target * a.cols(), 0.0);
    let padded = Matrix::new(target, a.cols(), data).expect("padded length matches shape");
    (padded, rows)
}

/// Entry `(i, j)` of the unnormalized Sylvester Hadamard matrix.
#[inline]
pub fn hadamard_entry(i: usize, j: usize) -> f64 {
    if (i & j).count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_column_is_all_ones() {
        let e1 = Matrix::column_vector(vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(fwht_rows(&e1).unwrap().data(), &[1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn all_ones_maps_to_scaled_first_basis_vector() {
        let ones = Matrix::column_vector(vec![1.0; 4]);
        assert_eq!(fwht_rows(&ones).unwrap().data(), &[4.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(matches!(
            fwht_rows(&Matrix::zeros(6, 2)),
            Err(Error::NotPowerOfTwo { rows: 6 })
        ));
    }

    #[test]
    fn padding_examples() {
        let (same, rows) = pad_to_power_of_two(&Matrix::zeros(4, 2));
        assert_eq!((same.rows(), rows), (4, 4));
        let five = Matrix::from_fn(5, 2, |i, j| (i + j + 1) as f64);
        let (padded, rows) = pad_to_power_of_two(&five);
        assert_eq!((padded.rows(), rows), (8, 5));
        assert!(padded.row_range(5..8).data().iter().all(|&v| v == 0.0));
        let (p, _) = pad_to_power_of_two(&Matrix::column_vector(vec![1.0, 2.0, 3.0]));
        assert_eq!(p.data(), &[1.0, 2.0, 3.0, 0.0]);
    }
}
