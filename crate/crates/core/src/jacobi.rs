//! Cyclic Jacobi eigensolver for dense symmetric matrices.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_SWEEPS: usize = 100;

/// Eigenpairs sorted by descending eigenvalue; column `k` of `vectors` is the
/// unit eigenvector for `values[k]`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
    pub sweeps: usize,
}

fn off_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Diagonalizes symmetric `a` by cyclic sweeps of plane rotations until the
/// off-diagonal Frobenius norm is at most `tol`.
///
/// Only the upper triangle is trusted; the input is symmetrized from it.
pub fn symmetric_eigen(a: &Matrix, tol: f64, max_sweeps: usize) -> Result<SymmetricEigen> {
    let n = a.rows();
    assert_eq!(n, a.cols(), "matrix must be square");
    let mut m = a.clone();
    for i in 0..n {
        for j in 0..i {
            m[(i, j)] = m[(j, i)];
        }
    }
    let mut v = Matrix::identity(n);
    let mut sweeps = 0;
    let mut off = off_norm(&m);
    while off > tol {
        if sweeps == max_sweeps {
            return Err(Error::NoConvergence {
                sweeps,
                off_norm: off,
            });
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let (app, aqq) = (m[(p, p)], m[(q, q)]);
                // rotation angle from cot 2θ = (a_qq − a_pp) / 2a_pq,
                // taking the smaller root for t = tan θ
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);

                m[(p, p)] = app - t * apq;
                m[(q, q)] = aqq + t * apq;
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                for r in 0..n {
                    if r != p && r != q {
                        let (arp, arq) = (m[(r, p)], m[(r, q)]);
                        let new_rp = arp - s * (arq + tau * arp);
                        let new_rq = arq + s * (arp - tau * arq);
                        m[(r, p)] = new_rp;
                        m[(p, r)] = new_rp;
                        m[(r, q)] = new_rq;
                        m[(q, r)] = new_rq;
                    }
                }
                for r in 0..n {
                    let (vrp, vrq) = (v[(r, p)], v[(r, q)]);
                    v[(r, p)] = vrp - s * (vrq + tau * vrp);
                    v[(r, q)] = vrq + s * (vrp - tau * vrq);
                }
            }
        }
        sweeps += 1;
        off = off_norm(&m);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| m[(b, b)].total_cmp(&m[(a, a)]));
    let values = order.iter().map(|&k| m[(k, k)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        // sign convention: largest-magnitude component positive
        let col: Vec<f64> = (0..n).map(|r| v[(r, src)]).collect();
        let pivot = col
            .iter()
            .cloned()
            .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for (r, x) in col.into_iter().enumerate() {
            vectors[(r, dst)] = sign * x;
        }
    }
    Ok(SymmetricEigen {
        values,
        vectors,
        sweeps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_by_two() {
        let a = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let e = symmetric_eigen(&a, 1e-14, 10).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn diagonal_needs_no_sweeps() {
        let a = Matrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 5.0, 0.0], vec![0.0, 0.0, -2.0]]);
        let e = symmetric_eigen(&a, 1e-14, 10).unwrap();
        assert_eq!(e.values, vec![5.0, 1.0, -2.0]);
        assert_eq!(e.sweeps, 0);
    }

    #[test]
    fn sweep_cap_reports_no_convergence() {
        let a = Matrix::from_rows(&[
            vec![1.0, 2.0, 3.0],
            vec![2.0, 4.0, 5.0],
            vec![3.0, 5.0, 6.0],
        ]);
        assert!(matches!(
            symmetric_eigen(&a, 0.0, 3),
            Err(Error::NoConvergence { sweeps: 3, .. })
        ));
    }

    proptest! {
        #[test]
        fn reconstructs_random_symmetric(entries in proptest::collection::vec(-1.0f64..1.0, 36)) {
            let n = 6;
            let mut a = Matrix::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    a[(i, j)] = entries[i * n + j];
                    a[(j, i)] = entries[i * n + j];
                }
            }
            let e = symmetric_eigen(&a, 1e-13, 100).unwrap();
            for k in 0..n {
                let col: Vec<f64> = (0..n).map(|r| e.vectors[(r, k)]).collect();
                let av = a.mul_vec(&col);
                for r in 0..n {
                    prop_assert!((av[r] - e.values[k] * col[r]).abs() < 1e-11);
                }
            }
            prop_assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
            let vtv = e.vectors.transpose().matmul(&e.vectors);
            prop_assert!(vtv.max_abs_diff(&Matrix::identity(n)) < 1e-12);
        }
    }
}
