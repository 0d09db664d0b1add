//! Small dense linear algebra: slice vector helpers and a cyclic Jacobi
//! eigensolver for symmetric matrices.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::tolerance;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

#[inline]
pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

#[inline]
pub fn add_scaled(acc: &mut [f64], s: f64, v: &[f64]) {
    for (a, x) in acc.iter_mut().zip(v) {
        *a += s * x;
    }
}

pub fn normalize(v: &mut [f64]) -> f64 {
    let n = norm(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Largest entrywise asymmetry `|a_ij - a_ji|`.
pub fn symmetry_defect(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

/// Eigen-decomposition of a symmetric matrix.
///
/// `values` are sorted by decreasing absolute value; column `i` of
/// `vectors` is the unit eigenvector of `values[i]`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl SymmetricEigen {
    pub fn vector(&self, i: usize) -> Vec<f64> {
        self.vectors.column(i).iter().copied().collect()
    }

    /// `V diag(values) V^T`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let d = DMatrix::from_diagonal(&DVector::from_vec(self.values.clone()));
        &self.vectors * d * self.vectors.transpose()
    }
}

/// Cyclic Jacobi rotations until the off-diagonal Frobenius mass drops
/// below `tol` (absolute, scaled by the matrix norm when that exceeds one).
pub fn symmetric_eigen(a: &DMatrix<f64>, tol: f64) -> Result<SymmetricEigen> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    let defect = symmetry_defect(a);
    if defect > tolerance::EIGEN_SYMMETRY {
        return Err(Error::NotSymmetric(defect));
    }
    let n = a.nrows();
    let mut m = a.clone();
    // symmetrize exactly so rotations see a symmetric input
    for i in 0..n {
        for j in (i + 1)..n {
            let s = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = s;
            m[(j, i)] = s;
        }
    }
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = m.norm().max(1.0);
    let threshold = tol * scale;

    let off = |m: &DMatrix<f64>| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[(i, j)] * m[(i, j)];
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    loop {
        let o = off(&m);
        if o <= threshold {
            break;
        }
        if sweeps >= tolerance::JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence { sweeps, off: o });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps Jacobi output order among ties
    order.sort_by(|&i, &j| m[(j, j)].abs().total_cmp(&m[(i, i)].abs()));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(SymmetricEigen { values, vectors })
}

/// Operator (spectral) norm of a symmetric matrix.
pub fn symmetric_op_norm(a: &DMatrix<f64>) -> Result<f64> {
    let eig = symmetric_eigen(a, tolerance::JACOBI_TOL)?;
    Ok(eig.values.first().map(|v| v.abs()).unwrap_or(0.0))
}

/// Operator norm of a general square matrix by power iteration on `A^T A`.
pub fn op_norm_power(a: &DMatrix<f64>, iterations: usize) -> f64 {
    let n = a.ncols();
    if n == 0 {
        return 0.0;
    }
    let ata = a.transpose() * a;
    let mut x = DVector::from_fn(n, |i, _| 1.0 + 0.1 * i as f64);
    x /= x.norm();
    let mut lambda = 0.0;
    for _ in 0..iterations {
        let y = &ata * &x;
        let ny = y.norm();
        if ny == 0.0 {
            return 0.0;
        }
        lambda = x.dot(&y);
        x = y / ny;
    }
    lambda.max(0.0).sqrt()
}
