//! Small dense linear-algebra helpers shared by the topology and problem modules.
//!
//! Matrices are stored row-major in a flat `Vec<f64>`; sizes here are tiny
//! (agent counts and parameter blocks), so nothing fancier is warranted.

use thiserror::Error;

/// Largest matrix the Jacobi solver accepts.
pub const MAX_EIGEN_DIM: usize = 4096;

/// Off-diagonal Frobenius norm at which Jacobi sweeps stop.
pub const JACOBI_TOLERANCE: f64 = 1e-12;

const MAX_SWEEPS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EigenError {
    #[error("matrix is not symmetric (max |a_ij - a_ji| = {0:e})")]
    NotSymmetric(f64),
    #[error("matrix dimension {0} exceeds the solver limit of {MAX_EIGEN_DIM}")]
    TooLarge(usize),
    #[error("matrix data length {len} does not match dimension {dim}x{dim}")]
    BadShape { dim: usize, len: usize },
    #[error("Jacobi iteration did not converge after {0} sweeps")]
    NoConvergence(usize),
}

/// Eigenvalues of a symmetric matrix (row-major, `dim x dim`), sorted descending.
///
/// Cyclic Jacobi rotations; converges when the off-diagonal Frobenius norm
/// drops to [`JACOBI_TOLERANCE`] relative to the matrix scale (absolute for
/// matrices with unit-scale entries, which is every mixing matrix).
pub fn symmetric_eigenvalues(data: &[f64], dim: usize) -> Result<Vec<f64>, EigenError> {
    if data.len() != dim * dim {
        return Err(EigenError::BadShape { dim, len: data.len() });
    }
    if dim > MAX_EIGEN_DIM {
        return Err(EigenError::TooLarge(dim));
    }
    let asym = max_asymmetry(data, dim);
    if asym > 1e-12 {
        return Err(EigenError::NotSymmetric(asym));
    }
    let mut a = data.to_vec();
    let scale = frobenius(&a).max(1.0);
    let tol = JACOBI_TOLERANCE * scale;

    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&a, dim) <= tol {
            let mut eig: Vec<f64> = (0..dim).map(|i| a[i * dim + i]).collect();
            eig.sort_by(|x, y| y.total_cmp(x));
            return Ok(eig);
        }
        for p in 0..dim {
            for q in (p + 1)..dim {
                let apq = a[p * dim + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * dim + p];
                let aqq = a[q * dim + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut a, dim, p, q, c, s);
            }
        }
    }
    Err(EigenError::NoConvergence(MAX_SWEEPS))
}

/// Applies the Jacobi rotation `J^T A J` zeroing entry (p, q).
fn rotate(a: &mut [f64], dim: usize, p: usize, q: usize, c: f64, s: f64) {
    for k in 0..dim {
        let akp = a[k * dim + p];
        let akq = a[k * dim + q];
        a[k * dim + p] = c * akp - s * akq;
        a[k * dim + q] = s * akp + c * akq;
    }
    for k in 0..dim {
        let apk = a[p * dim + k];
        let aqk = a[q * dim + k];
        a[p * dim + k] = c * apk - s * aqk;
        a[q * dim + k] = s * apk + c * aqk;
    }
}

fn off_diagonal_norm(a: &[f64], dim: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            if i != j {
                s += a[i * dim + j] * a[i * dim + j];
            }
        }
    }
    s.sqrt()
}

pub fn max_asymmetry(a: &[f64], dim: usize) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..dim {
        for j in (i + 1)..dim {
            worst = worst.max((a[i * dim + j] - a[j * dim + i]).abs());
        }
    }
    worst
}

pub fn frobenius(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Euclidean norm of the concatenation `(a; b)`.
pub fn stacked_norm(a: &[f64], b: &[f64]) -> f64 {
    (dot(a, a) + dot(b, b)).sqrt()
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for v in iter {
            s.add(v);
        }
        s
    }
}

/// Spectral norm of a symmetric matrix: the largest eigenvalue magnitude.
pub fn symmetric_spectral_norm(data: &[f64], dim: usize) -> Result<f64, EigenError> {
    let eig = symmetric_eigenvalues(data, dim)?;
    Ok(eig.iter().fold(0.0f64, |m, v| m.max(v.abs())))
}
