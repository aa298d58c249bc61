//! Strongly-convex strongly-concave quadratic family
//! `f_i(x, y; xi) = mu_x/2 |x|^2 - mu_y/2 |y|^2 + x^T A_i y + b^T x + c^T y`,
//! where the sample features are the stacked data vector `[b; c]`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{DomainSpec, Objective, ProblemConstants, ProblemError, Sample};
use crate::linalg;

/// Residual tolerance for the saddle linear solve.
const SADDLE_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticScsc {
    pub d_x: usize,
    pub d_y: usize,
    pub mu_x: f64,
    pub mu_y: f64,
    /// One row-major `d_x x d_y` coupling per agent, or a single shared one.
    pub couplings: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaddlePoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub residual: f64,
}

impl QuadraticScsc {
    pub fn new(d_x: usize, d_y: usize, mu_x: f64, mu_y: f64, couplings: Vec<Vec<f64>>) -> Result<Self, ProblemError> {
        if !(mu_x >= 0.0 && mu_y >= 0.0) {
            return Err(ProblemError::Invalid("moduli must be nonnegative".into()));
        }
        if couplings.is_empty() {
            return Err(ProblemError::Invalid("at least one coupling matrix is required".into()));
        }
        if let Some(bad) = couplings.iter().find(|a| a.len() != d_x * d_y) {
            return Err(ProblemError::DimensionMismatch(format!(
                "coupling has {} entries, expected {}",
                bad.len(),
                d_x * d_y
            )));
        }
        Ok(Self { d_x, d_y, mu_x, mu_y, couplings })
    }

    /// Random instance with per-agent couplings whose entries are
    /// `N(0, 1) * scale / sqrt(max(d_x, d_y))`.
    pub fn random<R: Rng + ?Sized>(
        m: usize,
        d_x: usize,
        d_y: usize,
        mu_x: f64,
        mu_y: f64,
        coupling_scale: f64,
        rng: &mut R,
    ) -> Result<Self, ProblemError> {
        let s = coupling_scale / (d_x.max(d_y) as f64).sqrt();
        let couplings = (0..m.max(1))
            .map(|_| (0..d_x * d_y).map(|_| s * rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        Self::new(d_x, d_y, mu_x, mu_y, couplings)
    }

    pub fn coupling(&self, agent: usize) -> &[f64] {
        if self.couplings.len() == 1 {
            &self.couplings[0]
        } else {
            &self.couplings[agent]
        }
    }

    /// Average coupling over `m` agents.
    pub fn mean_coupling(&self, m: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.d_x * self.d_y];
        for i in 0..m {
            for (o, a) in out.iter_mut().zip(self.coupling(i)) {
                *o += a / m as f64;
            }
        }
        out
    }

    /// Symmetric full Hessian-like block `[[mu_x I, A], [A^T, -mu_y I]]` for `coupling`.
    fn block_matrix(&self, coupling: &[f64]) -> Vec<f64> {
        let dim = self.d_x + self.d_y;
        let mut h = vec![0.0; dim * dim];
        for i in 0..self.d_x {
            h[i * dim + i] = self.mu_x;
            for j in 0..self.d_y {
                let a = coupling[i * self.d_y + j];
                h[i * dim + self.d_x + j] = a;
                h[(self.d_x + j) * dim + i] = a;
            }
        }
        for j in 0..self.d_y {
            h[(self.d_x + j) * dim + self.d_x + j] = -self.mu_y;
        }
        h
    }

    /// Smoothness constant: largest spectral norm over the agent blocks.
    pub fn smoothness(&self) -> Result<f64, ProblemError> {
        let dim = self.d_x + self.d_y;
        let mut l = 0.0f64;
        for a in &self.couplings {
            let n = linalg::symmetric_spectral_norm(&self.block_matrix(a), dim)
                .map_err(|e| ProblemError::Invalid(e.to_string()))?;
            l = l.max(n);
        }
        Ok(l)
    }

    pub(crate) fn certified_constants<'a>(
        &self,
        domain: &DomainSpec,
        samples: impl IntoIterator<Item = &'a Sample>,
    ) -> Result<ProblemConstants, ProblemError> {
        let l = self.smoothness()?;
        let mut data = 0.0f64;
        for s in samples {
            if s.features.len() != self.d_x + self.d_y {
                return Err(ProblemError::DimensionMismatch(format!(
                    "quadratic sample has {} features, expected {}",
                    s.features.len(),
                    self.d_x + self.d_y
                )));
            }
            data = data.max(linalg::norm(&s.features));
        }
        let radius = domain.radius_x.hypot(domain.radius_y);
        let g = (l * radius + data).max(f64::MIN_POSITIVE);
        Ok(ProblemConstants { g, l: l.max(f64::MIN_POSITIVE), mu_x: self.mu_x, mu_y: self.mu_y, b: None })
    }

    /// Saddle of `mu_x/2|x|^2 - mu_y/2|y|^2 + x^T A y + b^T x + c^T y` for
    /// the given mean coupling and data means; must lie inside the domain.
    pub fn saddle_for_means(
        &self,
        mean_coupling: &[f64],
        b: &[f64],
        c: &[f64],
        domain: &DomainSpec,
    ) -> Result<SaddlePoint, ProblemError> {
        if !(self.mu_x > 0.0 && self.mu_y > 0.0) {
            return Err(ProblemError::Invalid("closed-form saddle needs mu_x, mu_y > 0".into()));
        }
        let dim = self.d_x + self.d_y;
        let h = self.block_matrix(mean_coupling);
        let mat = DMatrix::from_row_slice(dim, dim, &h);
        let rhs = DVector::from_iterator(dim, b.iter().chain(c).map(|v| -v));
        let sol = mat
            .clone()
            .lu()
            .solve(&rhs)
            .ok_or_else(|| ProblemError::Invalid("saddle system is singular".into()))?;
        let residual = (&mat * &sol - &rhs).norm();
        if residual > SADDLE_RESIDUAL_TOL * (1.0 + rhs.norm()) {
            return Err(ProblemError::Invalid(format!("saddle residual {residual:e} too large")));
        }
        let x: Vec<f64> = sol.rows(0, self.d_x).iter().copied().collect();
        let y: Vec<f64> = sol.rows(self.d_x, self.d_y).iter().copied().collect();
        let (x_norm, y_norm) = (linalg::norm(&x), linalg::norm(&y));
        if x_norm >= domain.radius_x || y_norm >= domain.radius_y {
            return Err(ProblemError::SaddleOutsideDomain { x_norm, y_norm });
        }
        Ok(SaddlePoint { x, y, residual })
    }

    /// Saddle of the empirical objective over agent shards.
    pub fn empirical_saddle(&self, shards: &[Vec<Sample>], domain: &DomainSpec) -> Result<SaddlePoint, ProblemError> {
        let m = shards.len();
        let mut mean = vec![0.0; self.d_x + self.d_y];
        for shard in shards {
            let w = 1.0 / (m * shard.len()) as f64;
            for s in shard {
                for (o, v) in mean.iter_mut().zip(&s.features) {
                    *o += w * v;
                }
            }
        }
        let (b, c) = mean.split_at(self.d_x);
        self.saddle_for_means(&self.mean_coupling(m), b, c, domain)
    }

    /// `mu_x/2|x|^2 - mu_y/2|y|^2 + x^T A y + b^T x + c^T y`.
    pub fn evaluate(&self, coupling: &[f64], x: &[f64], y: &[f64], b: &[f64], c: &[f64]) -> f64 {
        let mut bilinear = 0.0;
        for i in 0..self.d_x {
            bilinear += x[i] * linalg::dot(&coupling[i * self.d_y..(i + 1) * self.d_y], y);
        }
        0.5 * self.mu_x * linalg::dot(x, x) - 0.5 * self.mu_y * linalg::dot(y, y)
            + bilinear
            + linalg::dot(b, x)
            + linalg::dot(c, y)
    }

    /// Gradient of [`Self::evaluate`].
    pub fn evaluate_grad(
        &self,
        coupling: &[f64],
        x: &[f64],
        y: &[f64],
        b: &[f64],
        c: &[f64],
        gx: &mut [f64],
        gy: &mut [f64],
    ) {
        for i in 0..self.d_x {
            gx[i] = self.mu_x * x[i] + linalg::dot(&coupling[i * self.d_y..(i + 1) * self.d_y], y) + b[i];
        }
        for j in 0..self.d_y {
            let mut atx = 0.0;
            for i in 0..self.d_x {
                atx += coupling[i * self.d_y + j] * x[i];
            }
            gy[j] = -self.mu_y * y[j] + atx + c[j];
        }
    }
}

impl Objective for QuadraticScsc {
    fn loss(&self, agent: usize, x: &[f64], y: &[f64], sample: &Sample) -> f64 {
        let (b, c) = sample.features.split_at(self.d_x);
        self.evaluate(self.coupling(agent), x, y, b, c)
    }

    fn grad_into(&self, agent: usize, x: &[f64], y: &[f64], sample: &Sample, gx: &mut [f64], gy: &mut [f64]) {
        let (b, c) = sample.features.split_at(self.d_x);
        self.evaluate_grad(self.coupling(agent), x, y, b, c, gx, gy)
    }
}
