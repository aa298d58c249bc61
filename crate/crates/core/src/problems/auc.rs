//! Convex-concave AUC maximization in the SOLAM saddle formulation.
//!
//! Primal block `x = (w, a, b)` with `w` of length `dim`, dual scalar
//! `y = (alpha)`, class prior `p = P(label = +1)`:
//!
//! ```text
//! f = (1-p)(w.z - a)^2 [+] + p(w.z - b)^2 [-]
//!   + 2(1+alpha)(p w.z [-] - (1-p) w.z [+]) - p(1-p) alpha^2
//! ```

use serde::{Deserialize, Serialize};

use super::{DomainSpec, Objective, ProblemConstants, ProblemError, Sample};
use crate::linalg;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AucCc {
    pub dim: usize,
    pub p: f64,
}

impl AucCc {
    pub fn new(dim: usize, p: f64) -> Result<Self, ProblemError> {
        if !(p > 0.0 && p < 1.0) {
            return Err(ProblemError::Invalid(format!("class prior {p} must lie in (0, 1)")));
        }
        Ok(Self { dim, p })
    }

    /// Prior estimated as the positive fraction of `samples`.
    pub fn from_training(dim: usize, samples: &[Sample]) -> Result<Self, ProblemError> {
        let pos = samples.iter().filter(|s| s.label > 0.0).count();
        Self::new(dim, pos as f64 / samples.len().max(1) as f64)
    }

    /// Per-sample curvature bound. The loss is quadratic in `(w, a, b, alpha)`,
    /// so its Hessian is constant per sample; each of the squared, bilinear and
    /// dual blocks is bounded via the triangle inequality.
    fn sample_smoothness(&self, z_norm: f64, positive: bool) -> f64 {
        let q = if positive { 1.0 - self.p } else { self.p };
        2.0 * q * (z_norm * z_norm + 1.0) + 2.0 * q * z_norm + 2.0 * self.p * (1.0 - self.p)
    }

    pub(crate) fn certified_constants<'a>(
        &self,
        domain: &DomainSpec,
        samples: impl IntoIterator<Item = &'a Sample>,
    ) -> Result<ProblemConstants, ProblemError> {
        let radius = domain.radius_x.hypot(domain.radius_y);
        let (mut g, mut l) = (0.0f64, 0.0f64);
        for s in samples {
            if s.features.len() != self.dim {
                return Err(ProblemError::DimensionMismatch(format!(
                    "AUC sample has {} features, expected {}",
                    s.features.len(),
                    self.dim
                )));
            }
            let positive = s.label > 0.0;
            let z = linalg::norm(&s.features);
            let ls = self.sample_smoothness(z, positive);
            let q = if positive { 1.0 - self.p } else { self.p };
            // gradient at the origin is (-+2q z, 0, 0, 0)
            l = l.max(ls);
            g = g.max(ls * radius + 2.0 * q * z);
        }
        if l == 0.0 {
            return Err(ProblemError::Invalid("no samples to certify AUC constants".into()));
        }
        Ok(ProblemConstants { g, l, mu_x: 0.0, mu_y: 0.0, b: None })
    }
}

impl Objective for AucCc {
    fn loss(&self, _agent: usize, x: &[f64], y: &[f64], sample: &Sample) -> f64 {
        let p = self.p;
        let (w, ab) = x.split_at(self.dim);
        let alpha = y[0];
        let wz = linalg::dot(w, &sample.features);
        let dual = -p * (1.0 - p) * alpha * alpha;
        if sample.label > 0.0 {
            let r = wz - ab[0];
            (1.0 - p) * r * r - 2.0 * (1.0 + alpha) * (1.0 - p) * wz + dual
        } else {
            let r = wz - ab[1];
            p * r * r + 2.0 * (1.0 + alpha) * p * wz + dual
        }
    }

    fn grad_into(&self, _agent: usize, x: &[f64], y: &[f64], sample: &Sample, gx: &mut [f64], gy: &mut [f64]) {
        let p = self.p;
        let z = &sample.features;
        let (w, ab) = x.split_at(self.dim);
        let alpha = y[0];
        let wz = linalg::dot(w, z);
        let (coef_w, grad_a, grad_b, grad_alpha) = if sample.label > 0.0 {
            let r = wz - ab[0];
            let q = 1.0 - p;
            (2.0 * q * r - 2.0 * (1.0 + alpha) * q, -2.0 * q * r, 0.0, -2.0 * q * wz - 2.0 * p * q * alpha)
        } else {
            let r = wz - ab[1];
            (2.0 * p * r + 2.0 * (1.0 + alpha) * p, 0.0, -2.0 * p * r, 2.0 * p * wz - 2.0 * p * (1.0 - p) * alpha)
        };
        for (g, zi) in gx[..self.dim].iter_mut().zip(z) {
            *g = coef_w * zi;
        }
        gx[self.dim] = grad_a;
        gx[self.dim + 1] = grad_b;
        gy[0] = grad_alpha;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{finite_difference_error, Family, ProblemSpec};

    fn problem(samples: &[Sample]) -> ProblemSpec {
        let a = AucCc::from_training(3, samples).unwrap();
        let d = DomainSpec::new(5, 1, 2.0, 2.0).unwrap();
        ProblemSpec::with_certified_constants(Family::Auc(a), d, samples).unwrap()
    }

    fn samples() -> Vec<Sample> {
        vec![
            Sample::new(1.0, vec![0.5, -0.2, 0.9]),
            Sample::new(-1.0, vec![-0.3, 0.8, 0.1]),
            Sample::new(-1.0, vec![0.1, 0.1, -0.7]),
        ]
    }

    #[test]
    fn prior_from_training() {
        let p = problem(&samples());
        match &p.family {
            Family::Auc(a) => assert!((a.p - 1.0 / 3.0).abs() < 1e-15),
            _ => unreachable!(),
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let ss = samples();
        let p = problem(&ss);
        let x = [0.3, -0.4, 0.2, 0.1, -0.5];
        for s in &ss {
            let err = finite_difference_error(&p, 0, &x, &[0.7], s).unwrap();
            assert!(err <= 1e-5, "{err}");
        }
    }

    #[test]
    fn hand_evaluated_positive_loss() {
        let s = Sample::new(1.0, vec![1.0, 0.0, 0.0]);
        let a = AucCc::new(3, 0.5).unwrap();
        // wz = 1, a = 0: 0.5 * 1 - 2 * 1 * 0.5 * 1 - 0.25 * 0 = -0.5
        let v = a.loss(0, &[1.0, 0.0, 0.0, 0.0, 0.0], &[0.0], &s);
        assert!((v + 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_degenerate_prior() {
        assert!(AucCc::new(2, 0.0).is_err());
        assert!(AucCc::new(2, 1.0).is_err());
    }
}
