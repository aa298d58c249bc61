//! Minimax problem families, their stochastic gradients and verified constants.
//!
//! Every family evaluates a per-sample loss `f_i(x, y; xi)` for agent `i`.
//! Samples are dense [`Sample`] records; how the features are interpreted is
//! family specific (see the individual modules).

mod audit;
mod auc;
mod quadratic;
mod sine;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;

pub use audit::{audit_constants, AuditReport, EmpiricalConstants};
pub use auc::AucCc;
pub use quadratic::{QuadraticScsc, SaddlePoint};
pub use sine::SineNcnc;

/// Slack allowed on the ball constraint before a point counts as outside the domain.
pub const DOMAIN_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("point outside the domain: {0}")]
    DomainViolation(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("declared constant violated: {inequality} (witness {witness})")]
    ConstantViolation { inequality: String, witness: String },
    #[error("saddle point lies outside the domain (|x*| = {x_norm}, |y*| = {y_norm})")]
    SaddleOutsideDomain { x_norm: f64, y_norm: f64 },
    #[error("invalid problem: {0}")]
    Invalid(String),
}

/// One data point. `features` is dense; `label` is +-1 for classification
/// data and unused by the synthetic families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub label: f64,
    pub features: Vec<f64>,
}

impl Sample {
    pub fn new(label: f64, features: Vec<f64>) -> Self {
        Self { label, features }
    }

    pub fn unlabeled(features: Vec<f64>) -> Self {
        Self { label: 0.0, features }
    }
}

/// Dimensions and Euclidean ball radii of the primal and dual domains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub d_x: usize,
    pub d_y: usize,
    pub radius_x: f64,
    pub radius_y: f64,
}

impl DomainSpec {
    pub fn new(d_x: usize, d_y: usize, radius_x: f64, radius_y: f64) -> Result<Self, ProblemError> {
        if !(radius_x > 0.0 && radius_y > 0.0) {
            return Err(ProblemError::Invalid("ball radii must be positive".into()));
        }
        if d_x == 0 || d_y == 0 {
            return Err(ProblemError::Invalid("dimensions must be positive".into()));
        }
        Ok(Self { d_x, d_y, radius_x, radius_y })
    }

    pub fn check(&self, x: &[f64], y: &[f64]) -> Result<(), ProblemError> {
        if x.len() != self.d_x || y.len() != self.d_y {
            return Err(ProblemError::DimensionMismatch(format!(
                "expected ({}, {}), got ({}, {})",
                self.d_x,
                self.d_y,
                x.len(),
                y.len()
            )));
        }
        let (nx, ny) = (linalg::norm(x), linalg::norm(y));
        if nx > self.radius_x + DOMAIN_SLACK || ny > self.radius_y + DOMAIN_SLACK {
            return Err(ProblemError::DomainViolation(format!(
                "|x| = {nx} (C_x = {}), |y| = {ny} (C_y = {})",
                self.radius_x, self.radius_y
            )));
        }
        Ok(())
    }
}

/// Lipschitz, smoothness and curvature constants valid over the domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemConstants {
    pub g: f64,
    pub l: f64,
    pub mu_x: f64,
    pub mu_y: f64,
    /// Uniform bound on `|f|`, attached only to bounded (NC-NC) families.
    pub b: Option<f64>,
}

impl ProblemConstants {
    pub fn mu(&self) -> f64 {
        self.mu_x.min(self.mu_y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Quadratic(QuadraticScsc),
    Auc(AucCc),
    Sine(SineNcnc),
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Quadratic(_) => "quadratic",
            Family::Auc(_) => "auc",
            Family::Sine(_) => "sine",
        }
    }

    /// Whether the family is convex in `x` and concave in `y` for every sample.
    pub fn is_convex_concave(&self) -> bool {
        !matches!(self, Family::Sine(_))
    }
}

/// Dispatch interface implemented by each family.
pub(crate) trait Objective {
    fn loss(&self, agent: usize, x: &[f64], y: &[f64], sample: &Sample) -> f64;
    fn grad_into(&self, agent: usize, x: &[f64], y: &[f64], sample: &Sample, gx: &mut [f64], gy: &mut [f64]);
}

impl Family {
    fn objective(&self) -> &dyn Objective {
        match self {
            Family::Quadratic(q) => q,
            Family::Auc(a) => a,
            Family::Sine(s) => s,
        }
    }
}

/// A fully specified minimax problem: family, domain and certified constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub family: Family,
    pub domain: DomainSpec,
    pub constants: ProblemConstants,
}

impl ProblemSpec {
    /// Constants derived analytically from the family and the given samples,
    /// which must include every sample the problem will be evaluated on.
    pub fn with_certified_constants<'a>(
        family: Family,
        domain: DomainSpec,
        samples: impl IntoIterator<Item = &'a Sample>,
    ) -> Result<Self, ProblemError> {
        let constants = match &family {
            Family::Quadratic(q) => q.certified_constants(&domain, samples)?,
            Family::Auc(a) => a.certified_constants(&domain, samples)?,
            Family::Sine(s) => s.certified_constants(),
        };
        let spec = Self { family, domain, constants };
        spec.validate_shapes()?;
        Ok(spec)
    }

    fn validate_shapes(&self) -> Result<(), ProblemError> {
        let (dx, dy) = match &self.family {
            Family::Quadratic(q) => (q.d_x, q.d_y),
            Family::Auc(a) => (a.dim + 2, 1),
            Family::Sine(s) => (s.d_x, s.d_y),
        };
        if dx != self.domain.d_x || dy != self.domain.d_y {
            return Err(ProblemError::DimensionMismatch(format!(
                "family dims ({dx}, {dy}) vs domain ({}, {})",
                self.domain.d_x, self.domain.d_y
            )));
        }
        Ok(())
    }

    /// Number of agents the family carries per-agent parameters for, if any.
    pub fn agent_count(&self) -> Option<usize> {
        match &self.family {
            Family::Quadratic(q) => (q.couplings.len() > 1).then_some(q.couplings.len()),
            Family::Auc(_) => None,
            Family::Sine(s) => (s.directions_x.len() > 1).then_some(s.directions_x.len()),
        }
    }

    pub fn loss(&self, agent: usize, x: &[f64], y: &[f64], sample: &Sample) -> Result<f64, ProblemError> {
        self.domain.check(x, y)?;
        Ok(self.loss_unchecked(agent, x, y, sample))
    }

    pub fn grad(
        &self,
        agent: usize,
        x: &[f64],
        y: &[f64],
        sample: &Sample,
    ) -> Result<(Vec<f64>, Vec<f64>), ProblemError> {
        self.domain.check(x, y)?;
        let mut gx = vec![0.0; self.domain.d_x];
        let mut gy = vec![0.0; self.domain.d_y];
        self.grad_into(agent, x, y, sample, &mut gx, &mut gy);
        Ok((gx, gy))
    }

    /// Loss without the domain check; callers guarantee feasibility.
    pub fn loss_unchecked(&self, agent: usize, x: &[f64], y: &[f64], sample: &Sample) -> f64 {
        self.family.objective().loss(agent, x, y, sample)
    }

    /// Gradient without the domain check, written into caller buffers.
    pub fn grad_into(&self, agent: usize, x: &[f64], y: &[f64], sample: &Sample, gx: &mut [f64], gy: &mut [f64]) {
        self.family.objective().grad_into(agent, x, y, sample, gx, gy)
    }
}

/// Projects `v` onto the Euclidean ball of radius `radius`, in place.
pub fn project_ball_in_place(v: &mut [f64], radius: f64) {
    let n = linalg::norm(v);
    if n > radius {
        let scale = radius / n;
        v.iter_mut().for_each(|e| *e *= scale);
    }
}

/// Relative error of central differences with step `1e-5` against the
/// analytic gradient, normalized by `max(1, |grad|)`.
pub fn finite_difference_error(p: &ProblemSpec, agent: usize, x: &[f64], y: &[f64], s: &Sample) -> Result<f64, ProblemError> {
        let h = 1e-5;
        let (gx, gy) = p.grad(agent, x, y, s)?;
        let mut num = Vec::new();
        for i in 0..x.len() {
            let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
            xp[i] += h;
            xm[i] -= h;
            num.push((p.loss_unchecked(agent, &xp, y, s) - p.loss_unchecked(agent, &xm, y, s)) / (2.0 * h));
        }
        for i in 0..y.len() {
            let (mut yp, mut ym) = (y.to_vec(), y.to_vec());
            yp[i] += h;
            ym[i] -= h;
            num.push((p.loss_unchecked(agent, x, &yp, s) - p.loss_unchecked(agent, x, &ym, s)) / (2.0 * h));
        }
        let analytic: Vec<f64> = gx.iter().chain(gy.iter()).copied().collect();
        let diff = linalg::dist(&analytic, &num);
        Ok(diff / linalg::norm(&analytic).max(1.0))
}
