//! Bounded nonconvex-nonconcave family `f_i = B sin(x.u_i + xi) sin(y.v_i)`
//! with unit directions `u_i`, `v_i` and a scalar sample phase `xi`.
//!
//! In the plane spanned by `(u_i, 0)` and `(0, v_i)` the Hessian is
//! `B [[-s, c], [c, -s]]` with `s = sin sin`, `c = cos cos`, so `|f| <= B`,
//! gradient norm `<= B` and smoothness `<= B`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Objective, ProblemConstants, ProblemError, Sample};
use crate::linalg;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SineNcnc {
    pub d_x: usize,
    pub d_y: usize,
    pub amplitude: f64,
    /// Unit primal direction per agent (or one shared).
    pub directions_x: Vec<Vec<f64>>,
    /// Unit dual direction per agent (or one shared).
    pub directions_y: Vec<Vec<f64>>,
}

fn unit(v: Vec<f64>) -> Result<Vec<f64>, ProblemError> {
    let n = linalg::norm(&v);
    if !(n > 0.0 && n.is_finite()) {
        return Err(ProblemError::Invalid("direction must be nonzero".into()));
    }
    Ok(v.into_iter().map(|e| e / n).collect())
}

fn random_unit<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        if let Ok(u) = unit(v) {
            return u;
        }
    }
}

impl SineNcnc {
    /// Directions are normalized on construction.
    pub fn new(
        amplitude: f64,
        directions_x: Vec<Vec<f64>>,
        directions_y: Vec<Vec<f64>>,
    ) -> Result<Self, ProblemError> {
        if !(amplitude > 0.0) {
            return Err(ProblemError::Invalid("amplitude B must be positive".into()));
        }
        if directions_x.is_empty() || directions_x.len() != directions_y.len() {
            return Err(ProblemError::Invalid("need matching nonempty direction lists".into()));
        }
        let d_x = directions_x[0].len();
        let d_y = directions_y[0].len();
        if directions_x.iter().any(|u| u.len() != d_x) || directions_y.iter().any(|v| v.len() != d_y) {
            return Err(ProblemError::DimensionMismatch("direction lengths differ".into()));
        }
        let directions_x = directions_x.into_iter().map(unit).collect::<Result<_, _>>()?;
        let directions_y = directions_y.into_iter().map(unit).collect::<Result<_, _>>()?;
        Ok(Self { d_x, d_y, amplitude, directions_x, directions_y })
    }

    /// Scalar blocks with `u = v = 1` shared by all agents.
    pub fn scalar(amplitude: f64) -> Result<Self, ProblemError> {
        Self::new(amplitude, vec![vec![1.0]], vec![vec![1.0]])
    }

    /// Per-agent random unit directions.
    pub fn random<R: Rng + ?Sized>(m: usize, d_x: usize, d_y: usize, amplitude: f64, rng: &mut R) -> Result<Self, ProblemError> {
        let dx = (0..m).map(|_| random_unit(d_x, rng)).collect();
        let dy = (0..m).map(|_| random_unit(d_y, rng)).collect();
        Self::new(amplitude, dx, dy)
    }

    fn directions(&self, agent: usize) -> (&[f64], &[f64]) {
        let i = if self.directions_x.len() == 1 { 0 } else { agent };
        (&self.directions_x[i], &self.directions_y[i])
    }

    pub(crate) fn certified_constants(&self) -> ProblemConstants {
        let b = self.amplitude;
        ProblemConstants { g: b, l: b, mu_x: 0.0, mu_y: 0.0, b: Some(b) }
    }
}

impl Objective for SineNcnc {
    fn loss(&self, agent: usize, x: &[f64], y: &[f64], sample: &Sample) -> f64 {
        let (u, v) = self.directions(agent);
        let xi = sample.features[0];
        self.amplitude * (linalg::dot(x, u) + xi).sin() * linalg::dot(y, v).sin()
    }

    fn grad_into(&self, agent: usize, x: &[f64], y: &[f64], sample: &Sample, gx: &mut [f64], gy: &mut [f64]) {
        let (u, v) = self.directions(agent);
        let xi = sample.features[0];
        let (sa, ca) = (linalg::dot(x, u) + xi).sin_cos();
        let (sb, cb) = linalg::dot(y, v).sin_cos();
        let kx = self.amplitude * ca * sb;
        let ky = self.amplitude * sa * cb;
        for (g, ui) in gx.iter_mut().zip(u) {
            *g = kx * ui;
        }
        for (g, vi) in gy.iter_mut().zip(v) {
            *g = ky * vi;
        }
    }
}
