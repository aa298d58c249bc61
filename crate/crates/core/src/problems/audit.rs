//! Randomized certification of declared problem constants.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{ProblemConstants, ProblemError, ProblemSpec, Sample};
use crate::linalg;

const MIN_TRIALS: usize = 1000;
const REL_TOL: f64 = 1e-9;
/// Closer pairs are dominated by rounding in the difference quotient.
const MIN_PAIR_DISTANCE: f64 = 1e-6;

/// Largest values observed during an audit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalConstants {
    pub g: f64,
    pub l: f64,
    pub max_abs_loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub declared: ProblemConstants,
    pub empirical: EmpiricalConstants,
    pub trials: usize,
}

/// Uniform point in the ball of radius `r`; with probability 1/2 on its boundary.
fn ball_point<R: Rng + ?Sized>(d: usize, r: f64, rng: &mut R) -> Vec<f64> {
    let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let n = linalg::norm(&v).max(f64::MIN_POSITIVE);
    let radius = if rng.random_bool(0.5) { r } else { r * rng.random::<f64>().powf(1.0 / d as f64) };
    v.iter_mut().for_each(|e| *e *= radius / n);
    v
}

fn fmt_point(x: &[f64], y: &[f64]) -> String {
    format!("x={x:?}, y={y:?}")
}

/// Checks the declared constants of `p` on `trials` random point pairs and
/// samples drawn from `samples`.
pub fn audit_constants(p: &ProblemSpec, samples: &[Sample], trials: usize, seed: u64) -> Result<AuditReport, ProblemError> {
    if trials < MIN_TRIALS {
        return Err(ProblemError::Invalid(format!("audit needs at least {MIN_TRIALS} trials")));
    }
    if samples.is_empty() {
        return Err(ProblemError::Invalid("audit needs at least one sample".into()));
    }
    let dm = p.domain;
    let k = p.constants;
    let agents = p.agent_count().unwrap_or(1);
    let convex = p.family.is_convex_concave();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut emp = EmpiricalConstants { g: 0.0, l: 0.0, max_abs_loss: 0.0 };
    let (mut gx, mut gy) = (vec![0.0; dm.d_x], vec![0.0; dm.d_y]);
    let (mut hx, mut hy) = (vec![0.0; dm.d_x], vec![0.0; dm.d_y]);

    let violation = |inequality: &str, witness: String| ProblemError::ConstantViolation {
        inequality: inequality.to_string(),
        witness,
    };

    for _ in 0..trials {
        let agent = rng.random_range(0..agents);
        let s = &samples[rng.random_range(0..samples.len())];
        let (x, y) = (ball_point(dm.d_x, dm.radius_x, &mut rng), ball_point(dm.d_y, dm.radius_y, &mut rng));
        let (x2, y2) = (ball_point(dm.d_x, dm.radius_x, &mut rng), ball_point(dm.d_y, dm.radius_y, &mut rng));

        p.grad_into(agent, &x, &y, s, &mut gx, &mut gy);
        p.grad_into(agent, &x2, &y2, s, &mut hx, &mut hy);
        let f = p.loss_unchecked(agent, &x, &y, s);

        let gn = linalg::stacked_norm(&gx, &gy).max(linalg::stacked_norm(&hx, &hy));
        emp.g = emp.g.max(gn);
        if gn > k.g * (1.0 + REL_TOL) {
            return Err(violation(&format!("|grad| = {gn} <= G = {}", k.g), fmt_point(&x, &y)));
        }

        let dist = (linalg::dist(&x, &x2).powi(2) + linalg::dist(&y, &y2).powi(2)).sqrt();
        if dist > MIN_PAIR_DISTANCE {
            let gd = (linalg::dist(&gx, &hx).powi(2) + linalg::dist(&gy, &hy).powi(2)).sqrt();
            let ratio = gd / dist;
            emp.l = emp.l.max(ratio);
            if ratio > k.l * (1.0 + REL_TOL) {
                return Err(violation(
                    &format!("|grad difference| / distance = {ratio} <= L = {}", k.l),
                    format!("{} vs {}", fmt_point(&x, &y), fmt_point(&x2, &y2)),
                ));
            }
        }

        emp.max_abs_loss = emp.max_abs_loss.max(f.abs());
        if let Some(b) = k.b {
            if f.abs() > b * (1.0 + REL_TOL) {
                return Err(violation(&format!("|f| = {} <= B = {b}", f.abs()), fmt_point(&x, &y)));
            }
        }

        if convex {
            let tol = REL_TOL * (1.0 + f.abs());
            let dx: Vec<f64> = x2.iter().zip(&x).map(|(a, b)| a - b).collect();
            let lower = f + linalg::dot(&gx, &dx) + 0.5 * k.mu_x * linalg::dot(&dx, &dx);
            let fx2 = p.loss_unchecked(agent, &x2, &y, s);
            if fx2 < lower - tol {
                return Err(violation(
                    &format!("strong convexity in x with mu_x = {}", k.mu_x),
                    format!("{} and x'={x2:?}", fmt_point(&x, &y)),
                ));
            }
            let dy: Vec<f64> = y2.iter().zip(&y).map(|(a, b)| a - b).collect();
            let upper = f + linalg::dot(&gy, &dy) - 0.5 * k.mu_y * linalg::dot(&dy, &dy);
            let fy2 = p.loss_unchecked(agent, &x, &y2, s);
            if fy2 > upper + tol {
                return Err(violation(
                    &format!("strong concavity in y with mu_y = {}", k.mu_y),
                    format!("{} and y'={y2:?}", fmt_point(&x, &y)),
                ));
            }
        }
    }
    Ok(AuditReport { declared: k, empirical: emp, trials })
}
