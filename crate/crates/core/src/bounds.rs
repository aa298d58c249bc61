//! Closed-form and partial-sum stability, optimization and risk bounds.
//!
//! Every bound returns a [`BoundReport`] whose value is the sum of its named
//! terms. Topology terms follow two conventions: at `lambda = 0` the constant
//! `C_lambda` is taken as 0, and at `lambda = 1` any bound containing
//! `1/(1 - lambda)` or `C_lambda` is divergent.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::Schedule;
use crate::linalg::CompensatedSum;
use crate::problems::ProblemConstants;
use crate::topology::c_lambda_or_zero;

const SQRT_2: f64 = std::f64::consts::SQRT_2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundError {
    #[error("the NC-NC decaying bound needs a loss bound B")]
    MissingB,
    #[error("invalid bound input: {0}")]
    InvalidInput(String),
    #[error("convergence condition fails: {0}")]
    ConvergenceCondition(String),
    #[error("bound needs a {0} schedule")]
    WrongSchedule(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub constants: ProblemConstants,
    pub n: usize,
    pub m: usize,
    pub t: usize,
    pub lambda: f64,
    pub schedule: Schedule,
    pub c_x: f64,
    pub c_y: f64,
}

impl BoundInputs {
    fn validate(&self) -> Result<(), BoundError> {
        let k = &self.constants;
        if self.n == 0 || self.m == 0 || self.t == 0 {
            return Err(BoundError::InvalidInput("n, m and T must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(BoundError::InvalidInput(format!("lambda = {} outside [0, 1]", self.lambda)));
        }
        if !(k.g >= 0.0 && k.l > 0.0 && k.mu_x >= 0.0 && k.mu_y >= 0.0) {
            return Err(BoundError::InvalidInput("need G >= 0, L > 0, mu >= 0".into()));
        }
        if !(self.c_x >= 0.0 && self.c_y >= 0.0) {
            return Err(BoundError::InvalidInput("radii must be nonnegative".into()));
        }
        Ok(())
    }

    fn mu(&self) -> f64 {
        self.constants.mu()
    }

    fn fixed_rates(&self) -> Result<(f64, f64), BoundError> {
        match self.schedule {
            Schedule::Fixed { eta_x, eta_y } => Ok((eta_x.min(eta_y), eta_x.max(eta_y))),
            Schedule::Decaying { .. } => Err(BoundError::WrongSchedule("fixed")),
        }
    }

    fn decay(&self) -> Result<(f64, f64), BoundError> {
        match self.schedule {
            Schedule::Decaying { mu, c, .. } => Ok((mu, c)),
            Schedule::Fixed { .. } => Err(BoundError::WrongSchedule("decaying")),
        }
    }

    /// `1/(1 - lambda)`, infinite at `lambda = 1`.
    fn inv_gap(&self) -> f64 {
        if self.lambda >= 1.0 {
            f64::INFINITY
        } else {
            1.0 / (1.0 - self.lambda)
        }
    }

    /// `C_lambda` for decay exponent `k`, infinite at `lambda = 1`.
    fn c_lambda(&self, k: f64) -> Result<f64, BoundError> {
        if self.lambda >= 1.0 {
            return Ok(f64::INFINITY);
        }
        c_lambda_or_zero(self.lambda, k).map_err(|e| BoundError::InvalidInput(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundTerm {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    /// Sum of `terms`; infinite when a denominator vanishes.
    pub value: f64,
    /// Set when a denominator vanishes or a convergence condition fails.
    pub divergent: bool,
    pub terms: Vec<BoundTerm>,
    /// A simplified closed form of the same bound, where one exists.
    pub closed_form: Option<f64>,
    pub warnings: Vec<String>,
}

impl BoundReport {
    fn new(name: &str, terms: Vec<(&str, f64)>) -> Self {
        let terms: Vec<BoundTerm> = terms.into_iter().map(|(n, v)| BoundTerm { name: n.to_string(), value: v }).collect();
        let value = if terms.iter().any(|t| t.value.is_infinite()) {
            f64::INFINITY
        } else {
            terms.iter().map(|t| t.value).collect::<CompensatedSum>().value()
        };
        Self { name: name.to_string(), value, divergent: !value.is_finite(), terms, closed_form: None, warnings: Vec::new() }
    }

    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.name == name).map(|t| t.value)
    }
}

/// Contraction factor `1 - eta_min L mu / (L + mu)` of one SC-SC step.
fn contraction(l: f64, mu: f64, eta_min: f64) -> f64 {
    1.0 - eta_min * l * mu / (l + mu)
}

/// Double-sum SC-SC argument stability bound for any schedule, in `O(T)`.
pub fn scsc_stability_general(inp: &BoundInputs) -> Result<BoundReport, BoundError> {
    inp.validate()?;
    let (g, l, mu) = (inp.constants.g, inp.constants.l, inp.mu());
    if !(mu > 0.0) {
        return Err(BoundError::InvalidInput("SC-SC bound needs mu > 0".into()));
    }
    let t = inp.t;
    let eta_max: Vec<f64> = (0..t).map(|k| inp.schedule.eta_max(k)).collect();
    // inner[k] = sum_{s<k} eta_s lambda^(k-1-s)
    let mut inner = vec![0.0; t];
    for k in 1..t {
        inner[k] = inp.lambda * inner[k - 1] + eta_max[k - 1];
    }
    let (mut sample, mut topo) = (CompensatedSum::new(), CompensatedSum::new());
    let mut suffix = 1.0;
    for k in (0..t).rev() {
        sample.add(eta_max[k] * suffix);
        if k >= 1 {
            topo.add(eta_max[k] * inner[k] * suffix);
        }
        suffix *= contraction(l, mu, inp.schedule.eta_min(k));
    }
    let n = inp.n as f64;
    Ok(BoundReport::new(
        "scsc_stability_general",
        vec![("sample", 2.0 * g / n * sample.value()), ("topology", 4.0 * g * l * topo.value())],
    ))
}

/// Fixed-rate SC-SC argument stability:
/// `2G (L+mu)/(eta_min L mu) (2 eta_max^2 L/(1-lambda) + eta_max/n)`.
pub fn scsc_stability_fixed(inp: &BoundInputs) -> Result<BoundReport, BoundError> {
    inp.validate()?;
    let (eta_min, eta_max) = inp.fixed_rates()?;
    let (g, l, mu) = (inp.constants.g, inp.constants.l, inp.mu());
    if !(mu > 0.0) {
        return Err(BoundError::InvalidInput("SC-SC bound needs mu > 0".into()));
    }
    let pre = 2.0 * g * (l + mu) / (eta_min * l * mu);
    let topo = if inp.lambda >= 1.0 { f64::INFINITY } else { pre * 2.0 * eta_max * eta_max * l * inp.inv_gap() };
    Ok(BoundReport::new("scsc_stability_fixed", vec![("sample", pre * eta_max / inp.n as f64), ("topology", topo)]))
}

/// Decaying-rate SC-SC argument stability via exact partial sums; flagged
/// divergent when `2c < L/(L+mu) + 1`. The simplified closed form is attached
/// when that condition holds.
pub fn scsc_stability_decaying(inp: &BoundInputs) -> Result<BoundReport, BoundError> {
    inp.validate()?;
    let (_, c) = inp.decay()?;
    let (g, l, mu) = (inp.constants.g, inp.constants.l, inp.mu());
    if !(mu > 0.0) {
        return Err(BoundError::InvalidInput("SC-SC bound needs mu > 0".into()));
    }
    let a = l / (l + mu);
    let big_t = inp.t as f64;
    let ta = big_t.powf(a);
    let cl = inp.c_lambda(c)?;
    let (mut s1, mut s2) = (CompensatedSum::new(), CompensatedSum::new());
    for k in 0..inp.t {
        let w = ((k + 1) as f64).powf(a - c);
        s1.add(w);
        if k >= 1 {
            s2.add(w / (k as f64).powf(c));
        }
    }
    let sample = 2.0 * g / (mu * inp.n as f64 * ta) * s1.value();
    let topo = if cl == 0.0 || s2.value() == 0.0 { 0.0 } else { 4.0 * g * l / (mu * mu * ta) * cl * s2.value() };
    let mut r = BoundReport::new("scsc_stability_decaying", vec![("sample", sample), ("topology", topo)]);
    if 2.0 * c < a + 1.0 {
        r.divergent = true;
        r.warnings.push(format!("2c = {} < L/(L+mu) + 1 = {}: bound grows without limit in T", 2.0 * c, a + 1.0));
    } else {
        r.closed_form = Some(scsc_decaying_simplified(inp, c, a, cl));
    }
    Ok(r)
}

/// Simplified decaying-rate SC-SC stability, valid when `2c >= L/(L+mu) + 1`.
fn scsc_decaying_simplified(inp: &BoundInputs, c: f64, a: f64, cl: f64) -> f64 {
    let (g, l, mu) = (inp.constants.g, inp.constants.l, inp.mu());
    let big_t = inp.t as f64;
    let sample = 2.0 * g / (mu * (1.0 - c + a)) * big_t.powf(1.0 - c) / inp.n as f64;
    let excess = 2.0 * c - a - 1.0;
    let factor = if excess.abs() <= 1e-12 { big_t.ln() } else { 1.0 / excess };
    let topo = if cl == 0.0 { 0.0 } else { 4.0 * g * l * cl / (mu * mu * big_t.powf(a)) * factor };
    sample + topo
}

/// C-C argument stability by exact summation, with the fixed-rate closed
/// form `2G eta T/n + 4 G L eta^2 T/(1-lambda)` attached for fixed schedules.
pub fn cc_stability(inp: &BoundInputs) -> Result<BoundReport, BoundError> {
    inp.validate()?;
    let (g, l) = (inp.constants.g, inp.constants.l);
    let (mut s1, mut s2) = (CompensatedSum::new(), CompensatedSum::new());
    let mut inner = 0.0;
    for k in 0..inp.t {
        let e = inp.schedule.eta_max(k);
        s1.add(e);
        if k >= 1 {
            s2.add(e * inner);
        }
        inner = inp.lambda * inner + e;
    }
    let mut r = BoundReport::new(
        "cc_stability",
        vec![("sample", 2.0 * g / inp.n as f64 * s1.value()), ("topology", 4.0 * g * l * s2.value())],
    );
    if let Ok(closed) = cc_stability_closed_form(inp) {
        r.closed_form = Some(closed.value);
    }
    Ok(r)
}

/// `2G eta_max T/n + 4 G L eta_max^2 T/(1-lambda)`.
pub fn cc_stability_closed_form(inp: &BoundInputs) -> Result<BoundReport, BoundError> {
    inp.validate()?;
    let (_, eta) = inp.fixed_rates()?;
    let (g, l) = (inp.constants.g, inp.constants.l);
    let big_t = inp.t as f64;
    let topo = if eta == 0.0 { 0.0 } else { 4.0 * g * l * eta * eta * big_t * inp.inv_gap() };
    Ok(BoundReport::new(
        "cc_stability_closed_form",
        vec![("sample", 2.0 * g * eta * big_t / inp.n as f64), ("topology", topo)],
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateMode {
    Fixed,
    Decaying,
}

/// NC-NC weak stability bound.
///
/// Fixed: `2 sqrt2 G^2 (eta T/n + 2 L eta^2 T/(1-lambda))`.
/// Decaying (rates `1/(t+1)`, `1/(t+1)^c`):
/// `(c+L)(c+L-1)^(1/(c+L)) (2 sqrt2 G^2 T^L/((c+L-1) n) + 4 sqrt2 G^2 L C_lambda T^L/(2c+L-1))^(1/(c+L)) (B m/n)^(1-1/(c+L))`.
pub fn ncnc_weak_stability(inp: &BoundInputs, mode: RateMode) -> Result<BoundReport, BoundError> {
    inp.validate()?;
    let (g, l) = (inp.constants.g, inp.constants.l);
    let (n, big_t) = (inp.n as f64, inp.t as f64);
    match mode {
        RateMode::Fixed => {
            let (_, eta) = inp.fixed_rates()?;
            let k = 2.0 * SQRT_2 * g * g;
            let topo = if eta == 0.0 { 0.0 } else { k * 2.0 * l * eta * eta * big_t * inp.inv_gap() };
            Ok(BoundReport::new("ncnc_weak_stability_fixed", vec![("sample", k * eta * big_t / n), ("topology", topo)]))
        }
        RateMode::Decaying => {
            let (mu, c) = inp.decay()?;
            let b = inp.constants.b.ok_or(BoundError::MissingB)?;
            let q = c + l;
            if q <= 1.0 {
                return Err(BoundError::ConvergenceCondition(format!("c + L = {q} must exceed 1")));
            }
            let cl = inp.c_lambda(c)?;
            let tl = big_t.powf(l);
            let a1 = 2.0 * SQRT_2 * g * g * tl / ((q - 1.0) * n);
            let a2 = if cl == 0.0 { 0.0 } else { 4.0 * SQRT_2 * g * g * l * cl * tl / (2.0 * c + l - 1.0) };
            let value = q * (q - 1.0).powf(1.0 / q) * (a1 + a2).powf(1.0 / q) * (b * inp.m as f64 / n).powf(1.0 - 1.0 / q);
            let mut r = BoundReport::new("ncnc_weak_stability_decaying", vec![("total", value)]);
            if (mu - 1.0).abs() > 1e-12 {
                r.warnings.push(format!("bound assumes unit-modulus rates 1/(t+1); schedule uses mu = {mu}"));
            }
            Ok(r)
        }
    }
}

/// SC-SC optimization error (strong primal-dual empirical risk) of the average iterate.
pub fn scsc_optimization_error(inp: &BoundInputs, mode: RateMode) -> Result<BoundReport, BoundError> {
    inp.validate()?;
    let (g, l) = (inp.constants.g, inp.constants.l);
    let (cx, cy) = (inp.c_x, inp.c_y);
    let big_t = inp.t as f64;
    let sqrt_term = 2.0 * (cx + cy) * g / big_t.sqrt();
    match mode {
        RateMode::Fixed => {
            let (eta_min, eta_max) = inp.fixed_rates()?;
            let consensus = if cx + cy == 0.0 { 0.0 } else { 4.0 * (cx + cy) * g * l * eta_max * inp.inv_gap() };
            Ok(BoundReport::new(
                "scsc_optimization_error_fixed",
                vec![
                    ("distance", (cx * cx + cy * cy) / (2.0 * eta_min * big_t)),
                    ("variance", eta_max * g * g),
                    ("consensus", consensus),
                    ("sampling", sqrt_term),
                ],
            ))
        }
        RateMode::Decaying => {
            let (mu, c) = inp.decay()?;
            let side = |exp: f64| {
                if (exp - 1.0).abs() <= 1e-12 {
                    g * g / (2.0 * mu) * (1.0 + big_t.ln()) / big_t
                } else {
                    g * g / (2.0 * mu * (1.0 - exp) * big_t.powf(exp))
                }
            };
            let k_min = c.min(1.0);
            let cl = inp.c_lambda(k_min)?;
            let t_max = if cl == 0.0 || cx + cy == 0.0 {
                0.0
            } else if (k_min - 1.0).abs() <= 1e-12 {
                4.0 * g * l * cl * (cx + cy) * big_t.ln() / (mu * big_t)
            } else {
                4.0 * g * l * cl * (cx + cy) / (mu * (1.0 - k_min) * big_t.powf(k_min))
            };
            Ok(BoundReport::new(
                "scsc_optimization_error_decaying",
                vec![("sampling", sqrt_term), ("min_side", side(1.0)), ("max_side", side(c)), ("consensus", t_max)],
            ))
        }
    }
}

/// Multiplier turning argument stability into a generalization gap bound:
/// `sqrt2 G` (weak) or `G sqrt(2 + 2 L^2/mu^2)` (strong).
pub fn generalization_multiplier(g: f64, l: f64, mu: f64, strong: bool) -> Option<f64> {
    if strong {
        (mu > 0.0).then(|| g * (2.0 + 2.0 * l * l / (mu * mu)).sqrt())
    } else {
        Some(SQRT_2 * g)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskSetting {
    ScscFixed,
    ScscDecaying,
    CcFixed,
}

/// Population risk bound: multiplier times the stability bound plus the
/// optimization error bound.
pub fn population_risk_bound(inp: &BoundInputs, setting: RiskSetting) -> Result<BoundReport, BoundError> {
    inp.validate()?;
    let (g, l, mu) = (inp.constants.g, inp.constants.l, inp.mu());
    let (stability, multiplier, opt, name) = match setting {
        RiskSetting::ScscFixed => (
            scsc_stability_fixed(inp)?.value,
            generalization_multiplier(g, l, mu, true),
            scsc_optimization_error(inp, RateMode::Fixed)?,
            "population_risk_scsc_fixed",
        ),
        RiskSetting::ScscDecaying => {
            let (_, c) = inp.decay()?;
            let a = l / (l + mu);
            if 2.0 * c < a + 1.0 {
                return Err(BoundError::ConvergenceCondition(format!("2c = {} < L/(L+mu) + 1 = {}", 2.0 * c, a + 1.0)));
            }
            let cl = inp.c_lambda(c)?;
            let stab = if cl.is_infinite() { f64::INFINITY } else { scsc_decaying_simplified(inp, c, a, cl) };
            (
                stab,
                generalization_multiplier(g, l, mu, true),
                scsc_optimization_error(inp, RateMode::Decaying)?,
                "population_risk_scsc_decaying",
            )
        }
        RiskSetting::CcFixed => (
            cc_stability_closed_form(inp)?.value,
            generalization_multiplier(g, l, mu, false),
            scsc_optimization_error(inp, RateMode::Fixed)?,
            "population_risk_cc_fixed",
        ),
    };
    let multiplier = multiplier.ok_or_else(|| BoundError::InvalidInput("strong gap needs mu > 0".into()))?;
    let gen = if stability.is_infinite() { f64::INFINITY } else { multiplier * stability };
    let mut terms = vec![("generalization", gen)];
    let opt_terms: Vec<(String, f64)> = opt.terms.iter().map(|t| (format!("optimization_{}", t.name), t.value)).collect();
    terms.extend(opt_terms.iter().map(|(n, v)| (n.as_str(), *v)));
    Ok(BoundReport::new(name, terms))
}
