//! Decentralized stochastic gradient descent ascent.
//!
//! Each agent mixes its neighbors' parameters with its gossip weights, takes
//! a stochastic descent step in `x` and ascent step in `y` using the local
//! sample chosen by [`crate::rng::sample_index`], and projects both blocks
//! back onto their balls. All agents start at zero.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::DistributedDataset;
use crate::linalg::{self, CompensatedSum};
use crate::problems::{project_ball_in_place, ProblemError, ProblemSpec, Sample};
use crate::rng::sample_index;
use crate::topology::MixingMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error("step condition violated: {0}")]
    StepConditionViolated(String),
    #[error("iterate left the domain: {0}")]
    Internal(#[from] ProblemError),
}

/// Which block receives the larger of the two decaying rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    #[default]
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Schedule {
    Fixed {
        eta_x: f64,
        eta_y: f64,
    },
    /// `eta_min(t) = 1/(mu (t+1))`, `eta_max(t) = 1/(mu (t+1)^c)`.
    Decaying {
        mu: f64,
        c: f64,
        #[serde(default)]
        max_side: Side,
    },
}

impl Schedule {
    pub fn fixed(eta: f64) -> Self {
        Schedule::Fixed { eta_x: eta, eta_y: eta }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        match *self {
            Schedule::Fixed { eta_x, eta_y } if !(eta_x > 0.0 && eta_y > 0.0 && eta_x.is_finite() && eta_y.is_finite()) => {
                Err(EngineError::Config(format!("fixed rates must be positive, got ({eta_x}, {eta_y})")))
            }
            Schedule::Decaying { mu, c, .. } if !(mu > 0.0 && c > 0.0 && c <= 1.0) => {
                Err(EngineError::Config(format!("decaying schedule needs mu > 0 and c in (0, 1], got mu={mu}, c={c}")))
            }
            _ => Ok(()),
        }
    }

    /// `(eta_x, eta_y)` at zero-based iteration `t`.
    pub fn rates(&self, t: usize) -> (f64, f64) {
        match *self {
            Schedule::Fixed { eta_x, eta_y } => (eta_x, eta_y),
            Schedule::Decaying { mu, c, max_side } => {
                let k = (t + 1) as f64;
                let (lo, hi) = (1.0 / (mu * k), 1.0 / (mu * k.powf(c)));
                match max_side {
                    Side::X => (hi, lo),
                    Side::Y => (lo, hi),
                }
            }
        }
    }

    pub fn eta_max(&self, t: usize) -> f64 {
        let (a, b) = self.rates(t);
        a.max(b)
    }

    pub fn eta_min(&self, t: usize) -> f64 {
        let (a, b) = self.rates(t);
        a.min(b)
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self, Schedule::Fixed { .. })
    }
}

/// Whether `(L+mu)/2 eta_max^2 <= eta_min <= (L+mu)/(2 L mu)`.
pub fn step_condition_holds(l: f64, mu: f64, eta_min: f64, eta_max: f64) -> bool {
    mu > 0.0 && 0.5 * (l + mu) * eta_max * eta_max <= eta_min && eta_min <= 0.5 * (l + mu) / (l * mu)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub mixing: MixingMatrix,
    pub iterations: usize,
    pub schedule: Schedule,
    pub seed: u64,
    /// Recording stride; `None` means `max(1, T/1000)`.
    pub record_every: Option<usize>,
}

impl RunConfig {
    pub fn stride(&self) -> usize {
        self.record_every.unwrap_or((self.iterations / 1000).max(1)).max(1)
    }

    pub fn validate(&self, ds: &DistributedDataset) -> Result<(), EngineError> {
        if self.iterations == 0 {
            return Err(EngineError::Config("T must be at least 1".into()));
        }
        self.schedule.validate()?;
        if self.mixing.m() != ds.m() {
            return Err(EngineError::Config(format!(
                "mixing matrix has {} agents, dataset has {}",
                self.mixing.m(),
                ds.m()
            )));
        }
        if let Some(k) = self.problem.agent_count() {
            if k != ds.m() {
                return Err(EngineError::Config(format!("problem has {k} agent parameter sets, dataset has {} agents", ds.m())));
            }
        }
        let want = feature_len(&self.problem);
        if let Some(s) = ds.samples().find(|s| want.is_some_and(|w| s.features.len() != w)) {
            return Err(EngineError::Config(format!(
                "sample has {} features, problem expects {}",
                s.features.len(),
                want.unwrap_or(0)
            )));
        }
        Ok(())
    }

    /// For strongly-convex problems, whether every iteration meets the contraction step window.
    pub fn step_condition_holds(&self) -> bool {
        let k = &self.problem.constants;
        (0..self.iterations.min(1 << 20))
            .all(|t| step_condition_holds(k.l, k.mu(), self.schedule.eta_min(t), self.schedule.eta_max(t)))
    }
}

fn feature_len(p: &ProblemSpec) -> Option<usize> {
    use crate::problems::Family;
    match &p.family {
        Family::Quadratic(q) => Some(q.d_x + q.d_y),
        Family::Auc(a) => Some(a.dim),
        Family::Sine(_) => Some(1),
    }
}

/// Agent parameters, one row per agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub m: usize,
    pub d_x: usize,
    pub d_y: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl State {
    pub fn zeros(m: usize, d_x: usize, d_y: usize) -> Self {
        Self { m, d_x, d_y, x: vec![0.0; m * d_x], y: vec![0.0; m * d_y] }
    }

    pub fn x_row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d_x..(i + 1) * self.d_x]
    }

    pub fn y_row(&self, i: usize) -> &[f64] {
        &self.y[i * self.d_y..(i + 1) * self.d_y]
    }

    pub fn x_bar(&self) -> Vec<f64> {
        column_mean(&self.x, self.m, self.d_x)
    }

    pub fn y_bar(&self) -> Vec<f64> {
        column_mean(&self.y, self.m, self.d_y)
    }
}

fn column_mean(rows: &[f64], m: usize, d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d];
    for i in 0..m {
        for (o, v) in out.iter_mut().zip(&rows[i * d..(i + 1) * d]) {
            *o += v;
        }
    }
    out.iter_mut().for_each(|o| *o /= m as f64);
    out
}

/// `v` if `|v| <= C`, else `v C / |v|`.
pub fn project_ball(v: &[f64], radius: f64) -> Vec<f64> {
    let mut out = v.to_vec();
    project_ball_in_place(&mut out, radius);
    out
}

/// Centered Frobenius norm `[sum_i |x_i - x_bar|^2 + |y_i - y_bar|^2]^(1/2)`.
pub fn consensus_residual(state: &State) -> f64 {
    let (xb, yb) = (state.x_bar(), state.y_bar());
    let mut s = 0.0;
    for i in 0..state.m {
        s += linalg::dist(state.x_row(i), &xb).powi(2) + linalg::dist(state.y_row(i), &yb).powi(2);
    }
    s.sqrt()
}

/// `2 sqrt(m) G sum_{s<t} eta_max(s) lambda^(t-1-s)` for `t = 0..=t_max`.
pub fn consensus_bound_series(g: f64, m: usize, lambda: f64, schedule: &Schedule, t_max: usize) -> Vec<f64> {
    let pre = 2.0 * (m as f64).sqrt() * g;
    let mut out = Vec::with_capacity(t_max + 1);
    let mut s = 0.0;
    out.push(0.0);
    for t in 0..t_max {
        s = lambda * s + schedule.eta_max(t);
        out.push(pre * s);
    }
    out
}

/// Reusable buffers for [`step_into`].
struct Workspace {
    gx: Vec<f64>,
    gy: Vec<f64>,
    neighbors: Vec<Vec<(usize, f64)>>,
}

impl Workspace {
    fn new(cfg: &RunConfig) -> Self {
        let d = &cfg.problem.domain;
        Self {
            gx: vec![0.0; d.d_x],
            gy: vec![0.0; d.d_y],
            neighbors: (0..cfg.mixing.m()).map(|i| cfg.mixing.neighbors(i)).collect(),
        }
    }
}

fn step_into(cur: &State, next: &mut State, cfg: &RunConfig, ds: &DistributedDataset, t: usize, ws: &mut Workspace) {
    let (dx, dy) = (cur.d_x, cur.d_y);
    let (eta_x, eta_y) = cfg.schedule.rates(t);
    let dom = &cfg.problem.domain;
    let n = ds.n();
    for i in 0..cur.m {
        let sample: &Sample = &ds.shards[i][sample_index(cfg.seed, i, t, n)];
        cfg.problem.grad_into(i, cur.x_row(i), cur.y_row(i), sample, &mut ws.gx, &mut ws.gy);
        let nx = &mut next.x[i * dx..(i + 1) * dx];
        nx.iter_mut().for_each(|v| *v = 0.0);
        let ny = &mut next.y[i * dy..(i + 1) * dy];
        ny.iter_mut().for_each(|v| *v = 0.0);
        for &(k, w) in &ws.neighbors[i] {
            for (o, v) in nx.iter_mut().zip(cur.x_row(k)) {
                *o += w * v;
            }
            for (o, v) in ny.iter_mut().zip(cur.y_row(k)) {
                *o += w * v;
            }
        }
        for (o, g) in nx.iter_mut().zip(&ws.gx) {
            *o -= eta_x * g;
        }
        for (o, g) in ny.iter_mut().zip(&ws.gy) {
            *o += eta_y * g;
        }
        project_ball_in_place(nx, dom.radius_x);
        project_ball_in_place(ny, dom.radius_y);
    }
}

/// One D-SGDA iteration from `state` at zero-based iteration `t`.
pub fn dsgda_step(state: &State, cfg: &RunConfig, ds: &DistributedDataset, t: usize) -> Result<State, EngineError> {
    cfg.validate(ds)?;
    let mut next = state.clone();
    step_into(state, &mut next, cfg, ds, t, &mut Workspace::new(cfg));
    for i in 0..next.m {
        cfg.problem.domain.check(next.x_row(i), next.y_row(i))?;
    }
    Ok(next)
}

/// Snapshot at iteration `t` (after `t` updates).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub t: usize,
    pub state: State,
    pub x_bar: Vec<f64>,
    pub y_bar: Vec<f64>,
    /// Rate-weighted average of `x_bar^0 .. x_bar^(t-1)`; `x_bar^0` at `t = 0`.
    pub x_ave: Vec<f64>,
    pub y_ave: Vec<f64>,
    pub consensus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub records: Vec<Record>,
    pub final_state: State,
    pub x_bar: Vec<f64>,
    pub y_bar: Vec<f64>,
    /// `sum_t eta_x,t x_bar^t / sum_t eta_x,t` over `t = 0 .. T-1`.
    pub x_ave: Vec<f64>,
    pub y_ave: Vec<f64>,
}

impl Trajectory {
    pub fn final_record(&self) -> &Record {
        self.records.last().expect("trajectory has at least the initial record")
    }
}

/// Running rate-weighted averages of the agent means.
struct WeightedAverage {
    sum_x: Vec<CompensatedSum>,
    sum_y: Vec<CompensatedSum>,
    wx: CompensatedSum,
    wy: CompensatedSum,
}

impl WeightedAverage {
    fn new(dx: usize, dy: usize) -> Self {
        Self {
            sum_x: vec![CompensatedSum::new(); dx],
            sum_y: vec![CompensatedSum::new(); dy],
            wx: CompensatedSum::new(),
            wy: CompensatedSum::new(),
        }
    }

    fn add(&mut self, xb: &[f64], yb: &[f64], eta_x: f64, eta_y: f64) {
        for (s, v) in self.sum_x.iter_mut().zip(xb) {
            s.add(eta_x * v);
        }
        for (s, v) in self.sum_y.iter_mut().zip(yb) {
            s.add(eta_y * v);
        }
        self.wx.add(eta_x);
        self.wy.add(eta_y);
    }

    fn value(&self, xb: &[f64], yb: &[f64]) -> (Vec<f64>, Vec<f64>) {
        if self.wx.value() == 0.0 {
            return (xb.to_vec(), yb.to_vec());
        }
        let (wx, wy) = (self.wx.value(), self.wy.value());
        (
            self.sum_x.iter().map(|s| s.value() / wx).collect(),
            self.sum_y.iter().map(|s| s.value() / wy).collect(),
        )
    }
}

/// Runs `T` iterations from the zero state, recording every `stride`
/// iterations plus the initial and final states.
pub fn run(cfg: &RunConfig, ds: &DistributedDataset) -> Result<Trajectory, EngineError> {
    cfg.validate(ds)?;
    let dom = cfg.problem.domain;
    let stride = cfg.stride();
    let mut cur = State::zeros(ds.m(), dom.d_x, dom.d_y);
    let mut next = cur.clone();
    let mut ws = Workspace::new(cfg);
    let mut avg = WeightedAverage::new(dom.d_x, dom.d_y);
    let mut records = Vec::with_capacity(cfg.iterations / stride + 2);

    let snapshot = |t: usize, s: &State, avg: &WeightedAverage| -> Result<Record, EngineError> {
        for i in 0..s.m {
            dom.check(s.x_row(i), s.y_row(i))?;
        }
        let (xb, yb) = (s.x_bar(), s.y_bar());
        let (xa, ya) = avg.value(&xb, &yb);
        Ok(Record { t, state: s.clone(), consensus: consensus_residual(s), x_bar: xb, y_bar: yb, x_ave: xa, y_ave: ya })
    };

    records.push(snapshot(0, &cur, &avg)?);
    for t in 0..cfg.iterations {
        let (eta_x, eta_y) = cfg.schedule.rates(t);
        avg.add(&cur.x_bar(), &cur.y_bar(), eta_x, eta_y);
        step_into(&cur, &mut next, cfg, ds, t, &mut ws);
        std::mem::swap(&mut cur, &mut next);
        let done = t + 1;
        if done % stride == 0 || done == cfg.iterations {
            records.push(snapshot(done, &cur, &avg)?);
        }
    }
    let last = records.last().expect("final record");
    Ok(Trajectory {
        x_bar: last.x_bar.clone(),
        y_bar: last.y_bar.clone(),
        x_ave: last.x_ave.clone(),
        y_ave: last.y_ave.clone(),
        final_state: cur,
        records,
    })
}

/// Which expansiveness claim a probe checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpansivenessClaim {
    /// `1 + eta_max L` for any smooth problem.
    Smooth,
    /// `1 - eta_min L mu / (L + mu)`, requires the step window.
    Contraction,
}

/// Result of an expansiveness probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansivenessReport {
    pub max_ratio: f64,
    pub claimed: f64,
    pub pairs_used: usize,
}

/// Largest `|G(u) - G(v)| / |u - v|` over `pairs` for the projected one-step
/// map `G(x, y) = (P(x - eta_x g_x), P(y + eta_y g_y))` of agent `agent`'s
/// loss on `sample`. Coincident pairs are skipped.
pub fn expansiveness_probe(
    problem: &ProblemSpec,
    agent: usize,
    sample: &Sample,
    eta_x: f64,
    eta_y: f64,
    pairs: &[((Vec<f64>, Vec<f64>), (Vec<f64>, Vec<f64>))],
    claim: ExpansivenessClaim,
) -> Result<ExpansivenessReport, EngineError> {
    let k = &problem.constants;
    let (eta_min, eta_max) = (eta_x.min(eta_y), eta_x.max(eta_y));
    let claimed = match claim {
        ExpansivenessClaim::Smooth => 1.0 + eta_max * k.l,
        ExpansivenessClaim::Contraction => {
            let mu = k.mu();
            if !step_condition_holds(k.l, mu, eta_min, eta_max) {
                return Err(EngineError::StepConditionViolated(format!(
                    "need (L+mu)/2 eta_max^2 <= eta_min <= (L+mu)/(2 L mu) with L={}, mu={mu}, eta=({eta_x}, {eta_y})",
                    k.l
                )));
            }
            1.0 - eta_min * k.l * mu / (k.l + mu)
        }
    };
    let dom = problem.domain;
    let map = |x: &[f64], y: &[f64]| -> Result<Vec<f64>, EngineError> {
        let (gx, gy) = problem.grad(agent, x, y, sample)?;
        let mut nx: Vec<f64> = x.iter().zip(&gx).map(|(a, g)| a - eta_x * g).collect();
        let mut ny: Vec<f64> = y.iter().zip(&gy).map(|(a, g)| a + eta_y * g).collect();
        project_ball_in_place(&mut nx, dom.radius_x);
        project_ball_in_place(&mut ny, dom.radius_y);
        nx.extend(ny);
        Ok(nx)
    };
    let mut max_ratio = 0.0f64;
    let mut used = 0;
    for ((x1, y1), (x2, y2)) in pairs {
        let d = linalg::dist(x1, x2).hypot(linalg::dist(y1, y2));
        if d == 0.0 {
            continue;
        }
        let r = linalg::dist(&map(x1, y1)?, &map(x2, y2)?) / d;
        max_ratio = max_ratio.max(r);
        used += 1;
    }
    Ok(ExpansivenessReport { max_ratio, claimed, pairs_used: used })
}
