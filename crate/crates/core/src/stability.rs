//! Coupled runs on neighboring datasets, stability estimates and
//! primal-dual risks.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::generalization_multiplier;
use crate::data::{DistributedDataset, NeighborPerturbation};
use crate::engine::{run, EngineError, RunConfig, Trajectory};
use crate::linalg::{self, CompensatedSum};
use crate::problems::{project_ball_in_place, QuadraticScsc, ProblemSpec, Sample};
use crate::rng::sample_index;

/// Gradient-mapping tolerance of the inner sup/inf solver.
pub const INNER_TOLERANCE: f64 = 1e-8;
/// Iteration cap of the inner sup/inf solver.
pub const INNER_MAX_ITERATIONS: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StabilityError {
    #[error("datasets have mismatched shapes: {0}")]
    MismatchedShapes(String),
    #[error("need at least 2 seeds, got {0}")]
    TooFewSeeds(usize),
    #[error("probe grid or sample pool is empty")]
    EmptyGrid,
    #[error("inner solver stopped after {iterations} iterations with gradient mapping {residual:e}")]
    InnerSolveFailed { iterations: usize, residual: f64 },
    #[error("strong generalization gap needs mu > 0")]
    ZeroModulus,
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Distances between the two coupled trajectories at one recorded iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaPoint {
    pub t: usize,
    /// `|(x_bar - x_bar'; y_bar - y_bar')|`.
    pub delta: f64,
    /// The same distance between the weighted average iterates.
    pub delta_avg_iterate: f64,
    /// Stacked distance over all agents' parameters.
    pub delta_agents: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledRun {
    pub seed: u64,
    pub perturbation: NeighborPerturbation,
    pub traj_a: Trajectory,
    pub traj_b: Trajectory,
    pub delta: Vec<DeltaPoint>,
    /// First iteration at which some agent draws its perturbed slot.
    pub first_perturbed_draw: Option<usize>,
}

impl CoupledRun {
    pub fn final_delta(&self) -> &DeltaPoint {
        self.delta.last().expect("coupled run has records")
    }
}

/// First iteration `< iterations` at which agent `i` draws `replaced[i]`.
pub fn first_perturbed_draw(seed: u64, replaced: &[usize], n: usize, iterations: usize) -> Option<usize> {
    (0..iterations).find(|&t| replaced.iter().enumerate().any(|(i, &r)| sample_index(seed, i, t, n) == r))
}

/// Runs `cfg` on `ds` and on its neighbor with the same sampling stream.
pub fn coupled_run(
    cfg: &RunConfig,
    ds: &DistributedDataset,
    neighbor: &DistributedDataset,
    perturbation: &NeighborPerturbation,
) -> Result<CoupledRun, StabilityError> {
    if ds.m() != neighbor.m() || ds.n() != neighbor.n() {
        return Err(StabilityError::MismatchedShapes(format!(
            "(m, n) = ({}, {}) vs ({}, {})",
            ds.m(),
            ds.n(),
            neighbor.m(),
            neighbor.n()
        )));
    }
    if perturbation.replaced_index.len() != ds.m() {
        return Err(StabilityError::MismatchedShapes("perturbation does not cover every agent".into()));
    }
    let traj_a = run(cfg, ds)?;
    let traj_b = run(cfg, neighbor)?;
    let delta = traj_a
        .records
        .iter()
        .zip(&traj_b.records)
        .map(|(a, b)| DeltaPoint {
            t: a.t,
            delta: stacked_distance(&a.x_bar, &a.y_bar, &b.x_bar, &b.y_bar),
            delta_avg_iterate: stacked_distance(&a.x_ave, &a.y_ave, &b.x_ave, &b.y_ave),
            delta_agents: stacked_distance(&a.state.x, &a.state.y, &b.state.x, &b.state.y),
        })
        .collect();
    let first = first_perturbed_draw(cfg.seed, &perturbation.replaced_index, ds.n(), cfg.iterations);
    Ok(CoupledRun { seed: cfg.seed, perturbation: perturbation.clone(), traj_a, traj_b, delta, first_perturbed_draw: first })
}

fn stacked_distance(x: &[f64], y: &[f64], x2: &[f64], y2: &[f64]) -> f64 {
    linalg::dist(x, x2).hypot(linalg::dist(y, y2))
}

/// Mean with its standard error `std / sqrt(count)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

impl Estimate {
    pub fn from_values(values: &[f64]) -> Self {
        let k = values.len();
        let mean = values.iter().copied().collect::<CompensatedSum>().value() / k as f64;
        let var = if k > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64 } else { 0.0 };
        Self { mean, stderr: (var / k as f64).sqrt(), count: k }
    }

    pub fn upper(&self, sigmas: f64) -> f64 {
        self.mean + sigmas * self.stderr
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputMode {
    Final,
    AvgIterate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub epsilon_arg: Estimate,
    pub epsilon_arg_avg_iterate: Estimate,
    /// Lower estimate of the weak stability supremum, when computed.
    pub epsilon_weak: Option<f64>,
    pub seeds: usize,
}

/// Argument stability estimate over independent seeds at the chosen output.
pub fn argument_stability(runs: &[CoupledRun], at: OutputMode) -> Result<Estimate, StabilityError> {
    if runs.len() < 2 {
        return Err(StabilityError::TooFewSeeds(runs.len()));
    }
    let vals: Vec<f64> = runs
        .iter()
        .map(|r| match at {
            OutputMode::Final => r.final_delta().delta,
            OutputMode::AvgIterate => r.final_delta().delta_avg_iterate,
        })
        .collect();
    Ok(Estimate::from_values(&vals))
}

pub fn stability_report(runs: &[CoupledRun]) -> Result<StabilityReport, StabilityError> {
    Ok(StabilityReport {
        epsilon_arg: argument_stability(runs, OutputMode::Final)?,
        epsilon_arg_avg_iterate: argument_stability(runs, OutputMode::AvgIterate)?,
        epsilon_weak: None,
        seeds: runs.len(),
    })
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let (mut inv, mut f) = (0.0, 1.0 / base as f64);
    while i > 0 {
        inv += f * (i % base) as f64;
        i /= base;
        f /= base as f64;
    }
    inv
}

fn first_primes(k: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(k);
    let mut c = 2u64;
    while primes.len() < k {
        if primes.iter().all(|p| !c.is_multiple_of(*p)) {
            primes.push(c);
        }
        c += 1;
    }
    primes
}

/// Deterministic low-discrepancy points in the ball of radius `radius`.
///
/// Halton points shifted so the first one is the center, mapped from the
/// cube to the ball by radial stretching. The grid of size `k` is a prefix
/// of the grid of size `k + 1`.
pub fn probe_grid(d: usize, radius: f64, count: usize) -> Vec<Vec<f64>> {
    let primes = first_primes(d);
    (0..count as u64)
        .map(|j| {
            let cube: Vec<f64> = primes.iter().map(|&p| 2.0 * ((radical_inverse(j, p) + 0.5) % 1.0) - 1.0).collect();
            let l2 = linalg::norm(&cube);
            let linf = cube.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if l2 == 0.0 {
                cube
            } else {
                cube.iter().map(|v| v * radius * linf / l2).collect()
            }
        })
        .collect()
}

/// A final model pair from corresponding seeds on `S` and `S'`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPair {
    pub x_a: Vec<f64>,
    pub y_a: Vec<f64>,
    pub x_b: Vec<f64>,
    pub y_b: Vec<f64>,
}

impl ModelPair {
    pub fn from_run(r: &CoupledRun, at: OutputMode) -> Self {
        let (a, b) = (r.traj_a.final_record(), r.traj_b.final_record());
        match at {
            OutputMode::Final => Self { x_a: a.x_bar.clone(), y_a: a.y_bar.clone(), x_b: b.x_bar.clone(), y_b: b.y_bar.clone() },
            OutputMode::AvgIterate => {
                Self { x_a: a.x_ave.clone(), y_a: a.y_ave.clone(), x_b: b.x_ave.clone(), y_b: b.y_ave.clone() }
            }
        }
    }
}

/// `(1/m) sum_i f_i(x, y; xi_i)` for one tuple of per-agent samples.
fn tuple_loss(p: &ProblemSpec, x: &[f64], y: &[f64], xi: &[Sample]) -> f64 {
    xi.iter().enumerate().map(|(i, s)| p.loss_unchecked(i, x, y, s)).sum::<f64>() / xi.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakStabilityEstimate {
    /// Supremum over the probe grids and the sample pool; a lower estimate of the true supremum.
    pub value: f64,
    pub grid_x: usize,
    pub grid_y: usize,
    pub pool: usize,
}

/// Weak stability: `sup_xi [sup_y' E(f(x_A, y') - f(x_B, y')) + sup_x' E(f(x', y_A) - f(x', y_B))]`,
/// with the expectation over seeds and suprema over the probe grids and
/// `pool`, a list of per-agent sample tuples.
pub fn weak_stability_estimate(
    p: &ProblemSpec,
    models: &[ModelPair],
    grid_x: usize,
    grid_y: usize,
    pool: &[Vec<Sample>],
) -> Result<WeakStabilityEstimate, StabilityError> {
    if grid_x == 0 || grid_y == 0 || pool.is_empty() || models.is_empty() {
        return Err(StabilityError::EmptyGrid);
    }
    let gx = probe_grid(p.domain.d_x, p.domain.radius_x, grid_x);
    let gy = probe_grid(p.domain.d_y, p.domain.radius_y, grid_y);
    let k = models.len() as f64;
    let mut best = f64::NEG_INFINITY;
    for xi in pool {
        let sup_y = gy
            .iter()
            .map(|yp| models.iter().map(|mp| tuple_loss(p, &mp.x_a, yp, xi) - tuple_loss(p, &mp.x_b, yp, xi)).sum::<f64>() / k)
            .fold(f64::NEG_INFINITY, f64::max);
        let sup_x = gx
            .iter()
            .map(|xp| models.iter().map(|mp| tuple_loss(p, xp, &mp.y_a, xi) - tuple_loss(p, xp, &mp.y_b, xi)).sum::<f64>() / k)
            .fold(f64::NEG_INFINITY, f64::max);
        best = best.max(sup_y + sup_x);
    }
    Ok(WeakStabilityEstimate { value: best.max(0.0), grid_x, grid_y, pool: pool.len() })
}

/// A smooth saddle objective `F(x, y)` used for risk evaluation.
pub trait SaddleObjective: Sync {
    fn value(&self, x: &[f64], y: &[f64]) -> f64;
    fn grad(&self, x: &[f64], y: &[f64], gx: &mut [f64], gy: &mut [f64]);
}

/// `F_S(x, y) = (1/m) sum_i (1/n) sum_l f_i(x, y; xi_il)`.
pub struct EmpiricalObjective<'a> {
    pub problem: &'a ProblemSpec,
    pub dataset: &'a DistributedDataset,
}

impl SaddleObjective for EmpiricalObjective<'_> {
    fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut acc = CompensatedSum::new();
        let w = 1.0 / (self.dataset.m() * self.dataset.n()) as f64;
        for (i, shard) in self.dataset.shards.iter().enumerate() {
            for s in shard {
                acc.add(w * self.problem.loss_unchecked(i, x, y, s));
            }
        }
        acc.value()
    }

    fn grad(&self, x: &[f64], y: &[f64], gx: &mut [f64], gy: &mut [f64]) {
        let w = 1.0 / (self.dataset.m() * self.dataset.n()) as f64;
        let (mut hx, mut hy) = (vec![0.0; gx.len()], vec![0.0; gy.len()]);
        gx.iter_mut().for_each(|v| *v = 0.0);
        gy.iter_mut().for_each(|v| *v = 0.0);
        for (i, shard) in self.dataset.shards.iter().enumerate() {
            for s in shard {
                self.problem.grad_into(i, x, y, s, &mut hx, &mut hy);
                gx.iter_mut().zip(&hx).for_each(|(a, b)| *a += w * b);
                gy.iter_mut().zip(&hy).for_each(|(a, b)| *a += w * b);
            }
        }
    }
}

/// Sample average of agent-0 losses, e.g. over a held-out test split.
pub struct SampleAverageObjective<'a> {
    pub problem: &'a ProblemSpec,
    pub samples: &'a [Sample],
}

impl SaddleObjective for SampleAverageObjective<'_> {
    fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        let w = 1.0 / self.samples.len() as f64;
        self.samples.iter().map(|s| w * self.problem.loss_unchecked(0, x, y, s)).collect::<CompensatedSum>().value()
    }

    fn grad(&self, x: &[f64], y: &[f64], gx: &mut [f64], gy: &mut [f64]) {
        let w = 1.0 / self.samples.len() as f64;
        let (mut hx, mut hy) = (vec![0.0; gx.len()], vec![0.0; gy.len()]);
        gx.iter_mut().for_each(|v| *v = 0.0);
        gy.iter_mut().for_each(|v| *v = 0.0);
        for s in self.samples {
            self.problem.grad_into(0, x, y, s, &mut hx, &mut hy);
            gx.iter_mut().zip(&hx).for_each(|(a, b)| *a += w * b);
            gy.iter_mut().zip(&hy).for_each(|(a, b)| *a += w * b);
        }
    }
}

/// Quadratic objective with known mean coupling and data means; this is the
/// exact population objective of the synthetic quadratic family.
pub struct QuadraticMeanObjective<'a> {
    pub family: &'a QuadraticScsc,
    pub coupling: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl SaddleObjective for QuadraticMeanObjective<'_> {
    fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        self.family.evaluate(&self.coupling, x, y, &self.b, &self.c)
    }

    fn grad(&self, x: &[f64], y: &[f64], gx: &mut [f64], gy: &mut [f64]) {
        self.family.evaluate_grad(&self.coupling, x, y, &self.b, &self.c, gx, gy)
    }
}

/// Projected gradient ascent (`ascend`) or descent over a ball with step `1/L`.
/// Returns the optimum value and point.
fn projected_gradient<F>(
    d: usize,
    radius: f64,
    l: f64,
    ascend: bool,
    mut value_grad: F,
) -> Result<(f64, Vec<f64>), StabilityError>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let step = 1.0 / l;
    let sign = if ascend { 1.0 } else { -1.0 };
    let mut z = vec![0.0; d];
    let mut g = vec![0.0; d];
    let mut next = vec![0.0; d];
    let mut residual = f64::INFINITY;
    for _ in 0..INNER_MAX_ITERATIONS {
        value_grad(&z, &mut g);
        for ((n, zi), gi) in next.iter_mut().zip(&z).zip(&g) {
            *n = zi + sign * step * gi;
        }
        project_ball_in_place(&mut next, radius);
        residual = linalg::dist(&next, &z) * l;
        std::mem::swap(&mut z, &mut next);
        if residual <= INNER_TOLERANCE {
            let v = value_grad(&z, &mut g);
            return Ok((v, z));
        }
    }
    Err(StabilityError::InnerSolveFailed { iterations: INNER_MAX_ITERATIONS, residual })
}

/// `sup_{y'} (1/K) sum_k F_k(x_k, y')` where `F_k` is paired with model `k`.
fn sup_over_y(p: &ProblemSpec, objectives: &[&dyn SaddleObjective], xs: &[Vec<f64>]) -> Result<f64, StabilityError> {
    let k = xs.len() as f64;
    let mut hx = vec![0.0; p.domain.d_x];
    let mut hy = vec![0.0; p.domain.d_y];
    projected_gradient(p.domain.d_y, p.domain.radius_y, p.constants.l, true, |y, g| {
        g.iter_mut().for_each(|v| *v = 0.0);
        let mut v = 0.0;
        for (obj, x) in objectives.iter().zip(xs) {
            obj.grad(x, y, &mut hx, &mut hy);
            g.iter_mut().zip(&hy).for_each(|(a, b)| *a += b / k);
            v += obj.value(x, y) / k;
        }
        v
    })
    .map(|(v, _)| v)
}

/// `inf_{x'} (1/K) sum_k F_k(x', y_k)`.
fn inf_over_x(p: &ProblemSpec, objectives: &[&dyn SaddleObjective], ys: &[Vec<f64>]) -> Result<f64, StabilityError> {
    let k = ys.len() as f64;
    let mut hx = vec![0.0; p.domain.d_x];
    let mut hy = vec![0.0; p.domain.d_y];
    projected_gradient(p.domain.d_x, p.domain.radius_x, p.constants.l, false, |x, g| {
        g.iter_mut().for_each(|v| *v = 0.0);
        let mut v = 0.0;
        for (obj, y) in objectives.iter().zip(ys) {
            obj.grad(x, y, &mut hx, &mut hy);
            g.iter_mut().zip(&hx).for_each(|(a, b)| *a += b / k);
            v += obj.value(x, y) / k;
        }
        v
    })
    .map(|(v, _)| v)
}

/// Weak risk: expectation over models first, then sup/inf.
pub fn weak_risk(
    p: &ProblemSpec,
    objectives: &[&dyn SaddleObjective],
    models: &[(Vec<f64>, Vec<f64>)],
) -> Result<f64, StabilityError> {
    let xs: Vec<Vec<f64>> = models.iter().map(|m| m.0.clone()).collect();
    let ys: Vec<Vec<f64>> = models.iter().map(|m| m.1.clone()).collect();
    Ok(sup_over_y(p, objectives, &xs)? - inf_over_x(p, objectives, &ys)?)
}

/// Per-model duality gaps `sup_{y'} F_k(x_k, y') - inf_{x'} F_k(x', y_k)`.
pub fn strong_gaps(
    p: &ProblemSpec,
    objectives: &[&dyn SaddleObjective],
    models: &[(Vec<f64>, Vec<f64>)],
) -> Result<Vec<f64>, StabilityError> {
    objectives
        .iter()
        .zip(models)
        .map(|(obj, (x, y))| {
            let o = [*obj];
            Ok(sup_over_y(p, &o, std::slice::from_ref(x))? - inf_over_x(p, &o, std::slice::from_ref(y))?)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub weak_pd_population: f64,
    pub weak_pd_empirical: f64,
    pub strong_pd_population: Estimate,
    pub strong_pd_empirical: Estimate,
    pub weak_gap: f64,
    /// Jackknife standard error of `weak_gap` over models.
    pub weak_gap_stderr: f64,
    pub strong_gap: Estimate,
}

/// Weak and strong primal-dual risks of a set of models. `empirical[k]` and
/// `population[k]` are the objectives paired with model `k`; pass the same
/// objective repeatedly when every model was trained on one dataset.
pub fn weak_pd_risks(
    p: &ProblemSpec,
    models: &[(Vec<f64>, Vec<f64>)],
    empirical: &[&dyn SaddleObjective],
    population: &[&dyn SaddleObjective],
) -> Result<RiskReport, StabilityError> {
    let k = models.len();
    if k == 0 || empirical.len() != k || population.len() != k {
        return Err(StabilityError::MismatchedShapes("need one empirical and population objective per model".into()));
    }
    let wp = weak_risk(p, population, models)?;
    let we = weak_risk(p, empirical, models)?;
    let sp = strong_gaps(p, population, models)?;
    let se = strong_gaps(p, empirical, models)?;
    let sgap: Vec<f64> = sp.iter().zip(&se).map(|(a, b)| a - b).collect();
    let weak_gap_stderr = if k >= 2 {
        let loo: Vec<f64> = (0..k)
            .map(|j| {
                let ms: Vec<(Vec<f64>, Vec<f64>)> =
                    models.iter().enumerate().filter(|(i, _)| *i != j).map(|(_, m)| m.clone()).collect();
                Ok(weak_risk(p, &drop_index(population, j), &ms)? - weak_risk(p, &drop_index(empirical, j), &ms)?)
            })
            .collect::<Result<_, StabilityError>>()?;
        let mean = loo.iter().sum::<f64>() / k as f64;
        ((k - 1) as f64 / k as f64 * loo.iter().map(|v| (v - mean).powi(2)).sum::<f64>()).sqrt()
    } else {
        0.0
    };
    Ok(RiskReport {
        weak_pd_population: wp,
        weak_pd_empirical: we,
        strong_pd_population: Estimate::from_values(&sp),
        strong_pd_empirical: Estimate::from_values(&se),
        weak_gap: wp - we,
        weak_gap_stderr,
        strong_gap: Estimate::from_values(&sgap),
    })
}

fn drop_index<'a>(v: &[&'a dyn SaddleObjective], j: usize) -> Vec<&'a dyn SaddleObjective> {
    v.iter().enumerate().filter(|(i, _)| *i != j).map(|(_, o)| *o).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapMode {
    Weak,
    Strong,
}

/// Generalization gap implied by argument stability `epsilon`.
pub fn gen_gap_from_stability(epsilon: f64, g: f64, l: f64, mu: f64, mode: GapMode) -> Result<f64, StabilityError> {
    generalization_multiplier(g, l, mu, mode == GapMode::Strong)
        .map(|k| k * epsilon)
        .ok_or(StabilityError::ZeroModulus)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_examples() {
        assert_eq!(gen_gap_from_stability(0.0, 1.0, 1.0, 1.0, GapMode::Weak).unwrap(), 0.0);
        assert_eq!(gen_gap_from_stability(0.0, 1.0, 1.0, 1.0, GapMode::Strong).unwrap(), 0.0);
        assert!((gen_gap_from_stability(0.1, 1.0, 1.0, 1.0, GapMode::Weak).unwrap() - 0.1414213562373095).abs() < 1e-15);
        assert!((gen_gap_from_stability(0.1, 1.0, 1.0, 1.0, GapMode::Strong).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(gen_gap_from_stability(0.1, 1.0, 1.0, 0.0, GapMode::Strong), Err(StabilityError::ZeroModulus));
    }

    #[test]
    fn grid_is_nested_and_centered() {
        let g5 = probe_grid(2, 2.0, 5);
        let g9 = probe_grid(2, 2.0, 9);
        assert_eq!(g5[..], g9[..5]);
        assert_eq!(g5[0], vec![0.0, 0.0]);
        assert!(g9.iter().all(|p| linalg::norm(p) <= 2.0 + 1e-12));
    }

    #[test]
    fn estimate_stderr() {
        let e = Estimate::from_values(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        assert!((e.stderr - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn too_few_seeds() {
        assert_eq!(argument_stability(&[], OutputMode::Final), Err(StabilityError::TooFewSeeds(0)));
    }
}
