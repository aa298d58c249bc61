//! Experiment orchestration: problem instances, coupled stability studies and sweeps.

use std::path::Path;
use std::time::Instant;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{self, BoundError, BoundInputs, BoundReport, RateMode, RiskSetting};
use crate::config::{ConfigError, ExperimentConfig, ProblemConfig};
use crate::data::{
    make_neighbor, parse_libsvm, partition_with_rest, synthesize_auc_pool, to_normalized_binary, AucPoolSpec,
    DataError, DistributedDataset, NeighborPerturbation, QuadraticSource, Reservoir, SampleSource, SineSource,
};
use crate::engine::{EngineError, RunConfig, Schedule, Trajectory};
use crate::linalg;
use crate::problems::{AucCc, DomainSpec, Family, ProblemConstants, ProblemError, ProblemSpec, QuadraticScsc, Sample, SineNcnc};
use crate::rng::derive_seed;
use crate::stability::{
    coupled_run, gen_gap_from_stability, weak_pd_risks, weak_stability_estimate, DeltaPoint, EmpiricalObjective,
    Estimate, GapMode, ModelPair, OutputMode, QuadraticMeanObjective, RiskReport, SaddleObjective,
    SampleAverageObjective, StabilityError, StabilityReport,
};
use crate::topology::{build_mixing_matrix, MixingMatrix, Topology, TopologyError, TopologyKind};

/// Environment variable holding the worker thread count.
pub const WORKERS_ENV: &str = "DSGDA_WORKERS";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Stability(#[from] StabilityError),
    #[error("numerical invariant failed: {0}")]
    Numerical(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("{context}: {source}")]
    InCombination { context: String, source: Box<ExperimentError> },
}

impl ExperimentError {
    /// 2 for configuration problems, 3 for numerical invariant failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_)
            | ExperimentError::Data(_)
            | ExperimentError::Problem(_)
            | ExperimentError::Topology(_)
            | ExperimentError::SchemaMismatch(_) => 2,
            ExperimentError::Engine(EngineError::Internal(_)) => 3,
            ExperimentError::Engine(_) => 2,
            ExperimentError::Stability(StabilityError::InnerSolveFailed { .. }) => 3,
            ExperimentError::Stability(StabilityError::Engine(EngineError::Internal(_))) => 3,
            ExperimentError::Stability(_) => 2,
            ExperimentError::Numerical(_) => 3,
            ExperimentError::Io(_) => 1,
            ExperimentError::InCombination { source, .. } => source.exit_code(),
        }
    }
}

impl From<std::io::Error> for ExperimentError {
    fn from(e: std::io::Error) -> Self {
        ExperimentError::Io(e.to_string())
    }
}

pub type Result<T, E = ExperimentError> = std::result::Result<T, E>;

/// Runs `f` on a pool sized by [`WORKERS_ENV`] when set, else on the global pool.
pub fn with_workers<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    match std::env::var(WORKERS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        Some(k) if k > 0 => match rayon::ThreadPoolBuilder::new().num_threads(k).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        _ => f(),
    }
}

/// One combination of sweep factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    /// Fixed rate overriding the configured schedule.
    pub eta: Option<f64>,
    pub topology: TopologyKind,
    pub m: usize,
    pub n: usize,
}

impl Point {
    pub fn base(cfg: &ExperimentConfig) -> Self {
        Self { eta: None, topology: cfg.topology.kind, m: cfg.data.m, n: cfg.data.n }
    }

    pub fn schedule(&self, cfg: &ExperimentConfig) -> Result<Schedule> {
        match self.eta {
            Some(e) => Ok(Schedule::fixed(e)),
            None => cfg.schedule.resolve().map_err(|r| ConfigError::new("<config>", "schedule", r).into()),
        }
    }

    fn describe(&self) -> String {
        let eta = self.eta.map(|e| format!("eta={e}, ")).unwrap_or_default();
        format!("{eta}topology={}, m={}, n={}", self.topology, self.m, self.n)
    }
}

/// Training set, its neighbor and the perturbation between them.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub dataset: DistributedDataset,
    pub neighbor: DistributedDataset,
    pub perturbation: NeighborPerturbation,
}

/// How population risk is evaluated for an instance.
#[derive(Debug, Clone, PartialEq)]
pub enum Population {
    /// Exact objective from the mean coupling and the mean `[b; c]`.
    QuadraticMeans { coupling: Vec<f64>, b: Vec<f64>, c: Vec<f64> },
    /// Held-out samples standing in for the distribution.
    TestSet(Vec<Sample>),
    Unavailable,
}

enum Generator {
    Quadratic(QuadraticSource),
    Sine(SineSource),
    Pool(Vec<Sample>),
}

/// A fully built problem at one sweep point.
pub struct Instance {
    pub problem: ProblemSpec,
    pub mixing: MixingMatrix,
    pub schedule: Schedule,
    /// One draw when the dataset is fixed, one per seed when resampled.
    pub draws: Vec<Draw>,
    pub population: Population,
    generator: Generator,
}

fn problem_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x7072_6f62))
}

fn draw_seed(cfg: &ExperimentConfig, r: usize) -> u64 {
    if cfg.data.resample {
        derive_seed(cfg.data.seed, 1 + r as u64)
    } else {
        cfg.data.seed
    }
}

/// Sampling seed of the algorithm for seed index `k`.
pub fn run_seed(cfg: &ExperimentConfig, k: usize) -> u64 {
    derive_seed(cfg.data.seed, 0x5eed_0000 + k as u64)
}

fn load_auc_pool(cfg: &ExperimentConfig, a: &crate::config::AucConfig) -> Result<Vec<Sample>> {
    match &cfg.data.path {
        Some(path) => {
            let file = std::fs::File::open(path)
                .map_err(|e| ConfigError::new(path.as_str(), "path", e.to_string()))?;
            let records = parse_libsvm(std::io::BufReader::new(file)).map_err(DataError::from)?;
            Ok(to_normalized_binary(&records).map_err(DataError::from)?)
        }
        None => Ok(synthesize_auc_pool(&AucPoolSpec {
            dim: a.dim,
            count: a.pool_size,
            positive_fraction: a.positive_fraction,
            separation: a.separation,
            seed: derive_seed(cfg.data.seed, 0x0061_7563),
        })),
    }
}

impl Instance {
    pub fn build(cfg: &ExperimentConfig, point: &Point) -> Result<Self> {
        let (m, n) = (point.m, point.n);
        let schedule = point.schedule(cfg)?;
        schedule.validate()?;
        let mixing = build_mixing_matrix(Topology::new(point.topology, m))?;
        let count = if cfg.data.resample { cfg.seeds } else { 1 };
        let pi = cfg.data.perturb_index;
        let source_draws = |src: &dyn SampleSource| -> Result<Vec<Draw>> {
            (0..count)
                .map(|r| {
                    let s = draw_seed(cfg, r);
                    let dataset = src.dataset(n, s);
                    let reservoir = src.reservoir(cfg.data.reservoir, s);
                    let (neighbor, perturbation) = make_neighbor(&dataset, &reservoir, pi, s)?;
                    Ok(Draw { dataset, neighbor, perturbation })
                })
                .collect()
        };
        let (family, domain, draws, population, generator, extra) = match &cfg.problem {
            ProblemConfig::Quadratic(q) => {
                let fam = QuadraticScsc::random(m, q.d_x, q.d_y, q.mu_x, q.mu_y, q.coupling_scale, &mut problem_rng(cfg.data.seed))?;
                let src = QuadraticSource::random(m, q.d_x, q.d_y, q.noise, q.mean_scale, cfg.data.seed);
                let draws = source_draws(&src)?;
                let mean = src.population_mean();
                let pop = Population::QuadraticMeans {
                    coupling: fam.mean_coupling(m),
                    b: mean[..q.d_x].to_vec(),
                    c: mean[q.d_x..].to_vec(),
                };
                let dom = DomainSpec::new(q.d_x, q.d_y, q.radius_x, q.radius_y)?;
                (Family::Quadratic(fam), dom, draws, pop, Generator::Quadratic(src), Vec::new())
            }
            ProblemConfig::Sine(s) => {
                let fam = SineNcnc::random(m, s.d_x, s.d_y, s.amplitude, &mut problem_rng(cfg.data.seed))?;
                let src = SineSource::spread(m, s.phase_spread, s.noise);
                let draws = source_draws(&src)?;
                let dom = DomainSpec::new(s.d_x, s.d_y, s.radius_x, s.radius_y)?;
                (Family::Sine(fam), dom, draws, Population::Unavailable, Generator::Sine(src), Vec::new())
            }
            ProblemConfig::Auc(a) => {
                let mut pool = load_auc_pool(cfg, a)?;
                let dim = pool.first().map_or(0, |s| s.features.len());
                if dim == 0 {
                    return Err(DataError::Invalid("AUC pool has no features".into()).into());
                }
                pool.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(cfg.data.seed, 0x7465_7374)));
                let test_len = (cfg.data.test_fraction * pool.len() as f64).round() as usize;
                let train = pool.split_off(test_len);
                let test = pool;
                let draws = (0..count)
                    .map(|r| {
                        let s = draw_seed(cfg, r);
                        let (dataset, rest) = partition_with_rest(&train, m, n, s, "auc")?;
                        let (neighbor, perturbation) = make_neighbor(&dataset, &Reservoir::Shared(rest), pi, s)?;
                        Ok(Draw { dataset, neighbor, perturbation })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let fam = AucCc::from_training(dim, &train)?;
                let dom = DomainSpec::new(dim + 2, 1, a.radius_x, a.radius_y)?;
                let pop = if test.is_empty() { Population::Unavailable } else { Population::TestSet(test.clone()) };
                (Family::Auc(fam), dom, draws, pop, Generator::Pool(train), test)
            }
        };
        let problem = {
            let samples = draws.iter().flat_map(|d| d.dataset.samples().chain(d.neighbor.samples())).chain(extra.iter());
            ProblemSpec::with_certified_constants(family, domain, samples)?
        };
        Ok(Self { problem, mixing, schedule, draws, population, generator })
    }

    pub fn draw_for(&self, k: usize) -> &Draw {
        &self.draws[k % self.draws.len()]
    }

    pub fn run_config(&self, cfg: &ExperimentConfig, seed: u64) -> RunConfig {
        RunConfig {
            problem: self.problem.clone(),
            mixing: self.mixing.clone(),
            iterations: cfg.iterations,
            schedule: self.schedule,
            seed,
            record_every: Some(cfg.stride),
        }
    }

    pub fn bound_inputs(&self, cfg: &ExperimentConfig, point: &Point) -> BoundInputs {
        BoundInputs {
            constants: self.problem.constants,
            n: point.n,
            m: point.m,
            t: cfg.iterations,
            lambda: self.mixing.lambda(),
            schedule: self.schedule,
            c_x: self.problem.domain.radius_x,
            c_y: self.problem.domain.radius_y,
        }
    }

    /// `count` tuples of one fresh sample per agent, for the weak stability supremum.
    pub fn probe_pool(&self, count: usize, seed: u64) -> Vec<Vec<Sample>> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x706f_6f6c));
        let m = self.mixing.m();
        match &self.generator {
            Generator::Quadratic(s) => (0..count).map(|_| (0..m).map(|i| s.draw(i, &mut rng)).collect()).collect(),
            Generator::Sine(s) => (0..count).map(|_| (0..m).map(|i| s.draw(i, &mut rng)).collect()).collect(),
            Generator::Pool(p) => (0..count)
                .map(|_| (0..m).map(|_| p.choose(&mut rng).expect("pool nonempty").clone()).collect())
                .collect(),
        }
    }

    /// Population objective, when one is available.
    pub fn population_objective(&self) -> Option<Box<dyn SaddleObjective + '_>> {
        match (&self.population, &self.problem.family) {
            (Population::QuadraticMeans { coupling, b, c }, Family::Quadratic(q)) => Some(Box::new(
                QuadraticMeanObjective { family: q, coupling: coupling.clone(), b: b.clone(), c: c.clone() },
            )),
            (Population::TestSet(t), _) => Some(Box::new(SampleAverageObjective { problem: &self.problem, samples: t })),
            _ => None,
        }
    }
}

/// Checks feasibility and finiteness of every recorded iterate.
pub fn check_trajectory(t: &Trajectory, domain: &DomainSpec) -> Result<()> {
    for r in &t.records {
        let s = &r.state;
        let bad = s.x.iter().chain(&s.y).any(|v| !v.is_finite());
        if bad {
            return Err(ExperimentError::Numerical(format!("non-finite iterate at t = {}", r.t)));
        }
        for i in 0..s.m {
            let (xn, yn) = (linalg::norm(s.x_row(i)), linalg::norm(s.y_row(i)));
            if xn > domain.radius_x * (1.0 + 1e-12) + 1e-12 || yn > domain.radius_y * (1.0 + 1e-12) + 1e-12 {
                return Err(ExperimentError::Numerical(format!("agent {i} left the domain at t = {}", r.t)));
            }
        }
    }
    Ok(())
}

/// Per-seed outcome of a coupled run; trajectories are dropped after reduction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub index: usize,
    pub seed: u64,
    pub delta: Vec<DeltaPoint>,
    pub first_perturbed_draw: Option<usize>,
    pub final_pair: ModelPair,
    pub avg_pair: ModelPair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub point: Point,
    pub lambda: f64,
    pub constants: ProblemConstants,
    /// Whether every iteration meets the contraction step window.
    pub step_condition_holds: bool,
    pub outcomes: Vec<SeedOutcome>,
    pub report: StabilityReport,
    pub bounds: Vec<BoundReport>,
    pub bound_fixed: f64,
    pub bound_exact: f64,
    pub risk: Option<RiskReport>,
    /// `sqrt(2) G eps` for the final output.
    pub weak_gap_bound: f64,
    pub warnings: Vec<String>,
    pub runtime_seconds: f64,
}

impl StudyResult {
    pub fn gap_weak(&self) -> f64 {
        self.risk.map_or(f64::NAN, |r| r.weak_gap)
    }
}

/// Stability bounds of the family at `inp`, plus the closed-form and exact values.
pub fn family_bounds(family: &Family, inp: &BoundInputs) -> (Vec<BoundReport>, f64, f64, Vec<String>) {
    let fixed = inp.schedule.is_fixed();
    let mode = if fixed { RateMode::Fixed } else { RateMode::Decaying };
    let mut warnings = Vec::new();
    let mut keep = |r: Result<BoundReport, BoundError>, out: &mut Vec<BoundReport>| -> Option<usize> {
        match r {
            Ok(b) => {
                out.push(b);
                Some(out.len() - 1)
            }
            Err(e) => {
                warnings.push(e.to_string());
                None
            }
        }
    };
    let mut out = Vec::new();
    let value = |out: &Vec<BoundReport>, i: Option<usize>| i.map_or(f64::NAN, |i: usize| out[i].value);
    let (bf, be) = match family {
        Family::Quadratic(_) => {
            let exact = keep(bounds::scsc_stability_general(inp), &mut out);
            let closed = if fixed {
                let i = keep(bounds::scsc_stability_fixed(inp), &mut out);
                value(&out, i)
            } else {
                let i = keep(bounds::scsc_stability_decaying(inp), &mut out);
                i.map_or(f64::NAN, |i| out[i].closed_form.unwrap_or(out[i].value))
            };
            keep(bounds::scsc_optimization_error(inp, mode), &mut out);
            let setting = if fixed { RiskSetting::ScscFixed } else { RiskSetting::ScscDecaying };
            keep(bounds::population_risk_bound(inp, setting), &mut out);
            (closed, value(&out, exact))
        }
        Family::Auc(_) => {
            let exact = keep(bounds::cc_stability(inp), &mut out);
            let closed = keep(bounds::cc_stability_closed_form(inp), &mut out);
            keep(bounds::population_risk_bound(inp, RiskSetting::CcFixed), &mut out);
            (value(&out, closed), value(&out, exact))
        }
        Family::Sine(_) => {
            let i = keep(bounds::ncnc_weak_stability(inp, mode), &mut out);
            (value(&out, i), value(&out, i))
        }
    };
    (out, bf, be, warnings)
}

/// Coupled stability study at one point: seeds run in parallel, results in seed order.
pub fn stability_study(cfg: &ExperimentConfig, point: &Point) -> Result<StudyResult> {
    let start = Instant::now();
    let inst = Instance::build(cfg, point)?;
    let outcomes = (0..cfg.seeds)
        .into_par_iter()
        .map(|k| {
            let draw = inst.draw_for(k);
            let rc = inst.run_config(cfg, run_seed(cfg, k));
            let cr = coupled_run(&rc, &draw.dataset, &draw.neighbor, &draw.perturbation)?;
            check_trajectory(&cr.traj_a, &inst.problem.domain)?;
            check_trajectory(&cr.traj_b, &inst.problem.domain)?;
            Ok(SeedOutcome {
                index: k,
                seed: rc.seed,
                first_perturbed_draw: cr.first_perturbed_draw,
                final_pair: ModelPair::from_run(&cr, OutputMode::Final),
                avg_pair: ModelPair::from_run(&cr, OutputMode::AvgIterate),
                delta: cr.delta,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let finals: Vec<f64> = outcomes.iter().map(|o| o.delta.last().map_or(0.0, |d| d.delta)).collect();
    let avgs: Vec<f64> = outcomes.iter().map(|o| o.delta.last().map_or(0.0, |d| d.delta_avg_iterate)).collect();
    let epsilon_weak = if matches!(inst.problem.family, Family::Sine(_)) {
        let pool = inst.probe_pool(cfg.probe.pool, cfg.data.seed);
        let models: Vec<ModelPair> = outcomes.iter().map(|o| o.final_pair.clone()).collect();
        Some(weak_stability_estimate(&inst.problem, &models, cfg.probe.grid_x, cfg.probe.grid_y, &pool)?.value)
    } else {
        None
    };
    let report = StabilityReport {
        epsilon_arg: Estimate::from_values(&finals),
        epsilon_arg_avg_iterate: Estimate::from_values(&avgs),
        epsilon_weak,
        seeds: outcomes.len(),
    };
    let risk = match (inst.population_objective(), &inst.problem.family) {
        (Some(pop), Family::Quadratic(_)) => {
            let emp: Vec<EmpiricalObjective> = (0..outcomes.len())
                .map(|k| EmpiricalObjective { problem: &inst.problem, dataset: &inst.draw_for(k).dataset })
                .collect();
            let emp_refs: Vec<&dyn SaddleObjective> = emp.iter().map(|e| e as &dyn SaddleObjective).collect();
            let pop_refs: Vec<&dyn SaddleObjective> = vec![pop.as_ref(); outcomes.len()];
            let models: Vec<(Vec<f64>, Vec<f64>)> =
                outcomes.iter().map(|o| (o.final_pair.x_a.clone(), o.final_pair.y_a.clone())).collect();
            Some(weak_pd_risks(&inst.problem, &models, &emp_refs, &pop_refs)?)
        }
        _ => None,
    };
    let inp = inst.bound_inputs(cfg, point);
    let (bounds, bound_fixed, bound_exact, mut warnings) = family_bounds(&inst.problem.family, &inp);
    let mu = inst.problem.constants.mu();
    let step_ok = mu > 0.0 && inst.run_config(cfg, 0).step_condition_holds();
    if matches!(inst.problem.family, Family::Quadratic(_)) && !step_ok {
        warnings.push("step size window for contraction is violated; SC-SC bound comparisons are not certified".into());
    }
    let k = inst.problem.constants;
    let weak_gap_bound = gen_gap_from_stability(report.epsilon_arg.mean, k.g, k.l, mu, GapMode::Weak)?;
    Ok(StudyResult {
        point: point.clone(),
        lambda: inst.mixing.lambda(),
        constants: k,
        step_condition_holds: step_ok,
        outcomes,
        report,
        bounds,
        bound_fixed,
        bound_exact,
        risk,
        weak_gap_bound,
        warnings,
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Names of the non-empty sweep axes, in column order.
pub fn axis_names(cfg: &ExperimentConfig) -> Vec<&'static str> {
    let s = &cfg.sweep;
    let mut v = Vec::new();
    if !s.eta.is_empty() {
        v.push("eta");
    }
    if !s.topology.is_empty() {
        v.push("topology");
    }
    if !s.n.is_empty() {
        v.push("n");
    }
    if !s.m.is_empty() {
        v.push("m");
    }
    v
}

/// Cartesian product of the axes, `eta` outermost and `m` innermost.
pub fn sweep_points(cfg: &ExperimentConfig) -> Vec<Point> {
    let base = Point::base(cfg);
    let s = &cfg.sweep;
    let etas: Vec<Option<f64>> = if s.eta.is_empty() { vec![None] } else { s.eta.iter().map(|&e| Some(e)).collect() };
    let tops = if s.topology.is_empty() { vec![base.topology] } else { s.topology.clone() };
    let ns = if s.n.is_empty() { vec![base.n] } else { s.n.clone() };
    let ms = if s.m.is_empty() { vec![base.m] } else { s.m.clone() };
    let mut out = Vec::new();
    for &eta in &etas {
        for &topology in &tops {
            for &n in &ns {
                for &m in &ms {
                    out.push(Point { eta, topology, m, n });
                }
            }
        }
    }
    out
}

pub fn axis_values(point: &Point, axes: &[&str]) -> Vec<String> {
    axes.iter()
        .map(|a| match *a {
            "eta" => fmt_f64(point.eta.unwrap_or(f64::NAN)),
            "topology" => point.topology.name().to_string(),
            "n" => point.n.to_string(),
            "m" => point.m.to_string(),
            _ => unreachable!("unknown axis"),
        })
        .collect()
}

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis_values: Vec<String>,
    pub seed_count: usize,
    pub eps_mean: f64,
    pub eps_stderr: f64,
    pub bound_fixed: f64,
    pub bound_exact: f64,
    pub gap_weak: f64,
    pub runtime_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axes: Vec<String>,
    pub rows: Vec<SweepRow>,
    pub studies: Vec<StudyResult>,
}

/// Runs one stability study per sweep combination.
pub fn sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    let axes = axis_names(cfg);
    let points = sweep_points(cfg);
    let studies = with_workers(|| {
        points
            .par_iter()
            .map(|p| {
                stability_study(cfg, p)
                    .map_err(|e| ExperimentError::InCombination { context: p.describe(), source: Box::new(e) })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let rows = studies
        .iter()
        .map(|s| SweepRow {
            axis_values: axis_values(&s.point, &axes),
            seed_count: s.report.seeds,
            eps_mean: s.report.epsilon_arg.mean,
            eps_stderr: s.report.epsilon_arg.stderr,
            bound_fixed: s.bound_fixed,
            bound_exact: s.bound_exact,
            gap_weak: s.gap_weak(),
            runtime_seconds: s.runtime_seconds,
        })
        .collect();
    Ok(SweepResult { axes: axes.iter().map(|a| a.to_string()).collect(), rows, studies })
}

/// Runs [`sweep`] and writes `sweep.csv` and `sweep_bounds.csv` into `dir`.
pub fn sweep_to_dir(cfg: &ExperimentConfig, dir: &Path) -> Result<SweepResult> {
    let result = sweep(cfg)?;
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("sweep.csv"), crate::report::sweep_csv(&result))?;
    std::fs::write(dir.join("sweep_bounds.csv"), crate::report::sweep_bounds_csv(&result))?;
    Ok(result)
}
