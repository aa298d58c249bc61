//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_FAILURES` are evaluated and reported like every
//! other criterion, but do not fail the process; the reason is printed.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dsgda::bounds::{scsc_optimization_error, RateMode};
use dsgda::config::ExperimentConfig;
use dsgda::data::{enumerate_tuple_average, shard_average};
use dsgda::engine::{consensus_bound_series, expansiveness_probe, run, ExpansivenessClaim};
use dsgda::experiment::{run_seed, stability_study, sweep, sweep_to_dir, Instance, Point, SweepResult};
use dsgda::problems::{finite_difference_error, AucCc, DomainSpec, Family, ProblemSpec, QuadraticScsc, Sample, SineNcnc};
use dsgda::report::{sweep_bounds_csv, sweep_csv};
use dsgda::stability::{strong_gaps, EmpiricalObjective, Estimate, SaddleObjective};
use dsgda::topology::{build_mixing_matrix, c_lambda, geometric_decay_series, Topology, TopologyKind};

/// Tolerances pinned by the criteria.
const MIXING_TOL: f64 = 1e-12;
const RING_TOL: f64 = 1e-10;
const PROBE_TOL: f64 = 1e-10;
const DECOMPOSITION_TOL: f64 = 1e-12;
const GRADIENT_TOL: f64 = 1e-5;
const SLACK_SIGMAS: f64 = 3.0;

const KNOWN_FAILURES: [(&str, &str); 1] = [(
    "3a",
    "the one-step GDA map of a coupled strongly-convex-strongly-concave quadratic is not \
     (1 - eta_min L mu/(L+mu))-contractive: the bilinear block rotates the iterate and the \
     factor only holds for uncoupled blocks (see the diagnostic with zero coupling)",
)];

struct Outcome {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn outcome(id: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome { id, pass, detail }
}

fn cfg(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml_str(text, Path::new("acceptance.toml")).expect("acceptance config is valid")
}

fn diff_within(a: &Estimate, b: &Estimate) -> f64 {
    SLACK_SIGMAS * a.stderr.hypot(b.stderr)
}

fn criterion_1() -> Outcome {
    let mut worst_sym: f64 = 0.0;
    let mut worst_sto: f64 = 0.0;
    let mut worst_ring: f64 = 0.0;
    let mut exact = true;
    for m in [4usize, 9, 16, 64] {
        for kind in TopologyKind::ALL {
            let w = build_mixing_matrix(Topology::new(kind, m)).expect("mixing matrix");
            worst_sym = worst_sym.max(w.max_asymmetry());
            worst_sto = worst_sto.max(w.max_stochasticity_error());
            match kind {
                TopologyKind::FullyConnected => exact &= w.lambda() == 0.0,
                TopologyKind::Disconnected => exact &= w.lambda() == 1.0,
                TopologyKind::Ring => {
                    let want = (1.0 + 2.0 * (2.0 * std::f64::consts::PI / m as f64).cos()) / 3.0;
                    worst_ring = worst_ring.max((w.lambda() - want).abs());
                }
                _ => {}
            }
        }
    }
    let pass = worst_sym <= MIXING_TOL && worst_sto <= MIXING_TOL && exact && worst_ring <= RING_TOL;
    outcome(
        "1",
        pass,
        format!("asymmetry {worst_sym:.1e}, stochasticity {worst_sto:.1e}, full/single exact {exact}, ring error {worst_ring:.1e}"),
    )
}

fn criterion_2() -> Outcome {
    let mut violations = 0;
    let mut checked = 0;
    for step in 1..=9 {
        let lambda = step as f64 / 10.0;
        for k in [0.5, 0.75, 1.0] {
            let c = c_lambda(lambda, k).expect("c_lambda");
            for (i, s) in geometric_decay_series(lambda, k, 10_000).iter().enumerate() {
                checked += 1;
                if *s > c / ((i + 1) as f64).powf(k) {
                    violations += 1;
                }
            }
        }
    }
    outcome("2", violations == 0, format!("{violations} violations over {checked} (lambda, k, t) triples"))
}

fn random_point(rng: &mut ChaCha8Rng, d: usize, radius: f64) -> Vec<f64> {
    let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let n = v.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-300);
    let r = radius * rng.random::<f64>();
    v.iter().map(|a| a * r / n).collect()
}

type Pair = ((Vec<f64>, Vec<f64>), (Vec<f64>, Vec<f64>));

fn random_pairs(rng: &mut ChaCha8Rng, dom: &DomainSpec, count: usize) -> Vec<Pair> {
    (0..count)
        .map(|_| {
            let mut p = || (random_point(rng, dom.d_x, dom.radius_x), random_point(rng, dom.d_y, dom.radius_y));
            (p(), p())
        })
        .collect()
}

fn random_quadratic(rng: &mut ChaCha8Rng, mu_x: f64, mu_y: f64, scale: f64) -> (ProblemSpec, Sample) {
    let fam = QuadraticScsc::random(1, 2, 2, mu_x, mu_y, scale, rng).expect("quadratic");
    let sample = Sample::unlabeled((0..4).map(|_| rng.random_range(-1.0..1.0)).collect());
    let dom = DomainSpec::new(2, 2, 3.0, 3.0).unwrap();
    let p = ProblemSpec::with_certified_constants(Family::Quadratic(fam), dom, [&sample]).expect("constants");
    (p, sample)
}

fn criterion_3() -> (Outcome, Outcome) {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst_contraction = f64::NEG_INFINITY;
    let mut violations = 0;
    let mut diag_uncoupled = f64::NEG_INFINITY;
    for _ in 0..10 {
        let mu = rng.random_range(0.5..1.5);
        let scale = rng.random_range(0.5..1.5);
        let (p, s) = random_quadratic(&mut rng, mu, mu, scale);
        let k = p.constants;
        let eta = 1.0 / (k.l + k.mu());
        let pairs = random_pairs(&mut rng, &p.domain, 1000);
        let r = expansiveness_probe(&p, 0, &s, eta, eta, &pairs, ExpansivenessClaim::Contraction)
            .expect("step window holds by construction");
        worst_contraction = worst_contraction.max(r.max_ratio - r.claimed);
        if r.max_ratio > r.claimed + PROBE_TOL {
            violations += 1;
        }
        let (pu, su) = random_quadratic(&mut rng, mu, mu, 0.0);
        let ku = pu.constants;
        let eta = 1.0 / (ku.l + ku.mu());
        let r = expansiveness_probe(&pu, 0, &su, eta, eta, &pairs, ExpansivenessClaim::Contraction).unwrap();
        diag_uncoupled = diag_uncoupled.max(r.max_ratio - r.claimed);
    }
    let a = outcome(
        "3a",
        violations == 0,
        format!(
            "contraction: {violations}/10 instances exceed the claimed factor, worst excess {worst_contraction:.3e}; \
             zero-coupling diagnostic worst excess {diag_uncoupled:.3e}"
        ),
    );

    let mut worst_smooth = f64::NEG_INFINITY;
    let mut smooth_violations = 0;
    let mut probes = 0;
    for i in 0..30 {
        let (p, s) = match i % 3 {
            0 => random_quadratic(&mut rng, 1.0, 0.5, 1.0),
            1 => random_quadratic(&mut rng, 0.0, 0.0, 1.0),
            _ => {
                let fam = SineNcnc::random(1, 2, 2, 1.0, &mut rng).unwrap();
                let dom = DomainSpec::new(2, 2, 3.0, 3.0).unwrap();
                let s = Sample::unlabeled(vec![rng.random_range(-1.0..1.0)]);
                (ProblemSpec::with_certified_constants(Family::Sine(fam), dom, [&s]).unwrap(), s)
            }
        };
        let eta = rng.random_range(0.01..0.5);
        let pairs = random_pairs(&mut rng, &p.domain, 1000);
        let r = expansiveness_probe(&p, 0, &s, eta, 0.5 * eta, &pairs, ExpansivenessClaim::Smooth).unwrap();
        probes += r.pairs_used;
        worst_smooth = worst_smooth.max(r.max_ratio - r.claimed);
        if r.max_ratio > r.claimed + PROBE_TOL {
            smooth_violations += 1;
        }
    }
    let b = outcome(
        "3b",
        smooth_violations == 0,
        format!("smooth expansiveness: {smooth_violations} violating instances, {probes} pairs, worst excess {worst_smooth:.3e}"),
    );
    (a, b)
}

fn criterion_4() -> Outcome {
    let mut violations = 0;
    let mut checked = 0;
    for r in 0..20 {
        let kind = TopologyKind::ALL[r % TopologyKind::ALL.len()];
        let family = if r % 2 == 0 { "quadratic" } else { "auc" };
        let schedule = if r % 4 < 2 {
            "kind = \"fixed\"\neta = 0.05"
        } else {
            "kind = \"decaying\"\nmu = 2.0\nc = 0.75"
        };
        let text = format!(
            "T = 400\nseeds = 2\n[problem]\nfamily = \"{family}\"\n[data]\nm = 9\nn = 40\nseed = {r}\n\
             [topology]\nkind = \"{}\"\n[schedule]\n{schedule}\n",
            kind.name()
        );
        let c = cfg(&text);
        let inst = Instance::build(&c, &Point::base(&c)).expect("instance");
        let rc = inst.run_config(&c, run_seed(&c, 0));
        let traj = run(&rc, &inst.draw_for(0).dataset).expect("run");
        let bound =
            consensus_bound_series(inst.problem.constants.g, 9, inst.mixing.lambda(), &inst.schedule, c.iterations);
        for rec in &traj.records {
            checked += 1;
            if rec.consensus > bound[rec.t] * (1.0 + 1e-12) {
                violations += 1;
            }
        }
    }
    outcome("4", violations == 0, format!("{violations} violations over {checked} recorded iterates in 20 runs"))
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for (m, n) in [(2usize, 3usize), (3, 2)] {
        let fam = SineNcnc::random(m, 2, 1, 1.0, &mut rng).unwrap();
        let dom = DomainSpec::new(2, 1, 2.0, 2.0).unwrap();
        let p = ProblemSpec::with_certified_constants(Family::Sine(fam), dom, std::iter::empty()).unwrap();
        let x = random_point(&mut rng, 2, 2.0);
        let y = random_point(&mut rng, 1, 2.0);
        let values: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                (0..n)
                    .map(|_| p.loss(i, &x, &y, &Sample::unlabeled(vec![rng.random_range(-3.0..3.0)])).unwrap())
                    .collect()
            })
            .collect();
        worst = worst.max((enumerate_tuple_average(&values) - shard_average(&values)).abs());
    }
    outcome("5", worst <= DECOMPOSITION_TOL, format!("max |enumeration - shard average| = {worst:.2e}"))
}

fn criterion_6() -> Outcome {
    let c = cfg("T = 2000\nseeds = 10\nstride = 100\n[problem]\nfamily = \"quadratic\"\n[data]\nm = 8\nn = 50\nseed = 3\n\
         [sweep]\neta = [0.001, 0.005, 0.01]\nn = [50, 200]\ntopology = [\"full\", \"ring\"]\n");
    let res = sweep(&c).expect("sweep");
    let mut worst_ratio = f64::INFINITY;
    let mut failures = 0;
    for s in &res.studies {
        let fixed = s.bounds.iter().find(|b| b.name == "scsc_stability_fixed").expect("fixed bound").value;
        let upper = s.report.epsilon_arg.upper(SLACK_SIGMAS);
        worst_ratio = worst_ratio.min(fixed / upper);
        if upper > fixed {
            failures += 1;
        }
    }
    outcome(
        "6",
        failures == 0,
        format!("{failures}/{} cells exceed the bound; smallest bound/(eps + 3se) = {worst_ratio:.2}", res.studies.len()),
    )
}

const TOPOLOGY_SWEEP: &str = "T = 2000\nseeds = 10\nstride = 100\n[problem]\nfamily = \"auc\"\n[data]\nm = 16\nn = 200\nseed = 7\n\
     [schedule]\nkind = \"fixed\"\neta = 0.05\n[sweep]\ntopology = [\"full\", \"exp\", \"ring\", \"single\"]\n";

/// Final stacked distance over all agents' parameters, per topology.
fn parameter_set_distance(res: &SweepResult) -> Vec<(String, Estimate, Estimate)> {
    res.studies
        .iter()
        .map(|s| {
            let stacked: Vec<f64> = s.outcomes.iter().map(|o| o.delta.last().unwrap().delta_agents).collect();
            (s.point.topology.name().to_string(), Estimate::from_values(&stacked), s.report.epsilon_arg)
        })
        .collect()
}

fn criterion_7() -> Outcome {
    let res = sweep(&cfg(TOPOLOGY_SWEEP)).expect("sweep");
    let rows = parameter_set_distance(&res);
    let ordered = rows.windows(2).all(|w| w[0].1.mean <= w[1].1.mean + diff_within(&w[0].1, &w[1].1));
    let ratio = rows[3].1.mean / rows[0].1.mean;
    let summary: Vec<String> =
        rows.iter().map(|(t, d, mean_out)| format!("{t} {:.3e} (agent-mean {:.3e})", d.mean, mean_out.mean)).collect();
    outcome(
        "7",
        ordered && ratio >= 2.0,
        format!("parameter-set distance {}; single/full = {ratio:.2}; ordered {ordered}", summary.join(", ")),
    )
}

fn criterion_8() -> Outcome {
    let c = cfg("T = 2000\nseeds = 10\nstride = 100\n[problem]\nfamily = \"quadratic\"\n[data]\nm = 8\nn = 50\nseed = 3\n\
         [sweep]\nn = [50, 100, 200, 400]\n");
    let res = sweep(&c).expect("sweep");
    let eps: Vec<Estimate> = res.studies.iter().map(|s| s.report.epsilon_arg).collect();
    let strictly = eps.windows(2).all(|w| w[1].mean < w[0].mean);
    let within = eps.windows(2).all(|w| w[1].mean <= w[0].mean + diff_within(&w[0], &w[1]));
    let list: Vec<String> = eps.iter().map(|e| format!("{:.3e}+-{:.1e}", e.mean, e.stderr)).collect();
    outcome("8", strictly && within, format!("eps over n = 50..400: {}", list.join(", ")))
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    for family in 0..3 {
        for _ in 0..100 {
            let (p, agent, s) = match family {
                0 => {
                    let (p, s) = random_quadratic(&mut rng, 0.7, 1.3, 1.0);
                    (p, 0, s)
                }
                1 => {
                    let fam = AucCc::new(3, rng.random_range(0.1..0.9)).unwrap();
                    let label = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                    let s = Sample::new(label, (0..3).map(|_| rng.random_range(-1.0..1.0)).collect());
                    let dom = DomainSpec::new(5, 1, 2.0, 2.0).unwrap();
                    (ProblemSpec::with_certified_constants(Family::Auc(fam), dom, [&s]).unwrap(), 0, s)
                }
                _ => {
                    let fam = SineNcnc::random(3, 2, 2, 1.5, &mut rng).unwrap();
                    let dom = DomainSpec::new(2, 2, 3.0, 3.0).unwrap();
                    let s = Sample::unlabeled(vec![rng.random_range(-2.0..2.0)]);
                    let p = ProblemSpec::with_certified_constants(Family::Sine(fam), dom, [&s]).unwrap();
                    (p, rng.random_range(0..3), s)
                }
            };
            let x = random_point(&mut rng, p.domain.d_x, p.domain.radius_x * 0.99);
            let y = random_point(&mut rng, p.domain.d_y, p.domain.radius_y * 0.99);
            let err = finite_difference_error(&p, agent, &x, &y, &s).expect("inside domain");
            worst = worst.max(err);
            if err > GRADIENT_TOL {
                failures += 1;
            }
        }
    }
    outcome("9", failures == 0, format!("{failures}/300 probes fail; worst relative error {worst:.2e}"))
}

fn criterion_10() -> Outcome {
    let t = 10_000usize;
    let eta = 1.0 / (t as f64).sqrt();
    let c = cfg(&format!(
        "T = {t}\nseeds = 3\nstride = {t}\n[problem]\nfamily = \"quadratic\"\n[data]\nm = 8\nn = 100\nseed = 10\n\
         [schedule]\nkind = \"fixed\"\neta = {eta}\n"
    ));
    let point = Point::base(&c);
    let inst = Instance::build(&c, &point).expect("instance");
    let ds = &inst.draw_for(0).dataset;
    let models: Vec<(Vec<f64>, Vec<f64>)> = (0..c.seeds)
        .map(|k| {
            let traj = run(&inst.run_config(&c, run_seed(&c, k)), ds).expect("run");
            (traj.x_ave, traj.y_ave)
        })
        .collect();
    let emp = EmpiricalObjective { problem: &inst.problem, dataset: ds };
    let objs: Vec<&dyn SaddleObjective> = vec![&emp; models.len()];
    let risks = strong_gaps(&inst.problem, &objs, &models).expect("inner solves");
    let worst = risks.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let bound = scsc_optimization_error(&inst.bound_inputs(&c, &point), RateMode::Fixed).expect("bound").value;
    outcome("10", worst <= bound, format!("max strong empirical risk of the average iterate {worst:.3e} vs bound {bound:.3e}"))
}

fn criterion_11() -> Outcome {
    let c = cfg("T = 2000\nseeds = 50\nstride = 2000\n[problem]\nfamily = \"quadratic\"\n[data]\nm = 4\nn = 50\nseed = 11\n\
         resample = true\n[schedule]\nkind = \"fixed\"\neta = 0.01\n");
    let s = stability_study(&c, &Point::base(&c)).expect("study");
    let risk = s.risk.expect("population oracle");
    let g = s.constants.g;
    let eps = s.report.epsilon_arg;
    let combined = risk.weak_gap_stderr.hypot(2f64.sqrt() * g * eps.stderr);
    let rhs = 2f64.sqrt() * g * eps.mean + SLACK_SIGMAS * combined;
    outcome(
        "11",
        risk.weak_gap <= rhs,
        format!("weak gap {:.3e} (jackknife se {:.1e}) vs sqrt(2) G eps + 3se = {rhs:.3e}", risk.weak_gap, risk.weak_gap_stderr),
    )
}

fn criterion_12() -> Outcome {
    let c = cfg(TOPOLOGY_SWEEP);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ra = sweep_to_dir(&c, a.path()).expect("first sweep");
    let rb = sweep_to_dir(&c, b.path()).expect("second sweep");
    let same_files = ["sweep.csv", "sweep_bounds.csv"]
        .iter()
        .all(|f| std::fs::read(a.path().join(f)).unwrap() == std::fs::read(b.path().join(f)).unwrap());
    let same_text = sweep_csv(&ra) == sweep_csv(&rb) && sweep_bounds_csv(&ra) == sweep_bounds_csv(&rb);
    outcome("12", same_files && same_text, format!("byte-identical sweep outputs: {}", same_files && same_text))
}

fn main() {
    let start = std::time::Instant::now();
    let (c3a, c3b) = criterion_3();
    let outcomes = vec![
        criterion_1(),
        criterion_2(),
        c3a,
        c3b,
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
        criterion_10(),
        criterion_11(),
        criterion_12(),
    ];
    let mut unexpected = 0;
    for o in &outcomes {
        let known = KNOWN_FAILURES.iter().find(|(id, _)| *id == o.id);
        println!("{} criterion {}: {}", if o.pass { "PASS" } else { "FAIL" }, o.id, o.detail);
        match (o.pass, known) {
            (false, Some((_, why))) => println!("     known failure: {why}"),
            (false, None) => unexpected += 1,
            (true, Some(_)) => println!("     note: listed as a known failure but passed"),
            (true, None) => {}
        }
    }
    let passed = outcomes.iter().filter(|o| o.pass).count();
    println!("{passed}/{} criteria pass, {unexpected} unexpected failures, {:.1}s", outcomes.len(), start.elapsed().as_secs_f64());
    if unexpected > 0 {
        std::process::exit(1);
    }
}
