use dsgda::data::{partition, DistributedDataset, Provenance};
use dsgda::engine::{consensus_residual, dsgda_step, run, project_ball, RunConfig, Schedule, State};
use dsgda::problems::{DomainSpec, Family, ProblemSpec, QuadraticScsc, Sample};
use dsgda::rng::sample_index;
use dsgda::topology::{build_mixing_matrix, Topology, TopologyKind};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn quadratic(m: usize, radius: f64, seed: u64) -> (ProblemSpec, QuadraticScsc, DistributedDataset) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = QuadraticScsc::random(m, 2, 2, 1.0, 0.5, 0.8, &mut rng).unwrap();
    let pool: Vec<Sample> =
        (0..m * 7).map(|_| Sample::unlabeled((0..4).map(|_| rng.random_range(-2.0..2.0)).collect())).collect();
    let ds = partition(&pool, m, 7, seed).unwrap();
    let dom = DomainSpec::new(2, 2, radius, radius).unwrap();
    let p = ProblemSpec::with_certified_constants(Family::Quadratic(q.clone()), dom, ds.samples()).unwrap();
    (p, q, ds)
}

fn config(p: ProblemSpec, kind: TopologyKind, m: usize, t: usize, eta: f64, seed: u64) -> RunConfig {
    RunConfig {
        problem: p,
        mixing: build_mixing_matrix(Topology::new(kind, m)).unwrap(),
        iterations: t,
        schedule: Schedule::fixed(eta),
        seed,
        record_every: Some(1),
    }
}

/// Explicit gradient of `mu_x/2|x|^2 - mu_y/2|y|^2 + x^T A y + b^T x + c^T y`.
fn hand_grad(q: &QuadraticScsc, agent: usize, x: &[f64], y: &[f64], s: &Sample) -> (Vec<f64>, Vec<f64>) {
    let a = q.coupling(agent);
    let (b, c) = s.features.split_at(q.d_x);
    let gx = (0..q.d_x).map(|r| q.mu_x * x[r] + (0..q.d_y).map(|k| a[r * q.d_y + k] * y[k]).sum::<f64>() + b[r]).collect();
    let gy = (0..q.d_y).map(|k| -q.mu_y * y[k] + (0..q.d_x).map(|r| a[r * q.d_y + k] * x[r]).sum::<f64>() + c[k]).collect();
    (gx, gy)
}

#[test]
fn single_agent_matches_plain_projected_sgda() {
    let (p, q, ds) = quadratic(1, 1.5, 2);
    let (eta, seed, t_max) = (0.2, 99, 60);
    let traj = run(&config(p, TopologyKind::FullyConnected, 1, t_max, eta, seed), &ds).unwrap();
    let (mut x, mut y) = (vec![0.0; 2], vec![0.0; 2]);
    for t in 0..t_max {
        let s = &ds.shards[0][sample_index(seed, 0, t, ds.n())];
        let (gx, gy) = hand_grad(&q, 0, &x, &y, s);
        let nx: Vec<f64> = x.iter().zip(&gx).map(|(a, g)| a - eta * g).collect();
        let ny: Vec<f64> = y.iter().zip(&gy).map(|(a, g)| a + eta * g).collect();
        x = project_ball(&nx, 1.5);
        y = project_ball(&ny, 1.5);
        let rec = &traj.records[t + 1];
        for (a, b) in rec.x_bar.iter().zip(&x).chain(rec.y_bar.iter().zip(&y)) {
            assert!((a - b).abs() <= 1e-12, "t = {t}: {a} vs {b}");
        }
    }
}

#[test]
fn two_steps_match_hand_computation() {
    let m = 4;
    let (p, q, ds) = quadratic(m, 10.0, 4);
    let (eta, seed) = (0.1, 5);
    let cfg = config(p, TopologyKind::Ring, m, 2, eta, seed);
    let traj = run(&cfg, &ds).unwrap();
    // Ring of four with self-weight 1/3.
    let w = |i: usize, k: usize| if i == k || (i + 1) % m == k || (k + 1) % m == i { 1.0 / 3.0 } else { 0.0 };
    let mut xs = vec![vec![0.0; 2]; m];
    let mut ys = vec![vec![0.0; 2]; m];
    for t in 0..2 {
        let (mut nx, mut ny) = (xs.clone(), ys.clone());
        for i in 0..m {
            let s = &ds.shards[i][sample_index(seed, i, t, ds.n())];
            let (gx, gy) = hand_grad(&q, i, &xs[i], &ys[i], s);
            for r in 0..2 {
                nx[i][r] = (0..m).map(|k| w(i, k) * xs[k][r]).sum::<f64>() - eta * gx[r];
                ny[i][r] = (0..m).map(|k| w(i, k) * ys[k][r]).sum::<f64>() + eta * gy[r];
            }
        }
        xs = nx;
        ys = ny;
    }
    let st = &traj.final_state;
    for i in 0..m {
        for r in 0..2 {
            assert!((st.x_row(i)[r] - xs[i][r]).abs() < 1e-13);
            assert!((st.y_row(i)[r] - ys[i][r]).abs() < 1e-13);
        }
    }
}

#[test]
fn mixing_preserves_the_mean_without_projection() {
    let m = 6;
    let (p, q, ds) = quadratic(m, 1e6, 8);
    let cfg = config(p, TopologyKind::Exponential, m, 1, 0.05, 17);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut st = State::zeros(m, 2, 2);
    st.x.iter_mut().chain(st.y.iter_mut()).for_each(|v| *v = rng.random_range(-1.0..1.0));
    let next = dsgda_step(&st, &cfg, &ds, 3).unwrap();
    let mut want_x = st.x_bar();
    let mut want_y = st.y_bar();
    for i in 0..m {
        let s = &ds.shards[i][sample_index(17, i, 3, ds.n())];
        let (gx, gy) = hand_grad(&q, i, st.x_row(i), st.y_row(i), s);
        for r in 0..2 {
            want_x[r] -= 0.05 * gx[r] / m as f64;
            want_y[r] += 0.05 * gy[r] / m as f64;
        }
    }
    for (a, b) in next.x_bar().iter().zip(&want_x).chain(next.y_bar().iter().zip(&want_y)) {
        assert!((a - b).abs() < 1e-13);
    }
}

#[test]
fn full_mixing_keeps_agents_within_one_step_of_the_mean() {
    let m = 5;
    let (p, _, ds) = quadratic(m, 3.0, 10);
    let single = run(&config(p.clone(), TopologyKind::Disconnected, m, 50, 0.1, 3), &ds).unwrap();
    assert!(consensus_residual(&single.final_state) > 0.0);
    let g = p.constants.g;
    let full = run(&config(p, TopologyKind::FullyConnected, m, 50, 0.1, 3), &ds).unwrap();
    let bound = 2.0 * (m as f64).sqrt() * g * 0.1;
    assert!(full.records.iter().all(|r| r.consensus <= bound * (1.0 + 1e-12)));
}

#[test]
fn invalid_dataset_shape_is_rejected() {
    let (p, _, ds) = quadratic(3, 3.0, 1);
    let shards = vec![ds.shards[0].clone(), ds.shards[1].clone()];
    let small = DistributedDataset::new(shards, Provenance { source: "test".into(), seed: 0 }).unwrap();
    assert!(run(&config(p, TopologyKind::Ring, 3, 5, 0.1, 0), &small).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn iterates_stay_feasible(seed in 0u64..1000, eta in 0.01f64..2.0, radius in 0.1f64..2.0, kind in 0usize..6) {
        let m = 9;
        let (p, _, ds) = quadratic(m, radius, seed);
        let traj = run(&config(p, TopologyKind::ALL[kind], m, 30, eta, seed), &ds).unwrap();
        for rec in &traj.records {
            for i in 0..m {
                let nx = rec.state.x_row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
                let ny = rec.state.y_row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
                prop_assert!(nx <= radius * (1.0 + 1e-12) && ny <= radius * (1.0 + 1e-12));
            }
        }
    }
}
