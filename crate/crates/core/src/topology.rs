//! Gossip topologies, their mixing matrices and spectral constants.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, EigenError, CompensatedSum};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("invalid size: {0}")]
    InvalidSize(String),
    #[error("unknown topology '{0}' (expected full, ring, star, grid, exp or single)")]
    UnknownKind(String),
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error("degenerate spectrum: lambda = {0} (C_lambda needs 0 < lambda < 1)")]
    DegenerateSpectrum(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Communication graph family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopologyKind {
    #[serde(rename = "full")]
    FullyConnected,
    Ring,
    Star,
    #[serde(rename = "grid")]
    Grid2D,
    #[serde(rename = "exp")]
    Exponential,
    #[serde(rename = "single")]
    Disconnected,
}

impl TopologyKind {
    pub const ALL: [TopologyKind; 6] = [
        TopologyKind::FullyConnected,
        TopologyKind::Ring,
        TopologyKind::Star,
        TopologyKind::Grid2D,
        TopologyKind::Exponential,
        TopologyKind::Disconnected,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TopologyKind::FullyConnected => "full",
            TopologyKind::Ring => "ring",
            TopologyKind::Star => "star",
            TopologyKind::Grid2D => "grid",
            TopologyKind::Exponential => "exp",
            TopologyKind::Disconnected => "single",
        }
    }
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TopologyKind {
    type Err = TopologyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "full" | "fully_connected" | "complete" => Ok(TopologyKind::FullyConnected),
            "ring" => Ok(TopologyKind::Ring),
            "star" => Ok(TopologyKind::Star),
            "grid" | "grid2d" => Ok(TopologyKind::Grid2D),
            "exp" | "exponential" => Ok(TopologyKind::Exponential),
            "single" | "disconnected" => Ok(TopologyKind::Disconnected),
            other => Err(TopologyError::UnknownKind(other.to_string())),
        }
    }
}

/// A topology family instantiated for `m` agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    pub kind: TopologyKind,
    pub m: usize,
}

impl Topology {
    pub fn new(kind: TopologyKind, m: usize) -> Self {
        Self { kind, m }
    }

    /// Undirected edge list (i < j), without self loops.
    pub fn edges(&self) -> Result<Vec<(usize, usize)>, TopologyError> {
        let m = self.m;
        if m == 0 {
            return Err(TopologyError::InvalidSize("m must be at least 1".into()));
        }
        let mut edges = Vec::new();
        match self.kind {
            TopologyKind::FullyConnected => {
                for i in 0..m {
                    for j in (i + 1)..m {
                        edges.push((i, j));
                    }
                }
            }
            TopologyKind::Disconnected => {}
            TopologyKind::Ring => {
                for i in 0..m {
                    let j = (i + 1) % m;
                    if i != j {
                        edges.push((i.min(j), i.max(j)));
                    }
                }
            }
            TopologyKind::Star => {
                for j in 1..m {
                    edges.push((0, j));
                }
            }
            TopologyKind::Grid2D => {
                let side = perfect_sqrt(m).ok_or_else(|| {
                    TopologyError::InvalidSize(format!("grid needs a perfect square m, got {m}"))
                })?;
                for r in 0..side {
                    for c in 0..side {
                        let i = r * side + c;
                        if c + 1 < side {
                            edges.push((i, i + 1));
                        }
                        if r + 1 < side {
                            edges.push((i, i + side));
                        }
                    }
                }
            }
            TopologyKind::Exponential => {
                let mut hop = 1usize;
                while hop < m {
                    for i in 0..m {
                        let j = (i + hop) % m;
                        if i != j {
                            edges.push((i.min(j), i.max(j)));
                        }
                    }
                    hop *= 2;
                }
            }
        }
        edges.sort_unstable();
        edges.dedup();
        Ok(edges)
    }
}

fn perfect_sqrt(m: usize) -> Option<usize> {
    let r = (m as f64).sqrt().round() as usize;
    (r * r == m).then_some(r)
}

/// Symmetric doubly stochastic gossip matrix with its spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingMatrix {
    m: usize,
    /// Row-major `m x m` weights.
    weights: Vec<f64>,
    /// Eigenvalues, descending.
    spectrum: Vec<f64>,
    lambda: f64,
}

impl MixingMatrix {
    /// Wraps an explicit weight matrix after validating the mixing-matrix invariants.
    pub fn from_weights(m: usize, weights: Vec<f64>) -> Result<Self, TopologyError> {
        if m == 0 {
            return Err(TopologyError::InvalidSize("m must be at least 1".into()));
        }
        if weights.len() != m * m {
            return Err(TopologyError::InvalidSize(format!(
                "expected {} weights, got {}",
                m * m,
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(TopologyError::InvalidArgument("weights must be finite and nonnegative".into()));
        }
        for i in 0..m {
            let row: f64 = weights[i * m..(i + 1) * m].iter().copied().collect::<CompensatedSum>().value();
            let col: f64 = (0..m).map(|k| weights[k * m + i]).collect::<CompensatedSum>().value();
            if (row - 1.0).abs() > 1e-12 || (col - 1.0).abs() > 1e-12 {
                return Err(TopologyError::InvalidArgument(format!(
                    "row/column {i} does not sum to 1 (row {row}, col {col})"
                )));
            }
        }
        let spectrum = spectrum_of(&weights, m)?;
        let lambda = second_magnitude(&spectrum);
        Ok(Self { m, weights, spectrum, lambda })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize, k: usize) -> f64 {
        self.weights[i * self.m + k]
    }

    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    /// `max(|lambda_2|, |lambda_m|)`; zero for a single agent.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn spectral_gap(&self) -> f64 {
        1.0 - self.lambda
    }

    /// Nonzero weights of row `i` as `(k, w_ik)` pairs.
    pub fn neighbors(&self, i: usize) -> Vec<(usize, f64)> {
        (0..self.m)
            .filter_map(|k| {
                let w = self.weight(i, k);
                (w != 0.0).then_some((k, w))
            })
            .collect()
    }

    pub fn max_asymmetry(&self) -> f64 {
        linalg::max_asymmetry(&self.weights, self.m)
    }

    /// Largest deviation of any row or column sum from 1.
    pub fn max_stochasticity_error(&self) -> f64 {
        let m = self.m;
        let mut worst = 0.0f64;
        for i in 0..m {
            let row: f64 = self.weights[i * m..(i + 1) * m].iter().sum();
            let col: f64 = (0..m).map(|k| self.weights[k * m + i]).sum();
            worst = worst.max((row - 1.0).abs()).max((col - 1.0).abs());
        }
        worst
    }
}

/// Builds the mixing matrix for a topology.
///
/// `full` uses weights 1/m, `single` the identity, `ring` (m >= 3) uniform 1/3
/// on self and both neighbors; every other graph uses Metropolis-Hastings
/// weights `1 / (1 + max(d_i, d_j))` on edges with the remainder on the diagonal.
pub fn build_mixing_matrix(topology: Topology) -> Result<MixingMatrix, TopologyError> {
    let m = topology.m;
    let edges = topology.edges()?;
    let mut w = vec![0.0; m * m];
    match topology.kind {
        TopologyKind::FullyConnected => {
            w.iter_mut().for_each(|v| *v = 1.0 / m as f64);
        }
        TopologyKind::Disconnected => {
            for i in 0..m {
                w[i * m + i] = 1.0;
            }
        }
        TopologyKind::Ring if m >= 3 => {
            let third = 1.0 / 3.0;
            for i in 0..m {
                w[i * m + i] = third;
                w[i * m + (i + 1) % m] = third;
                w[i * m + (i + m - 1) % m] = third;
            }
        }
        _ => metropolis(m, &edges, &mut w),
    }
    let mut mixing = MixingMatrix::from_weights(m, w)?;
    // The rank-one projector and the identity have known spectra; pin them so
    // lambda is exactly 0 and 1 rather than Jacobi round-off.
    match topology.kind {
        TopologyKind::FullyConnected => {
            mixing.spectrum = std::iter::once(1.0).chain(std::iter::repeat_n(0.0, m - 1)).collect();
            mixing.lambda = 0.0;
        }
        TopologyKind::Disconnected => {
            mixing.spectrum = vec![1.0; m];
            mixing.lambda = if m == 1 { 0.0 } else { 1.0 };
        }
        _ => {}
    }
    Ok(mixing)
}

fn metropolis(m: usize, edges: &[(usize, usize)], w: &mut [f64]) {
    let mut degree = vec![0usize; m];
    for &(i, j) in edges {
        degree[i] += 1;
        degree[j] += 1;
    }
    for &(i, j) in edges {
        let v = 1.0 / (1.0 + degree[i].max(degree[j]) as f64);
        w[i * m + j] = v;
        w[j * m + i] = v;
    }
    for i in 0..m {
        let off: f64 = (0..m).filter(|&k| k != i).map(|k| w[i * m + k]).sum();
        w[i * m + i] = 1.0 - off;
    }
}

/// All eigenvalues of a symmetric matrix, descending.
pub fn spectrum_of(weights: &[f64], m: usize) -> Result<Vec<f64>, TopologyError> {
    Ok(linalg::symmetric_eigenvalues(weights, m)?)
}

fn second_magnitude(spectrum: &[f64]) -> f64 {
    match spectrum.len() {
        0 | 1 => 0.0,
        len => spectrum[1].abs().max(spectrum[len - 1].abs()),
    }
}

/// Topology constant bounding `sum_j lambda^(t-1-j) / (j+1)^k <= C_lambda / t^k`.
///
/// `C = (k/e)^k / (lambda ln(1/lambda)^k) + 2/(e lambda ln(1/lambda)) + 2^k / (lambda ln(1/lambda))`.
pub fn c_lambda(lambda: f64, exponent: f64) -> Result<f64, TopologyError> {
    if !(exponent > 0.0 && exponent <= 1.0) {
        return Err(TopologyError::InvalidArgument(format!(
            "exponent must lie in (0, 1], got {exponent}"
        )));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(TopologyError::DegenerateSpectrum(lambda));
    }
    let k = exponent;
    let ln_inv = (1.0 / lambda).ln();
    let e = std::f64::consts::E;
    Ok((k / e).powf(k) / (lambda * ln_inv.powf(k))
        + 2.0 / (e * lambda * ln_inv)
        + 2f64.powf(k) / (lambda * ln_inv))
}

/// `C_lambda` with the fully connected convention: zero when `lambda == 0`.
pub fn c_lambda_or_zero(lambda: f64, exponent: f64) -> Result<f64, TopologyError> {
    if lambda == 0.0 {
        Ok(0.0)
    } else {
        c_lambda(lambda, exponent)
    }
}

/// Exact partial sum `sum_{j=0}^{t-1} lambda^(t-1-j) / (j+1)^k` by direct summation.
pub fn geometric_decay_sum(lambda: f64, k: f64, t: usize) -> f64 {
    let mut acc = CompensatedSum::new();
    for j in 0..t {
        let power = (t - 1 - j) as i32;
        let geo = if power == 0 { 1.0 } else { lambda.powi(power) };
        acc.add(geo / ((j + 1) as f64).powf(k));
    }
    acc.value()
}

/// The same partial sums for every `t = 1..=t_max`, via `S_{t+1} = lambda S_t + (t+1)^-k`.
pub fn geometric_decay_series(lambda: f64, k: f64, t_max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(t_max);
    let mut s = 0.0;
    for t in 1..=t_max {
        s = lambda * s + 1.0 / (t as f64).powf(k);
        out.push(s);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mm(kind: TopologyKind, m: usize) -> MixingMatrix {
        build_mixing_matrix(Topology::new(kind, m)).unwrap()
    }

    #[test]
    fn fully_connected_four() {
        let w = mm(TopologyKind::FullyConnected, 4);
        assert!(w.weights().iter().all(|&v| v == 0.25));
        assert_eq!(w.lambda(), 0.0);
        assert_eq!(w.spectrum(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn disconnected_three_is_identity() {
        let w = mm(TopologyKind::Disconnected, 3);
        for i in 0..3 {
            for k in 0..3 {
                assert_eq!(w.weight(i, k), if i == k { 1.0 } else { 0.0 });
            }
        }
        assert_eq!(w.lambda(), 1.0);
    }

    #[test]
    fn ring_eight_lambda() {
        let w = mm(TopologyKind::Ring, 8);
        let expected = (1.0 + 2.0 * (2.0 * std::f64::consts::PI / 8.0).cos()) / 3.0;
        assert!((w.lambda() - expected).abs() < 1e-10);
        assert!((expected - 0.80474).abs() < 1e-5);
    }

    #[test]
    fn ring_eight_full_spectrum() {
        let w = mm(TopologyKind::Ring, 8);
        let mut expected: Vec<f64> = (0..8)
            .map(|k| (1.0 + 2.0 * (2.0 * std::f64::consts::PI * k as f64 / 8.0).cos()) / 3.0)
            .collect();
        expected.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in w.spectrum().iter().zip(&expected) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn star_four_spectrum() {
        let w = mm(TopologyKind::Star, 4);
        let s = w.spectrum();
        let expected = [1.0, 0.75, 0.75, 0.0];
        for (a, b) in s.iter().zip(expected) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        assert!((w.lambda() - 0.75).abs() < 1e-10);
    }

    #[test]
    fn grid_needs_square() {
        assert!(matches!(
            build_mixing_matrix(Topology::new(TopologyKind::Grid2D, 8)),
            Err(TopologyError::InvalidSize(_))
        ));
        assert!(build_mixing_matrix(Topology::new(TopologyKind::Grid2D, 9)).is_ok());
    }

    #[test]
    fn zero_agents_rejected() {
        for kind in TopologyKind::ALL {
            assert!(matches!(
                build_mixing_matrix(Topology::new(kind, 0)),
                Err(TopologyError::InvalidSize(_))
            ));
        }
    }

    #[test]
    fn single_agent_every_kind() {
        for kind in TopologyKind::ALL {
            let w = mm(kind, 1);
            assert_eq!(w.weights(), &[1.0]);
            assert_eq!(w.lambda(), 0.0);
        }
    }

    #[test]
    fn exponential_hops() {
        let edges = Topology::new(TopologyKind::Exponential, 8).edges().unwrap();
        // hops 1, 2, 4: 8 + 8 + 4 undirected edges (the 4-hop pairs coincide).
        assert_eq!(edges.len(), 20);
    }

    #[test]
    fn parse_names() {
        for kind in TopologyKind::ALL {
            assert_eq!(kind.name().parse::<TopologyKind>().unwrap(), kind);
        }
        assert!("torus".parse::<TopologyKind>().is_err());
    }

    #[test]
    fn c_lambda_half() {
        let v = c_lambda(0.5, 1.0).unwrap();
        let e = std::f64::consts::E;
        let expected = (1.0 / e + 2.0 / e + 2.0) / (0.5 * 2f64.ln());
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 8.955).abs() < 1e-3);
    }

    #[test]
    fn c_lambda_degenerate() {
        assert!(matches!(c_lambda(1.0, 1.0), Err(TopologyError::DegenerateSpectrum(_))));
        assert!(matches!(c_lambda(0.0, 1.0), Err(TopologyError::DegenerateSpectrum(_))));
        assert_eq!(c_lambda_or_zero(0.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn geometric_sum_examples() {
        assert!((geometric_decay_sum(0.0, 1.0, 5) - 0.2).abs() < 1e-15);
        assert_eq!(geometric_decay_sum(0.5, 1.0, 1), 1.0);
        let expected = 0.125 + 0.25 / 2.0 + 0.5 / 3.0 + 0.25;
        assert!((geometric_decay_sum(0.5, 1.0, 4) - expected).abs() < 1e-15);
        assert!((expected - 0.6667).abs() < 1e-4);
    }

    #[test]
    fn series_matches_direct_sum() {
        let series = geometric_decay_series(0.7, 0.75, 300);
        for t in [1, 2, 17, 100, 300] {
            let direct = geometric_decay_sum(0.7, 0.75, t);
            assert!((series[t - 1] - direct).abs() <= 1e-12 * direct.max(1.0));
        }
    }
}
