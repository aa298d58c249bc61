//! Datasets distributed over agents and their decentralized neighbors.

mod libsvm;
mod synthetic;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problems::Sample;
use crate::rng::derive_seed;

pub use libsvm::{
    max_abs_normalize, parse_libsvm, parse_libsvm_str, serialize_libsvm, to_normalized_binary, LabeledSample, ParseError,
};
pub use synthetic::{
    synthesize_auc_pool, synthesize_quadratic_data, AucPoolSpec, QuadraticSource, SampleSource, SineSource,
    SyntheticQuadratic,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("need {needed} samples, pool has {available}")]
    InsufficientData { needed: usize, available: usize },
    #[error("replacement reservoir is empty")]
    EmptyReservoir,
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("invalid data request: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub seed: u64,
}

/// `m` shards of exactly `n` samples each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributedDataset {
    pub shards: Vec<Vec<Sample>>,
    pub provenance: Provenance,
}

impl DistributedDataset {
    pub fn new(shards: Vec<Vec<Sample>>, provenance: Provenance) -> Result<Self, DataError> {
        let n = shards.first().map_or(0, Vec::len);
        if shards.is_empty() || n == 0 {
            return Err(DataError::Invalid("dataset needs m >= 1 shards of n >= 1 samples".into()));
        }
        if shards.iter().any(|s| s.len() != n) {
            return Err(DataError::Invalid("shards must have equal size".into()));
        }
        Ok(Self { shards, provenance })
    }

    pub fn m(&self) -> usize {
        self.shards.len()
    }

    pub fn n(&self) -> usize {
        self.shards[0].len()
    }

    pub fn samples(&self) -> impl Iterator<Item = &Sample> {
        self.shards.iter().flatten()
    }
}

/// Where the differing sample of each shard sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbIndex {
    /// The last position, `n - 1` in zero-based terms.
    #[default]
    Last,
    /// A uniformly random position per shard.
    Random,
}

/// Fresh samples used to build neighboring datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Reservoir {
    /// One pool shared by all agents (e.g. the unused part of a data file).
    Shared(Vec<Sample>),
    /// A pool per agent, for heterogeneous agent distributions.
    PerAgent(Vec<Vec<Sample>>),
}

impl Reservoir {
    pub fn samples(&self) -> Box<dyn Iterator<Item = &Sample> + '_> {
        match self {
            Reservoir::Shared(v) => Box::new(v.iter()),
            Reservoir::PerAgent(v) => Box::new(v.iter().flatten()),
        }
    }
}

/// Which slot of every shard was replaced and by what.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborPerturbation {
    /// Zero-based position per agent.
    pub replaced_index: Vec<usize>,
    pub replacements: Vec<Sample>,
}

impl NeighborPerturbation {
    /// A perturbation that leaves the dataset unchanged.
    pub fn identity(ds: &DistributedDataset) -> Self {
        Self {
            replaced_index: vec![ds.n() - 1; ds.m()],
            replacements: ds.shards.iter().map(|s| s[s.len() - 1].clone()).collect(),
        }
    }
}

/// Shuffles `pool` by `seed` and deals the first `m * n` samples round-robin.
/// The remaining samples are returned in shuffled order.
pub fn partition_with_rest(
    pool: &[Sample],
    m: usize,
    n: usize,
    seed: u64,
    source: &str,
) -> Result<(DistributedDataset, Vec<Sample>), DataError> {
    let needed = m * n;
    if m == 0 || n == 0 {
        return Err(DataError::Invalid("m and n must be positive".into()));
    }
    if pool.len() < needed {
        return Err(DataError::InsufficientData { needed, available: pool.len() });
    }
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut shards = vec![Vec::with_capacity(n); m];
    for (k, &idx) in order[..needed].iter().enumerate() {
        shards[k % m].push(pool[idx].clone());
    }
    let rest = order[needed..].iter().map(|&i| pool[i].clone()).collect();
    let ds = DistributedDataset::new(shards, Provenance { source: source.to_string(), seed })?;
    Ok((ds, rest))
}

pub fn partition(pool: &[Sample], m: usize, n: usize, seed: u64) -> Result<DistributedDataset, DataError> {
    partition_with_rest(pool, m, n, seed, "pool").map(|(ds, _)| ds)
}

/// Replaces one slot per shard with a fresh reservoir sample. A shared
/// reservoir hands out distinct samples while it has at least `m`.
pub fn make_neighbor(
    ds: &DistributedDataset,
    reservoir: &Reservoir,
    position: PerturbIndex,
    seed: u64,
) -> Result<(DistributedDataset, NeighborPerturbation), DataError> {
    let (m, n) = (ds.m(), ds.n());
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x6e65_6967));
    let replacements: Vec<Sample> = match reservoir {
        Reservoir::Shared(pool) => {
            if pool.is_empty() {
                return Err(DataError::EmptyReservoir);
            }
            if pool.len() >= m {
                rand::seq::index::sample(&mut rng, pool.len(), m).iter().map(|i| pool[i].clone()).collect()
            } else {
                (0..m).map(|_| pool[rng.random_range(0..pool.len())].clone()).collect()
            }
        }
        Reservoir::PerAgent(pools) => {
            if pools.len() != m {
                return Err(DataError::Invalid(format!("{} reservoir pools for {m} agents", pools.len())));
            }
            pools
                .iter()
                .map(|p| {
                    if p.is_empty() {
                        Err(DataError::EmptyReservoir)
                    } else {
                        Ok(p[rng.random_range(0..p.len())].clone())
                    }
                })
                .collect::<Result<_, _>>()?
        }
    };
    let replaced_index: Vec<usize> = (0..m)
        .map(|_| match position {
            PerturbIndex::Last => n - 1,
            PerturbIndex::Random => rng.random_range(0..n),
        })
        .collect();
    let mut shards = ds.shards.clone();
    for (i, shard) in shards.iter_mut().enumerate() {
        shard[replaced_index[i]] = replacements[i].clone();
    }
    let neighbor = DistributedDataset { shards, provenance: ds.provenance.clone() };
    Ok((neighbor, NeighborPerturbation { replaced_index, replacements }))
}

/// Averages `(1/m) sum_i values[i][l_i]` over every index tuple
/// `(l_1, ..., l_m)` in `[n]^m`, by explicit enumeration.
pub fn enumerate_tuple_average(values: &[Vec<f64>]) -> f64 {
    let m = values.len();
    let n = values.first().map_or(0, Vec::len);
    if m == 0 || n == 0 {
        return 0.0;
    }
    let total = n.pow(m as u32);
    let mut idx = vec![0usize; m];
    let mut acc = crate::linalg::CompensatedSum::new();
    for _ in 0..total {
        let inner: f64 = (0..m).map(|i| values[i][idx[i]]).sum::<f64>() / m as f64;
        acc.add(inner);
        for slot in idx.iter_mut() {
            *slot += 1;
            if *slot < n {
                break;
            }
            *slot = 0;
        }
    }
    acc.value() / total as f64
}

/// `(1/m) sum_i (1/n) sum_l values[i][l]`.
pub fn shard_average(values: &[Vec<f64>]) -> f64 {
    let m = values.len() as f64;
    values.iter().map(|v| v.iter().sum::<f64>() / v.len() as f64).sum::<f64>() / m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool(k: usize) -> Vec<Sample> {
        (0..k).map(|i| Sample::unlabeled(vec![i as f64])).collect()
    }

    #[test]
    fn partition_counts_and_disjointness() {
        let ds = partition(&pool(6), 2, 3, 0).unwrap();
        assert_eq!((ds.m(), ds.n()), (2, 3));
        let mut all: Vec<f64> = ds.samples().map(|s| s.features[0]).collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn partition_insufficient() {
        assert_eq!(
            partition(&pool(5), 2, 3, 0),
            Err(DataError::InsufficientData { needed: 6, available: 5 })
        );
    }

    #[test]
    fn partition_deterministic() {
        assert_eq!(partition(&pool(20), 3, 4, 9).unwrap(), partition(&pool(20), 3, 4, 9).unwrap());
        assert_ne!(partition(&pool(20), 3, 4, 9).unwrap(), partition(&pool(20), 3, 4, 10).unwrap());
    }

    #[test]
    fn neighbor_differs_in_last_slot() {
        let (ds, rest) = partition_with_rest(&pool(10), 2, 3, 1, "t").unwrap();
        let (nb, pert) = make_neighbor(&ds, &Reservoir::Shared(rest), PerturbIndex::Last, 5).unwrap();
        assert_eq!(pert.replaced_index, vec![2, 2]);
        for (a, b) in ds.shards.iter().zip(&nb.shards) {
            let diff: Vec<usize> = (0..3).filter(|&l| a[l] != b[l]).collect();
            assert_eq!(diff, vec![2]);
        }
    }

    #[test]
    fn coincident_replacement_still_recorded() {
        let ds = partition(&pool(2), 1, 2, 0).unwrap();
        let last = ds.shards[0][1].clone();
        let (nb, pert) = make_neighbor(&ds, &Reservoir::Shared(vec![last]), PerturbIndex::Last, 0).unwrap();
        assert_eq!(nb, ds);
        assert_eq!(pert.replaced_index, vec![1]);
    }

    #[test]
    fn empty_reservoir() {
        let ds = partition(&pool(4), 2, 2, 0).unwrap();
        assert_eq!(
            make_neighbor(&ds, &Reservoir::Shared(vec![]), PerturbIndex::Last, 0).unwrap_err(),
            DataError::EmptyReservoir
        );
    }

    #[test]
    fn tuple_enumeration_small() {
        let v = vec![vec![1.0, 2.0, 3.0], vec![10.0, 20.0, 30.0]];
        assert!((enumerate_tuple_average(&v) - shard_average(&v)).abs() < 1e-12);
        assert!((shard_average(&v) - 11.0).abs() < 1e-12);
    }
}
