//! Second-order biased random walks.
//!
//! Having stepped `t → v`, the walk moves to a neighbour `x` of `v` with
//! unnormalized weight `1/p` if `x == t`, `1` if `x` is adjacent to `t`, and
//! `1/q` otherwise. Per-edge alias tables make each step O(1); nodes with very
//! large neighbourhoods use exact rejection sampling instead of a table.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alias::AliasTable;
use crate::embed_store::normalize_label;
use crate::error::{Error, Result};
use crate::graph::LabeledGraph;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WalkConfig {
    /// Return parameter.
    pub p: f64,
    /// In-out parameter.
    pub q: f64,
    pub n_walks: usize,
    pub walk_length: usize,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            p: 0.5,
            q: 0.5,
            n_walks: 10,
            walk_length: 80,
            seed: 1,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p.is_finite()) || !(self.q > 0.0 && self.q.is_finite()) {
            return Err(Error::Config("walk.p and walk.q must be positive".into()));
        }
        if self.n_walks < 1 {
            return Err(Error::Config("walk.n_walks must be >= 1".into()));
        }
        if self.walk_length < 2 {
            return Err(Error::Config("walk.walk_length must be >= 2".into()));
        }
        Ok(())
    }
}

/// Neighbourhoods larger than this are sampled by rejection instead of a
/// per-edge table, which would need O(deg²) memory at the hub.
const MAX_TABLE_DEGREE: usize = 2048;

pub struct WalkSampler {
    adjacency: Vec<Vec<usize>>,
    // offsets[t] + position of v in adjacency[t] = id of directed edge t → v
    offsets: Vec<usize>,
    tables: Vec<Option<AliasTable>>,
    inv_p: f64,
    inv_q: f64,
    isolated: usize,
}

impl WalkSampler {
    fn weight(&self, prev: usize, x: usize) -> f64 {
        if x == prev {
            self.inv_p
        } else if self.adjacency[prev].binary_search(&x).is_ok() {
            1.0
        } else {
            self.inv_q
        }
    }

    fn edge_id(&self, t: usize, v: usize) -> usize {
        let pos = self.adjacency[t]
            .binary_search(&v)
            .expect("walk follows graph edges");
        self.offsets[t] + pos
    }

    /// Exact transition distribution for the state `prev → cur`, as
    /// `(neighbour, probability)` pairs in neighbour order.
    pub fn transition_probabilities(&self, prev: usize, cur: usize) -> Vec<(usize, f64)> {
        let nbrs = &self.adjacency[cur];
        if let Some(table) = &self.tables[self.edge_id(prev, cur)] {
            return nbrs.iter().copied().zip(table.probabilities()).collect();
        }
        let weights: Vec<f64> = nbrs.iter().map(|&x| self.weight(prev, x)).collect();
        let total: f64 = weights.iter().sum();
        nbrs.iter().copied().zip(weights.into_iter().map(|w| w / total)).collect()
    }

    pub fn isolated_nodes(&self) -> usize {
        self.isolated
    }

    fn step(&self, prev: usize, cur: usize, rng: &mut rng::Rng) -> usize {
        let nbrs = &self.adjacency[cur];
        if let Some(table) = &self.tables[self.edge_id(prev, cur)] {
            return nbrs[table.sample(rng)];
        }
        let max_w = self.inv_p.max(self.inv_q).max(1.0);
        loop {
            let x = nbrs[rng.random_range(0..nbrs.len())];
            if rng.random::<f64>() * max_w < self.weight(prev, x) {
                return x;
            }
        }
    }

    fn walk(&self, start: usize, length: usize, rng: &mut rng::Rng) -> Vec<usize> {
        let mut walk = Vec::with_capacity(length);
        walk.push(start);
        let first = &self.adjacency[start];
        walk.push(first[rng.random_range(0..first.len())]);
        while walk.len() < length {
            let cur = walk[walk.len() - 1];
            let prev = walk[walk.len() - 2];
            walk.push(self.step(prev, cur, rng));
        }
        walk
    }
}

pub fn build_transition_tables(g: &LabeledGraph, cfg: &WalkConfig) -> Result<WalkSampler> {
    cfg.validate()?;
    if g.node_count() == 0 {
        return Err(Error::InvalidInput("cannot walk an empty graph".into()));
    }
    let adjacency: Vec<Vec<usize>> = (0..g.node_count()).map(|v| g.neighbors(v).to_vec()).collect();
    let isolated = adjacency.iter().filter(|a| a.is_empty()).count();
    if isolated > 0 {
        log::warn!("{isolated} isolated node(s) are excluded from walks");
    }
    let mut offsets = Vec::with_capacity(adjacency.len());
    let mut total = 0;
    for a in &adjacency {
        offsets.push(total);
        total += a.len();
    }
    let mut sampler = WalkSampler {
        adjacency,
        offsets,
        tables: Vec::new(),
        inv_p: 1.0 / cfg.p,
        inv_q: 1.0 / cfg.q,
        isolated,
    };
    let s = &sampler;
    let tables: Vec<Option<AliasTable>> = (0..s.adjacency.len())
        .into_par_iter()
        .flat_map_iter(|t| {
            s.adjacency[t].iter().map(move |&v| {
                let nbrs = &s.adjacency[v];
                (nbrs.len() <= MAX_TABLE_DEGREE).then(|| {
                    let w: Vec<f64> = nbrs.iter().map(|&x| s.weight(t, x)).collect();
                    AliasTable::new(&w).expect("positive weights")
                })
            })
        })
        .collect();
    sampler.tables = tables;
    Ok(sampler)
}

/// Walks as node indices: `n_walks` rounds, each visiting every non-isolated
/// node once in a seeded shuffled order. Each walk draws from its own
/// random stream keyed by `(seed, node, round)`.
pub fn generate_walk_indices(s: &WalkSampler, cfg: &WalkConfig) -> Vec<Vec<usize>> {
    let starts: Vec<usize> = (0..s.adjacency.len()).filter(|&v| !s.adjacency[v].is_empty()).collect();
    let mut out = Vec::with_capacity(starts.len() * cfg.n_walks);
    for round in 0..cfg.n_walks {
        let mut order = starts.clone();
        order.shuffle(&mut rng::stream(cfg.seed, &[u64::MAX, round as u64]));
        let walks: Vec<Vec<usize>> = order
            .par_iter()
            .map(|&v| {
                let mut r = rng::stream(cfg.seed, &[v as u64, round as u64]);
                s.walk(v, cfg.walk_length, &mut r)
            })
            .collect();
        out.extend(walks);
    }
    out
}

/// Walks as sequences of normalized node labels.
pub fn generate_walks(s: &WalkSampler, g: &LabeledGraph, cfg: &WalkConfig) -> Vec<Vec<String>> {
    let tokens: Vec<String> = (0..g.node_count()).map(|v| normalize_label(g.label(v))).collect();
    generate_walk_indices(s, cfg)
        .into_iter()
        .map(|w| w.into_iter().map(|v| tokens[v].clone()).collect())
        .collect()
}
