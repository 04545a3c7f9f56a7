//! Latent semantic imputation.
//!
//! Missing semantic vectors are reconstructed from the local geometry of a
//! second (domain) embedding space:
//!
//! 1. [`knn_mst`] builds a connected neighbourhood graph over domain rows.
//! 2. [`solve_weights`] expresses every domain row as a convex combination of
//!    its neighbours (non-negative least squares, rescaled to sum to one).
//! 3. [`impute`] runs the power iteration `E ← W·E` in the semantic space with
//!    anchor rows pinned to their known vectors.

mod impute;
mod knn_mst;
pub mod nnls;
mod weights;

use serde::{Deserialize, Serialize};

use crate::embed_store::{find_anchors, AnchorMap, EmbeddingMatrix};
use crate::error::{Error, Result};

pub use impute::{impute, ImputationReport, ImputationResult};
pub use knn_mst::{knn_mst, NeighborGraph};
pub use nnls::{nnls, NnlsSolution};
pub use weights::{solve_weights, WeightMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnreachablePolicy {
    Error,
    AnchorMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LsiConfig {
    /// Minimum degree of the kNN-MST graph.
    pub k: usize,
    /// Convergence threshold on the per-row L∞ change.
    pub eta: f64,
    pub max_iters: usize,
    pub unreachable_policy: UnreachablePolicy,
}

impl Default for LsiConfig {
    fn default() -> Self {
        LsiConfig {
            k: 50,
            eta: 1e-4,
            max_iters: 10_000,
            unreachable_policy: UnreachablePolicy::AnchorMean,
        }
    }
}

impl LsiConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::Config("lsi.k must be >= 1".into()));
        }
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::Config("lsi.eta must be a positive number".into()));
        }
        if self.max_iters < 1 {
            return Err(Error::Config("lsi.max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// Imputes semantic vectors for every domain token missing from `semantic`.
pub fn lsi_pipeline(semantic: &EmbeddingMatrix, domain: &EmbeddingMatrix, cfg: &LsiConfig) -> Result<ImputationResult> {
    cfg.validate()?;
    let anchors = find_anchors(semantic, domain);
    if anchors.is_empty() {
        return Err(Error::NoAnchors);
    }
    log::info!(
        "{} anchors, {} domain tokens to impute",
        anchors.len(),
        domain.len() - anchors.len()
    );
    let anchor_rows: Vec<usize> = anchors.pairs.iter().map(|&(_, d)| d).collect();
    if anchors.len() == domain.len() {
        return empty_result(semantic, domain, &anchors);
    }
    let graph = knn_mst(domain, cfg.k)?;
    log::info!(
        "kNN-MST: {} edges, min degree {}",
        graph.edge_count(),
        graph.min_degree()
    );
    let weights = solve_weights(domain, &graph, &anchor_rows)?;
    impute(&weights, &anchors, semantic, domain.tokens(), cfg)
}

fn empty_result(semantic: &EmbeddingMatrix, domain: &EmbeddingMatrix, anchors: &AnchorMap) -> Result<ImputationResult> {
    let mut rows = vec![0; domain.len()];
    for &(s, d) in &anchors.pairs {
        rows[d] = s;
    }
    let mut full = semantic.select_rows(&rows);
    full = EmbeddingMatrix::new(domain.tokens().to_vec(), full.as_slice().to_vec(), semantic.dim())?;
    Ok(ImputationResult {
        imputed: EmbeddingMatrix::empty(semantic.dim())?,
        full,
        report: ImputationReport {
            anchors: anchors.len(),
            imputed: 0,
            iterations: 0,
            converged: true,
            final_max_change: 0.0,
            fixed_point_residual: 0.0,
            fallback_rows: Vec::new(),
            unreachable: Vec::new(),
        },
    })
}
