use rayon::prelude::*;

use super::knn_mst::NeighborGraph;
use super::nnls::nnls;
use crate::embed_store::EmbeddingMatrix;
use crate::error::{Error, Result};

/// Row-sparse reconstruction weights over the domain rows.
///
/// Non-anchor rows hold non-negative weights on graph neighbours summing to 1;
/// anchor rows are the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    rows: Vec<Vec<(usize, f64)>>,
    anchor: Vec<bool>,
    fallback_rows: Vec<usize>,
}

const ROW_SUM_TOLERANCE: f64 = 1e-9;

impl WeightMatrix {
    /// Validates hand-built weights. `rows[i]` is ignored for anchors.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>, anchors: &[usize]) -> Result<Self> {
        let n = rows.len();
        let mut anchor = vec![false; n];
        for &a in anchors {
            if a >= n {
                return Err(Error::InvalidInput(format!("anchor row {a} out of range")));
            }
            anchor[a] = true;
        }
        let mut out = Vec::with_capacity(n);
        for (i, row) in rows.into_iter().enumerate() {
            if anchor[i] {
                out.push(vec![(i, 1.0)]);
                continue;
            }
            if row.iter().any(|&(j, w)| j >= n || j == i || !(w >= 0.0) || !w.is_finite()) {
                return Err(Error::InvalidInput(format!("row {i}: invalid weight entry")));
            }
            let sum: f64 = row.iter().map(|e| e.1).sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::InvalidInput(format!("row {i}: weights sum to {sum}, not 1")));
            }
            out.push(row.into_iter().filter(|e| e.1 > 0.0).collect());
        }
        Ok(WeightMatrix {
            rows: out,
            anchor,
            fallback_rows: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Non-zero `(column, weight)` entries of row `i`.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn is_anchor(&self, i: usize) -> bool {
        self.anchor[i]
    }

    /// Rows whose NNLS solution was all zero and got uniform weights instead.
    pub fn fallback_rows(&self) -> &[usize] {
        &self.fallback_rows
    }
}

/// Reconstruction weights: for every non-anchor row, the non-negative
/// combination of its graph neighbours closest to it, rescaled to sum to 1.
pub fn solve_weights(domain: &EmbeddingMatrix, graph: &NeighborGraph, anchors: &[usize]) -> Result<WeightMatrix> {
    let n = domain.len();
    if graph.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: graph.len(),
        });
    }
    let mut anchor = vec![false; n];
    for &a in anchors {
        if a >= n {
            return Err(Error::InvalidInput(format!("anchor row {a} out of range")));
        }
        anchor[a] = true;
    }

    let solved: Vec<(Vec<(usize, f64)>, bool)> = (0..n)
        .into_par_iter()
        .map(|i| {
            if anchor[i] {
                return (vec![(i, 1.0)], false);
            }
            let nbrs = graph.neighbors(i);
            if nbrs.is_empty() {
                return (Vec::new(), true);
            }
            let cols: Vec<&[f64]> = nbrs.iter().map(|&j| domain.row(j)).collect();
            let sol = nnls(&cols, domain.row(i));
            let sum: f64 = sol.x.iter().sum();
            if sum > 0.0 {
                let row = nbrs
                    .iter()
                    .zip(&sol.x)
                    .filter(|(_, &w)| w > 0.0)
                    .map(|(&j, &w)| (j, w / sum))
                    .collect();
                (row, false)
            } else {
                let u = 1.0 / nbrs.len() as f64;
                (nbrs.iter().map(|&j| (j, u)).collect(), true)
            }
        })
        .collect();

    let mut rows = Vec::with_capacity(n);
    let mut fallback_rows = Vec::new();
    for (i, (row, fallback)) in solved.into_iter().enumerate() {
        if fallback {
            fallback_rows.push(i);
        }
        rows.push(row);
    }
    if !fallback_rows.is_empty() {
        log::warn!(
            "{} row(s) had an all-zero NNLS solution; uniform neighbour weights used",
            fallback_rows.len()
        );
    }
    Ok(WeightMatrix {
        rows,
        anchor,
        fallback_rows,
    })
}
