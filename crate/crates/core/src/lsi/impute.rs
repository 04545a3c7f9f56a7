use std::collections::VecDeque;

use rayon::prelude::*;
use serde::Serialize;

use super::weights::WeightMatrix;
use super::{LsiConfig, UnreachablePolicy};
use crate::embed_store::{AnchorMap, EmbeddingMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ImputationResult {
    /// Vectors for the non-anchor domain tokens, in domain row order.
    pub imputed: EmbeddingMatrix,
    /// Every domain token in the semantic space: anchors carry their input
    /// semantic vectors, the rest their imputed ones.
    pub full: EmbeddingMatrix,
    pub report: ImputationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImputationReport {
    pub anchors: usize,
    pub imputed: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Largest per-row L∞ change in the final iteration.
    pub final_max_change: f64,
    /// max over non-anchor rows of ‖(W·E)ᵢ − Eᵢ‖∞ at the returned state.
    pub fixed_point_residual: f64,
    pub fallback_rows: Vec<String>,
    /// Tokens with no positive-weight path to an anchor; left at the anchor mean.
    pub unreachable: Vec<String>,
}

/// Anchor-preserving power iteration.
///
/// Non-anchor rows start at the mean of the anchor vectors and are updated
/// synchronously as `Eᵢ ← Σⱼ Wᵢⱼ Eⱼ` until the largest per-row L∞ change falls
/// below `cfg.eta` or `cfg.max_iters` is reached. Anchor rows never change.
pub fn impute(
    weights: &WeightMatrix,
    anchors: &AnchorMap,
    semantic: &EmbeddingMatrix,
    domain_tokens: &[String],
    cfg: &LsiConfig,
) -> Result<ImputationResult> {
    cfg.validate()?;
    let n = weights.len();
    if domain_tokens.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: domain_tokens.len(),
        });
    }
    let dim = semantic.dim();
    let sem_of = anchors.semantic_for_domain(n);
    for (d, s) in sem_of.iter().enumerate() {
        if weights.is_anchor(d) != s.is_some() {
            return Err(Error::InvalidInput(format!(
                "domain row {d} ({:?}): weight-matrix anchor flag disagrees with the anchor map",
                domain_tokens[d]
            )));
        }
    }
    if anchors.is_empty() {
        return Err(Error::NoAnchors);
    }

    let mut mean = vec![0.0; dim];
    for &(s, _) in &anchors.pairs {
        for (m, v) in mean.iter_mut().zip(semantic.row(s)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= anchors.len() as f64);

    let mut state = vec![0.0; n * dim];
    for (d, row) in state.chunks_exact_mut(dim).enumerate() {
        match sem_of[d] {
            Some(s) => row.copy_from_slice(semantic.row(s)),
            None => row.copy_from_slice(&mean),
        }
    }

    // Reverse traversal from anchors along positive-weight dependencies.
    let mut dependents = vec![Vec::new(); n];
    for i in (0..n).filter(|&i| !weights.is_anchor(i)) {
        for &(j, w) in weights.row(i) {
            if w > 0.0 {
                dependents[j].push(i);
            }
        }
    }
    let mut reachable: Vec<bool> = (0..n).map(|i| weights.is_anchor(i)).collect();
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| reachable[i]).collect();
    while let Some(j) = queue.pop_front() {
        for &i in &dependents[j] {
            if !reachable[i] {
                reachable[i] = true;
                queue.push_back(i);
            }
        }
    }
    let unreachable: Vec<String> = (0..n)
        .filter(|&i| !reachable[i])
        .map(|i| domain_tokens[i].clone())
        .collect();
    if !unreachable.is_empty() {
        match cfg.unreachable_policy {
            UnreachablePolicy::Error => {
                return Err(Error::Unreachable {
                    count: unreachable.len(),
                    first: unreachable[0].clone(),
                })
            }
            UnreachablePolicy::AnchorMean => log::warn!(
                "{} node(s) cannot reach an anchor; keeping them at the anchor mean",
                unreachable.len()
            ),
        }
    }
    let active: Vec<bool> = (0..n).map(|i| reachable[i] && !weights.is_anchor(i)).collect();

    let mut next = state.clone();
    let mut iterations = 0;
    let mut final_max_change = 0.0;
    let mut converged = !active.iter().any(|&a| a);
    while !converged && iterations < cfg.max_iters {
        iterations += 1;
        let max_change = next
            .par_chunks_exact_mut(dim)
            .enumerate()
            .filter(|(i, _)| active[*i])
            .map(|(i, out)| {
                weighted_sum(weights.row(i), &state, dim, out);
                out.iter()
                    .zip(&state[i * dim..(i + 1) * dim])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max);
        std::mem::swap(&mut state, &mut next);
        final_max_change = max_change;
        converged = max_change < cfg.eta;
    }
    if !converged {
        log::warn!(
            "power iteration stopped at max_iters = {} with max change {final_max_change:e}",
            cfg.max_iters
        );
    }

    let fixed_point_residual = (0..n)
        .into_par_iter()
        .filter(|&i| active[i])
        .map(|i| {
            let mut out = vec![0.0; dim];
            weighted_sum(weights.row(i), &state, dim, &mut out);
            out.iter()
                .zip(&state[i * dim..(i + 1) * dim])
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);

    let full = EmbeddingMatrix::new(domain_tokens.to_vec(), state, dim)?;
    let non_anchor: Vec<usize> = (0..n).filter(|&i| !weights.is_anchor(i)).collect();
    let imputed = full.select_rows(&non_anchor);
    let report = ImputationReport {
        anchors: anchors.len(),
        imputed: imputed.len(),
        iterations,
        converged,
        final_max_change,
        fixed_point_residual,
        fallback_rows: weights
            .fallback_rows()
            .iter()
            .map(|&i| domain_tokens[i].clone())
            .collect(),
        unreachable,
    };
    Ok(ImputationResult {
        imputed,
        full,
        report,
    })
}

fn weighted_sum(row: &[(usize, f64)], state: &[f64], dim: usize, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for &(j, w) in row {
        for (o, v) in out.iter_mut().zip(&state[j * dim..(j + 1) * dim]) {
            *o += w * v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tokens(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("t{i}")).collect()
    }

    fn cfg() -> LsiConfig {
        LsiConfig {
            k: 1,
            eta: 1e-4,
            ..LsiConfig::default()
        }
    }

    #[test]
    fn neighbours_all_anchors_converges_in_one_step() {
        // domain rows: 0 = non-anchor, 1 and 2 anchors
        let w = WeightMatrix::from_rows(vec![vec![(1, 0.25), (2, 0.75)], vec![], vec![]], &[1, 2]).unwrap();
        let sem = EmbeddingMatrix::from_rows(2, [("t1", vec![4.0, 0.0]), ("t2", vec![0.0, 8.0])]).unwrap();
        let anchors = AnchorMap {
            pairs: vec![(0, 1), (1, 2)],
        };
        let r = impute(&w, &anchors, &sem, &tokens(3), &cfg()).unwrap();
        // first step lands on the fixed point, second step confirms no change
        assert_eq!(r.report.iterations, 2);
        assert!(r.report.converged);
        assert_eq!(r.imputed.tokens(), ["t0"]);
        assert_eq!(r.imputed.row(0), [1.0, 6.0]);
        assert_eq!(r.full.row(1), sem.row(0));
    }

    #[test]
    fn unreachable_nodes_follow_policy() {
        // rows 1 and 2 only point at each other
        let w = WeightMatrix::from_rows(vec![vec![], vec![(2, 1.0)], vec![(1, 1.0)]], &[0]).unwrap();
        let sem = EmbeddingMatrix::from_rows(1, [("t0", vec![3.0])]).unwrap();
        let anchors = AnchorMap { pairs: vec![(0, 0)] };
        let r = impute(&w, &anchors, &sem, &tokens(3), &cfg()).unwrap();
        assert_eq!(r.report.unreachable, vec!["t1", "t2"]);
        assert_eq!(r.imputed.row(0), [3.0]);

        let strict = LsiConfig {
            unreachable_policy: UnreachablePolicy::Error,
            ..cfg()
        };
        assert!(matches!(
            impute(&w, &anchors, &sem, &tokens(3), &strict),
            Err(Error::Unreachable { count: 2, .. })
        ));
    }

    #[test]
    fn flags_non_convergence() {
        // anchors at both ends of a slowly mixing chain 0-1-2-3
        let w = WeightMatrix::from_rows(
            vec![vec![], vec![(0, 0.01), (2, 0.99)], vec![(1, 0.99), (3, 0.01)], vec![]],
            &[0, 3],
        )
        .unwrap();
        let sem = EmbeddingMatrix::from_rows(1, [("a", vec![0.0]), ("b", vec![10.0])]).unwrap();
        let anchors = AnchorMap {
            pairs: vec![(0, 0), (1, 3)],
        };
        let mut c = cfg();
        c.eta = 1e-12;
        c.max_iters = 5;
        let r = impute(&w, &anchors, &sem, &tokens(4), &c).unwrap();
        assert!(!r.report.converged);
        assert_eq!(r.report.iterations, 5);

        c.max_iters = 100_000;
        let r = impute(&w, &anchors, &sem, &tokens(4), &c).unwrap();
        assert!(r.report.converged);
        // E1 = 0.99 E2, E2 = 0.99 E1 + 0.1
        let e1 = 0.099 / (1.0 - 0.99 * 0.99);
        assert!((r.imputed.row(0)[0] - e1).abs() < 1e-9);
    }

    #[test]
    fn anchor_map_must_match_weight_flags() {
        let w = WeightMatrix::from_rows(vec![vec![(1, 1.0)], vec![]], &[1]).unwrap();
        let sem = EmbeddingMatrix::from_rows(1, [("x", vec![1.0])]).unwrap();
        let wrong = AnchorMap { pairs: vec![(0, 0)] };
        assert!(impute(&w, &wrong, &sem, &tokens(2), &cfg()).is_err());
    }
}
