//! kNN-MST neighbourhood graph: the union of a symmetrized k-nearest-neighbour
//! graph and the exact Euclidean minimum spanning tree.
//!
//! Both parts use exact squared distances computed row by row, so memory stays
//! O(n) per worker while the cost is O(n² d). Ties are broken by row index.

use rayon::prelude::*;

use crate::embed_store::EmbeddingMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborGraph {
    adjacency: Vec<Vec<usize>>,
    mst_edges: Vec<(usize, usize)>,
}

impl NeighborGraph {
    /// Builds a graph from explicit undirected edges (used for hand-made
    /// neighbourhoods); the MST edge list is left empty.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidInput(format!("edge ({u}, {v}) out of range for {n} nodes")));
            }
            if u != v {
                adjacency[u].push(v);
                adjacency[v].push(u);
            }
        }
        for a in &mut adjacency {
            a.sort_unstable();
            a.dedup();
        }
        Ok(NeighborGraph {
            adjacency,
            mst_edges: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    /// MST edges as `(u, v)` with `u < v`, sorted.
    pub fn mst_edges(&self) -> &[(usize, usize)] {
        &self.mst_edges
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn min_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).min().unwrap_or(0)
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// The `k` rows nearest to `i` (excluding `i`), nearest first.
fn nearest(m: &EmbeddingMatrix, i: usize, k: usize) -> Vec<usize> {
    let row = m.row(i);
    let mut cand: Vec<(f64, usize)> = (0..m.len())
        .filter(|&j| j != i)
        .map(|j| (sq_dist(row, m.row(j)), j))
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < cand.len() {
        cand.select_nth_unstable_by(k - 1, cmp);
        cand.truncate(k);
    }
    cand.sort_unstable_by(cmp);
    cand.into_iter().map(|(_, j)| j).collect()
}

/// Dense Prim's algorithm over the complete Euclidean graph.
fn euclidean_mst(m: &EmbeddingMatrix) -> Vec<(usize, usize)> {
    let n = m.len();
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let cur_row = m.row(current);
        best.par_iter_mut()
            .zip(parent.par_iter_mut())
            .zip(in_tree.par_iter())
            .enumerate()
            .for_each(|(j, ((b, p), &done))| {
                if !done {
                    let d = sq_dist(cur_row, m.row(j));
                    if d < *b || (d == *b && current < *p) {
                        *b = d;
                        *p = current;
                    }
                }
            });
        let next = (0..n)
            .filter(|&j| !in_tree[j])
            .min_by(|&a, &b| best[a].total_cmp(&best[b]).then(a.cmp(&b)))
            .expect("a node remains outside the tree");
        in_tree[next] = true;
        let p = parent[next];
        edges.push((p.min(next), p.max(next)));
        current = next;
    }
    edges.sort_unstable();
    edges
}

pub fn knn_mst(domain: &EmbeddingMatrix, k: usize) -> Result<NeighborGraph> {
    let n = domain.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!("kNN-MST needs at least 2 rows, got {n}")));
    }
    if k == 0 || k >= n {
        return Err(Error::Config(format!("k must satisfy 1 <= k < n (k = {k}, n = {n})")));
    }
    let knn: Vec<Vec<usize>> = (0..n).into_par_iter().map(|i| nearest(domain, i, k)).collect();
    let mst_edges = euclidean_mst(domain);

    let mut adjacency = vec![Vec::new(); n];
    for (i, nbrs) in knn.iter().enumerate() {
        for &j in nbrs {
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
    }
    for &(u, v) in &mst_edges {
        adjacency[u].push(v);
        adjacency[v].push(u);
    }
    for a in &mut adjacency {
        a.sort_unstable();
        a.dedup();
    }
    Ok(NeighborGraph {
        adjacency,
        mst_edges,
    })
}
