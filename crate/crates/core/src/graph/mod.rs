//! Knowledge-graph reduction: N-Triples in, undirected labeled graph out.

mod extract;
mod ntriples;

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::Serialize;

use crate::embed_store::normalize_label;
use crate::error::{Error, Result};
use crate::io::{create_writer, open_reader};

pub use extract::{extract_subgraph, BridgeRule, ExtractionConfig, ExtractionStats, SubgraphExtractor};
pub use ntriples::{parse_line, parse_ntriples, NTriplesReader, ParseWarnings, Term, Triple, TripleSet};

/// Undirected simple graph whose nodes carry a string ID and a display label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledGraph {
    ids: Vec<String>,
    labels: Vec<String>,
    index: HashMap<String, usize>,
    adjacency: Vec<Vec<usize>>,
    edge_count: usize,
}

impl LabeledGraph {
    /// Builds a graph from `(id, label)` nodes and ID-pair edges. Self-loops
    /// and repeated edges (in either direction) are dropped.
    pub fn new<I, E>(nodes: I, edges: E) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String)>,
        E: IntoIterator<Item = (String, String)>,
    {
        let mut ids = Vec::new();
        let mut labels = Vec::new();
        let mut index = HashMap::new();
        for (id, label) in nodes {
            if index.insert(id.clone(), ids.len()).is_some() {
                return Err(Error::InvalidInput(format!("duplicate node id {id:?}")));
            }
            ids.push(id);
            labels.push(label);
        }
        let mut pairs = Vec::new();
        for (u, v) in edges {
            let lookup = |x: &str| {
                index
                    .get(x)
                    .copied()
                    .ok_or_else(|| Error::InvalidInput(format!("edge references unknown node {x:?}")))
            };
            pairs.push((lookup(&u)?, lookup(&v)?));
        }
        Ok(Self::from_index_pairs(ids, labels, pairs))
    }

    pub(crate) fn from_index_pairs(
        ids: Vec<String>,
        labels: Vec<String>,
        pairs: Vec<(usize, usize)>,
    ) -> Self {
        let index = ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        let mut adjacency = vec![Vec::new(); ids.len()];
        for (u, v) in pairs {
            if u != v {
                adjacency[u].push(v);
                adjacency[v].push(u);
            }
        }
        let mut twice = 0;
        for adj in &mut adjacency {
            adj.sort_unstable();
            adj.dedup();
            twice += adj.len();
        }
        LabeledGraph {
            ids,
            labels,
            index,
            adjacency,
            edge_count: twice / 2,
        }
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn id(&self, node: usize) -> &str {
        &self.ids[node]
    }

    pub fn label(&self, node: usize) -> &str {
        &self.labels[node]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].binary_search(&v).is_ok()
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, adj)| adj.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }

    /// Connected components as sorted ID lists, ordered by smallest member ID.
    pub fn connected_components(&self) -> Vec<Vec<String>> {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        let mut queue = VecDeque::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            queue.push_back(start);
            let mut members = Vec::new();
            while let Some(u) = queue.pop_front() {
                members.push(self.ids[u].clone());
                for &v in &self.adjacency[u] {
                    if !seen[v] {
                        seen[v] = true;
                        queue.push_back(v);
                    }
                }
            }
            members.sort();
            out.push(members);
        }
        out.sort_by(|a, b| a[0].cmp(&b[0]));
        out
    }

    pub fn degree_stats(&self) -> DegreeStats {
        let degrees = self.adjacency.iter().map(Vec::len);
        let n = self.node_count();
        DegreeStats {
            nodes: n,
            edges: self.edge_count,
            min_degree: degrees.clone().min().unwrap_or(0),
            max_degree: degrees.max().unwrap_or(0),
            mean_degree: if n == 0 {
                0.0
            } else {
                2.0 * self.edge_count as f64 / n as f64
            },
            isolated: self.adjacency.iter().filter(|a| a.is_empty()).count(),
        }
    }

    /// Removes nodes whose normalized label collides with another node's,
    /// keeping the node with the lexicographically smallest ID. Returns the
    /// reduced graph and the IDs of the dropped nodes.
    pub fn resolve_label_collisions(&self) -> (LabeledGraph, Vec<String>) {
        let mut winner: BTreeMap<String, usize> = BTreeMap::new();
        for (i, label) in self.labels.iter().enumerate() {
            let key = normalize_label(label);
            winner
                .entry(key)
                .and_modify(|w| {
                    if self.ids[i] < self.ids[*w] {
                        *w = i;
                    }
                })
                .or_insert(i);
        }
        let keep: Vec<bool> = {
            let mut keep = vec![false; self.node_count()];
            for &i in winner.values() {
                keep[i] = true;
            }
            keep
        };
        let dropped: Vec<String> = (0..self.node_count())
            .filter(|&i| !keep[i])
            .map(|i| self.ids[i].clone())
            .collect();
        if !dropped.is_empty() {
            log::warn!(
                "{} node(s) share a normalized label with a node of smaller ID and were dropped",
                dropped.len()
            );
        }
        (self.induced(&keep), dropped)
    }

    /// Subgraph induced by the nodes flagged in `keep`, preserving order.
    pub fn induced(&self, keep: &[bool]) -> LabeledGraph {
        let mut remap = vec![usize::MAX; self.node_count()];
        let mut ids = Vec::new();
        let mut labels = Vec::new();
        for i in 0..self.node_count() {
            if keep[i] {
                remap[i] = ids.len();
                ids.push(self.ids[i].clone());
                labels.push(self.labels[i].clone());
            }
        }
        let pairs = self
            .edges()
            .filter(|&(u, v)| keep[u] && keep[v])
            .map(|(u, v)| (remap[u], remap[v]))
            .collect();
        Self::from_index_pairs(ids, labels, pairs)
    }

    /// Writes `nodes.tsv` (id, label) and `edges.tsv` (id, id).
    pub fn write_tsv(&self, nodes_path: impl AsRef<Path>, edges_path: impl AsRef<Path>) -> Result<()> {
        let nodes_path = nodes_path.as_ref();
        let edges_path = edges_path.as_ref();
        let mut w = create_writer(nodes_path)?;
        let io_n = |e| Error::io(nodes_path, e);
        for (id, label) in self.ids.iter().zip(&self.labels) {
            writeln!(w, "{}\t{}", tsv_field(id), tsv_field(label)).map_err(io_n)?;
        }
        w.flush().map_err(io_n)?;
        let mut w = create_writer(edges_path)?;
        let io_e = |e| Error::io(edges_path, e);
        for (u, v) in self.edges() {
            writeln!(w, "{}\t{}", tsv_field(&self.ids[u]), tsv_field(&self.ids[v])).map_err(io_e)?;
        }
        w.flush().map_err(io_e)
    }

    pub fn read_tsv(nodes_path: impl AsRef<Path>, edges_path: impl AsRef<Path>) -> Result<Self> {
        let nodes_path = nodes_path.as_ref();
        let edges_path = edges_path.as_ref();
        let nodes = read_pairs(open_reader(nodes_path)?, &nodes_path.display().to_string())?;
        let edges = read_pairs(open_reader(edges_path)?, &edges_path.display().to_string())?;
        Self::new(nodes, edges)
    }
}

fn tsv_field(s: &str) -> std::borrow::Cow<'_, str> {
    if s.contains(['\t', '\n', '\r']) {
        s.replace(['\t', '\n', '\r'], " ").into()
    } else {
        s.into()
    }
}

fn read_pairs<R: BufRead>(reader: R, source: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (no, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.is_empty() {
            continue;
        }
        let (a, b) = line
            .split_once('\t')
            .ok_or_else(|| Error::format(source, no + 1, "expected two tab-separated fields"))?;
        if b.contains('\t') {
            return Err(Error::format(source, no + 1, "more than two fields"));
        }
        out.push((a.to_owned(), b.to_owned()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeStats {
    pub nodes: usize,
    pub edges: usize,
    pub min_degree: usize,
    pub max_degree: usize,
    pub mean_degree: f64,
    pub isolated: usize,
}
