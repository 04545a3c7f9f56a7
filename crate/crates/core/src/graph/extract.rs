use std::collections::{HashMap, HashSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::ntriples::{NTriplesReader, ParseWarnings, Term, Triple, TripleSet};
use super::LabeledGraph;
use crate::error::{Error, Result};

pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
pub const RDFS_LABEL: &str = "http://www.w3.org/2000/01/rdf-schema#label";
const MESH_VOCAB: &str = "http://id.nlm.nih.gov/mesh/vocab#";

/// Which nodes of a typed knowledge graph survive reduction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractionConfig {
    /// Every instance of these types is kept.
    pub node_type_iris: Vec<String>,
    pub label_predicate: String,
    pub type_predicate: String,
    pub bridge_rule: BridgeRule,
}

/// Secondary-type nodes are kept when they share a triple (any predicate,
/// either direction) with a primary-type node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BridgeRule {
    pub type_iris: Vec<String>,
    /// Keep edges between two bridged (secondary) nodes.
    pub keep_bridge_bridge_edges: bool,
}

impl Default for BridgeRule {
    fn default() -> Self {
        BridgeRule {
            type_iris: vec![format!("{MESH_VOCAB}Concept")],
            keep_bridge_bridge_edges: true,
        }
    }
}

impl Default for ExtractionConfig {
    /// MeSH RDF: topical descriptors plus the concepts attached to them.
    fn default() -> Self {
        ExtractionConfig {
            node_type_iris: vec![format!("{MESH_VOCAB}TopicalDescriptor")],
            label_predicate: RDFS_LABEL.to_owned(),
            type_predicate: RDF_TYPE.to_owned(),
            bridge_rule: BridgeRule::default(),
        }
    }
}

impl ExtractionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.node_type_iris.is_empty() {
            return Err(Error::Config("extraction.node_type_iris must not be empty".into()));
        }
        if self.label_predicate.is_empty() || self.type_predicate.is_empty() {
            return Err(Error::Config("extraction predicates must not be empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ExtractionStats {
    pub triples_seen: usize,
    pub malformed_lines: usize,
    pub primary_nodes: usize,
    pub bridged_nodes: usize,
    pub dropped_unlabeled: usize,
    pub nodes: usize,
    pub edges: usize,
}

/// Incremental extractor: feed triples one at a time, then [`finish`](Self::finish).
///
/// Only type memberships, labels and resource-to-resource links are kept in
/// memory, so whole dumps can be streamed through it.
pub struct SubgraphExtractor {
    cfg: ExtractionConfig,
    primary_types: HashSet<String>,
    bridge_types: HashSet<String>,
    names: Vec<Box<str>>,
    intern: HashMap<Box<str>, u32>,
    primary: HashSet<u32>,
    bridge: HashSet<u32>,
    // (label, preference rank): lower rank wins, earlier wins ties
    labels: HashMap<u32, (String, u8)>,
    links: Vec<(u32, u32)>,
    triples_seen: usize,
}

impl SubgraphExtractor {
    pub fn new(cfg: ExtractionConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(SubgraphExtractor {
            primary_types: cfg.node_type_iris.iter().cloned().collect(),
            bridge_types: cfg.bridge_rule.type_iris.iter().cloned().collect(),
            cfg,
            names: Vec::new(),
            intern: HashMap::new(),
            primary: HashSet::new(),
            bridge: HashSet::new(),
            labels: HashMap::new(),
            links: Vec::new(),
            triples_seen: 0,
        })
    }

    fn id(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.intern.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        let boxed: Box<str> = name.into();
        self.names.push(boxed.clone());
        self.intern.insert(boxed, id);
        id
    }

    pub fn push(&mut self, triple: &Triple) {
        self.triples_seen += 1;
        let Some(subject) = triple.subject.as_resource() else {
            return;
        };
        let pred = triple.predicate.as_str();
        if pred == self.cfg.type_predicate {
            if let Some(class) = triple.object.as_resource() {
                let is_primary = self.primary_types.contains(class);
                let is_bridge = self.bridge_types.contains(class);
                if is_primary || is_bridge {
                    let s = self.id(subject);
                    if is_primary {
                        self.primary.insert(s);
                    }
                    if is_bridge {
                        self.bridge.insert(s);
                    }
                }
            }
            return;
        }
        match &triple.object {
            Term::Literal { value, lang, .. } if pred == self.cfg.label_predicate => {
                let rank = match lang.as_deref() {
                    None => 0,
                    Some(l) if l.eq_ignore_ascii_case("en") || l.to_ascii_lowercase().starts_with("en-") => 0,
                    Some(_) => 1,
                };
                let s = self.id(subject);
                match self.labels.get(&s) {
                    Some((_, r)) if *r <= rank => {}
                    _ => {
                        self.labels.insert(s, (value.clone(), rank));
                    }
                }
            }
            Term::Literal { .. } => {}
            object => {
                let o = object.as_resource().expect("non-literal term");
                let s = self.id(subject);
                let o = self.id(o);
                if s != o {
                    self.links.push((s, o));
                }
            }
        }
    }

    pub fn finish(self, warnings: &ParseWarnings) -> (LabeledGraph, ExtractionStats) {
        let mut bridged: HashSet<u32> = HashSet::new();
        for &(s, o) in &self.links {
            for (a, b) in [(s, o), (o, s)] {
                if self.primary.contains(&a) && self.bridge.contains(&b) && !self.primary.contains(&b) {
                    bridged.insert(b);
                }
            }
        }
        let candidates: Vec<u32> = self.primary.iter().chain(bridged.iter()).copied().collect();
        let mut kept: Vec<u32> = Vec::with_capacity(candidates.len());
        let mut unlabeled = Vec::new();
        for id in candidates {
            if self.labels.contains_key(&id) {
                kept.push(id);
            } else {
                unlabeled.push(id);
            }
        }
        if !unlabeled.is_empty() {
            unlabeled.sort_by(|a, b| self.names[*a as usize].cmp(&self.names[*b as usize]));
            log::warn!(
                "{} kept node(s) have no label and were excluded (first: {})",
                unlabeled.len(),
                self.names[unlabeled[0] as usize]
            );
        }
        kept.sort_by(|a, b| self.names[*a as usize].cmp(&self.names[*b as usize]));
        let position: HashMap<u32, usize> = kept.iter().enumerate().map(|(i, &id)| (id, i)).collect();

        let keep_bb = self.cfg.bridge_rule.keep_bridge_bridge_edges;
        let pairs: Vec<(usize, usize)> = self
            .links
            .iter()
            .filter_map(|&(s, o)| {
                let (&u, &v) = (position.get(&s)?, position.get(&o)?);
                let both_bridged = !self.primary.contains(&s) && !self.primary.contains(&o);
                (keep_bb || !both_bridged).then_some((u, v))
            })
            .collect();

        let ids: Vec<String> = kept.iter().map(|&id| self.names[id as usize].to_string()).collect();
        let labels: Vec<String> = kept.iter().map(|id| self.labels[id].0.clone()).collect();
        let graph = LabeledGraph::from_index_pairs(ids, labels, pairs);
        let stats = ExtractionStats {
            triples_seen: self.triples_seen,
            malformed_lines: warnings.count,
            primary_nodes: self.primary.len(),
            bridged_nodes: bridged.len(),
            dropped_unlabeled: unlabeled.len(),
            nodes: graph.node_count(),
            edges: graph.edge_count(),
        };
        (graph, stats)
    }

    /// Streams an N-Triples reader through a fresh extractor.
    pub fn run<R: BufRead>(cfg: ExtractionConfig, reader: R) -> Result<(LabeledGraph, ExtractionStats)> {
        let mut ex = SubgraphExtractor::new(cfg)?;
        let mut nt = NTriplesReader::new(reader);
        while let Some(t) = nt.next_triple()? {
            ex.push(&t);
        }
        if nt.warnings().count > 0 {
            log::warn!("skipped {} malformed N-Triples line(s)", nt.warnings().count);
        }
        Ok(ex.finish(nt.warnings()))
    }
}

pub fn extract_subgraph(triples: &TripleSet, cfg: &ExtractionConfig) -> Result<LabeledGraph> {
    let mut ex = SubgraphExtractor::new(cfg.clone())?;
    for t in &triples.triples {
        ex.push(t);
    }
    Ok(ex.finish(&triples.warnings).0)
}
