//! Graph embeddings from biased random walks fed to skip-gram training.

mod sgns;
mod walks;

use std::io::{BufRead, Write};
use std::path::Path;

use crate::embed_store::{normalize_label, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::graph::LabeledGraph;
use crate::io::{create_writer, open_reader};

pub use sgns::{
    sgns_pair_gradient, train_encoded, train_sgns, EncodedCorpus, SgnsConfig, SgnsGradient, TrainingStats, Vocab,
};
pub use walks::{build_transition_tables, generate_walk_indices, generate_walks, WalkConfig, WalkSampler};

/// Walks the graph and trains vectors for the normalized node labels.
pub fn node2vec_embeddings(
    g: &LabeledGraph,
    walk: &WalkConfig,
    sgns: &SgnsConfig,
) -> Result<(EmbeddingMatrix, TrainingStats)> {
    let sampler = build_transition_tables(g, walk)?;
    let walks = generate_walk_indices(&sampler, walk);
    log::info!("{} walks of length {}", walks.len(), walk.walk_length);
    let tokens: Vec<String> = (0..g.node_count()).map(|v| normalize_label(g.label(v))).collect();
    train_encoded(&EncodedCorpus::from_walks(&walks, &tokens, sgns.min_count), sgns)
}

/// One walk per line, tokens separated by single spaces.
pub fn write_corpus(path: &Path, walks: &[Vec<String>]) -> Result<()> {
    let mut w = create_writer(path)?;
    for walk in walks {
        writeln!(w, "{}", walk.join(" ")).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_corpus(path: &Path) -> Result<Vec<Vec<String>>> {
    let mut out = Vec::new();
    for line in open_reader(path)?.lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let walk: Vec<String> = line.split_whitespace().map(str::to_owned).collect();
        if !walk.is_empty() {
            out.push(walk);
        }
    }
    Ok(out)
}
