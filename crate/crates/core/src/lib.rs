//! Imputation of out-of-vocabulary word vectors from knowledge-graph node
//! embeddings, with the supporting pipeline: graph reduction, node2vec and
//! skip-gram training, orthogonal alignment, corpus filtering and word-pair
//! evaluation.

pub mod align;
pub mod alias;
pub mod corpus;
pub mod embed_store;
pub mod error;
pub mod eval;
pub mod graph;
pub mod io;
pub mod lsi;
pub mod node2vec;
pub mod rng;

pub use embed_store::{
    find_anchors, merge_embeddings, normalize_label, read_embeddings, write_embeddings, AnchorMap,
    EmbeddingMatrix,
};
pub use error::{Error, Result};
pub use graph::LabeledGraph;
pub use lsi::{lsi_pipeline, LsiConfig};
