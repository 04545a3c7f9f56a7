//! `lsimpute` command-line front end.

pub mod commands;
pub mod config;
pub mod manifest;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use config::{pick, EvalFlags, LsiFlags, PipelineConfig, SgnsFlags, WalkFlags};

/// Exit status for bad input, invalid configuration or usage errors.
pub const EXIT_INPUT: i32 = 1;
/// Exit status for internal failures.
pub const EXIT_INTERNAL: i32 = 2;

/// Log filter variable, e.g. `LSIMPUTE_LOG=debug`.
pub const LOG_ENV: &str = "LSIMPUTE_LOG";

#[derive(Debug, Parser)]
#[command(name = "lsimpute", version, about = "Impute out-of-vocabulary word vectors from a knowledge graph")]
pub struct Cli {
    /// JSON configuration file; command-line flags take precedence over it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory (overrides paths.output_dir).
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Reduce an N-Triples dump to a labeled undirected graph.
    ExtractGraph {
        #[arg(long)]
        input: Option<PathBuf>,
        /// Drop edges between two bridge-type nodes.
        #[arg(long)]
        drop_bridge_edges: bool,
    },
    /// Train node embeddings on biased random walks.
    Node2vec {
        /// Directory with nodes.tsv and edges.tsv.
        #[arg(long)]
        graph_dir: Option<PathBuf>,
        /// Also write the walk corpus to walks.txt.
        #[arg(long)]
        save_walks: bool,
        #[command(flatten)]
        walk: WalkFlags,
        #[command(flatten)]
        sgns: SgnsFlags,
    },
    /// Train skip-gram embeddings on a sentence-per-line corpus.
    TrainSgns {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[command(flatten)]
        sgns: SgnsFlags,
    },
    /// Drop corpus sentences mentioning any target term.
    FilterCorpus {
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Terms, one per line. Without it the imputed half of the dataset
        /// vocabulary is used.
        #[arg(long)]
        terms: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[command(flatten)]
        eval: EvalFlags,
    },
    /// Impute missing semantic vectors from the domain space.
    Impute {
        #[command(flatten)]
        inputs: EmbeddingInputs,
        #[command(flatten)]
        lsi: LsiFlags,
    },
    /// Orthogonal-map baseline: aligned domain vectors for missing tokens.
    AlignBaseline {
        #[command(flatten)]
        inputs: EmbeddingInputs,
    },
    /// Bootstrapped word-pair correlations for an embedding file.
    Evaluate {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[command(flatten)]
        vocab: SplitInputs,
        /// Report name; written as <tag>.json.
        #[arg(long, default_value = "evaluate")]
        tag: String,
        #[command(flatten)]
        eval: EvalFlags,
    },
    /// Run every stage end to end.
    Pipeline {
        #[command(flatten)]
        walk: WalkFlags,
        #[command(flatten)]
        lsi: LsiFlags,
        #[command(flatten)]
        eval: EvalFlags,
    },
}

#[derive(Debug, Clone, Args)]
pub struct EmbeddingInputs {
    #[arg(long)]
    pub semantic: Option<PathBuf>,
    #[arg(long)]
    pub domain: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SplitInputs {
    /// Trained vocabulary, one term per line.
    #[arg(long, requires = "imputed_terms")]
    pub trained_terms: Option<PathBuf>,
    #[arg(long, requires = "trained_terms")]
    pub imputed_terms: Option<PathBuf>,
}

fn out_dir(cli: &Cli, cfg: &PipelineConfig) -> Result<PathBuf> {
    pick(&cli.out_dir, &cfg.paths.output_dir, "output_dir")
}

fn vocab_split(
    vocab: &SplitInputs,
    dataset: &Path,
    seed: u64,
    out: &Path,
) -> Result<(BTreeSet<String>, BTreeSet<String>)> {
    match (&vocab.trained_terms, &vocab.imputed_terms) {
        (Some(t), Some(i)) => Ok((commands::read_terms(t)?, commands::read_terms(i)?)),
        _ => {
            let s = commands::split_dataset_terms(dataset, seed, out)?;
            Ok((s.trained, s.imputed))
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = PipelineConfig::load(cli.config.as_deref())?;
    match &cli.command {
        Command::ExtractGraph {
            input,
            drop_bridge_edges,
        } => {
            if *drop_bridge_edges {
                cfg.extraction.bridge_rule.keep_bridge_bridge_edges = false;
            }
            cfg.validate()?;
            let input = pick(input, &cfg.paths.graph_dump, "graph_dump")?;
            commands::extract_graph(&cfg.extraction, &input, &out_dir(&cli, &cfg)?)
        }
        Command::Node2vec {
            graph_dir,
            save_walks,
            walk,
            sgns,
        } => {
            walk.apply(&mut cfg.walk);
            sgns.apply(&mut cfg.node2vec);
            cfg.validate()?;
            let out = out_dir(&cli, &cfg)?;
            let graph_dir = graph_dir
                .clone()
                .or(cfg.paths.graph_dir.clone())
                .unwrap_or_else(|| out.clone());
            commands::node2vec(&cfg.walk, &cfg.node2vec, &graph_dir, &out, *save_walks).map(drop)
        }
        Command::TrainSgns { corpus, sgns } => {
            sgns.apply(&mut cfg.sgns);
            cfg.validate()?;
            let corpus = pick(corpus, &cfg.paths.corpus, "corpus")?;
            commands::train_sgns(&cfg.sgns, &corpus, &out_dir(&cli, &cfg)?).map(drop)
        }
        Command::FilterCorpus {
            corpus,
            terms,
            dataset,
            eval,
        } => {
            eval.apply(&mut cfg.eval);
            cfg.validate()?;
            let out = out_dir(&cli, &cfg)?;
            let corpus = pick(corpus, &cfg.paths.corpus, "corpus")?;
            let terms = match terms.as_ref().or(cfg.paths.terms.as_ref()) {
                Some(t) => commands::read_terms(t)?,
                None => {
                    let dataset = pick(dataset, &cfg.paths.dataset, "dataset")?;
                    commands::split_dataset_terms(&dataset, cfg.eval.split_seed, &out)?.imputed
                }
            };
            commands::filter(&terms, &corpus, &out).map(drop)
        }
        Command::Impute { inputs, lsi } => {
            lsi.apply(&mut cfg.lsi);
            cfg.validate()?;
            let sem = pick(&inputs.semantic, &cfg.paths.semantic_embeddings, "semantic_embeddings")?;
            let dom = pick(&inputs.domain, &cfg.paths.domain_embeddings, "domain_embeddings")?;
            commands::impute(&cfg.lsi, &sem, &dom, &out_dir(&cli, &cfg)?).map(drop)
        }
        Command::AlignBaseline { inputs } => {
            cfg.validate()?;
            let sem = pick(&inputs.semantic, &cfg.paths.semantic_embeddings, "semantic_embeddings")?;
            let dom = pick(&inputs.domain, &cfg.paths.domain_embeddings, "domain_embeddings")?;
            commands::align(&sem, &dom, &out_dir(&cli, &cfg)?).map(drop)
        }
        Command::Evaluate {
            embeddings,
            dataset,
            vocab,
            tag,
            eval,
        } => {
            eval.apply(&mut cfg.eval);
            cfg.validate()?;
            let out = out_dir(&cli, &cfg)?;
            let dataset = pick(dataset, &cfg.paths.dataset, "dataset")?;
            let (trained, imputed) = vocab_split(vocab, &dataset, cfg.eval.split_seed, &out)?;
            commands::evaluate(&cfg.eval, embeddings, &dataset, &trained, &imputed, &out, tag).map(drop)
        }
        Command::Pipeline { walk, lsi, eval } => {
            walk.apply(&mut cfg.walk);
            lsi.apply(&mut cfg.lsi);
            eval.apply(&mut cfg.eval);
            cfg.validate()?;
            let out = out_dir(&cli, &cfg)?;
            pipeline(&cfg, &out)
        }
    }
}

/// extract-graph → node2vec → filter-corpus → train-sgns → impute and
/// align-baseline → evaluate both. Stages whose output is supplied in
/// `paths` (domain or semantic embeddings) are skipped.
pub fn pipeline(cfg: &PipelineConfig, out: &Path) -> Result<()> {
    let start = Instant::now();
    let dataset = pick(&None, &cfg.paths.dataset, "dataset")?;
    let split = commands::split_dataset_terms(&dataset, cfg.eval.split_seed, out)?;
    log::info!(
        "vocabulary split: {} trained, {} imputed terms",
        split.trained.len(),
        split.imputed.len()
    );

    let domain = match &cfg.paths.domain_embeddings {
        Some(p) => p.clone(),
        None => {
            let graph_dir = match (&cfg.paths.graph_dir, &cfg.paths.graph_dump) {
                (Some(dir), _) => dir.clone(),
                (None, Some(dump)) => {
                    commands::extract_graph(&cfg.extraction, dump, out)?;
                    out.to_owned()
                }
                (None, None) => bail!("pipeline needs paths.domain_embeddings, paths.graph_dir or paths.graph_dump"),
            };
            commands::node2vec(&cfg.walk, &cfg.node2vec, &graph_dir, out, false)?
        }
    };

    let semantic = match &cfg.paths.semantic_embeddings {
        Some(p) => p.clone(),
        None => {
            let corpus = pick(&None, &cfg.paths.corpus, "corpus")?;
            let filtered = commands::filter(&split.imputed, &corpus, out)?;
            commands::train_sgns(&cfg.sgns, &filtered, out)?
        }
    };

    let lsi = commands::impute(&cfg.lsi, &semantic, &domain, out)?;
    let baseline = commands::align(&semantic, &domain, out)?;
    let mut reports = serde_json::Map::new();
    for (tag, emb) in [("eval-lsi", &lsi), ("eval-baseline", &baseline)] {
        println!("== {tag}");
        let r = commands::evaluate(&cfg.eval, emb, &dataset, &split.trained, &split.imputed, out, tag)?;
        reports.insert(tag.to_owned(), json!(r.evaluable_pairs()));
    }
    let summary = json!({
        "elapsed_seconds": start.elapsed().as_secs_f64(),
        "evaluable_pairs": reports,
        "split_seed": split.seed,
    });
    lsimpute::io::write_json(out.join("pipeline.json"), &summary)?;
    Ok(())
}

/// Maps an error to the process exit status.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<lsimpute::Error>() {
        Some(e) if !e.is_input_error() => EXIT_INTERNAL,
        _ => EXIT_INPUT,
    }
}
