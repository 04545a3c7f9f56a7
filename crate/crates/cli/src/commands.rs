//! One function per pipeline stage. Each reads its inputs, writes fixed-name
//! artifacts into `out` and finishes with a `<stage>.manifest.json`.

use std::collections::BTreeSet;
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::json;

use lsimpute::align::mesh_baseline;
use lsimpute::corpus::{filter_corpus, CorpusFilter};
use lsimpute::eval::{bootstrap_eval, classify_pairs, load_wordpair_dataset, split_vocab, EvalReport};
use lsimpute::graph::{ExtractionConfig, LabeledGraph, SubgraphExtractor};
use lsimpute::io::{create_writer, open_reader, write_json};
use lsimpute::lsi::{lsi_pipeline, LsiConfig};
use lsimpute::node2vec::{
    build_transition_tables, generate_walk_indices, train_encoded, write_corpus, EncodedCorpus, SgnsConfig,
    WalkConfig,
};
use lsimpute::{find_anchors, merge_embeddings, normalize_label, read_embeddings, write_embeddings};

use crate::config::EvalConfig;
use crate::manifest::StageRecorder;

pub const NODES_FILE: &str = "nodes.tsv";
pub const EDGES_FILE: &str = "edges.tsv";
pub const DOMAIN_FILE: &str = "domain.vec";
pub const SEMANTIC_FILE: &str = "semantic.vec";
pub const FILTERED_CORPUS_FILE: &str = "corpus.filtered.txt";
pub const IMPUTED_FILE: &str = "imputed.vec";
pub const LSI_MERGED_FILE: &str = "lsi_merged.vec";
pub const BASELINE_FILE: &str = "baseline.vec";
pub const BASELINE_MERGED_FILE: &str = "baseline_merged.vec";

fn ensure_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))
}

pub fn extract_graph(cfg: &ExtractionConfig, input: &Path, out: &Path) -> Result<()> {
    ensure_dir(out)?;
    let mut rec = StageRecorder::new("extract-graph", cfg)?;
    rec.input(input);
    let (g, stats) = SubgraphExtractor::run(cfg.clone(), open_reader(input)?)?;
    rec.lap("extract");
    let (nodes, edges) = (out.join(NODES_FILE), out.join(EDGES_FILE));
    g.write_tsv(&nodes, &edges)?;
    let summary = json!({
        "extraction": stats,
        "degrees": g.degree_stats(),
        "components": g.connected_components().len(),
    });
    let stats_path = out.join("graph_stats.json");
    write_json(&stats_path, &summary)?;
    rec.lap("write");
    log::info!("graph: {} nodes, {} edges", g.node_count(), g.edge_count());
    for p in [&nodes, &edges, &stats_path] {
        rec.output(p);
    }
    rec.finish(out, &summary)?;
    Ok(())
}

pub fn node2vec(walk: &WalkConfig, sgns: &SgnsConfig, graph_dir: &Path, out: &Path, save_walks: bool) -> Result<PathBuf> {
    ensure_dir(out)?;
    let mut rec = StageRecorder::new("node2vec", &json!({ "walk": walk, "sgns": sgns }))?;
    let (nodes, edges) = (graph_dir.join(NODES_FILE), graph_dir.join(EDGES_FILE));
    rec.input(&nodes);
    rec.input(&edges);
    let g = LabeledGraph::read_tsv(&nodes, &edges)?;
    let (g, dropped) = g.resolve_label_collisions();
    if !dropped.is_empty() {
        log::warn!("{} node(s) dropped for duplicate normalized labels", dropped.len());
    }
    let sampler = build_transition_tables(&g, walk)?;
    let walks = generate_walk_indices(&sampler, walk);
    rec.lap("walks");
    let tokens: Vec<String> = (0..g.node_count()).map(|v| normalize_label(g.label(v))).collect();
    if save_walks {
        let p = out.join("walks.txt");
        let as_tokens: Vec<Vec<String>> = walks
            .iter()
            .map(|w| w.iter().map(|&v| tokens[v].clone()).collect())
            .collect();
        write_corpus(&p, &as_tokens)?;
        rec.output(&p);
    }
    let corpus = EncodedCorpus::from_walks(&walks, &tokens, sgns.min_count);
    let (emb, stats) = train_encoded(&corpus, sgns)?;
    rec.lap("train");
    let path = out.join(DOMAIN_FILE);
    write_embeddings(&emb, &path)?;
    rec.output(&path);
    let summary = json!({
        "nodes": g.node_count(),
        "isolated_nodes": sampler.isolated_nodes(),
        "dropped_duplicate_labels": dropped.len(),
        "walks": walks.len(),
        "training": stats,
    });
    rec.finish(out, &summary)?;
    Ok(path)
}

pub fn train_sgns(cfg: &SgnsConfig, corpus_path: &Path, out: &Path) -> Result<PathBuf> {
    ensure_dir(out)?;
    let mut rec = StageRecorder::new("train-sgns", cfg)?;
    rec.input(corpus_path);
    let corpus = EncodedCorpus::from_text_file(corpus_path, cfg.min_count)?;
    rec.lap("read");
    let (emb, stats) = train_encoded(&corpus, cfg)?;
    rec.lap("train");
    let path = out.join(SEMANTIC_FILE);
    write_embeddings(&emb, &path)?;
    rec.output(&path);
    rec.finish(out, &stats)?;
    Ok(path)
}

pub fn read_terms(path: &Path) -> Result<BTreeSet<String>> {
    let mut terms = BTreeSet::new();
    for line in open_reader(path)?.lines() {
        let line = line.with_context(|| format!("reading {}", path.display()))?;
        let t = normalize_label(line.trim());
        if !t.is_empty() {
            terms.insert(t);
        }
    }
    Ok(terms)
}

pub fn write_terms(path: &Path, terms: &BTreeSet<String>) -> Result<()> {
    let mut w = create_writer(path)?;
    for t in terms {
        writeln!(w, "{t}")?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct VocabSplit {
    pub seed: u64,
    pub trained: BTreeSet<String>,
    pub imputed: BTreeSet<String>,
}

/// Splits the dataset vocabulary and writes `trained_terms.txt` and
/// `imputed_terms.txt` into `out`.
pub fn split_dataset_terms(dataset: &Path, seed: u64, out: &Path) -> Result<VocabSplit> {
    ensure_dir(out)?;
    let d = load_wordpair_dataset(dataset)?;
    let (trained, imputed) = split_vocab(&d.terms(), seed);
    write_terms(&out.join("trained_terms.txt"), &trained)?;
    write_terms(&out.join("imputed_terms.txt"), &imputed)?;
    Ok(VocabSplit { seed, trained, imputed })
}

pub fn filter(terms: &BTreeSet<String>, corpus: &Path, out: &Path) -> Result<PathBuf> {
    ensure_dir(out)?;
    let mut rec = StageRecorder::new("filter-corpus", &json!({ "terms": terms }))?;
    rec.input(corpus);
    let f = CorpusFilter::new(terms.iter().cloned());
    let path = out.join(FILTERED_CORPUS_FILE);
    let mut w = BufWriter::new(std::fs::File::create(&path).with_context(|| format!("cannot create {}", path.display()))?);
    let stats = filter_corpus(&f, open_reader(corpus)?, &mut w)?;
    drop(w);
    rec.lap("filter");
    log::info!(
        "removed {} of {} sentences ({:.2}%)",
        stats.removed,
        stats.total,
        100.0 * stats.removal_fraction
    );
    let stats_path = out.join("filter_stats.json");
    write_json(&stats_path, &stats)?;
    rec.output(&path);
    rec.output(&stats_path);
    rec.finish(out, &json!({ "total": stats.total, "removed": stats.removed }))?;
    Ok(path)
}

pub fn impute(cfg: &LsiConfig, semantic_path: &Path, domain_path: &Path, out: &Path) -> Result<PathBuf> {
    ensure_dir(out)?;
    let mut rec = StageRecorder::new("impute", cfg)?;
    rec.input(semantic_path);
    rec.input(domain_path);
    let semantic = read_embeddings(semantic_path)?;
    let domain = read_embeddings(domain_path)?;
    rec.lap("read");
    let result = lsi_pipeline(&semantic, &domain, cfg)?;
    rec.lap("impute");
    let imputed = out.join(IMPUTED_FILE);
    let merged = out.join(LSI_MERGED_FILE);
    let report = out.join("impute_report.json");
    write_embeddings(&result.imputed, &imputed)?;
    write_embeddings(&merge_embeddings(&semantic, &result.imputed)?, &merged)?;
    write_json(&report, &result.report)?;
    for p in [&imputed, &merged, &report] {
        rec.output(p);
    }
    rec.finish(out, &result.report)?;
    Ok(merged)
}

pub fn align(semantic_path: &Path, domain_path: &Path, out: &Path) -> Result<PathBuf> {
    ensure_dir(out)?;
    let mut rec = StageRecorder::new("align-baseline", &json!({}))?;
    rec.input(semantic_path);
    rec.input(domain_path);
    let semantic = read_embeddings(semantic_path)?;
    let domain = read_embeddings(domain_path)?;
    let anchors = find_anchors(&semantic, &domain);
    let (aligned, map) = mesh_baseline(&semantic, &domain, &anchors)?;
    rec.lap("fit");
    let summary = json!({
        "anchors": map.anchors,
        "residual": map.residual,
        "orthogonality_error": map.orthogonality_error(),
        "aligned_tokens": aligned.len(),
    });
    let paths = [
        out.join(BASELINE_FILE),
        out.join(BASELINE_MERGED_FILE),
        out.join("alignment_map.txt"),
        out.join("alignment.json"),
    ];
    write_embeddings(&aligned, &paths[0])?;
    write_embeddings(&merge_embeddings(&semantic, &aligned)?, &paths[1])?;
    map.write_to(&paths[2])?;
    write_json(&paths[3], &summary)?;
    for p in &paths {
        rec.output(p);
    }
    rec.finish(out, &summary)?;
    Ok(paths[1].clone())
}

/// Evaluates one embedding file; `tag` names the report and manifest.
pub fn evaluate(
    cfg: &EvalConfig,
    emb_path: &Path,
    dataset: &Path,
    trained: &BTreeSet<String>,
    imputed: &BTreeSet<String>,
    out: &Path,
    tag: &str,
) -> Result<EvalReport> {
    ensure_dir(out)?;
    let mut rec = StageRecorder::new(tag, cfg)?;
    rec.input(emb_path);
    rec.input(dataset);
    let emb = read_embeddings(emb_path)?;
    let d = load_wordpair_dataset(dataset)?;
    let split = classify_pairs(&d, trained, imputed);
    let report = bootstrap_eval(&emb, &split, cfg.n_resamples, cfg.seed);
    rec.lap("evaluate");
    if report.evaluable_pairs() == 0 {
        let counts: Vec<String> = report
            .subsets
            .iter()
            .map(|(s, r)| format!("{}: {} pairs, {} missing", s.name(), r.pairs, r.missing))
            .collect();
        bail!(lsimpute::Error::InvalidInput(format!(
            "no subset has two embeddable pairs ({}; skipped {})",
            counts.join("; "),
            report.skipped
        )));
    }
    let path = out.join(format!("{tag}.json"));
    write_json(&path, &report)?;
    rec.output(&path);
    print!("{}", report.to_table());
    rec.finish(out, &report)?;
    Ok(report)
}
