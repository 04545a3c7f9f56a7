//! Skip-gram with negative sampling.
//!
//! Input vectors start uniform in `[-0.5/dim, 0.5/dim)`, output vectors at
//! zero. Negatives are drawn from the unigram distribution raised to 0.75 and
//! the learning rate decays linearly from `alpha` to `alpha / 10`. With
//! `threads == 1` training is fully deterministic for a given seed; with more
//! threads workers update shared parameters without locks.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::alias::AliasTable;
use crate::corpus::tokenize_sentence;
use crate::embed_store::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::io::open_reader;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SgnsConfig {
    pub dim: usize,
    pub window: usize,
    pub epochs: usize,
    pub negative: usize,
    pub alpha: f64,
    /// Subsampling threshold; 0 disables subsampling.
    pub sample: f64,
    pub min_count: u64,
    pub seed: u64,
    pub threads: usize,
}

impl Default for SgnsConfig {
    /// Text-corpus settings.
    fn default() -> Self {
        SgnsConfig {
            dim: 200,
            window: 30,
            epochs: 10,
            negative: 10,
            alpha: 0.05,
            sample: 1e-4,
            min_count: 5,
            seed: 1,
            threads: 1,
        }
    }
}

impl SgnsConfig {
    /// Settings for training on random-walk corpora.
    pub fn for_walks() -> Self {
        SgnsConfig {
            dim: 200,
            window: 15,
            epochs: 50,
            negative: 5,
            alpha: 0.025,
            sample: 1e-3,
            min_count: 1,
            seed: 1,
            threads: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_owned()));
        if self.dim < 1 {
            return bad("sgns.dim must be >= 1");
        }
        if self.window < 1 {
            return bad("sgns.window must be >= 1");
        }
        if self.epochs < 1 {
            return bad("sgns.epochs must be >= 1");
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("sgns.alpha must be positive");
        }
        if !(self.sample >= 0.0 && self.sample.is_finite()) {
            return bad("sgns.sample must be >= 0");
        }
        if self.threads < 1 {
            return bad("sgns.threads must be >= 1");
        }
        Ok(())
    }
}

/// Token vocabulary ordered by descending count, ties by token.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocab {
    tokens: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, u32>,
}

impl Vocab {
    pub fn from_counts(counts: HashMap<String, u64>, min_count: u64) -> Self {
        let mut entries: Vec<(String, u64)> = counts.into_iter().filter(|e| e.1 >= min_count.max(1)).collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.0.clone(), i as u32))
            .collect();
        let (tokens, counts) = entries.into_iter().unzip();
        Vocab { tokens, counts, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn count(&self, i: usize) -> u64 {
        self.counts[i]
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }
}

/// Sentences as vocabulary ids; out-of-vocabulary tokens are dropped.
#[derive(Debug, Clone)]
pub struct EncodedCorpus {
    pub vocab: Vocab,
    pub sentences: Vec<Vec<u32>>,
}

impl EncodedCorpus {
    pub fn from_sentences<S: AsRef<str>>(sentences: &[Vec<S>], min_count: u64) -> Self {
        let mut counts: HashMap<String, u64> = HashMap::new();
        for s in sentences {
            for t in s {
                *counts.entry(t.as_ref().to_owned()).or_default() += 1;
            }
        }
        let vocab = Vocab::from_counts(counts, min_count);
        let sentences = sentences
            .iter()
            .map(|s| s.iter().filter_map(|t| vocab.id(t.as_ref())).collect())
            .collect();
        EncodedCorpus { vocab, sentences }
    }

    /// Walks over node indices, with `tokens[v]` naming node `v`.
    pub fn from_walks(walks: &[Vec<usize>], tokens: &[String], min_count: u64) -> Self {
        let mut node_counts = vec![0u64; tokens.len()];
        for w in walks {
            for &v in w {
                node_counts[v] += 1;
            }
        }
        let mut counts: HashMap<String, u64> = HashMap::new();
        for (t, &c) in tokens.iter().zip(&node_counts) {
            if c > 0 {
                *counts.entry(t.clone()).or_default() += c;
            }
        }
        let vocab = Vocab::from_counts(counts, min_count);
        let node_ids: Vec<Option<u32>> = tokens.iter().map(|t| vocab.id(t)).collect();
        let sentences = walks
            .iter()
            .map(|w| w.iter().filter_map(|&v| node_ids[v]).collect())
            .collect();
        EncodedCorpus { vocab, sentences }
    }

    /// Text with one sentence per line, tokenized by
    /// [`tokenize_sentence`](crate::corpus::tokenize_sentence). Reads the file
    /// twice so the raw text never has to be held in memory.
    pub fn from_text_file(path: &Path, min_count: u64) -> Result<Self> {
        let mut counts: HashMap<String, u64> = HashMap::new();
        for line in open_reader(path)?.lines() {
            let line = line.map_err(|e| Error::io(path, e))?;
            for t in tokenize_sentence(&line) {
                *counts.entry(t).or_default() += 1;
            }
        }
        let vocab = Vocab::from_counts(counts, min_count);
        let mut sentences = Vec::new();
        for line in open_reader(path)?.lines() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let s: Vec<u32> = tokenize_sentence(&line).iter().filter_map(|t| vocab.id(t)).collect();
            if !s.is_empty() {
                sentences.push(s);
            }
        }
        Ok(EncodedCorpus { vocab, sentences })
    }

    pub fn token_count(&self) -> u64 {
        self.sentences.iter().map(|s| s.len() as u64).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainingStats {
    pub vocab_size: usize,
    pub corpus_tokens: u64,
    /// Mean negative log-likelihood per training pair, per epoch.
    pub epoch_loss: Vec<f64>,
}

/// Gradient of the log-likelihood of one training example.
#[derive(Debug, Clone, PartialEq)]
pub struct SgnsGradient {
    pub objective: f64,
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln σ(x)`, stable for large |x|.
fn log_sigmoid(x: f64) -> f64 {
    -(x.max(0.0) - x + (-x.abs()).exp().ln_1p())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Log-likelihood `ℓ(label | u·v) + Σₙ ln σ(−u·vₙ)` and its gradient, where
/// `ℓ(1 | s) = ln σ(s)` and `ℓ(0 | s) = ln σ(−s)`. Training moves parameters
/// along this gradient.
pub fn sgns_pair_gradient(center: &[f64], context: &[f64], negatives: &[&[f64]], label: bool) -> SgnsGradient {
    let dim = center.len();
    assert!(context.len() == dim && negatives.iter().all(|n| n.len() == dim));
    let mut g_center = vec![0.0; dim];
    let mut objective = 0.0;
    let mut term = |other: &[f64], y: f64| {
        let s = dot(center, other);
        objective += if y > 0.0 { log_sigmoid(s) } else { log_sigmoid(-s) };
        let g = y - sigmoid(s);
        for (gc, o) in g_center.iter_mut().zip(other) {
            *gc += g * o;
        }
        center.iter().map(|c| g * c).collect::<Vec<f64>>()
    };
    let g_context = term(context, if label { 1.0 } else { 0.0 });
    let g_neg = negatives.iter().map(|n| term(n, 0.0)).collect();
    SgnsGradient {
        objective,
        center: g_center,
        context: g_context,
        negatives: g_neg,
    }
}

/// Row-major f64 parameters shared between training threads.
struct SharedMatrix {
    data: Vec<AtomicU64>,
    dim: usize,
}

impl SharedMatrix {
    fn from_vec(v: Vec<f64>, dim: usize) -> Self {
        SharedMatrix {
            data: v.into_iter().map(|x| AtomicU64::new(x.to_bits())).collect(),
            dim,
        }
    }

    fn load_row(&self, i: u32, out: &mut [f64]) {
        let row = &self.data[i as usize * self.dim..(i as usize + 1) * self.dim];
        for (o, a) in out.iter_mut().zip(row) {
            *o = f64::from_bits(a.load(Ordering::Relaxed));
        }
    }

    fn store_row(&self, i: u32, v: &[f64]) {
        let row = &self.data[i as usize * self.dim..(i as usize + 1) * self.dim];
        for (a, x) in row.iter().zip(v) {
            a.store(x.to_bits(), Ordering::Relaxed);
        }
    }

    fn into_vec(self) -> Vec<f64> {
        self.data.into_iter().map(|a| f64::from_bits(a.into_inner())).collect()
    }
}

struct Trainer<'a> {
    cfg: &'a SgnsConfig,
    corpus: &'a EncodedCorpus,
    input: SharedMatrix,
    output: SharedMatrix,
    noise: AliasTable,
    keep: Vec<f64>,
    total_words: f64,
    words_done: AtomicU64,
}

impl Trainer<'_> {
    fn learning_rate(&self) -> f64 {
        let progress = (self.words_done.load(Ordering::Relaxed) as f64 / self.total_words).min(1.0);
        self.cfg.alpha * (1.0 - 0.9 * progress)
    }

    /// Trains on one slice of sentences; returns (summed loss, pair count).
    fn run(&self, sentences: &[Vec<u32>], r: &mut rng::Rng) -> (f64, u64) {
        let dim = self.cfg.dim;
        let mut u = vec![0.0; dim];
        let mut v = vec![0.0; dim];
        let mut grad_u = vec![0.0; dim];
        let mut kept = Vec::new();
        let mut loss = 0.0;
        let mut pairs = 0u64;
        for sentence in sentences {
            let lr = self.learning_rate();
            kept.clear();
            kept.extend(
                sentence
                    .iter()
                    .copied()
                    .filter(|&w| self.keep[w as usize] >= 1.0 || r.random::<f64>() < self.keep[w as usize]),
            );
            for pos in 0..kept.len() {
                let center = kept[pos];
                let reach = self.cfg.window - r.random_range(0..self.cfg.window);
                let lo = pos.saturating_sub(reach);
                let hi = (pos + reach).min(kept.len() - 1);
                for cpos in lo..=hi {
                    if cpos == pos {
                        continue;
                    }
                    let context = kept[cpos];
                    self.input.load_row(center, &mut u);
                    grad_u.iter_mut().for_each(|g| *g = 0.0);
                    for n in 0..=self.cfg.negative {
                        let (target, label) = if n == 0 {
                            (context, 1.0)
                        } else {
                            let t = self.noise.sample(r) as u32;
                            if t == context {
                                continue;
                            }
                            (t, 0.0)
                        };
                        self.output.load_row(target, &mut v);
                        let s = dot(&u, &v);
                        loss -= if label > 0.0 { log_sigmoid(s) } else { log_sigmoid(-s) };
                        let g = (label - sigmoid(s)) * lr;
                        for k in 0..dim {
                            grad_u[k] += g * v[k];
                            v[k] += g * u[k];
                        }
                        self.output.store_row(target, &v);
                    }
                    for (x, g) in u.iter_mut().zip(&grad_u) {
                        *x += g;
                    }
                    self.input.store_row(center, &u);
                    pairs += 1;
                }
            }
            self.words_done.fetch_add(sentence.len() as u64, Ordering::Relaxed);
        }
        (loss, pairs)
    }
}

/// Trains embeddings and returns the input vectors in vocabulary order.
pub fn train_encoded(corpus: &EncodedCorpus, cfg: &SgnsConfig) -> Result<(EmbeddingMatrix, TrainingStats)> {
    cfg.validate()?;
    let vocab = &corpus.vocab;
    if vocab.is_empty() {
        return Err(Error::InvalidInput("empty vocabulary after min_count filtering".into()));
    }
    let dim = cfg.dim;
    let total_tokens = corpus.token_count();
    let mut r = rng::seeded(cfg.seed);
    let bound = 0.5 / dim as f64;
    let init: Vec<f64> = (0..vocab.len() * dim).map(|_| r.random_range(-bound..bound)).collect();

    let noise_weights: Vec<f64> = vocab.counts.iter().map(|&c| (c as f64).powf(0.75)).collect();
    let threshold = cfg.sample * total_tokens as f64;
    let keep = vocab
        .counts
        .iter()
        .map(|&c| {
            if cfg.sample == 0.0 {
                1.0
            } else {
                let f = c as f64;
                ((f / threshold).sqrt() + 1.0) * threshold / f
            }
        })
        .collect();

    let trainer = Trainer {
        cfg,
        corpus,
        input: SharedMatrix::from_vec(init, dim),
        output: SharedMatrix::from_vec(vec![0.0; vocab.len() * dim], dim),
        noise: AliasTable::new(&noise_weights).expect("positive counts"),
        keep,
        total_words: (total_tokens.max(1) * cfg.epochs as u64) as f64,
        words_done: AtomicU64::new(0),
    };

    let mut epoch_loss = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let sentences = &trainer.corpus.sentences;
        let (loss, pairs) = if cfg.threads == 1 {
            trainer.run(sentences, &mut rng::stream(cfg.seed, &[epoch as u64, 0]))
        } else {
            let chunk = sentences.len().div_ceil(cfg.threads).max(1);
            let t = &trainer;
            std::thread::scope(|scope| {
                let handles: Vec<_> = sentences
                    .chunks(chunk)
                    .enumerate()
                    .map(|(w, part)| {
                        scope.spawn(move || t.run(part, &mut rng::stream(cfg.seed, &[epoch as u64, w as u64])))
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("training thread panicked"))
                    .fold((0.0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
            })
        };
        let mean = if pairs > 0 { loss / pairs as f64 } else { 0.0 };
        log::info!("epoch {}/{}: mean loss {mean:.5}", epoch + 1, cfg.epochs);
        epoch_loss.push(mean);
    }

    let stats = TrainingStats {
        vocab_size: vocab.len(),
        corpus_tokens: total_tokens,
        epoch_loss,
    };
    let emb = EmbeddingMatrix::new(vocab.tokens.clone(), trainer.input.into_vec(), dim)?;
    Ok((emb, stats))
}

pub fn train_sgns<S: AsRef<str>>(sentences: &[Vec<S>], cfg: &SgnsConfig) -> Result<(EmbeddingMatrix, TrainingStats)> {
    train_encoded(&EncodedCorpus::from_sentences(sentences, cfg.min_count), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cosine(a: &[f64], b: &[f64]) -> f64 {
        dot(a, b) / (dot(a, a).sqrt() * dot(b, b).sqrt())
    }

    fn two_clusters(n: usize, seed: u64) -> Vec<Vec<String>> {
        let groups = [["a", "b", "c", "d"], ["x", "y", "z", "w"]];
        let mut r = rng::seeded(seed);
        (0..n)
            .map(|i| {
                let g = &groups[i % 2];
                (0..8).map(|_| g[r.random_range(0..4)].to_owned()).collect()
            })
            .collect()
    }

    fn small_cfg() -> SgnsConfig {
        SgnsConfig {
            dim: 16,
            window: 3,
            epochs: 5,
            negative: 5,
            alpha: 0.05,
            sample: 0.0,
            min_count: 1,
            seed: 7,
            threads: 1,
        }
    }

    #[test]
    fn zero_vectors_give_half_gradient() {
        let u = [0.0; 3];
        let v = [1.0, -2.0, 3.0];
        let g = sgns_pair_gradient(&u, &v, &[], true);
        assert_eq!(g.center, vec![0.5, -1.0, 1.5]);
        assert_eq!(g.context, vec![0.0; 3]);
        let g = sgns_pair_gradient(&v, &u, &[], false);
        assert_eq!(g.context, vec![-0.5, 1.0, -1.5]);
        assert!((g.objective - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let u = [0.3, -0.2, 0.5];
        let c = [0.1, 0.4, -0.3];
        let n1 = [-0.2, 0.1, 0.2];
        let n2 = [0.5, 0.5, -0.1];
        let g = sgns_pair_gradient(&u, &c, &[&n1, &n2], true);
        let h = 1e-6;
        let f = |u: &[f64], c: &[f64]| sgns_pair_gradient(u, c, &[&n1, &n2], true).objective;
        for k in 0..3 {
            let (mut up, mut dn) = (u, u);
            up[k] += h;
            dn[k] -= h;
            let fd = (f(&up, &c) - f(&dn, &c)) / (2.0 * h);
            assert!((fd - g.center[k]).abs() < 1e-8);
            let (mut cp, mut cm) = (c, c);
            cp[k] += h;
            cm[k] -= h;
            let fd = (f(&u, &cp) - f(&u, &cm)) / (2.0 * h);
            assert!((fd - g.context[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn log_sigmoid_is_stable() {
        assert!((log_sigmoid(0.0) - 0.5f64.ln()).abs() < 1e-15);
        assert!(log_sigmoid(800.0).abs() < 1e-300);
        assert!((log_sigmoid(-800.0) + 800.0).abs() < 1e-9);
    }

    #[test]
    fn cooccurring_tokens_end_up_closer() {
        let corpus = two_clusters(400, 1);
        let (emb, stats) = train_sgns(&corpus, &small_cfg()).unwrap();
        let a = emb.get("a").unwrap();
        assert!(cosine(a, emb.get("b").unwrap()) > cosine(a, emb.get("x").unwrap()));
        assert_eq!(stats.vocab_size, 8);
        assert_eq!(stats.epoch_loss.len(), 5);
    }

    #[test]
    fn loss_decreases_early() {
        let corpus = two_clusters(400, 4);
        let cfg = SgnsConfig {
            epochs: 3,
            alpha: 0.005,
            ..small_cfg()
        };
        let (_, stats) = train_sgns(&corpus, &cfg).unwrap();
        let l = &stats.epoch_loss;
        assert!(l[1] <= l[0] && l[2] <= l[1], "{l:?}");
    }

    #[test]
    fn single_thread_is_deterministic() {
        let corpus = two_clusters(50, 2);
        let a = train_sgns(&corpus, &small_cfg()).unwrap();
        let b = train_sgns(&corpus, &small_cfg()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn parallel_training_runs() {
        let corpus = two_clusters(400, 3);
        let cfg = SgnsConfig {
            threads: 4,
            ..small_cfg()
        };
        let (emb, _) = train_sgns(&corpus, &cfg).unwrap();
        let a = emb.get("a").unwrap();
        assert!(cosine(a, emb.get("c").unwrap()) > cosine(a, emb.get("z").unwrap()));
    }

    #[test]
    fn vocab_order_and_min_count() {
        let s = vec![vec!["b", "a", "b", "c", "c", "b"]];
        let c = EncodedCorpus::from_sentences(&s, 2);
        assert_eq!(c.vocab.tokens(), ["b", "c"]);
        assert_eq!(c.sentences, vec![vec![0, 0, 1, 1, 0]]);
    }

    #[test]
    fn subsampling_keeps_rare_tokens() {
        let mut s = vec![vec!["common"; 1000]];
        s[0].push("rare");
        let cfg = SgnsConfig {
            sample: 1e-3,
            epochs: 1,
            ..small_cfg()
        };
        let (emb, _) = train_sgns(&s, &cfg).unwrap();
        assert!(emb.contains("rare"));
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = SgnsConfig {
            dim: 0,
            ..SgnsConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert!(train_sgns::<&str>(&[], &small_cfg()).is_err());
    }
}
