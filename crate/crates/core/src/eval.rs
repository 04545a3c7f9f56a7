//! Word-pair similarity evaluation with bootstrapped Pearson correlations.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;

use crate::embed_store::{normalize_label, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::io::open_reader;
use crate::rng;

pub const MAX_SCORE: f64 = 1600.0;
pub const DEFAULT_RESAMPLES: usize = 1000;
/// Subsets with fewer evaluable pairs than this are flagged `low_n`.
pub const LOW_N: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WordPair {
    pub term1: String,
    pub term2: String,
    pub similarity: f64,
    pub relatedness: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WordPairDataset {
    pub records: Vec<WordPair>,
}

impl WordPairDataset {
    /// Drops later duplicates of an unordered pair (with a warning).
    pub fn from_records(records: impl IntoIterator<Item = WordPair>) -> Self {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        let mut duplicates = Vec::new();
        for r in records {
            let key = if r.term1 <= r.term2 {
                (r.term1.clone(), r.term2.clone())
            } else {
                (r.term2.clone(), r.term1.clone())
            };
            if !seen.insert(key) {
                duplicates.push(format!("({}, {})", r.term1, r.term2));
                continue;
            }
            if r.term1 == r.term2 {
                log::info!("pair ({}, {}) has identical terms", r.term1, r.term2);
            }
            out.push(r);
        }
        if !duplicates.is_empty() {
            log::warn!(
                "{} duplicate pair(s) ignored, first {}",
                duplicates.len(),
                duplicates[0]
            );
        }
        WordPairDataset { records: out }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn terms(&self) -> BTreeSet<String> {
        self.records
            .iter()
            .flat_map(|r| [r.term1.clone(), r.term2.clone()])
            .collect()
    }
}

pub fn load_wordpair_dataset(path: &Path) -> Result<WordPairDataset> {
    parse_wordpair_csv(open_reader(path)?, &path.display().to_string())
}

/// CSV with (at least) the columns `Term1,Term2,Similarity,Relatedness`,
/// matched by header name.
pub fn parse_wordpair_csv<R: Read>(reader: R, source: &str) -> Result<WordPairDataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::format(source, 1, format!("missing column {name}")))
    };
    let cols = [col("Term1")?, col("Term2")?, col("Similarity")?, col("Relatedness")?];
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| {
            row.get(cols[i])
                .ok_or_else(|| Error::format(source, line, "too few fields"))
        };
        let term = |i: usize| -> Result<String> {
            let t = normalize_label(field(i)?);
            if t.is_empty() {
                return Err(Error::format(source, line, "empty term"));
            }
            Ok(t)
        };
        let score = |i: usize| -> Result<f64> {
            let raw = field(i)?;
            let v: f64 = raw
                .parse()
                .map_err(|_| Error::format(source, line, format!("invalid score {raw:?}")))?;
            if !(0.0..=MAX_SCORE).contains(&v) {
                return Err(Error::format(
                    source,
                    line,
                    format!("score {v} outside [0, {MAX_SCORE}]"),
                ));
            }
            Ok(v)
        };
        records.push(WordPair {
            term1: term(0)?,
            term2: term(1)?,
            similarity: score(2)?,
            relatedness: score(3)?,
        });
    }
    Ok(WordPairDataset::from_records(records))
}

/// Seeded uniform split into (trained, imputed); the trained half gets the
/// extra term when the count is odd.
pub fn split_vocab(terms: &BTreeSet<String>, seed: u64) -> (BTreeSet<String>, BTreeSet<String>) {
    let mut all: Vec<&String> = terms.iter().collect();
    all.shuffle(&mut rng::seeded(seed));
    let half = all.len().div_ceil(2);
    let trained = all[..half].iter().map(|s| (*s).clone()).collect();
    let imputed = all[half..].iter().map(|s| (*s).clone()).collect();
    (trained, imputed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Subset {
    #[serde(rename = "trained/trained")]
    TrainedTrained,
    #[serde(rename = "imputed/trained")]
    ImputedTrained,
    #[serde(rename = "imputed/imputed")]
    ImputedImputed,
}

impl Subset {
    pub const ALL: [Subset; 3] = [Subset::TrainedTrained, Subset::ImputedTrained, Subset::ImputedImputed];

    pub fn name(self) -> &'static str {
        match self {
            Subset::TrainedTrained => "trained/trained",
            Subset::ImputedTrained => "imputed/trained",
            Subset::ImputedImputed => "imputed/imputed",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairSplit {
    pub trained_trained: Vec<WordPair>,
    pub imputed_trained: Vec<WordPair>,
    pub imputed_imputed: Vec<WordPair>,
    /// Pairs with a term in neither vocabulary.
    pub skipped: Vec<WordPair>,
}

impl PairSplit {
    pub fn subset(&self, s: Subset) -> &[WordPair] {
        match s {
            Subset::TrainedTrained => &self.trained_trained,
            Subset::ImputedTrained => &self.imputed_trained,
            Subset::ImputedImputed => &self.imputed_imputed,
        }
    }

    pub fn total(&self) -> usize {
        self.trained_trained.len() + self.imputed_trained.len() + self.imputed_imputed.len() + self.skipped.len()
    }
}

pub fn classify_pairs(d: &WordPairDataset, trained: &BTreeSet<String>, imputed: &BTreeSet<String>) -> PairSplit {
    #[derive(PartialEq)]
    enum Status {
        Trained,
        Imputed,
        Unknown,
    }
    let status = |t: &str| {
        if trained.contains(t) {
            Status::Trained
        } else if imputed.contains(t) {
            Status::Imputed
        } else {
            Status::Unknown
        }
    };
    let mut split = PairSplit::default();
    for r in &d.records {
        let bucket = match (status(&r.term1), status(&r.term2)) {
            (Status::Unknown, _) | (_, Status::Unknown) => &mut split.skipped,
            (Status::Trained, Status::Trained) => &mut split.trained_trained,
            (Status::Imputed, Status::Imputed) => &mut split.imputed_imputed,
            _ => &mut split.imputed_trained,
        };
        bucket.push(r.clone());
    }
    split
}

pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::Undefined("cosine similarity of a zero vector".into()));
    }
    let d: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok((d / (nu * nv)).clamp(-1.0, 1.0))
}

/// Sample Pearson correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            actual: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::Undefined("pearson needs at least two points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Undefined("pearson of a constant sequence".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreStats {
    /// Correlation on the full subset; `None` if undefined.
    pub r: Option<f64>,
    pub boot_mean: Option<f64>,
    /// Population standard deviation over the valid resamples.
    pub boot_std: Option<f64>,
    pub n: usize,
    /// Resamples skipped because the correlation was undefined.
    pub degenerate_resamples: usize,
    pub low_n: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetReport {
    pub pairs: usize,
    /// Pairs with a term the embedding does not cover.
    pub missing: usize,
    pub evaluable: bool,
    pub similarity: Option<ScoreStats>,
    pub relatedness: Option<ScoreStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub subsets: BTreeMap<Subset, SubsetReport>,
    pub skipped: usize,
    pub n_resamples: usize,
    pub seed: u64,
}

impl EvalReport {
    pub fn evaluable_pairs(&self) -> usize {
        self.subsets
            .values()
            .filter(|s| s.evaluable)
            .map(|s| s.pairs - s.missing)
            .sum()
    }

    pub fn to_table(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_owned(), |x| format!("{x:.4}"));
        let mut out = format!(
            "{:<17} {:<12} {:>6} {:>8} {:>10} {:>9}\n",
            "subset", "score", "n", "r", "boot_mean", "boot_std"
        );
        for (subset, rep) in &self.subsets {
            for (label, stats) in [("similarity", &rep.similarity), ("relatedness", &rep.relatedness)] {
                let line = match stats {
                    Some(s) => format!(
                        "{:<17} {:<12} {:>6} {:>8} {:>10} {:>9}{}",
                        subset.name(),
                        label,
                        s.n,
                        fmt(s.r),
                        fmt(s.boot_mean),
                        fmt(s.boot_std),
                        if s.low_n { "  (low n)" } else { "" }
                    ),
                    None => format!(
                        "{:<17} {:<12} {:>6} {:>8}",
                        subset.name(),
                        label,
                        rep.pairs - rep.missing,
                        "n/a"
                    ),
                };
                let _ = writeln!(out, "{line}");
            }
        }
        let _ = writeln!(out, "skipped pairs: {}", self.skipped);
        out
    }
}

fn score_stats(cos: &[f64], human: &[f64], resamples: &[Vec<usize>]) -> ScoreStats {
    let n = cos.len();
    let r = pearson(cos, human).ok();
    let rs: Vec<Option<f64>> = resamples
        .par_iter()
        .map(|idx| {
            let xs: Vec<f64> = idx.iter().map(|&i| cos[i]).collect();
            let ys: Vec<f64> = idx.iter().map(|&i| human[i]).collect();
            pearson(&xs, &ys).ok()
        })
        .collect();
    let valid: Vec<f64> = rs.iter().flatten().copied().collect();
    let (boot_mean, boot_std) = if valid.is_empty() {
        (None, None)
    } else {
        let m = valid.iter().sum::<f64>() / valid.len() as f64;
        let var = valid.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / valid.len() as f64;
        (Some(m), Some(var.sqrt()))
    };
    ScoreStats {
        r,
        boot_mean,
        boot_std,
        n,
        degenerate_resamples: rs.len() - valid.len(),
        low_n: n < LOW_N,
    }
}

/// Pearson correlation between embedding cosines and human scores per subset,
/// with bootstrap resampling of each subset's pair list. Resample `i` of
/// subset `s` draws from its own stream keyed by `(seed, s, i)`.
pub fn bootstrap_eval(emb: &EmbeddingMatrix, split: &PairSplit, n_resamples: usize, seed: u64) -> EvalReport {
    let mut subsets = BTreeMap::new();
    for (si, subset) in Subset::ALL.into_iter().enumerate() {
        let pairs = split.subset(subset);
        let mut cos = Vec::new();
        let mut sim = Vec::new();
        let mut rel = Vec::new();
        let mut missing = 0;
        for p in pairs {
            let score = match (emb.get(&p.term1), emb.get(&p.term2)) {
                (Some(u), Some(v)) => cosine_similarity(u, v).ok(),
                _ => None,
            };
            match score {
                Some(c) => {
                    cos.push(c);
                    sim.push(p.similarity);
                    rel.push(p.relatedness);
                }
                None => missing += 1,
            }
        }
        let evaluable = cos.len() >= 2;
        let (similarity, relatedness) = if evaluable {
            let n = cos.len();
            let resamples: Vec<Vec<usize>> = (0..n_resamples)
                .into_par_iter()
                .map(|i| {
                    let mut r = rng::stream(seed, &[si as u64, i as u64]);
                    (0..n).map(|_| r.random_range(0..n)).collect()
                })
                .collect();
            (
                Some(score_stats(&cos, &sim, &resamples)),
                Some(score_stats(&cos, &rel, &resamples)),
            )
        } else {
            log::warn!(
                "{}: only {} evaluable pair(s) of {}; not evaluated",
                subset.name(),
                cos.len(),
                pairs.len()
            );
            (None, None)
        };
        subsets.insert(
            subset,
            SubsetReport {
                pairs: pairs.len(),
                missing,
                evaluable,
                similarity,
                relatedness,
            },
        );
    }
    EvalReport {
        subsets,
        skipped: split.skipped.len(),
        n_resamples,
        seed,
    }
}
