//! Sentence-level corpus filtering by target terms.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;

const STRIP: &[char] = &['.', ',', ';', ':', '!', '?', '(', ')', '"', '\'', '[', ']'];

/// Lowercases, splits on whitespace and strips surrounding punctuation.
/// Hyphens are kept.
pub fn tokenize_sentence(line: &str) -> Vec<String> {
    line.split_whitespace()
        .map(|t| t.trim_matches(STRIP).to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FilterStats {
    pub total: u64,
    pub removed: u64,
    pub removal_fraction: f64,
    /// Removed sentences per term (a sentence can count for several terms).
    pub term_hits: BTreeMap<String, u64>,
}

impl FilterStats {
    fn add(&mut self, matched: &[String]) {
        self.total += 1;
        if !matched.is_empty() {
            self.removed += 1;
            for t in matched {
                *self.term_hits.entry(t.clone()).or_default() += 1;
            }
        }
    }

    fn finish(mut self) -> Self {
        self.removal_fraction = if self.total == 0 {
            0.0
        } else {
            self.removed as f64 / self.total as f64
        };
        self
    }
}

#[derive(Debug, Clone)]
pub struct CorpusFilter {
    terms: HashSet<String>,
    suffixes: Vec<String>,
}

pub const DEFAULT_PLURAL_SUFFIXES: [&str; 2] = ["s", "es"];

/// Lines processed per parallel batch.
const BATCH: usize = 1 << 14;

impl CorpusFilter {
    pub fn new<I, S>(terms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::with_suffixes(terms, DEFAULT_PLURAL_SUFFIXES)
    }

    /// A token matches term `t` if it equals `t` or `t` followed by one of `suffixes`.
    pub fn with_suffixes<I, S, J, T>(terms: I, suffixes: J) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
        J: IntoIterator<Item = T>,
        T: Into<String>,
    {
        CorpusFilter {
            terms: terms.into_iter().map(Into::into).collect(),
            suffixes: suffixes.into_iter().map(Into::into).filter(|s: &String| !s.is_empty()).collect(),
        }
    }

    /// Terms occurring in `line`, sorted and deduplicated.
    pub fn matches(&self, line: &str) -> Vec<String> {
        let mut found: Vec<String> = Vec::new();
        for tok in tokenize_sentence(line) {
            if self.terms.contains(&tok) {
                found.push(tok.clone());
            }
            for suf in &self.suffixes {
                if let Some(stem) = tok.strip_suffix(suf.as_str()) {
                    if self.terms.contains(stem) {
                        found.push(stem.to_owned());
                    }
                }
            }
        }
        found.sort_unstable();
        found.dedup();
        found
    }

    /// Keeps the lines of `lines` that match no term.
    pub fn filter_lines<'a>(&self, lines: &[&'a str]) -> (Vec<&'a str>, FilterStats) {
        let matched: Vec<Vec<String>> = lines.par_iter().map(|l| self.matches(l)).collect();
        let mut stats = FilterStats::default();
        let mut kept = Vec::new();
        for (line, m) in lines.iter().zip(&matched) {
            stats.add(m);
            if m.is_empty() {
                kept.push(*line);
            }
        }
        (kept, stats.finish())
    }
}

/// Streams `input` to `kept`, dropping every sentence (line) that contains a
/// term. Kept lines, including their line terminators, are written unchanged
/// and in input order.
pub fn filter_corpus<R: BufRead, W: Write>(filter: &CorpusFilter, mut input: R, kept: &mut W) -> Result<FilterStats> {
    let mut stats = FilterStats::default();
    let mut batch: Vec<Vec<u8>> = Vec::with_capacity(BATCH);
    loop {
        batch.clear();
        while batch.len() < BATCH {
            let mut buf = Vec::new();
            if input.read_until(b'\n', &mut buf)? == 0 {
                break;
            }
            batch.push(buf);
        }
        if batch.is_empty() {
            break;
        }
        let matched: Vec<Vec<String>> = batch
            .par_iter()
            .map(|raw| filter.matches(&String::from_utf8_lossy(raw)))
            .collect();
        for (raw, m) in batch.iter().zip(&matched) {
            stats.add(m);
            if m.is_empty() {
                kept.write_all(raw)?;
            }
        }
    }
    kept.flush()?;
    Ok(stats.finish())
}
