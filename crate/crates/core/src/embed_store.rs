//! Embedding matrices and the word2vec text format.
//!
//! An [`EmbeddingMatrix`] is an ordered vocabulary plus one dense row per
//! token. The same type holds both the text-trained semantic space and the
//! graph-trained domain space. Tokens shared by two matrices are *anchors*.
//!
//! The interchange format is word2vec text:
//!
//! ```text
//! <count> <dim>
//! <token> <v1> ... <vdim>
//! ```
//!
//! Values are written with Rust's shortest round-trip float formatting, so
//! reading a written file reproduces every value bit for bit.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use log::warn;

use crate::error::{Error, Result};
use crate::io::{create_writer, open_reader};

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingMatrix {
    /// Builds a matrix from tokens and a row-major buffer of `tokens.len() * dim` values.
    pub fn new(tokens: Vec<String>, data: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("embedding dimension must be >= 1".into()));
        }
        if data.len() != tokens.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: tokens.len() * dim,
                actual: data.len(),
            });
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::InvalidInput(format!("duplicate token {t:?}")));
            }
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value in row of token {:?}",
                tokens[pos / dim]
            )));
        }
        Ok(EmbeddingMatrix {
            tokens,
            index,
            dim,
            data,
        })
    }

    pub fn empty(dim: usize) -> Result<Self> {
        Self::new(Vec::new(), Vec::new(), dim)
    }

    /// Builds a matrix from `(token, vector)` pairs; all vectors must share one length.
    pub fn from_rows<I, S>(dim: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let mut tokens = Vec::new();
        let mut data = Vec::new();
        for (token, row) in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
            tokens.push(token.into());
            data.extend_from_slice(&row);
        }
        Self::new(tokens, data, dim)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token(&self, row: usize) -> &str {
        &self.tokens[row]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.dim..(row + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.index_of(token).map(|i| self.row(i))
    }

    /// Row-major view of all values.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Keeps the rows whose indices are listed, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut tokens = Vec::with_capacity(rows.len());
        let mut data = Vec::with_capacity(rows.len() * self.dim);
        for &r in rows {
            tokens.push(self.tokens[r].clone());
            data.extend_from_slice(self.row(r));
        }
        Self::new(tokens, data, self.dim).expect("subset of a valid matrix is valid")
    }

    pub fn read_from<R: BufRead>(reader: R, source: &str) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let (count, dim) = loop {
            let Some((no, line)) = lines.next() else {
                return Err(Error::format(source, 1, "missing \"<count> <dim>\" header"));
            };
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            break parse_header(&line).ok_or_else(|| {
                Error::format(source, no + 1, format!("malformed header {line:?}"))
            })?;
        };
        if dim == 0 {
            return Err(Error::format(source, 1, "declared dimension must be >= 1"));
        }

        let mut tokens = Vec::with_capacity(count);
        let mut data = Vec::with_capacity(count * dim);
        let mut seen: HashMap<String, usize> = HashMap::with_capacity(count);
        for (no, line) in lines {
            let line = line?;
            let line_no = no + 1;
            let mut fields = line.split_whitespace();
            let Some(token) = fields.next() else {
                continue;
            };
            if tokens.len() == count {
                return Err(Error::format(
                    source,
                    line_no,
                    format!("more rows than the declared count {count}"),
                ));
            }
            let start = data.len();
            for field in fields {
                let v: f64 = field.parse().map_err(|_| {
                    Error::format(source, line_no, format!("cannot parse value {field:?}"))
                })?;
                if !v.is_finite() {
                    return Err(Error::format(
                        source,
                        line_no,
                        format!("non-finite value {field:?}"),
                    ));
                }
                data.push(v);
            }
            let arity = data.len() - start;
            if arity != dim {
                return Err(Error::format(
                    source,
                    line_no,
                    format!("row arity {arity} != declared dim {dim}"),
                ));
            }
            if let Some(prev) = seen.insert(token.to_owned(), line_no) {
                return Err(Error::format(
                    source,
                    line_no,
                    format!("duplicate token {token:?} (first seen on line {prev})"),
                ));
            }
            tokens.push(token.to_owned());
        }
        if tokens.len() != count {
            return Err(Error::format(
                source,
                tokens.len() + 1,
                format!("declared {count} rows but found {}", tokens.len()),
            ));
        }
        Self::new(tokens, data, dim)
    }

    pub fn write_to<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        writeln!(writer, "{} {}", self.len(), self.dim)?;
        for (token, row) in self.tokens.iter().zip(self.rows()) {
            writer.write_all(token.as_bytes())?;
            for v in row {
                write!(writer, " {v}")?;
            }
            writeln!(writer)?;
        }
        writer.flush()
    }
}

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let mut it = line.split_whitespace();
    let count = it.next()?.parse().ok()?;
    let dim = it.next()?.parse().ok()?;
    it.next().is_none().then_some((count, dim))
}

/// Reads a word2vec text file (`.gz` is decompressed transparently).
pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    EmbeddingMatrix::read_from(open_reader(path)?, &path.display().to_string())
}

pub fn write_embeddings(m: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let writer = create_writer(path)?;
    m.write_to(writer).map_err(|e| Error::io(path, e))
}

/// Maps a human-readable label onto the vocabulary token convention:
/// lower-case, with every space replaced by a hyphen.
pub fn normalize_label(raw: &str) -> String {
    raw.to_lowercase().replace(' ', "-")
}

/// Pairs of `(semantic_row, domain_row)` for tokens present in both matrices,
/// ordered by semantic row.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnchorMap {
    pub pairs: Vec<(usize, usize)>,
}

impl AnchorMap {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Domain-row-indexed lookup of the matching semantic row.
    pub fn semantic_for_domain(&self, domain_len: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; domain_len];
        for &(s, d) in &self.pairs {
            out[d] = Some(s);
        }
        out
    }
}

pub fn find_anchors(semantic: &EmbeddingMatrix, domain: &EmbeddingMatrix) -> AnchorMap {
    let pairs = semantic
        .tokens()
        .iter()
        .enumerate()
        .filter_map(|(s, t)| domain.index_of(t).map(|d| (s, d)))
        .collect();
    AnchorMap { pairs }
}

/// Appends rows of `imputed` whose tokens are absent from `base`.
///
/// Base rows are copied unchanged; on a token collision the base row wins.
pub fn merge_embeddings(base: &EmbeddingMatrix, imputed: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
    if imputed.dim() != base.dim() && !imputed.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: base.dim(),
            actual: imputed.dim(),
        });
    }
    let mut tokens = base.tokens.clone();
    let mut data = base.data.clone();
    let mut collisions = 0usize;
    for (token, row) in imputed.tokens().iter().zip(imputed.rows()) {
        if base.contains(token) {
            collisions += 1;
            log::debug!("merge: keeping base vector for {token:?}");
            continue;
        }
        tokens.push(token.clone());
        data.extend_from_slice(row);
    }
    if collisions > 0 {
        warn!("merge: {collisions} imputed token(s) already present in base; base vectors kept");
    }
    EmbeddingMatrix::new(tokens, data, base.dim())
}
