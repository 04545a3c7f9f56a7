//! Line-oriented N-Triples reader.
//!
//! Accepts the subset of N-Triples needed for knowledge-graph dumps: IRIs,
//! blank-node labels and literals with optional language tag or datatype.
//! Lines that do not parse are counted and skipped; large dumps are rarely
//! perfectly clean.

use std::io::BufRead;

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Term {
    Iri(String),
    Blank(String),
    Literal {
        value: String,
        lang: Option<String>,
        datatype: Option<String>,
    },
}

impl Term {
    /// Identifier for resource terms (IRIs and blank nodes).
    pub fn as_resource(&self) -> Option<&str> {
        match self {
            Term::Iri(s) | Term::Blank(s) => Some(s),
            Term::Literal { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Triple {
    pub subject: Term,
    pub predicate: String,
    pub object: Term,
    pub line: usize,
}

/// Up to this many malformed lines are kept verbatim for diagnostics; the
/// rest are only counted.
const MAX_KEPT_WARNINGS: usize = 32;

#[derive(Debug, Clone, Default)]
pub struct ParseWarnings {
    pub count: usize,
    pub first: Vec<(usize, String)>,
}

impl ParseWarnings {
    fn push(&mut self, line: usize, message: String) {
        self.count += 1;
        if self.first.len() < MAX_KEPT_WARNINGS {
            self.first.push((line, message));
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct TripleSet {
    pub triples: Vec<Triple>,
    pub warnings: ParseWarnings,
}

impl TripleSet {
    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }
}

/// Streams triples out of a reader, skipping malformed lines.
pub struct NTriplesReader<R> {
    reader: R,
    buf: String,
    line: usize,
    warnings: ParseWarnings,
}

impl<R: BufRead> NTriplesReader<R> {
    pub fn new(reader: R) -> Self {
        NTriplesReader {
            reader,
            buf: String::new(),
            line: 0,
            warnings: ParseWarnings::default(),
        }
    }

    pub fn warnings(&self) -> &ParseWarnings {
        &self.warnings
    }

    pub fn into_warnings(self) -> ParseWarnings {
        self.warnings
    }

    /// Next well-formed triple, `Ok(None)` at end of input.
    pub fn next_triple(&mut self) -> Result<Option<Triple>> {
        loop {
            self.buf.clear();
            if self.reader.read_line(&mut self.buf)? == 0 {
                return Ok(None);
            }
            self.line += 1;
            match parse_line(&self.buf) {
                Ok(Some((subject, predicate, object))) => {
                    return Ok(Some(Triple {
                        subject,
                        predicate,
                        object,
                        line: self.line,
                    }))
                }
                Ok(None) => {}
                Err(msg) => {
                    log::debug!("line {}: {msg}", self.line);
                    self.warnings.push(self.line, msg);
                }
            }
        }
    }
}

pub fn parse_ntriples<R: BufRead>(reader: R) -> Result<TripleSet> {
    let mut r = NTriplesReader::new(reader);
    let mut triples = Vec::new();
    while let Some(t) = r.next_triple()? {
        triples.push(t);
    }
    let warnings = r.into_warnings();
    if warnings.count > 0 {
        log::warn!("skipped {} malformed N-Triples line(s)", warnings.count);
    }
    Ok(TripleSet { triples, warnings })
}

/// Parses one line. `Ok(None)` for blank and comment lines.
pub fn parse_line(line: &str) -> std::result::Result<Option<(Term, String, Term)>, String> {
    let mut cur = Cursor { s: line.trim(), pos: 0 };
    if cur.rest().is_empty() || cur.rest().starts_with('#') {
        return Ok(None);
    }
    let subject = cur.resource()?;
    cur.skip_ws();
    let predicate = match cur.peek() {
        Some('<') => cur.iri()?,
        _ => return Err("predicate must be an IRI".into()),
    };
    cur.skip_ws();
    let object = match cur.peek() {
        Some('"') => cur.literal()?,
        _ => cur.resource()?,
    };
    cur.skip_ws();
    if cur.peek() != Some('.') {
        return Err("missing terminating '.'".into());
    }
    cur.pos += 1;
    cur.skip_ws();
    if !(cur.rest().is_empty() || cur.rest().starts_with('#')) {
        return Err(format!("trailing content {:?}", cur.rest()));
    }
    Ok(Some((subject, predicate, object)))
}

struct Cursor<'a> {
    s: &'a str,
    pos: usize,
}

impl Cursor<'_> {
    fn rest(&self) -> &str {
        &self.s[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn skip_ws(&mut self) {
        let rest = self.rest();
        self.pos += rest.len() - rest.trim_start_matches([' ', '\t']).len();
    }

    fn resource(&mut self) -> std::result::Result<Term, String> {
        match self.peek() {
            Some('<') => self.iri().map(Term::Iri),
            Some('_') if self.rest().starts_with("_:") => {
                self.pos += 2;
                let label = self.take_while(|c| !c.is_whitespace());
                if label.is_empty() {
                    return Err("empty blank node label".into());
                }
                Ok(Term::Blank(label.to_owned()))
            }
            _ => Err(format!("expected IRI or blank node at {:?}", self.rest())),
        }
    }

    fn take_while(&mut self, f: impl Fn(char) -> bool) -> &str {
        let rest = &self.s[self.pos..];
        let end = rest.find(|c| !f(c)).unwrap_or(rest.len());
        self.pos += end;
        &rest[..end]
    }

    fn iri(&mut self) -> std::result::Result<String, String> {
        debug_assert_eq!(self.peek(), Some('<'));
        self.pos += 1;
        let rest = self.rest();
        let end = rest.find('>').ok_or("unterminated IRI")?;
        let iri = rest[..end].to_owned();
        if iri.is_empty() || iri.contains([' ', '<', '"']) {
            return Err(format!("invalid IRI <{iri}>"));
        }
        self.pos += end + 1;
        Ok(iri)
    }

    fn literal(&mut self) -> std::result::Result<Term, String> {
        self.pos += 1;
        let mut value = String::new();
        let mut chars = self.rest().char_indices();
        let consumed = loop {
            let Some((i, c)) = chars.next() else {
                return Err("unterminated literal".into());
            };
            match c {
                '"' => break i + 1,
                '\\' => {
                    let (_, e) = chars.next().ok_or("dangling escape")?;
                    match e {
                        't' => value.push('\t'),
                        'b' => value.push('\u{8}'),
                        'n' => value.push('\n'),
                        'r' => value.push('\r'),
                        'f' => value.push('\u{c}'),
                        '"' => value.push('"'),
                        '\'' => value.push('\''),
                        '\\' => value.push('\\'),
                        'u' | 'U' => {
                            let len = if e == 'u' { 4 } else { 8 };
                            let hex: String = chars.by_ref().take(len).map(|(_, c)| c).collect();
                            let code = (hex.len() == len)
                                .then(|| u32::from_str_radix(&hex, 16).ok())
                                .flatten()
                                .and_then(char::from_u32)
                                .ok_or_else(|| format!("bad unicode escape \\{e}{hex}"))?;
                            value.push(code);
                        }
                        other => return Err(format!("unknown escape \\{other}")),
                    }
                }
                c => value.push(c),
            }
        };
        self.pos += consumed;
        let mut lang = None;
        let mut datatype = None;
        if self.peek() == Some('@') {
            self.pos += 1;
            let tag = self.take_while(|c| c.is_ascii_alphanumeric() || c == '-');
            if tag.is_empty() {
                return Err("empty language tag".into());
            }
            lang = Some(tag.to_owned());
        } else if self.rest().starts_with("^^") {
            self.pos += 2;
            if self.peek() != Some('<') {
                return Err("datatype must be an IRI".into());
            }
            datatype = Some(self.iri()?);
        }
        Ok(Term::Literal {
            value,
            lang,
            datatype,
        })
    }
}
