//! Word-vector tables, averaged embeddings and id-aligned embedding matrices.

mod format;

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Token};
use crate::error::{Error, Result};

pub use format::{load_embeddings, read_embeddings, save_embeddings, write_embeddings};

/// Dense word vectors keyed by lowercased token.
#[derive(Debug, Clone)]
pub struct WordVectorTable {
    dim: usize,
    index: HashMap<String, usize>,
    data: Vec<f32>,
}

impl WordVectorTable {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "word vectors need a positive dimension");
        Self {
            dim,
            index: HashMap::new(),
            data: Vec::new(),
        }
    }

    /// Inserts a vector unless the (lowercased) token is already present.
    /// Returns whether the entry was added.
    pub fn insert(&mut self, token: &str, vector: &[f32]) -> Result<bool> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: vector.len(),
            });
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite component in vector for {token:?}"
            )));
        }
        let key = token.to_lowercase();
        if self.index.contains_key(&key) {
            return Ok(false);
        }
        self.index.insert(key, self.index.len());
        self.data.extend_from_slice(vector);
        Ok(true)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn get(&self, normalized: &str) -> Option<&[f32]> {
        self.index
            .get(normalized)
            .map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    /// Returns a copy with every vector multiplied by `factor`.
    pub fn scaled(&self, factor: f32) -> Self {
        Self {
            dim: self.dim,
            index: self.index.clone(),
            data: self.data.iter().map(|x| x * factor).collect(),
        }
    }

    /// Reads the textual `count dim` / `token v1 .. vdim` format.
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = match lines.next() {
            Some(line) => line?,
            None => return Err(Error::parse(1, "missing header")),
        };
        let mut parts = header.split_whitespace();
        let parse_usize = |s: Option<&str>, what: &str| -> Result<usize> {
            s.and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::parse(1, format!("header: invalid {what}")))
        };
        let _count = parse_usize(parts.next(), "count")?;
        let dim = parse_usize(parts.next(), "dim")?;
        if dim == 0 {
            return Err(Error::parse(1, "header: dim must be positive"));
        }
        let mut table = Self::new(dim);
        let mut buf = Vec::with_capacity(dim);
        for (k, line) in lines.enumerate() {
            let line_no = k + 2;
            let line = line?;
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split(' ').filter(|f| !f.is_empty());
            let token = fields.next().unwrap();
            buf.clear();
            for f in fields {
                let v: f32 = f
                    .parse()
                    .map_err(|_| Error::parse(line_no, format!("unparsable float {f:?}")))?;
                buf.push(v);
            }
            if buf.len() != dim {
                return Err(Error::parse(
                    line_no,
                    format!("expected {dim} components, got {}", buf.len()),
                ));
            }
            table
                .insert(token, &buf)
                .map_err(|e| Error::parse(line_no, e.to_string()))?;
        }
        Ok(table)
    }

    /// Writes the textual format in insertion order.
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        let mut tokens: Vec<(&usize, &String)> = self.index.iter().map(|(t, i)| (i, t)).collect();
        tokens.sort_unstable();
        writeln!(out, "{} {}", self.len(), self.dim)?;
        for (&i, token) in tokens {
            write!(out, "{token}")?;
            for x in &self.data[i * self.dim..(i + 1) * self.dim] {
                write!(out, " {x}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

pub fn load_word_vectors(path: &Path) -> Result<WordVectorTable> {
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    WordVectorTable::read(BufReader::new(file))
}

/// Mean of the in-vocabulary token vectors; the zero vector when every token
/// is out of vocabulary.
pub fn embed_avg<'a>(
    tokens: impl IntoIterator<Item = &'a Token>,
    table: &WordVectorTable,
) -> Vec<f32> {
    let mut sum = vec![0f64; table.dim()];
    let mut n = 0usize;
    for t in tokens {
        if let Some(v) = table.get(&t.normalized) {
            for (s, x) in sum.iter_mut().zip(v) {
                *s += f64::from(*x);
            }
            n += 1;
        }
    }
    if n == 0 {
        return vec![0.0; table.dim()];
    }
    sum.into_iter().map(|s| (s / n as f64) as f32).collect()
}

pub fn l2_norm(v: &[f32]) -> f64 {
    v.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt()
}

/// Scales `v` to unit length in place; zero vectors are left untouched.
pub fn normalize_in_place(v: &mut [f32]) {
    let n = l2_norm(v);
    if n > 0.0 {
        for x in v.iter_mut() {
            *x = (f64::from(*x) / n) as f32;
        }
    }
}

pub fn is_zero(v: &[f32]) -> bool {
    v.iter().all(|&x| x == 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    #[serde(alias = "doc")]
    Document,
    #[serde(alias = "sent")]
    Sentence,
}

/// Row-major matrix of unit embeddings aligned with `unit_ids`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    unit_ids: Vec<String>,
    dim: usize,
    data: Vec<f32>,
    unit_normalized: bool,
    index: HashMap<String, usize>,
}

impl EmbeddingMatrix {
    pub fn new(unit_ids: Vec<String>, dim: usize, data: Vec<f32>, unit_normalized: bool) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("embedding dim must be positive".into()));
        }
        if data.len() != unit_ids.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: unit_ids.len() * dim,
                actual: data.len(),
            });
        }
        let mut index = HashMap::with_capacity(unit_ids.len());
        for (i, id) in unit_ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::DuplicateUnit(id.clone()));
            }
        }
        let mut m = Self {
            unit_ids,
            dim,
            data,
            unit_normalized: false,
            index,
        };
        if unit_normalized {
            m.normalize();
        }
        Ok(m)
    }

    pub fn from_rows(unit_ids: Vec<String>, rows: Vec<Vec<f32>>, normalize: bool) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: bad.len(),
            });
        }
        Self::new(unit_ids, dim, rows.concat(), normalize)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.unit_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unit_ids.is_empty()
    }

    pub fn unit_ids(&self) -> &[String] {
        &self.unit_ids
    }

    pub fn unit_normalized(&self) -> bool {
        self.unit_normalized
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn position(&self, unit_id: &str) -> Option<usize> {
        self.index.get(unit_id).copied()
    }

    pub fn get(&self, unit_id: &str) -> Option<&[f32]> {
        self.position(unit_id).map(|i| self.row(i))
    }

    pub(crate) fn raw_data(&self) -> &[f32] {
        &self.data
    }

    /// L2-normalizes every non-zero row. Idempotent.
    pub fn normalize(&mut self) {
        if self.unit_normalized {
            return;
        }
        self.data
            .par_chunks_exact_mut(self.dim)
            .for_each(normalize_in_place);
        self.unit_normalized = true;
    }

    /// Re-selects rows in the order of `unit_ids`; errors on the first id
    /// not present.
    pub fn select(&self, unit_ids: &[String]) -> Result<Self> {
        let mut data = Vec::with_capacity(unit_ids.len() * self.dim);
        for id in unit_ids {
            let row = self.get(id).ok_or_else(|| Error::MissingUnit(id.clone()))?;
            data.extend_from_slice(row);
        }
        let mut m = Self::new(unit_ids.to_vec(), self.dim, data, false)?;
        m.unit_normalized = self.unit_normalized;
        Ok(m)
    }
}

/// How unit vectors are obtained.
#[derive(Debug, Clone)]
pub enum EmbeddingStrategy<'a> {
    /// Mean of word vectors.
    Avg(&'a WordVectorTable),
    /// Rows looked up by unit id in an externally computed matrix.
    Precomputed(&'a EmbeddingMatrix),
}

pub fn unit_ids(docs: &[Document], level: Level) -> Vec<String> {
    match level {
        Level::Document => docs.iter().map(|d| d.doc_id.clone()).collect(),
        Level::Sentence => docs
            .iter()
            .flat_map(|d| d.sentences.iter().map(|s| s.unit_id()))
            .collect(),
    }
}

/// Embeds every unit of `docs` at `level`, in corpus order.
pub fn embed_corpus(
    docs: &[Document],
    level: Level,
    strategy: &EmbeddingStrategy<'_>,
    normalize: bool,
) -> Result<EmbeddingMatrix> {
    let ids = unit_ids(docs, level);
    match strategy {
        EmbeddingStrategy::Precomputed(m) => {
            let mut out = m.select(&ids)?;
            if normalize {
                out.normalize();
            }
            Ok(out)
        }
        EmbeddingStrategy::Avg(table) => {
            let rows: Vec<Vec<f32>> = match level {
                Level::Document => docs
                    .par_iter()
                    .map(|d| embed_avg(d.tokens(), table))
                    .collect(),
                Level::Sentence => {
                    let sents: Vec<_> = docs.iter().flat_map(|d| d.sentences.iter()).collect();
                    sents
                        .par_iter()
                        .map(|s| embed_avg(&s.tokens, table))
                        .collect()
                }
            };
            EmbeddingMatrix::new(ids, table.dim(), rows.concat(), normalize)
        }
    }
}
