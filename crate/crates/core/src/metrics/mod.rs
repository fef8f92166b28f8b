//! Pairwise text similarity: embedding cosine, unigram overlap, BM25, and
//! word mover's distances mapped onto a similarity scale.

mod bm25;
pub mod transport;
mod wmd;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{content_tokens, Token};
use crate::embeddings::WordVectorTable;
use crate::error::{Error, Result};

pub use bm25::{bm25, Bm25Stats, DEFAULT_B, DEFAULT_K1};
pub use wmd::{euclidean, rwmd, rwmd_bags, wmd, wmd_bags, WordBag};

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine(u: &[f32], v: &[f32]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    Ok(cosine_unchecked(u, v))
}

pub(crate) fn cosine_unchecked(u: &[f32], v: &[f32]) -> f64 {
    let (mut dot, mut nu, mut nv) = (0f64, 0f64, 0f64);
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (f64::from(a), f64::from(b));
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    (dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0)
}

/// Fraction of the unique target tokens `y` that also occur in `x`.
pub fn unigram_overlap<S: AsRef<str>>(x: &[S], y: &[S]) -> f64 {
    let ys: HashSet<&str> = y.iter().map(AsRef::as_ref).collect();
    if ys.is_empty() {
        return 0.0;
    }
    let xs: HashSet<&str> = x.iter().map(AsRef::as_ref).collect();
    ys.intersection(&xs).count() as f64 / ys.len() as f64
}

/// Maps a distance onto `(0, 1]` as `1 / (1 + d)`.
pub fn to_similarity(distance: f64) -> Result<f64> {
    if distance.is_nan() || distance < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "distance must be non-negative, got {distance}"
        )));
    }
    Ok(1.0 / (1.0 + distance))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScorerKind {
    Cosine,
    Overlap,
    Bm25,
    Wmd,
    Rwmd,
}

impl ScorerKind {
    pub fn needs_word_vectors(self) -> bool {
        matches!(self, ScorerKind::Wmd | ScorerKind::Rwmd)
    }

    pub fn needs_embeddings(self) -> bool {
        self == ScorerKind::Cosine
    }

    /// Closed range of attainable similarity values.
    pub fn range(self) -> (f64, f64) {
        match self {
            ScorerKind::Cosine => (-1.0, 1.0),
            ScorerKind::Overlap => (0.0, 1.0),
            ScorerKind::Bm25 => (0.0, f64::INFINITY),
            ScorerKind::Wmd | ScorerKind::Rwmd => (0.0, 1.0),
        }
    }
}

impl fmt::Display for ScorerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ScorerKind::Cosine => "cosine",
            ScorerKind::Overlap => "overlap",
            ScorerKind::Bm25 => "bm25",
            ScorerKind::Wmd => "wmd",
            ScorerKind::Rwmd => "rwmd",
        };
        f.write_str(s)
    }
}

impl FromStr for ScorerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cosine" => Ok(ScorerKind::Cosine),
            "overlap" => Ok(ScorerKind::Overlap),
            "bm25" => Ok(ScorerKind::Bm25),
            "wmd" => Ok(ScorerKind::Wmd),
            "rwmd" => Ok(ScorerKind::Rwmd),
            other => Err(Error::InvalidArgument(format!("unknown scorer {other:?}"))),
        }
    }
}

/// A configured similarity function over text units. Distances (WMD, RWMD)
/// are reported through [`to_similarity`], so larger is always more similar.
#[derive(Debug, Clone)]
pub enum Scorer {
    Cosine,
    Overlap,
    Bm25(Arc<Bm25Stats>),
    Wmd(Arc<WordVectorTable>),
    Rwmd(Arc<WordVectorTable>),
}

/// Per-unit data a scorer needs, computed once and reused across pairs.
#[derive(Debug, Clone)]
pub struct Features<'a> {
    pub embedding: Option<&'a [f32]>,
    pub content: Vec<String>,
    pub bag: Option<WordBag>,
}

impl Scorer {
    pub fn kind(&self) -> ScorerKind {
        match self {
            Scorer::Cosine => ScorerKind::Cosine,
            Scorer::Overlap => ScorerKind::Overlap,
            Scorer::Bm25(_) => ScorerKind::Bm25,
            Scorer::Wmd(_) => ScorerKind::Wmd,
            Scorer::Rwmd(_) => ScorerKind::Rwmd,
        }
    }

    pub fn prepare<'a>(&self, tokens: &[Token], embedding: Option<&'a [f32]>) -> Features<'a> {
        let content = match self {
            Scorer::Cosine => Vec::new(),
            _ => content_tokens(tokens),
        };
        let bag = match self {
            Scorer::Wmd(t) | Scorer::Rwmd(t) => WordBag::new(&content, t).ok(),
            _ => None,
        };
        Features {
            embedding,
            content,
            bag,
        }
    }

    /// Similarity of `source` to `target`. Unembeddable units are an error
    /// for the distance-based scorers and score 0 under cosine.
    pub fn score(&self, source: &Features<'_>, target: &Features<'_>) -> Result<f64> {
        match self {
            Scorer::Cosine => match (source.embedding, target.embedding) {
                (Some(u), Some(v)) => cosine(u, v),
                _ => Ok(0.0),
            },
            Scorer::Overlap => Ok(unigram_overlap(&source.content, &target.content)),
            Scorer::Bm25(stats) => Ok(bm25(&source.content, &target.content, stats)),
            Scorer::Wmd(_) | Scorer::Rwmd(_) => {
                let (Some(x), Some(y)) = (&source.bag, &target.bag) else {
                    return Err(Error::Unembeddable);
                };
                let d = match self {
                    Scorer::Wmd(_) => wmd_bags(x, y),
                    _ => rwmd_bags(x, y),
                };
                to_similarity(d)
            }
        }
    }

    /// Convenience wrapper preparing both sides on the fly.
    pub fn score_tokens(
        &self,
        source: (&[Token], Option<&[f32]>),
        target: (&[Token], Option<&[f32]>),
    ) -> Result<f64> {
        let a = self.prepare(source.0, source.1);
        let b = self.prepare(target.0, target.1);
        self.score(&a, &b)
    }
}
