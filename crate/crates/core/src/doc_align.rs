//! Document alignment: K nearest target documents per source document,
//! thresholded on cosine similarity.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ann_index::AnnIndex;
use crate::embeddings::{is_zero, EmbeddingMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocPair {
    pub source_id: String,
    pub target_id: String,
    pub similarity: f64,
}

/// For each non-zero source row, queries `k` neighbours and keeps those with
/// similarity `>= theta_d`. Output is ordered by source row, then similarity
/// descending, then target id.
pub fn align_documents(
    src: &EmbeddingMatrix,
    tgt_index: &AnnIndex,
    k: usize,
    theta_d: f64,
) -> Result<Vec<DocPair>> {
    if src.dim() != tgt_index.dim() {
        return Err(Error::DimensionMismatch {
            expected: tgt_index.dim(),
            actual: src.dim(),
        });
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    let per_source: Vec<Vec<DocPair>> = (0..src.len())
        .into_par_iter()
        .map(|i| {
            let row = src.row(i);
            if is_zero(row) {
                return Ok(Vec::new());
            }
            let hits = tgt_index.query(row, k)?;
            Ok(hits
                .into_iter()
                .filter(|n| n.similarity >= theta_d)
                .map(|n| DocPair {
                    source_id: src.unit_ids()[i].clone(),
                    target_id: n.unit_id,
                    similarity: n.similarity,
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(per_source.into_iter().flatten().collect())
}

/// Writes `source_id<TAB>target_id<TAB>similarity` lines.
pub fn write_doc_pairs<W: Write>(pairs: &[DocPair], mut out: W) -> Result<()> {
    for p in pairs {
        writeln!(out, "{}\t{}\t{}", p.source_id, p.target_id, p.similarity)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_doc_pairs<R: BufRead>(input: R) -> Result<Vec<DocPair>> {
    let mut out = Vec::new();
    for (k, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut f = line.split('\t');
        let (Some(s), Some(t)) = (f.next(), f.next()) else {
            return Err(Error::parse(k + 1, "expected source_id<TAB>target_id[<TAB>similarity]"));
        };
        let similarity = match f.next() {
            Some(v) => v
                .trim()
                .parse()
                .map_err(|_| Error::parse(k + 1, format!("bad similarity {v:?}")))?,
            None => f64::NAN,
        };
        out.push(DocPair {
            source_id: s.to_string(),
            target_id: t.to_string(),
            similarity,
        });
    }
    Ok(out)
}
