//! Evaluation against annotated alignments: F1max threshold sweeps over
//! sentence, document and joint (hierarchical vs. global) alignment.

mod data;
mod sweep;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ann_index::{AnnIndex, AnnParams};
use crate::corpus::{Corpus, Document, Token};
use crate::doc_align::align_documents;
use crate::embeddings::{embed_corpus, is_zero, EmbeddingMatrix, EmbeddingStrategy, Level};
use crate::error::{Error, Result};
use crate::metrics::{cosine_unchecked, Features, Scorer};
use crate::sent_align::{extract_nn_pairs, sentence_sim_matrix, SentenceEmbeddings, SimMatrix};

pub use data::{
    adapt_gold_tsv, positive_set, read_gold_jsonl, write_gold_jsonl, EvalDataset, GoldPair, Label, PairKey,
    DOC_PAIRS_FILE, LABELS_FILE, NOISE_SOURCE_FILE, NOISE_TARGET_FILE, SOURCE_FILE, TARGET_FILE,
};
pub use sweep::{f1_from_counts, f1max_sweep, EvalReport};

use sweep::sweep_sorted;

/// Indices of the `k` largest values, ties to the lower index.
fn top_k(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

fn embed_opt(
    strategy: Option<&EmbeddingStrategy<'_>>,
    docs: &[Document],
    level: Level,
) -> Result<Option<EmbeddingMatrix>> {
    strategy.map(|s| embed_corpus(docs, level, s, true)).transpose()
}

/// Configuration of the sentence-alignment evaluation.
pub struct SentEvalConfig<'a> {
    pub scorer: Scorer,
    /// Sentence embeddings, required by the cosine scorer.
    pub embeddings: Option<EmbeddingStrategy<'a>>,
    /// Candidates per document pair: the row/column top-`k` cells, or every
    /// cell when `None`.
    pub k: Option<usize>,
    pub include_partial: bool,
}

/// Scores sentence pairs inside every gold document pair and sweeps the
/// sentence threshold.
pub fn eval_sentence_alignment(ds: &EvalDataset, cfg: &SentEvalConfig<'_>) -> Result<EvalReport> {
    let gold = ds.positives(cfg.include_partial);
    let pairs: Vec<(&Document, &Document)> = ds
        .doc_pairs
        .iter()
        .map(|(s, t)| {
            Ok((
                ds.source.document(s).ok_or_else(|| Error::MissingUnit(s.clone()))?,
                ds.target.document(t).ok_or_else(|| Error::MissingUnit(t.clone()))?,
            ))
        })
        .collect::<Result<_>>()?;
    let src_emb = embed_opt(cfg.embeddings.as_ref(), &ds.source.documents, Level::Sentence)?;
    let tgt_emb = embed_opt(cfg.embeddings.as_ref(), &ds.target.documents, Level::Sentence)?;
    let emb = SentenceEmbeddings {
        source: src_emb.as_ref(),
        target: tgt_emb.as_ref(),
    };
    let start = Instant::now();
    let per_pair: Vec<Vec<(PairKey, f64)>> = pairs
        .par_iter()
        .map(|(s, t)| {
            let p = sentence_sim_matrix(s, t, &cfg.scorer, emb)?;
            Ok(candidates(&p, cfg.k))
        })
        .collect::<Result<_>>()?;
    let elapsed = start.elapsed().as_secs_f64();
    let scored: Vec<(PairKey, f64)> = per_pair.into_iter().flatten().collect();
    let mut report = f1max_sweep(&scored, &gold)?;
    report.task = "sentence".into();
    let units: usize = pairs.iter().map(|(s, t)| s.sentences.len() + t.sentences.len()).sum();
    report.set_timing(units, elapsed);
    Ok(report)
}

fn candidates(p: &SimMatrix, k: Option<usize>) -> Vec<(PairKey, f64)> {
    let (n, m) = p.shape();
    let cell = |i: usize, j: usize, s: f64| ((p.source_ids[i].clone(), p.target_ids[j].clone()), s);
    match k {
        Some(k) => extract_nn_pairs(p, k, f64::NEG_INFINITY)
            .into_iter()
            .filter(|sp| sp.score.is_finite())
            .map(|sp| cell(sp.source, sp.target, sp.score))
            .collect(),
        None => (0..n)
            .flat_map(|i| (0..m).map(move |j| (i, j)))
            .map(|(i, j)| cell(i, j, p.get(i, j)))
            .collect(),
    }
}

/// How documents are compared in the document-alignment evaluation.
pub enum DocScoring<'a> {
    /// Cosine between document embeddings.
    Embeddings(EmbeddingStrategy<'a>),
    /// A word-based scorer applied to the full token sequence of each
    /// document.
    Words(Scorer),
}

pub struct DocEvalConfig<'a> {
    pub scoring: DocScoring<'a>,
    /// Target documents kept per source document; all when `None`.
    pub k: Option<usize>,
    pub noise: usize,
    pub seed: u64,
}

/// Mixes `noise` sampled documents into each side, scores every cross pair
/// and sweeps the document threshold against the gold document pairs.
pub fn eval_document_alignment(ds: &EvalDataset, cfg: &DocEvalConfig<'_>) -> Result<EvalReport> {
    let gold = ds.gold_doc_pairs();
    let (src, tgt) = ds.with_noise(cfg.noise, cfg.seed)?;
    let start = Instant::now();
    let rows: Vec<Vec<f64>> = match &cfg.scoring {
        DocScoring::Embeddings(strategy) => {
            let a = embed_corpus(&src.documents, Level::Document, strategy, true)?;
            let b = embed_corpus(&tgt.documents, Level::Document, strategy, true)?;
            (0..a.len())
                .into_par_iter()
                .map(|i| (0..b.len()).map(|j| cosine_unchecked(a.row(i), b.row(j))).collect())
                .collect()
        }
        DocScoring::Words(scorer) => {
            let doc_tokens = |d: &Document| d.tokens().cloned().collect::<Vec<Token>>();
            let prep = |c: &Corpus| -> Vec<Features<'static>> {
                c.documents
                    .par_iter()
                    .map(|d| scorer.prepare(&doc_tokens(d), None))
                    .collect()
            };
            let (a, b) = (prep(&src), prep(&tgt));
            a.par_iter()
                .map(|x| b.iter().map(|y| scorer.score(x, y).unwrap_or(0.0)).collect())
                .collect()
        }
    };
    let elapsed = start.elapsed().as_secs_f64();
    let mut scored = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let keep = match cfg.k {
            Some(k) => top_k(row, k),
            None => (0..row.len()).collect(),
        };
        for j in keep {
            let key = (src.documents[i].doc_id.clone(), tgt.documents[j].doc_id.clone());
            scored.push((key, row[j]));
        }
    }
    let mut report = f1max_sweep(&scored, &gold)?;
    report.task = "document".into();
    report.seed = Some(cfg.seed);
    report.set_timing(src.len() + tgt.len(), elapsed);
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointMode {
    /// Document alignment first, then sentence alignment inside the
    /// retrieved document pairs.
    Lha,
    /// Sentence nearest neighbours over the whole collection.
    Global,
}

impl fmt::Display for JointMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            JointMode::Lha => "lha",
            JointMode::Global => "global",
        })
    }
}

impl FromStr for JointMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lha" => Ok(JointMode::Lha),
            "global" => Ok(JointMode::Global),
            _ => Err(Error::InvalidArgument(format!("unknown joint mode {s:?}"))),
        }
    }
}

/// Re-scores the `top_n` cosine neighbours of every sentence with a second
/// scorer.
pub struct Rescore {
    pub scorer: Scorer,
    pub top_n: usize,
}

pub struct JointConfig<'a> {
    pub mode: JointMode,
    pub doc_embeddings: EmbeddingStrategy<'a>,
    pub sent_embeddings: EmbeddingStrategy<'a>,
    pub rescore: Option<Rescore>,
    pub k_doc: usize,
    pub k_sent: usize,
    pub ann: AnnParams,
    pub noise: usize,
    pub seed: u64,
    pub include_partial: bool,
}

impl<'a> JointConfig<'a> {
    pub fn new(mode: JointMode, doc: EmbeddingStrategy<'a>, sent: EmbeddingStrategy<'a>) -> Self {
        Self {
            mode,
            doc_embeddings: doc,
            sent_embeddings: sent,
            rescore: None,
            k_doc: 1,
            k_sent: 1,
            ann: AnnParams::default(),
            noise: 1000,
            seed: 0,
            include_partial: false,
        }
    }
}

/// Sentence candidates with the similarity of the document pair they came
/// from.
struct JointCandidate {
    key: PairKey,
    doc_sim: f64,
    score: f64,
}

/// Evaluates retrieval of gold sentence pairs from the noisy collection.
/// In `Lha` mode both the document and the sentence threshold are swept;
/// `Global` sweeps the sentence threshold only. Embedding time is excluded
/// from the reported wall clock.
pub fn eval_joint(ds: &EvalDataset, cfg: &JointConfig<'_>) -> Result<EvalReport> {
    if cfg.k_doc == 0 || cfg.k_sent == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    let gold = ds.positives(cfg.include_partial);
    if gold.is_empty() {
        return Err(Error::Empty("gold positive set is empty".into()));
    }
    let (src, tgt) = ds.with_noise(cfg.noise, cfg.seed)?;
    let src_sent = embed_corpus(&src.documents, Level::Sentence, &cfg.sent_embeddings, true)?;
    let tgt_sent = embed_corpus(&tgt.documents, Level::Sentence, &cfg.sent_embeddings, true)?;
    let mut report = match cfg.mode {
        JointMode::Lha => {
            let src_doc = embed_corpus(&src.documents, Level::Document, &cfg.doc_embeddings, true)?;
            let tgt_doc = embed_corpus(&tgt.documents, Level::Document, &cfg.doc_embeddings, true)?;
            let start = Instant::now();
            let cands = lha_candidates(&src, &tgt, &src_doc, &tgt_doc, &src_sent, &tgt_sent, cfg)?;
            let elapsed = start.elapsed().as_secs_f64();
            let mut r = sweep_two_level(&cands, &gold);
            r.set_timing(src_sent.len() + tgt_sent.len(), elapsed);
            r
        }
        JointMode::Global => {
            let start = Instant::now();
            let scored = global_candidates(&src, &tgt, &src_sent, &tgt_sent, cfg)?;
            let elapsed = start.elapsed().as_secs_f64();
            let mut r = f1max_sweep(&scored, &gold)?;
            r.set_timing(src_sent.len() + tgt_sent.len(), elapsed);
            r
        }
    };
    report.task = format!("joint-{}", cfg.mode);
    report.seed = Some(cfg.seed);
    Ok(report)
}

fn lha_candidates(
    src: &Corpus,
    tgt: &Corpus,
    src_doc: &EmbeddingMatrix,
    tgt_doc: &EmbeddingMatrix,
    src_sent: &EmbeddingMatrix,
    tgt_sent: &EmbeddingMatrix,
    cfg: &JointConfig<'_>,
) -> Result<Vec<JointCandidate>> {
    let index = AnnIndex::build(tgt_doc, cfg.ann)?;
    let doc_pairs = align_documents(src_doc, &index, cfg.k_doc, f64::NEG_INFINITY)?;
    let per_pair: Vec<Vec<JointCandidate>> = doc_pairs
        .par_iter()
        .map(|dp| {
            let s = src.document(&dp.source_id).ok_or_else(|| Error::MissingUnit(dp.source_id.clone()))?;
            let t = tgt.document(&dp.target_id).ok_or_else(|| Error::MissingUnit(dp.target_id.clone()))?;
            let emb = SentenceEmbeddings {
                source: Some(src_sent),
                target: Some(tgt_sent),
            };
            let mut p = sentence_sim_matrix(s, t, &Scorer::Cosine, emb)?;
            if let Some(r) = &cfg.rescore {
                p = rescore_matrix(&p, s, t, r);
            }
            Ok(candidates(&p, Some(cfg.k_sent))
                .into_iter()
                .map(|(key, score)| JointCandidate {
                    key,
                    doc_sim: dp.similarity,
                    score,
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(per_pair.into_iter().flatten().collect())
}

/// Replaces the cells among each row's and column's `top_n` cosine values
/// with the re-scoring similarity; all other cells become `-inf`.
fn rescore_matrix(p: &SimMatrix, s: &Document, t: &Document, r: &Rescore) -> SimMatrix {
    let (n, m) = p.shape();
    let vals = p.values();
    let mut keep = vec![false; n * m];
    for i in 0..n {
        for j in top_k(&vals[i * m..(i + 1) * m], r.top_n) {
            keep[i * m + j] = true;
        }
    }
    for j in 0..m {
        let col: Vec<f64> = (0..n).map(|i| vals[i * m + j]).collect();
        for i in top_k(&col, r.top_n) {
            keep[i * m + j] = true;
        }
    }
    let fs: Vec<_> = s.sentences.iter().map(|x| r.scorer.prepare(&x.tokens, None)).collect();
    let ft: Vec<_> = t.sentences.iter().map(|x| r.scorer.prepare(&x.tokens, None)).collect();
    let values = (0..n * m)
        .map(|c| {
            if keep[c] {
                r.scorer.score(&fs[c / m], &ft[c % m]).unwrap_or(0.0)
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    SimMatrix::from_values(p.source_ids.clone(), p.target_ids.clone(), values)
}

fn sweep_two_level(cands: &[JointCandidate], gold: &HashSet<PairKey>) -> EvalReport {
    let mut order: Vec<usize> = (0..cands.len()).collect();
    order.sort_by(|&a, &b| cands[b].score.total_cmp(&cands[a].score));
    let items: Vec<(f64, bool, f64)> = order
        .iter()
        .map(|&i| (cands[i].score, gold.contains(&cands[i].key), cands[i].doc_sim))
        .collect();
    let mut doc_cuts: Vec<f64> = cands.iter().map(|c| c.doc_sim).collect();
    doc_cuts.sort_by(|a, b| b.total_cmp(a));
    doc_cuts.dedup();
    let mut best: Option<EvalReport> = None;
    for &cut in &doc_cuts {
        let kept: Vec<(f64, bool)> = items
            .iter()
            .filter(|x| x.2 >= cut)
            .map(|x| (x.0, x.1))
            .collect();
        let mut r = sweep_sorted(&kept, gold.len());
        if best.as_ref().is_none_or(|b| r.f1_max > b.f1_max) {
            r.doc_threshold = Some(cut);
            best = Some(r);
        }
    }
    let mut r = best.unwrap_or_else(|| sweep_sorted(&[], gold.len()));
    r.candidates = cands.len();
    r
}

fn global_candidates(
    src: &Corpus,
    tgt: &Corpus,
    src_sent: &EmbeddingMatrix,
    tgt_sent: &EmbeddingMatrix,
    cfg: &JointConfig<'_>,
) -> Result<Vec<(PairKey, f64)>> {
    let prep = |c: &Corpus, r: &Rescore| -> Vec<Features<'static>> {
        let sents: Vec<_> = c.sentences().collect();
        sents.par_iter().map(|s| r.scorer.prepare(&s.tokens, None)).collect()
    };
    let feats = cfg.rescore.as_ref().map(|r| (prep(src, r), prep(tgt, r)));
    let fetch = cfg.rescore.as_ref().map_or(cfg.k_sent, |r| r.top_n.max(cfg.k_sent));
    // forward: source sentence -> target index, backward: target -> source
    let directions = [(src_sent, tgt_sent, false), (tgt_sent, src_sent, true)];
    let mut best: HashMap<PairKey, f64> = HashMap::new();
    for (queries, base, flipped) in directions {
        let index = AnnIndex::build(base, cfg.ann)?;
        let hits: Vec<Vec<(usize, f64)>> = (0..queries.len())
            .into_par_iter()
            .map(|q| {
                let v = queries.row(q);
                if is_zero(v) {
                    return Ok(Vec::new());
                }
                let mut hits: Vec<(usize, f64)> = index
                    .query(v, fetch)?
                    .into_iter()
                    .map(|n| (base.position(&n.unit_id).expect("indexed id"), n.similarity))
                    .collect();
                if let (Some(r), Some((fs, ft))) = (&cfg.rescore, &feats) {
                    let (fq, fb) = if flipped { (ft, fs) } else { (fs, ft) };
                    for h in hits.iter_mut() {
                        let (a, b) = if flipped { (&fb[h.0], &fq[q]) } else { (&fq[q], &fb[h.0]) };
                        h.1 = r.scorer.score(a, b).unwrap_or(0.0);
                    }
                    hits.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                }
                hits.truncate(cfg.k_sent);
                Ok(hits)
            })
            .collect::<Result<_>>()?;
        for (q, hs) in hits.into_iter().enumerate() {
            for (j, score) in hs {
                let key = if flipped {
                    (base.unit_ids()[j].clone(), queries.unit_ids()[q].clone())
                } else {
                    (queries.unit_ids()[q].clone(), base.unit_ids()[j].clone())
                };
                let e = best.entry(key).or_insert(score);
                if score > *e {
                    *e = score;
                }
            }
        }
    }
    let mut out: Vec<(PairKey, f64)> = best.into_iter().collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}
