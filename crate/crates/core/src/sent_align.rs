//! Sentence alignment inside aligned document pairs.
//!
//! For one document pair: score every source sentence against every target
//! sentence, keep the union of each row's and each column's top-K entries
//! that clear `theta_s`, merge pairs sharing a sentence into groups
//! (connected components of the bipartite pair graph), then apply the
//! lexical post-filters.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{content_tokens, Corpus, Document, Tokenizer};
use crate::doc_align::DocPair;
use crate::embeddings::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::metrics::{unigram_overlap, Scorer};

/// Dense `source x target` similarity matrix of one document pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SimMatrix {
    pub source_ids: Vec<String>,
    pub target_ids: Vec<String>,
    values: Vec<f64>,
}

impl SimMatrix {
    pub fn from_values(source_ids: Vec<String>, target_ids: Vec<String>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), source_ids.len() * target_ids.len());
        Self {
            source_ids,
            target_ids,
            values,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.source_ids.len(), self.target_ids.len())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.target_ids.len() + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Sentence embeddings for both corpora, used by the cosine scorer.
#[derive(Debug, Clone, Copy, Default)]
pub struct SentenceEmbeddings<'a> {
    pub source: Option<&'a EmbeddingMatrix>,
    pub target: Option<&'a EmbeddingMatrix>,
}

/// Scores all sentence pairs of two documents. Pairs the scorer cannot
/// handle (unembeddable sentences) get similarity 0.
pub fn sentence_sim_matrix(
    src_doc: &Document,
    tgt_doc: &Document,
    scorer: &Scorer,
    emb: SentenceEmbeddings<'_>,
) -> Result<SimMatrix> {
    if src_doc.sentences.is_empty() || tgt_doc.sentences.is_empty() {
        return Err(Error::Empty(format!(
            "document pair ({}, {}) has an empty side",
            src_doc.doc_id, tgt_doc.doc_id
        )));
    }
    let lookup = |m: Option<&EmbeddingMatrix>, id: &str| m.and_then(|m| m.get(id).map(|r| r.to_vec()));
    let src_emb: Vec<Option<Vec<f32>>> = src_doc
        .sentences
        .iter()
        .map(|s| lookup(emb.source, &s.unit_id()))
        .collect();
    let tgt_emb: Vec<Option<Vec<f32>>> = tgt_doc
        .sentences
        .iter()
        .map(|s| lookup(emb.target, &s.unit_id()))
        .collect();
    let src: Vec<_> = src_doc
        .sentences
        .iter()
        .zip(&src_emb)
        .map(|(s, e)| scorer.prepare(&s.tokens, e.as_deref()))
        .collect();
    let tgt: Vec<_> = tgt_doc
        .sentences
        .iter()
        .zip(&tgt_emb)
        .map(|(s, e)| scorer.prepare(&s.tokens, e.as_deref()))
        .collect();
    let mut values = Vec::with_capacity(src.len() * tgt.len());
    for a in &src {
        for b in &tgt {
            values.push(scorer.score(a, b).unwrap_or(0.0));
        }
    }
    Ok(SimMatrix {
        source_ids: src_doc.sentences.iter().map(|s| s.unit_id()).collect(),
        target_ids: tgt_doc.sentences.iter().map(|s| s.unit_id()).collect(),
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub source: usize,
    pub target: usize,
    pub score: f64,
}

fn top_k(values: impl Iterator<Item = (usize, f64)>, k: usize) -> Vec<usize> {
    let mut v: Vec<(usize, f64)> = values.collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    v.into_iter().take(k).map(|(i, _)| i).collect()
}

/// Union of every row's and every column's top-`k` cells with value
/// `>= theta_s`, ordered by (source, target). Ties inside a row or column go
/// to the lower index.
pub fn extract_nn_pairs(p: &SimMatrix, k: usize, theta_s: f64) -> Vec<ScoredPair> {
    let (n, m) = p.shape();
    let mut cells = BTreeSet::new();
    for i in 0..n {
        for j in top_k((0..m).map(|j| (j, p.get(i, j))), k) {
            cells.insert((i, j));
        }
    }
    for j in 0..m {
        for i in top_k((0..n).map(|i| (i, p.get(i, j))), k) {
            cells.insert((i, j));
        }
    }
    cells
        .into_iter()
        .map(|(i, j)| ScoredPair {
            source: i,
            target: j,
            score: p.get(i, j),
        })
        .filter(|sp| sp.score >= theta_s)
        .collect()
}

/// A merged component over sentence indices.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexGroup {
    pub source: Vec<usize>,
    pub target: Vec<usize>,
    pub score: f64,
}

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
    }
}

/// Connected components of the bipartite graph induced by `pairs`. Member
/// lists are sorted; groups are ordered by their first source index. A
/// group's score is its best pair score.
pub fn merge_pairs(pairs: &[ScoredPair]) -> Vec<IndexGroup> {
    if pairs.is_empty() {
        return Vec::new();
    }
    // compact node ids: sources first, then targets
    let mut src_ids: HashMap<usize, usize> = HashMap::new();
    let mut tgt_ids: HashMap<usize, usize> = HashMap::new();
    for p in pairs {
        let n = src_ids.len();
        src_ids.entry(p.source).or_insert(n);
        let n = tgt_ids.len();
        tgt_ids.entry(p.target).or_insert(n);
    }
    let offset = src_ids.len();
    let mut uf = UnionFind::new(offset + tgt_ids.len());
    for p in pairs {
        uf.union(src_ids[&p.source], offset + tgt_ids[&p.target]);
    }
    let mut by_root: HashMap<usize, IndexGroup> = HashMap::new();
    for (&s, &node) in &src_ids {
        let root = uf.find(node);
        by_root
            .entry(root)
            .or_insert_with(|| IndexGroup {
                source: Vec::new(),
                target: Vec::new(),
                score: f64::NEG_INFINITY,
            })
            .source
            .push(s);
    }
    for (&t, &node) in &tgt_ids {
        let root = uf.find(offset + node);
        by_root.get_mut(&root).expect("target joined to a source").target.push(t);
    }
    for p in pairs {
        let root = uf.find(src_ids[&p.source]);
        let g = by_root.get_mut(&root).unwrap();
        g.score = g.score.max(p.score);
    }
    let mut groups: Vec<IndexGroup> = by_root.into_values().collect();
    for g in &mut groups {
        g.source.sort_unstable();
        g.target.sort_unstable();
    }
    groups.sort_by_key(|g| (g.source[0], g.target[0]));
    groups
}

/// A pseudo-parallel pair of sentence sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedGroup {
    pub source_doc: String,
    pub target_doc: String,
    pub source_ids: Vec<String>,
    pub target_ids: Vec<String>,
    pub source_text: String,
    pub target_text: String,
    pub score: f64,
}

fn join_text(doc: &Document, idx: &[usize]) -> String {
    idx.iter()
        .map(|&i| doc.sentences[i].text.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Merges `pairs` of one document pair into [`AlignedGroup`]s; multi-sentence
/// sides are joined in document order with single spaces.
pub fn merge_groups(pairs: &[ScoredPair], src_doc: &Document, tgt_doc: &Document) -> Vec<AlignedGroup> {
    merge_pairs(pairs)
        .into_iter()
        .map(|g| AlignedGroup {
            source_doc: src_doc.doc_id.clone(),
            target_doc: tgt_doc.doc_id.clone(),
            source_ids: g.source.iter().map(|&i| src_doc.sentences[i].unit_id()).collect(),
            target_ids: g.target.iter().map(|&j| tgt_doc.sentences[j].unit_id()).collect(),
            source_text: join_text(src_doc, &g.source),
            target_text: join_text(tgt_doc, &g.target),
            score: g.score,
        })
        .collect()
}

/// Lowercased, whitespace-collapsed text used for exclusion matching.
pub fn normalize_key(text: &str) -> String {
    text.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterMode {
    /// Filters apply to merged groups (concatenated sides).
    #[default]
    PerGroup,
    /// Filters apply to each sentence pair before merging.
    PerPair,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterPolicy {
    pub min_overlap: f64,
    pub max_len_ratio: f64,
    pub exclusion: HashSet<(String, String)>,
    pub mode: FilterMode,
}

impl Default for FilterPolicy {
    fn default() -> Self {
        Self {
            min_overlap: 0.4,
            max_len_ratio: 1.5,
            exclusion: HashSet::new(),
            mode: FilterMode::PerGroup,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rejection {
    LowOverlap,
    TooLong,
    Excluded,
}

impl FilterPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.min_overlap) {
            return Err(Error::InvalidArgument(format!(
                "min_overlap {} outside [0, 1]",
                self.min_overlap
            )));
        }
        if self.max_len_ratio.is_nan() || self.max_len_ratio <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "max_len_ratio {} must be positive",
                self.max_len_ratio
            )));
        }
        Ok(())
    }

    /// Adds `source<TAB>target` lines from a test set to the exclusion set.
    pub fn load_exclusions(&mut self, path: &Path) -> Result<usize> {
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        self.add_exclusions(text.as_bytes())
    }

    pub fn add_exclusions<R: BufRead>(&mut self, input: R) -> Result<usize> {
        let mut n = 0;
        for (k, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (s, t) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(k + 1, "expected source<TAB>target"))?;
            self.exclusion.insert((normalize_key(s), normalize_key(t)));
            n += 1;
        }
        Ok(n)
    }

    /// Checks one (source, target) text pair; `None` means it is kept.
    pub fn check(&self, source_text: &str, target_text: &str, tokenizer: &Tokenizer) -> Option<Rejection> {
        let src = tokenizer.tokenize(source_text);
        let tgt = tokenizer.tokenize(target_text);
        let overlap = unigram_overlap(&content_tokens(&src), &content_tokens(&tgt));
        if overlap < self.min_overlap {
            return Some(Rejection::LowOverlap);
        }
        let src_len = src.iter().filter(|t| !t.is_punct).count() as f64;
        let tgt_len = tgt.iter().filter(|t| !t.is_punct).count() as f64;
        if tgt_len > self.max_len_ratio * src_len {
            return Some(Rejection::TooLong);
        }
        if !self.exclusion.is_empty()
            && self
                .exclusion
                .contains(&(normalize_key(source_text), normalize_key(target_text)))
        {
            return Some(Rejection::Excluded);
        }
        None
    }
}

/// Drops groups failing any predicate of `policy`.
pub fn filter_groups(groups: Vec<AlignedGroup>, policy: &FilterPolicy, tokenizer: &Tokenizer) -> Vec<AlignedGroup> {
    groups
        .into_iter()
        .filter(|g| policy.check(&g.source_text, &g.target_text, tokenizer).is_none())
        .collect()
}

#[derive(Debug, Clone)]
pub struct SentAlignConfig {
    pub k: usize,
    pub theta_s: f64,
    pub policy: FilterPolicy,
}

impl Default for SentAlignConfig {
    fn default() -> Self {
        Self {
            k: 5,
            theta_s: 0.65,
            policy: FilterPolicy::default(),
        }
    }
}

/// Pair and group counts collected while aligning sentences.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentAlignStats {
    pub doc_pairs: usize,
    pub failed_doc_pairs: usize,
    /// Nearest-neighbour sentence pairs above `theta_s`.
    pub nn_pairs: usize,
    /// Groups after merging, before filtering.
    pub merged_groups: usize,
    /// Groups surviving the filters.
    pub filtered_groups: usize,
    /// Groups emitted after removing repeated texts.
    pub emitted_groups: usize,
}

fn align_pair_counted(
    src_doc: &Document,
    tgt_doc: &Document,
    scorer: &Scorer,
    emb: SentenceEmbeddings<'_>,
    config: &SentAlignConfig,
    tokenizer: &Tokenizer,
) -> Result<(Vec<AlignedGroup>, usize, usize)> {
    let p = sentence_sim_matrix(src_doc, tgt_doc, scorer, emb)?;
    let mut pairs = extract_nn_pairs(&p, config.k, config.theta_s);
    let nn_pairs = pairs.len();
    if config.policy.mode == FilterMode::PerPair {
        pairs.retain(|sp| {
            config
                .policy
                .check(
                    &src_doc.sentences[sp.source].text,
                    &tgt_doc.sentences[sp.target].text,
                    tokenizer,
                )
                .is_none()
        });
    }
    let groups = merge_groups(&pairs, src_doc, tgt_doc);
    let merged = groups.len();
    let groups = match config.policy.mode {
        FilterMode::PerGroup => filter_groups(groups, &config.policy, tokenizer),
        FilterMode::PerPair => groups,
    };
    Ok((groups, nn_pairs, merged))
}

/// Full sentence alignment of one document pair.
pub fn align_pair(
    src_doc: &Document,
    tgt_doc: &Document,
    scorer: &Scorer,
    emb: SentenceEmbeddings<'_>,
    config: &SentAlignConfig,
    tokenizer: &Tokenizer,
) -> Result<Vec<AlignedGroup>> {
    Ok(align_pair_counted(src_doc, tgt_doc, scorer, emb, config, tokenizer)?.0)
}

/// Aligns sentences across all `doc_pairs`. Pairs referencing unknown
/// documents or failing to score are logged and skipped. The output keeps
/// document-pair order and drops repeated (source text, target text) pairs.
pub fn align_sentences(
    doc_pairs: &[DocPair],
    source: &Corpus,
    target: &Corpus,
    scorer: &Scorer,
    emb: SentenceEmbeddings<'_>,
    config: &SentAlignConfig,
    tokenizer: &Tokenizer,
) -> Vec<AlignedGroup> {
    align_sentences_with_stats(doc_pairs, source, target, scorer, emb, config, tokenizer).0
}

/// [`align_sentences`] that also reports per-stage counts.
pub fn align_sentences_with_stats(
    doc_pairs: &[DocPair],
    source: &Corpus,
    target: &Corpus,
    scorer: &Scorer,
    emb: SentenceEmbeddings<'_>,
    config: &SentAlignConfig,
    tokenizer: &Tokenizer,
) -> (Vec<AlignedGroup>, SentAlignStats) {
    let per_pair: Vec<Option<(Vec<AlignedGroup>, usize, usize)>> = doc_pairs
        .par_iter()
        .map(|dp| {
            let res = match (source.document(&dp.source_id), target.document(&dp.target_id)) {
                (Some(s), Some(t)) => align_pair_counted(s, t, scorer, emb, config, tokenizer),
                (None, _) => Err(Error::MissingUnit(dp.source_id.clone())),
                (_, None) => Err(Error::MissingUnit(dp.target_id.clone())),
            };
            res.map_err(|e| warn!("skipping document pair ({}, {}): {e}", dp.source_id, dp.target_id))
                .ok()
        })
        .collect();
    let mut stats = SentAlignStats {
        doc_pairs: doc_pairs.len(),
        ..Default::default()
    };
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for r in per_pair {
        let Some((groups, nn, merged)) = r else {
            stats.failed_doc_pairs += 1;
            continue;
        };
        stats.nn_pairs += nn;
        stats.merged_groups += merged;
        stats.filtered_groups += groups.len();
        out.extend(
            groups
                .into_iter()
                .filter(|g| seen.insert((g.source_text.clone(), g.target_text.clone()))),
        );
    }
    stats.emitted_groups = out.len();
    (out, stats)
}

pub fn write_groups_jsonl<W: Write>(groups: &[AlignedGroup], mut out: W) -> Result<()> {
    for g in groups {
        serde_json::to_writer(&mut out, g)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// `source_text<TAB>target_text` lines for NMT training.
pub fn write_groups_tsv<W: Write>(groups: &[AlignedGroup], mut out: W) -> Result<()> {
    for g in groups {
        let clean = |s: &str| s.replace(['\t', '\n'], " ");
        writeln!(out, "{}\t{}", clean(&g.source_text), clean(&g.target_text))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_groups_jsonl<R: BufRead>(input: R) -> Result<Vec<AlignedGroup>> {
    let mut out = Vec::new();
    for (k, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| Error::parse(k + 1, e.to_string()))?,
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn doc(id: &str, sents: &[&str]) -> Document {
        Document::build(id, "x", None, sents.iter().copied(), &Tokenizer::default())
    }

    fn matrix(n: usize, m: usize, values: Vec<f64>) -> SimMatrix {
        SimMatrix::from_values(
            (0..n).map(|i| format!("s#{i}")).collect(),
            (0..m).map(|j| format!("t#{j}")).collect(),
            values,
        )
    }

    fn sp(source: usize, target: usize) -> ScoredPair {
        ScoredPair {
            source,
            target,
            score: 1.0,
        }
    }

    #[test]
    fn self_matrix_diagonal_is_one() {
        let d = doc("d", &["The cat sat on the mat.", "Dogs bark loudly.", "Birds fly south."]);
        let tok = Tokenizer::default();
        let mut t = crate::embeddings::WordVectorTable::new(3);
        for (w, v) in [("cat", [1.0, 0.0, 0.0]), ("sat", [0.0, 1.0, 0.0]), ("mat", [0.2, 0.1, 0.9]),
                       ("dogs", [0.5, 0.5, 0.0]), ("bark", [0.0, 0.3, 0.7]), ("loudly", [0.1, 0.1, 0.1]),
                       ("birds", [0.9, 0.0, 0.1]), ("fly", [0.0, 0.0, 1.0]), ("south", [0.3, 0.3, 0.3])] {
            t.insert(w, &v).unwrap();
        }
        let m = crate::embeddings::embed_corpus(
            std::slice::from_ref(&d),
            crate::embeddings::Level::Sentence,
            &crate::embeddings::EmbeddingStrategy::Avg(&t),
            true,
        )
        .unwrap();
        let emb = SentenceEmbeddings { source: Some(&m), target: Some(&m) };
        let p = sentence_sim_matrix(&d, &d, &Scorer::Cosine, emb).unwrap();
        assert_eq!(p.shape(), (3, 3));
        for i in 0..3 {
            assert!((p.get(i, i) - 1.0).abs() < 1e-6);
        }
        let p = sentence_sim_matrix(&d, &d, &Scorer::Wmd(Arc::new(t)), SentenceEmbeddings::default()).unwrap();
        for i in 0..3 {
            assert_eq!(p.get(i, i), 1.0);
        }
        let _ = tok;
    }

    #[test]
    fn shape_and_empty_side() {
        let a = doc("a", &["x y.", "z.", "w."]);
        let b = doc("b", &["x.", "q."]);
        let p = sentence_sim_matrix(&a, &b, &Scorer::Overlap, SentenceEmbeddings::default()).unwrap();
        assert_eq!(p.shape(), (3, 2));
        let empty = Document { sentences: vec![], ..b.clone() };
        assert!(sentence_sim_matrix(&a, &empty, &Scorer::Overlap, SentenceEmbeddings::default()).is_err());
    }

    #[test]
    fn unembeddable_scores_zero() {
        let a = doc("a", &["zzz qqq."]);
        let b = doc("b", &["cat."]);
        let mut t = crate::embeddings::WordVectorTable::new(1);
        t.insert("cat", &[1.0]).unwrap();
        let p = sentence_sim_matrix(&a, &b, &Scorer::Wmd(Arc::new(t)), SentenceEmbeddings::default()).unwrap();
        assert_eq!(p.get(0, 0), 0.0);
    }

    #[test]
    fn k1_counting_bound_and_threshold() {
        let p = matrix(3, 2, vec![0.9, 0.1, 0.2, 0.8, 0.3, 0.4]);
        let pairs = extract_nn_pairs(&p, 1, f64::NEG_INFINITY);
        assert!(pairs.len() <= 3 + 2);
        let cells: Vec<_> = pairs.iter().map(|p| (p.source, p.target)).collect();
        assert_eq!(cells, [(0, 0), (1, 1), (2, 1)]);
        assert!(extract_nn_pairs(&p, 1, 0.95).is_empty());
        let kept = extract_nn_pairs(&p, 1, 0.5);
        assert!(kept.iter().all(|p| p.score >= 0.5));
    }

    #[test]
    fn merge_example_from_multi_neighbour_sets() {
        // source i=1 -> targets {0,1,2}; target 0 -> sources {0,1}
        let pairs = [sp(1, 0), sp(1, 1), sp(1, 2), sp(0, 0)];
        let groups = merge_pairs(&pairs);
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].source, [0, 1]);
        assert_eq!(groups[0].target, [0, 1, 2]);
    }

    #[test]
    fn disjoint_pairs_stay_apart() {
        let groups = merge_pairs(&[sp(0, 0), sp(1, 1)]);
        assert_eq!(groups.len(), 2);
        assert_eq!((groups[0].source.clone(), groups[0].target.clone()), (vec![0], vec![0]));
        assert_eq!((groups[1].source.clone(), groups[1].target.clone()), (vec![1], vec![1]));
    }

    #[test]
    fn k1_mutual_best_gives_one_to_one() {
        let p = matrix(3, 3, vec![0.9, 0.1, 0.2, 0.1, 0.8, 0.3, 0.2, 0.3, 0.7]);
        let groups = merge_pairs(&extract_nn_pairs(&p, 1, 0.0));
        assert_eq!(groups.len(), 3);
        assert!(groups.iter().all(|g| g.source.len() == 1 && g.target.len() == 1));
    }

    #[test]
    fn group_score_is_best_pair() {
        let pairs = [
            ScoredPair { source: 0, target: 0, score: 0.7 },
            ScoredPair { source: 0, target: 1, score: 0.9 },
        ];
        assert_eq!(merge_pairs(&pairs)[0].score, 0.9);
    }

    #[test]
    fn filter_examples() {
        let tok = Tokenizer::default();
        let policy = FilterPolicy::default();
        let same = "The quick brown fox jumps over the lazy dog.";
        assert_eq!(policy.check(same, same, &tok), None);
        let src = "alpha beta gamma delta epsilon zeta eta theta iota kappa";
        let tgt = "alpha beta gamma delta epsilon zeta eta theta iota kappa lambda mu nu xi omicron pi";
        assert_eq!(policy.check(src, tgt, &tok), Some(Rejection::TooLong));
        let tgt15 = "alpha beta gamma delta epsilon zeta eta theta iota kappa alpha beta gamma delta epsilon";
        assert_eq!(policy.check(src, tgt15, &tok), None);
    }

    #[test]
    fn overlap_boundary() {
        let tok = Tokenizer::default();
        let policy = FilterPolicy::default();
        // target has 5 unique content tokens, 2 shared -> exactly 0.4
        assert_eq!(policy.check("aa bb cc dd ee", "aa bb xx yy zz", &tok), None);
        // 1 of 5 shared -> 0.2
        assert_eq!(policy.check("aa bb cc dd ee", "aa qq xx yy zz", &tok), Some(Rejection::LowOverlap));
    }

    #[test]
    fn exclusion_is_normalized() {
        let tok = Tokenizer::default();
        let mut policy = FilterPolicy::default();
        policy.add_exclusions("The  Cat sat.\tthe cat SAT.\n".as_bytes()).unwrap();
        assert_eq!(policy.check("the cat sat.", "The cat sat.", &tok), Some(Rejection::Excluded));
        assert_eq!(policy.check("the cat sat.", "the cat sat down.", &tok), None);
    }

    #[test]
    fn end_to_end_pair_and_dedup() {
        let tok = Tokenizer::default();
        let s = doc("s", &["Paris is the capital of France.", "It has many museums."]);
        let t = doc("t", &["Paris is the capital of France.", "Many museums are there."]);
        let src = Corpus::new("source", vec![s.clone(), Document { doc_id: "s2".into(), ..s.clone() }]).unwrap();
        let tgt = Corpus::new("target", vec![t.clone()]).unwrap();
        let cfg = SentAlignConfig { k: 1, theta_s: 0.3, policy: FilterPolicy::default() };
        let pairs = vec![
            DocPair { source_id: "s".into(), target_id: "t".into(), similarity: 0.9 },
            DocPair { source_id: "s2".into(), target_id: "t".into(), similarity: 0.9 },
            DocPair { source_id: "missing".into(), target_id: "t".into(), similarity: 0.9 },
        ];
        let out = align_sentences(&pairs, &src, &tgt, &Scorer::Overlap, SentenceEmbeddings::default(), &cfg, &tok);
        // s2 duplicates s verbatim, so its groups are dropped by text dedup
        assert!(out.iter().all(|g| g.source_doc == "s"));
        assert_eq!(out[0].source_text, "Paris is the capital of France.");
        assert_eq!(out[0].source_ids, ["s#0"]);
        assert!(align_sentences(&[], &src, &tgt, &Scorer::Overlap, SentenceEmbeddings::default(), &cfg, &tok).is_empty());
    }

    #[test]
    fn jsonl_round_trip() {
        let g = AlignedGroup {
            source_doc: "a".into(),
            target_doc: "b".into(),
            source_ids: vec!["a#0".into(), "a#1".into()],
            target_ids: vec!["b#3".into()],
            source_text: "One. Two.".into(),
            target_text: "Three.".into(),
            score: 0.75,
        };
        let mut buf = Vec::new();
        write_groups_jsonl(std::slice::from_ref(&g), &mut buf).unwrap();
        let line = String::from_utf8(buf.clone()).unwrap();
        for key in ["source_doc", "target_doc", "source_ids", "target_ids", "source_text", "target_text", "score"] {
            assert!(line.contains(&format!("\"{key}\"")));
        }
        assert_eq!(read_groups_jsonl(&buf[..]).unwrap(), vec![g]);
    }
}
