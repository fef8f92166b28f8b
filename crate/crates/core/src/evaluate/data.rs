use std::collections::HashSet;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{write_corpus, Corpus, Document, Tokenizer};
use crate::error::{Error, Result};
use crate::sent_align::normalize_key;

pub const SOURCE_FILE: &str = "source.jsonl";
pub const TARGET_FILE: &str = "target.jsonl";
pub const DOC_PAIRS_FILE: &str = "doc_pairs.tsv";
pub const LABELS_FILE: &str = "labels.jsonl";
pub const NOISE_SOURCE_FILE: &str = "noise_source.jsonl";
pub const NOISE_TARGET_FILE: &str = "noise_target.jsonl";

const FETCH_HINT: &str = "expected source.jsonl, target.jsonl, doc_pairs.tsv and labels.jsonl \
(plus noise_source.jsonl / noise_target.jsonl for document and joint evaluation). \
Download the annotated standard/simple Wikipedia alignment release, convert it with \
`lha adapt-gold`, and place random Wikipedia / Simple Wikipedia articles in the noise files";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Good,
    GoodPartial,
    Partial,
    Nonvalid,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Good => "good",
            Label::GoodPartial => "good_partial",
            Label::Partial => "partial",
            Label::Nonvalid => "nonvalid",
        })
    }
}

impl FromStr for Label {
    type Err = Error;

    /// Accepts the canonical names and the spellings of the published
    /// annotation release ("Good", "Good Partial", "Partial", "Non-match").
    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .trim()
            .to_lowercase()
            .chars()
            .filter(|c| c.is_alphanumeric())
            .collect();
        match key.as_str() {
            "good" => Ok(Label::Good),
            "goodpartial" => Ok(Label::GoodPartial),
            "partial" => Ok(Label::Partial),
            "nonvalid" | "nonmatch" | "none" | "bad" => Ok(Label::Nonvalid),
            _ => Err(Error::InvalidArgument(format!("unknown label {s:?}"))),
        }
    }
}

/// A labelled candidate sentence pair; keys are sentence unit ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GoldPair {
    pub source_key: String,
    pub target_key: String,
    pub label: Label,
}

pub type PairKey = (String, String);

/// Positive pairs: `good`, plus `good_partial` when `include_partial`.
pub fn positive_set(labels: &[GoldPair], include_partial: bool) -> HashSet<PairKey> {
    labels
        .iter()
        .filter(|g| g.label == Label::Good || (include_partial && g.label == Label::GoodPartial))
        .map(|g| (g.source_key.clone(), g.target_key.clone()))
        .collect()
}

pub fn read_gold_jsonl<R: BufRead>(input: R) -> Result<Vec<GoldPair>> {
    let mut out = Vec::new();
    for (k, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| Error::parse(k + 1, format!("bad gold record: {e}")))?,
        );
    }
    Ok(out)
}

pub fn write_gold_jsonl<W: Write>(labels: &[GoldPair], mut out: W) -> Result<()> {
    for g in labels {
        serde_json::to_writer(&mut out, g)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Converts a tab-separated annotation export
/// (`label, source_doc, source_sentence, target_doc, target_sentence`) into
/// gold pairs by locating each sentence text inside its document. Matching
/// is on normalized text; unmatched rows are an error.
pub fn adapt_gold_tsv<R: BufRead>(input: R, source: &Corpus, target: &Corpus) -> Result<Vec<GoldPair>> {
    fn locate(corpus: &Corpus, doc_id: &str, text: &str, line: usize) -> Result<String> {
        let doc = corpus
            .document(doc_id)
            .ok_or_else(|| Error::parse(line, format!("unknown document {doc_id:?}")))?;
        let key = normalize_key(text);
        doc.sentences
            .iter()
            .find(|s| normalize_key(&s.text) == key)
            .map(|s| s.unit_id())
            .ok_or_else(|| Error::parse(line, format!("sentence not found in {doc_id:?}: {text:?}")))
    }
    let mut out = Vec::new();
    for (k, line) in input.lines().enumerate() {
        let line = line?;
        let n = k + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 {
            return Err(Error::parse(n, format!("expected 5 tab-separated fields, found {}", f.len())));
        }
        let label: Label = f[0].parse().map_err(|e: Error| Error::parse(n, e.to_string()))?;
        out.push(GoldPair {
            source_key: locate(source, f[1], f[2], n)?,
            target_key: locate(target, f[3], f[4], n)?,
            label,
        });
    }
    Ok(out)
}

/// An annotated alignment benchmark: gold document pairs with labelled
/// sentence pairs and optional pools of noise documents.
#[derive(Debug, Clone)]
pub struct EvalDataset {
    pub source: Corpus,
    pub target: Corpus,
    pub doc_pairs: Vec<(String, String)>,
    pub labels: Vec<GoldPair>,
    pub noise_source: Corpus,
    pub noise_target: Corpus,
}

fn require(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::DatasetMissing {
            path: path.to_path_buf(),
            hint: FETCH_HINT.into(),
        })
    }
}

impl EvalDataset {
    pub fn load(dir: &Path, tokenizer: &Tokenizer) -> Result<Self> {
        for f in [SOURCE_FILE, TARGET_FILE, DOC_PAIRS_FILE, LABELS_FILE] {
            require(&dir.join(f))?;
        }
        let optional = |name: &str, tag: &str| -> Result<Corpus> {
            let p = dir.join(name);
            if p.is_file() {
                Corpus::read(&p, tag, tokenizer)
            } else {
                Ok(Corpus::default())
            }
        };
        let pairs_path = dir.join(DOC_PAIRS_FILE);
        let pairs_file = File::open(&pairs_path).map_err(|e| Error::file(&pairs_path, e))?;
        let mut doc_pairs = Vec::new();
        for (k, line) in BufReader::new(pairs_file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut f = line.split('\t');
            match (f.next(), f.next()) {
                (Some(s), Some(t)) => doc_pairs.push((s.to_string(), t.to_string())),
                _ => return Err(Error::parse(k + 1, "expected source_id<TAB>target_id")),
            }
        }
        let labels_path = dir.join(LABELS_FILE);
        let labels_file = File::open(&labels_path).map_err(|e| Error::file(&labels_path, e))?;
        let ds = Self {
            source: Corpus::read(&dir.join(SOURCE_FILE), "source", tokenizer)?,
            target: Corpus::read(&dir.join(TARGET_FILE), "target", tokenizer)?,
            doc_pairs,
            labels: read_gold_jsonl(BufReader::new(labels_file))?,
            noise_source: optional(NOISE_SOURCE_FILE, "source")?,
            noise_target: optional(NOISE_TARGET_FILE, "target")?,
        };
        ds.check()?;
        Ok(ds)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
        let create = |name: &str| -> Result<BufWriter<File>> {
            let p = dir.join(name);
            Ok(BufWriter::new(File::create(&p).map_err(|e| Error::file(&p, e))?))
        };
        write_corpus(&self.source.documents, create(SOURCE_FILE)?)?;
        write_corpus(&self.target.documents, create(TARGET_FILE)?)?;
        write_corpus(&self.noise_source.documents, create(NOISE_SOURCE_FILE)?)?;
        write_corpus(&self.noise_target.documents, create(NOISE_TARGET_FILE)?)?;
        let mut w = create(DOC_PAIRS_FILE)?;
        for (s, t) in &self.doc_pairs {
            writeln!(w, "{s}\t{t}")?;
        }
        w.flush()?;
        write_gold_jsonl(&self.labels, create(LABELS_FILE)?)
    }

    /// Verifies that gold document pairs and labels refer to existing units.
    pub fn check(&self) -> Result<()> {
        for (s, t) in &self.doc_pairs {
            if self.source.document(s).is_none() {
                return Err(Error::MissingUnit(s.clone()));
            }
            if self.target.document(t).is_none() {
                return Err(Error::MissingUnit(t.clone()));
            }
        }
        for g in &self.labels {
            if self.source.sentence(&g.source_key).is_none() {
                return Err(Error::MissingUnit(g.source_key.clone()));
            }
            if self.target.sentence(&g.target_key).is_none() {
                return Err(Error::MissingUnit(g.target_key.clone()));
            }
        }
        Ok(())
    }

    pub fn positives(&self, include_partial: bool) -> HashSet<PairKey> {
        positive_set(&self.labels, include_partial)
    }

    pub fn gold_doc_pairs(&self) -> HashSet<PairKey> {
        self.doc_pairs.iter().cloned().collect()
    }

    /// Gold documents of each side followed by `noise` documents sampled
    /// (without replacement, in pool order) from the noise pools.
    pub fn with_noise(&self, noise: usize, seed: u64) -> Result<(Corpus, Corpus)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut side = |gold: &Corpus, pool: &Corpus| -> Result<Corpus> {
            if noise > pool.len() {
                return Err(Error::InvalidArgument(format!(
                    "requested {noise} noise documents but the pool has {}",
                    pool.len()
                )));
            }
            let mut picks = index::sample(&mut rng, pool.len(), noise).into_vec();
            picks.sort_unstable();
            let docs: Vec<Document> = gold
                .documents
                .iter()
                .cloned()
                .chain(picks.into_iter().map(|i| pool.documents[i].clone()))
                .collect();
            Corpus::new(gold.dataset_tag.clone(), docs)
        };
        let src = side(&self.source, &self.noise_source)?;
        let tgt = side(&self.target, &self.noise_target)?;
        Ok((src, tgt))
    }
}
