//! End-to-end alignment run: embed, index, align documents, align sentences,
//! summarize. Every stage records content hashes of its inputs, parameters
//! and outputs in `manifest.json`; a stage whose hashes all match is reused.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};
use std::time::{SystemTime, UNIX_EPOCH};

use log::info;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::ann_index::{AnnIndex, AnnParams};
use crate::corpus::{Corpus, Tokenizer};
use crate::doc_align::{align_documents, read_doc_pairs, write_doc_pairs};
use crate::embeddings::{embed_corpus, load_embeddings, save_embeddings, load_word_vectors, EmbeddingMatrix, EmbeddingStrategy, Level, WordVectorTable};
use crate::error::{Error, Result};
use crate::metrics::{Bm25Stats, Scorer, ScorerKind};
use crate::sent_align::{
    align_sentences_with_stats, read_groups_jsonl, write_groups_jsonl, write_groups_tsv, FilterMode, FilterPolicy,
    SentAlignConfig, SentAlignStats, SentenceEmbeddings,
};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SOURCE_DOCS: &str = "source_docs.lhae";
pub const SOURCE_SENTS: &str = "source_sents.lhae";
pub const TARGET_DOCS: &str = "target_docs.lhae";
pub const TARGET_SENTS: &str = "target_sents.lhae";
pub const TARGET_INDEX: &str = "target_docs.lhai";
pub const DOC_PAIRS: &str = "doc_pairs.tsv";
pub const GROUPS_JSONL: &str = "groups.jsonl";
pub const GROUPS_TSV: &str = "groups.tsv";
pub const ALIGN_STATS: &str = "align_stats.json";
pub const SUMMARY: &str = "summary.json";

const OUTPUT_FILES: &[&str] = &[
    MANIFEST_FILE,
    SOURCE_DOCS,
    SOURCE_SENTS,
    TARGET_DOCS,
    TARGET_SENTS,
    TARGET_INDEX,
    DOC_PAIRS,
    GROUPS_JSONL,
    GROUPS_TSV,
    ALIGN_STATS,
    SUMMARY,
];

/// Source of unit vectors for one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EmbeddingSpec {
    /// Mean of word vectors from `word_vectors`.
    Avg,
    /// Externally computed `.lhae` matrices, one per side.
    Precomputed { source: PathBuf, target: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub document: EmbeddingSpec,
    pub sentence: EmbeddingSpec,
    pub normalize: bool,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            document: EmbeddingSpec::Avg,
            sentence: EmbeddingSpec::Avg,
            normalize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub min_overlap: f64,
    pub max_len_ratio: f64,
    /// TSV of `source<TAB>target` texts that must not be emitted.
    pub exclude: Option<PathBuf>,
    pub mode: FilterMode,
}

impl Default for FilterConfig {
    fn default() -> Self {
        let p = FilterPolicy::default();
        Self {
            min_overlap: p.min_overlap,
            max_len_ratio: p.max_len_ratio,
            exclude: None,
            mode: p.mode,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnConfig {
    pub n_trees: usize,
    pub search_k: usize,
    pub leaf_size: usize,
}

impl Default for AnnConfig {
    fn default() -> Self {
        let p = AnnParams::default();
        Self {
            n_trees: p.n_trees,
            search_k: p.search_k,
            leaf_size: p.leaf_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub source: PathBuf,
    pub target: PathBuf,
    pub output_dir: PathBuf,
    pub word_vectors: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub embeddings: EmbeddingConfig,
    pub k_doc: usize,
    pub k_sent: usize,
    pub theta_d: f64,
    pub theta_s: f64,
    pub scorer: ScorerKind,
    pub bm25_k1: f64,
    pub bm25_b: f64,
    pub filter: FilterConfig,
    pub ann: AnnConfig,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            source: PathBuf::new(),
            target: PathBuf::new(),
            output_dir: PathBuf::new(),
            word_vectors: None,
            stopwords: None,
            embeddings: EmbeddingConfig::default(),
            k_doc: 5,
            k_sent: 5,
            theta_d: 0.5,
            theta_s: 0.65,
            scorer: ScorerKind::Cosine,
            bm25_k1: crate::metrics::DEFAULT_K1,
            bm25_b: crate::metrics::DEFAULT_B,
            filter: FilterConfig::default(),
            ann: AnnConfig::default(),
            seed: 42,
        }
    }
}

const PATH_KEYS: &[&[&str]] = &[
    &["source"],
    &["target"],
    &["output_dir"],
    &["word_vectors"],
    &["stopwords"],
    &["filter", "exclude"],
    &["embeddings", "document", "source"],
    &["embeddings", "document", "target"],
    &["embeddings", "sentence", "source"],
    &["embeddings", "sentence", "target"],
];

fn resolve_path_at(table: &mut toml::Table, key: &[&str], base: &Path) {
    match key {
        [last] => {
            if let Some(toml::Value::String(s)) = table.get_mut(*last) {
                let p = Path::new(s.as_str());
                if p.is_relative() {
                    *s = base.join(p).to_string_lossy().into_owned();
                }
            }
        }
        [head, rest @ ..] => {
            if let Some(toml::Value::Table(inner)) = table.get_mut(*head) {
                resolve_path_at(inner, rest, base);
            }
        }
        [] => {}
    }
}

fn resolve_paths(table: &mut toml::Table, base: &Path) {
    for key in PATH_KEYS {
        resolve_path_at(table, key, base);
    }
}

/// Applies a `dotted.key=value` assignment. The value is read as a TOML
/// literal when possible and as a bare string otherwise.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {assignment:?} is not key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad override key {key:?}")));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let mut t = table;
    for part in &parts[..parts.len() - 1] {
        let entry = t
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        t = match entry {
            toml::Value::Table(inner) => inner,
            _ => return Err(Error::Config(format!("{key:?}: {part:?} is not a table"))),
        };
    }
    t.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

impl PipelineConfig {
    /// Parses TOML text, resolving relative paths in it against `base_dir`,
    /// then applies `overrides` (whose paths stay as given).
    pub fn from_toml_str(text: &str, base_dir: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(base) = base_dir {
            resolve_paths(&mut table, base);
        }
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_toml_str(&text, path.parent(), overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn ann_params(&self) -> AnnParams {
        AnnParams {
            n_trees: self.ann.n_trees,
            search_k: self.ann.search_k,
            leaf_size: self.ann.leaf_size,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub severity: Severity,
    pub field: String,
    pub message: String,
}

/// Checks ranges and combinations. Returns findings without failing.
pub fn validate_config(cfg: &PipelineConfig) -> Vec<Finding> {
    let mut out = Vec::new();
    let mut push = |severity, field: &str, message: String| {
        out.push(Finding {
            severity,
            field: field.to_string(),
            message,
        })
    };
    use Severity::{Error as E, Warning as W};
    for (field, p) in [("source", &cfg.source), ("target", &cfg.target), ("output_dir", &cfg.output_dir)] {
        if p.as_os_str().is_empty() {
            push(E, field, "path is required".into());
        }
    }
    if cfg.k_doc == 0 {
        push(E, "k_doc", "must be at least 1".into());
    }
    if cfg.k_sent == 0 {
        push(E, "k_sent", "must be at least 1".into());
    }
    if !(-1.0..=1.0).contains(&cfg.theta_d) {
        push(E, "theta_d", format!("{} outside the cosine range [-1, 1]", cfg.theta_d));
    } else if cfg.theta_d < 0.3 {
        push(W, "theta_d", format!("{} admits nearly every document pair", cfg.theta_d));
    }
    let (lo, hi) = cfg.scorer.range();
    if !(cfg.theta_s >= lo && cfg.theta_s <= hi) {
        push(E, "theta_s", format!("{} outside the {} range [{lo}, {hi}]", cfg.theta_s, cfg.scorer));
    } else if cfg.scorer == ScorerKind::Cosine && cfg.theta_s < 0.3 {
        push(W, "theta_s", format!("{} is unusually permissive for cosine similarity", cfg.theta_s));
    }
    if !(0.0..=1.0).contains(&cfg.filter.min_overlap) {
        push(E, "filter.min_overlap", format!("{} outside [0, 1]", cfg.filter.min_overlap));
    }
    if cfg.filter.max_len_ratio.is_nan() || cfg.filter.max_len_ratio <= 0.0 {
        push(E, "filter.max_len_ratio", format!("{} must be positive", cfg.filter.max_len_ratio));
    }
    if cfg.ann.n_trees == 0 || cfg.ann.search_k == 0 || cfg.ann.leaf_size == 0 {
        push(E, "ann", "n_trees, search_k and leaf_size must be positive".into());
    }
    let needs_vectors = cfg.scorer.needs_word_vectors()
        || cfg.embeddings.document == EmbeddingSpec::Avg
        || (cfg.scorer.needs_embeddings() && cfg.embeddings.sentence == EmbeddingSpec::Avg);
    if needs_vectors && cfg.word_vectors.is_none() {
        push(E, "word_vectors", "required by the configured embeddings or scorer".into());
    }
    if cfg.bm25_k1 < 0.0 || !(0.0..=1.0).contains(&cfg.bm25_b) {
        push(E, "bm25", "k1 must be >= 0 and b in [0, 1]".into());
    }
    if !cfg.source.as_os_str().is_empty() && cfg.source == cfg.target {
        push(E, "target", "source and target corpora are the same file".into());
    }
    let mut inputs: Vec<(&str, &Path)> = vec![("source", &cfg.source), ("target", &cfg.target)];
    for (name, p) in [
        ("word_vectors", &cfg.word_vectors),
        ("stopwords", &cfg.stopwords),
        ("filter.exclude", &cfg.filter.exclude),
    ] {
        if let Some(p) = p {
            inputs.push((name, p));
        }
    }
    for spec in [&cfg.embeddings.document, &cfg.embeddings.sentence] {
        if let EmbeddingSpec::Precomputed { source, target } = spec {
            inputs.push(("embeddings", source));
            inputs.push(("embeddings", target));
        }
    }
    if !cfg.output_dir.as_os_str().is_empty() {
        for (name, p) in inputs {
            if p == cfg.output_dir || OUTPUT_FILES.iter().any(|f| cfg.output_dir.join(f) == p) {
                push(E, name, format!("{} is also an output path", p.display()));
            }
        }
    }
    out
}

/// Statistics of the emitted pairs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputStats {
    pub pairs: usize,
    pub mean_source_tokens: f64,
    pub mean_target_tokens: f64,
    pub multi_sentence_source_pct: f64,
    pub multi_sentence_target_pct: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AlignStats {
    pub source_documents: usize,
    pub target_documents: usize,
    pub sentences: SentAlignStats,
}

/// Deterministic run summary written to `summary.json`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub source_documents: usize,
    pub target_documents: usize,
    pub doc_pairs: usize,
    pub sentences: SentAlignStats,
    pub output: OutputStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageStatus {
    pub name: String,
    pub cached: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub summary: Summary,
    pub stages: Vec<StageStatus>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub inputs: BTreeMap<String, String>,
    pub params: String,
    pub outputs: BTreeMap<String, String>,
    pub completed_at: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub stages: BTreeMap<String, StageRecord>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Ok(Self::default());
        }
        let file = File::open(path).map_err(|e| Error::file(path, e))?;
        Ok(serde_json::from_reader(BufReader::new(file))?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("json.tmp");
        let mut w = BufWriter::new(File::create(&tmp).map_err(|e| Error::file(&tmp, e))?);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        w.flush()?;
        drop(w);
        fs::rename(&tmp, path).map_err(|e| Error::file(path, e))
    }
}

pub fn hash_file(path: &Path) -> Result<String> {
    let mut file = File::open(path).map_err(|e| Error::file(path, e))?;
    let mut h = Sha256::new();
    std::io::copy(&mut file, &mut h).map_err(|e| Error::file(path, e))?;
    Ok(hex(&h.finalize()))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash of the canonical (key-sorted) JSON form of `params`.
fn hash_params(params: &serde_json::Value) -> String {
    hex(&Sha256::digest(params.to_string().as_bytes()))
}

struct Stage {
    name: &'static str,
    inputs: Vec<(String, PathBuf)>,
    params: serde_json::Value,
    outputs: Vec<&'static str>,
}

struct Runner<'a> {
    cfg: &'a PipelineConfig,
    out: PathBuf,
    manifest: Manifest,
    statuses: Vec<StageStatus>,
    tokenizer: OnceLock<Tokenizer>,
    vectors: OnceLock<Arc<WordVectorTable>>,
    source: OnceLock<Corpus>,
    target: OnceLock<Corpus>,
}

impl<'a> Runner<'a> {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn tokenizer(&self) -> Result<&Tokenizer> {
        if let Some(t) = self.tokenizer.get() {
            return Ok(t);
        }
        let t = match &self.cfg.stopwords {
            Some(p) => Tokenizer::from_stopword_file(p)?,
            None => Tokenizer::default(),
        };
        Ok(self.tokenizer.get_or_init(|| t))
    }

    fn vectors(&self) -> Result<&Arc<WordVectorTable>> {
        if let Some(v) = self.vectors.get() {
            return Ok(v);
        }
        let path = self
            .cfg
            .word_vectors
            .as_ref()
            .ok_or_else(|| Error::Config("word_vectors is not configured".into()))?;
        info!("loading word vectors from {}", path.display());
        let v = Arc::new(load_word_vectors(path)?);
        Ok(self.vectors.get_or_init(|| v))
    }

    fn corpus(&self, target: bool) -> Result<&Corpus> {
        let (cell, path, tag) = if target {
            (&self.target, &self.cfg.target, "target")
        } else {
            (&self.source, &self.cfg.source, "source")
        };
        if let Some(c) = cell.get() {
            return Ok(c);
        }
        let c = Corpus::read(path, tag, self.tokenizer()?)?;
        Ok(cell.get_or_init(|| c))
    }

    fn current_inputs(stage: &Stage) -> Result<BTreeMap<String, String>> {
        stage
            .inputs
            .iter()
            .map(|(role, p)| Ok((role.clone(), hash_file(p)?)))
            .collect()
    }

    fn is_fresh(&self, stage: &Stage, inputs: &BTreeMap<String, String>, params: &str) -> Result<bool> {
        let Some(rec) = self.manifest.stages.get(stage.name) else {
            return Ok(false);
        };
        if &rec.inputs != inputs || rec.params != params {
            return Ok(false);
        }
        if rec.outputs.len() != stage.outputs.len() {
            return Ok(false);
        }
        for name in &stage.outputs {
            let p = self.path(name);
            match rec.outputs.get(*name) {
                Some(h) if p.is_file() && &hash_file(&p)? == h => {}
                _ => return Ok(false),
            }
        }
        Ok(true)
    }

    fn run(&mut self, stage: Stage, body: impl FnOnce(&Self) -> Result<()>) -> Result<()> {
        let name = stage.name;
        let wrap = |e: Error| Error::Stage {
            stage: name.to_string(),
            source: Box::new(e),
        };
        let inputs = Self::current_inputs(&stage).map_err(wrap)?;
        let params = hash_params(&stage.params);
        if self.is_fresh(&stage, &inputs, &params).map_err(wrap)? {
            info!("stage {name}: up to date");
            self.statuses.push(StageStatus {
                name: name.into(),
                cached: true,
            });
            return Ok(());
        }
        info!("stage {name}: running");
        let manifest_path = self.path(MANIFEST_FILE);
        self.manifest.stages.remove(name);
        if let Err(e) = body(self) {
            self.manifest.save(&manifest_path).map_err(wrap)?;
            return Err(wrap(e));
        }
        let outputs = stage
            .outputs
            .iter()
            .map(|o| Ok((o.to_string(), hash_file(&self.path(o))?)))
            .collect::<Result<_>>()
            .map_err(wrap)?;
        let completed_at = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        self.manifest.stages.insert(
            name.to_string(),
            StageRecord {
                inputs,
                params,
                outputs,
                completed_at,
            },
        );
        self.manifest.save(&manifest_path).map_err(wrap)?;
        self.statuses.push(StageStatus {
            name: name.into(),
            cached: false,
        });
        Ok(())
    }

    fn needs_sentence_embeddings(&self) -> bool {
        self.cfg.scorer.needs_embeddings()
    }

    fn embed_stage(&mut self, target: bool) -> Result<()> {
        let cfg = self.cfg;
        let side = if target { "target" } else { "source" };
        let corpus_path = if target { &cfg.target } else { &cfg.source };
        let mut inputs = vec![("corpus".to_string(), corpus_path.clone())];
        let uses_avg = cfg.embeddings.document == EmbeddingSpec::Avg
            || (self.needs_sentence_embeddings() && cfg.embeddings.sentence == EmbeddingSpec::Avg);
        if uses_avg {
            if let Some(p) = &cfg.word_vectors {
                inputs.push(("word_vectors".into(), p.clone()));
            }
        }
        if let Some(p) = &cfg.stopwords {
            inputs.push(("stopwords".into(), p.clone()));
        }
        let pick = |spec: &EmbeddingSpec| match spec {
            EmbeddingSpec::Avg => None,
            EmbeddingSpec::Precomputed { source, target: t } => Some(if target { t.clone() } else { source.clone() }),
        };
        if let Some(p) = pick(&cfg.embeddings.document) {
            inputs.push(("document_embeddings".into(), p));
        }
        if self.needs_sentence_embeddings() {
            if let Some(p) = pick(&cfg.embeddings.sentence) {
                inputs.push(("sentence_embeddings".into(), p));
            }
        }
        let (docs_file, sents_file) = if target {
            (TARGET_DOCS, TARGET_SENTS)
        } else {
            (SOURCE_DOCS, SOURCE_SENTS)
        };
        let mut outputs = vec![docs_file];
        if self.needs_sentence_embeddings() {
            outputs.push(sents_file);
        }
        let name = if target { "embed_target" } else { "embed_source" };
        let stage = Stage {
            name,
            inputs,
            params: json!({
                "side": side,
                "document": cfg.embeddings.document,
                "sentence": cfg.embeddings.sentence,
                "normalize": cfg.embeddings.normalize,
                "sentences": self.needs_sentence_embeddings(),
            }),
            outputs,
        };
        self.run(stage, |r| {
            let corpus = r.corpus(target)?;
            let embed = |spec: &EmbeddingSpec, level: Level, file: &str| -> Result<()> {
                let m = match pick(spec) {
                    None => embed_corpus(
                        &corpus.documents,
                        level,
                        &EmbeddingStrategy::Avg(r.vectors()?),
                        cfg.embeddings.normalize,
                    )?,
                    Some(p) => {
                        let pre = load_embeddings(&p)?;
                        embed_corpus(
                            &corpus.documents,
                            level,
                            &EmbeddingStrategy::Precomputed(&pre),
                            cfg.embeddings.normalize,
                        )?
                    }
                };
                save_embeddings(&m, &r.path(file))
            };
            embed(&cfg.embeddings.document, Level::Document, docs_file)?;
            if r.needs_sentence_embeddings() {
                embed(&cfg.embeddings.sentence, Level::Sentence, sents_file)?;
            }
            Ok(())
        })
    }

    fn build_scorer(&self) -> Result<Scorer> {
        Ok(match self.cfg.scorer {
            ScorerKind::Cosine => Scorer::Cosine,
            ScorerKind::Overlap => Scorer::Overlap,
            ScorerKind::Wmd => Scorer::Wmd(self.vectors()?.clone()),
            ScorerKind::Rwmd => Scorer::Rwmd(self.vectors()?.clone()),
            ScorerKind::Bm25 => {
                // collection statistics over the target sentences
                let docs: Vec<Vec<String>> = self.corpus(true)?.sentences().map(|s| s.content_tokens()).collect();
                let stats = Bm25Stats::from_collection(docs.iter().map(Vec::as_slice))
                    .with_params(self.cfg.bm25_k1, self.cfg.bm25_b);
                Scorer::Bm25(Arc::new(stats))
            }
        })
    }
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::file(path, e))?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::file(path, e))?))
}

/// Runs every stage in order, reusing stages whose recorded hashes match.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunSummary> {
    let errors: Vec<String> = validate_config(cfg)
        .into_iter()
        .filter(|f| f.severity == Severity::Error)
        .map(|f| format!("{}: {}", f.field, f.message))
        .collect();
    if !errors.is_empty() {
        return Err(Error::Config(errors.join("; ")));
    }
    fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::file(&cfg.output_dir, e))?;
    let mut manifest = Manifest::load(&cfg.output_dir.join(MANIFEST_FILE))?;
    let version = env!("CARGO_PKG_VERSION");
    if manifest.tool_version != version {
        manifest = Manifest {
            tool_version: version.to_string(),
            stages: BTreeMap::new(),
        };
    }
    let mut r = Runner {
        cfg,
        out: cfg.output_dir.clone(),
        manifest,
        statuses: Vec::new(),
        tokenizer: OnceLock::new(),
        vectors: OnceLock::new(),
        source: OnceLock::new(),
        target: OnceLock::new(),
    };

    r.embed_stage(false)?;
    r.embed_stage(true)?;

    let ann = cfg.ann_params();
    r.run(
        Stage {
            name: "index",
            inputs: vec![("target_docs".into(), r.path(TARGET_DOCS))],
            params: json!({ "ann": ann }),
            outputs: vec![TARGET_INDEX],
        },
        |r| {
            let m = load_embeddings(&r.path(TARGET_DOCS))?;
            AnnIndex::build(&m, ann)?.save(&r.path(TARGET_INDEX))
        },
    )?;

    r.run(
        Stage {
            name: "align_docs",
            inputs: vec![
                ("source_docs".into(), r.path(SOURCE_DOCS)),
                ("target_index".into(), r.path(TARGET_INDEX)),
            ],
            params: json!({ "k_doc": cfg.k_doc, "theta_d": cfg.theta_d }),
            outputs: vec![DOC_PAIRS],
        },
        |r| {
            let src = load_embeddings(&r.path(SOURCE_DOCS))?;
            let index = AnnIndex::load(&r.path(TARGET_INDEX))?;
            let pairs = align_documents(&src, &index, cfg.k_doc, cfg.theta_d)?;
            write_doc_pairs(&pairs, create(&r.path(DOC_PAIRS))?)
        },
    )?;

    let mut inputs = vec![
        ("doc_pairs".to_string(), r.path(DOC_PAIRS)),
        ("source".to_string(), cfg.source.clone()),
        ("target".to_string(), cfg.target.clone()),
    ];
    if cfg.scorer.needs_embeddings() {
        inputs.push(("source_sents".into(), r.path(SOURCE_SENTS)));
        inputs.push(("target_sents".into(), r.path(TARGET_SENTS)));
    }
    if cfg.scorer.needs_word_vectors() {
        if let Some(p) = &cfg.word_vectors {
            inputs.push(("word_vectors".into(), p.clone()));
        }
    }
    if let Some(p) = &cfg.stopwords {
        inputs.push(("stopwords".into(), p.clone()));
    }
    if let Some(p) = &cfg.filter.exclude {
        inputs.push(("exclude".into(), p.clone()));
    }
    r.run(
        Stage {
            name: "align_sents",
            inputs,
            params: json!({
                "k_sent": cfg.k_sent,
                "theta_s": cfg.theta_s,
                "scorer": cfg.scorer,
                "bm25": [cfg.bm25_k1, cfg.bm25_b],
                "filter": {
                    "min_overlap": cfg.filter.min_overlap,
                    "max_len_ratio": cfg.filter.max_len_ratio,
                    "mode": cfg.filter.mode,
                },
            }),
            outputs: vec![GROUPS_JSONL, GROUPS_TSV, ALIGN_STATS],
        },
        |r| {
            let doc_pairs = read_doc_pairs(BufReader::new(
                File::open(r.path(DOC_PAIRS)).map_err(|e| Error::file(r.path(DOC_PAIRS), e))?,
            ))?;
            let (src, tgt) = (r.corpus(false)?, r.corpus(true)?);
            let scorer = r.build_scorer()?;
            let (se, te): (Option<EmbeddingMatrix>, Option<EmbeddingMatrix>) = if cfg.scorer.needs_embeddings() {
                (
                    Some(load_embeddings(&r.path(SOURCE_SENTS))?),
                    Some(load_embeddings(&r.path(TARGET_SENTS))?),
                )
            } else {
                (None, None)
            };
            let mut policy = FilterPolicy {
                min_overlap: cfg.filter.min_overlap,
                max_len_ratio: cfg.filter.max_len_ratio,
                mode: cfg.filter.mode,
                ..FilterPolicy::default()
            };
            if let Some(p) = &cfg.filter.exclude {
                policy.load_exclusions(p)?;
            }
            policy.validate()?;
            let sa = SentAlignConfig {
                k: cfg.k_sent,
                theta_s: cfg.theta_s,
                policy,
            };
            let emb = SentenceEmbeddings {
                source: se.as_ref(),
                target: te.as_ref(),
            };
            let (groups, stats) = align_sentences_with_stats(&doc_pairs, src, tgt, &scorer, emb, &sa, r.tokenizer()?);
            write_groups_jsonl(&groups, create(&r.path(GROUPS_JSONL))?)?;
            write_groups_tsv(&groups, create(&r.path(GROUPS_TSV))?)?;
            write_json(
                &AlignStats {
                    source_documents: src.len(),
                    target_documents: tgt.len(),
                    sentences: stats,
                },
                &r.path(ALIGN_STATS),
            )
        },
    )?;

    let mut inputs = vec![
        ("groups".to_string(), r.path(GROUPS_JSONL)),
        ("align_stats".to_string(), r.path(ALIGN_STATS)),
        ("doc_pairs".to_string(), r.path(DOC_PAIRS)),
    ];
    if let Some(p) = &cfg.stopwords {
        inputs.push(("stopwords".into(), p.clone()));
    }
    r.run(
        Stage {
            name: "summary",
            inputs,
            params: json!({}),
            outputs: vec![SUMMARY],
        },
        |r| {
            let stats: AlignStats = read_json(&r.path(ALIGN_STATS))?;
            let groups = read_groups_jsonl(BufReader::new(
                File::open(r.path(GROUPS_JSONL)).map_err(|e| Error::file(r.path(GROUPS_JSONL), e))?,
            ))?;
            let doc_pairs = read_doc_pairs(BufReader::new(
                File::open(r.path(DOC_PAIRS)).map_err(|e| Error::file(r.path(DOC_PAIRS), e))?,
            ))?
            .len();
            let tok = r.tokenizer()?;
            let words = |t: &str| tok.tokenize(t).iter().filter(|x| !x.is_punct).count() as f64;
            let n = groups.len();
            let mean = |f: &dyn Fn(&crate::sent_align::AlignedGroup) -> f64| {
                if n == 0 {
                    0.0
                } else {
                    groups.iter().map(f).sum::<f64>() / n as f64
                }
            };
            let output = OutputStats {
                pairs: n,
                mean_source_tokens: mean(&|g| words(&g.source_text)),
                mean_target_tokens: mean(&|g| words(&g.target_text)),
                multi_sentence_source_pct: 100.0 * mean(&|g| (g.source_ids.len() > 1) as u8 as f64),
                multi_sentence_target_pct: 100.0 * mean(&|g| (g.target_ids.len() > 1) as u8 as f64),
            };
            write_json(
                &Summary {
                    source_documents: stats.source_documents,
                    target_documents: stats.target_documents,
                    doc_pairs,
                    sentences: stats.sentences,
                    output,
                },
                &r.path(SUMMARY),
            )
        },
    )?;

    Ok(RunSummary {
        summary: read_json(&r.path(SUMMARY))?,
        stages: r.statuses,
    })
}
