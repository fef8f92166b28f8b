//! Deterministic synthetic alignment benchmark.
//!
//! Builds a vocabulary with topical word vectors, gold document pairs whose
//! target side contains simplified rewrites of some source sentences, and
//! pools of unrelated noise documents. Noise documents draw part of their
//! sentences from shared boilerplate templates, so that sentence pairs
//! across unrelated documents can look as similar as genuine rewrites.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::corpus::{sentence_id, Corpus, Document, Tokenizer};
use crate::embeddings::WordVectorTable;
use crate::error::{Error, Result};
use crate::evaluate::{EvalDataset, GoldPair, Label};
use crate::pipeline::PipelineConfig;

const STOPWORDS: &[&str] = &["the", "a", "of", "in", "and", "to", "was", "is", "by", "for", "with", "on"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub gold_pairs: usize,
    /// Noise documents per side.
    pub noise_docs: usize,
    pub topics: usize,
    pub words_per_topic: usize,
    pub general_words: usize,
    pub templates: usize,
    pub dim: usize,
    /// Probability that a gold source sentence gets a good rewrite.
    pub p_good: f64,
    /// Probability that it gets a loose (partial) rewrite instead.
    pub p_partial: f64,
    /// Share of template sentences in noise documents.
    pub p_template: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            gold_pairs: 46,
            noise_docs: 1000,
            topics: 200,
            words_per_topic: 30,
            general_words: 300,
            templates: 40,
            dim: 48,
            p_good: 0.3,
            p_partial: 0.12,
            p_template: 0.5,
            seed: 7,
        }
    }
}

/// A generated benchmark with the word vectors it was built from.
#[derive(Debug, Clone)]
pub struct SyntheticBenchmark {
    pub dataset: EvalDataset,
    pub vectors: WordVectorTable,
}

fn word(prefix: char, mut i: usize) -> String {
    const C: &[u8] = b"bdfgklmnprstvz";
    const V: &[u8] = b"aeiou";
    let mut s = String::from(prefix);
    loop {
        s.push(C[i % C.len()] as char);
        i /= C.len();
        s.push(V[i % V.len()] as char);
        i /= V.len();
        if i == 0 {
            break;
        }
    }
    s
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| {
            let x: f64 = StandardNormal.sample(rng);
            scale * x
        })
        .collect()
}

struct Generator {
    spec: SyntheticSpec,
    rng: ChaCha8Rng,
    topic_words: Vec<Vec<String>>,
    general: Vec<String>,
    templates: Vec<Vec<Option<String>>>,
}

impl Generator {
    fn vectors(&mut self) -> WordVectorTable {
        let dim = self.spec.dim;
        let unit = 1.0 / (dim as f64).sqrt();
        let mut table = WordVectorTable::new(dim);
        for t in 0..self.spec.topics {
            let center = gaussian(&mut self.rng, dim, unit);
            for w in 0..self.spec.words_per_topic {
                let noise = gaussian(&mut self.rng, dim, 0.7 * unit);
                let v: Vec<f32> = center.iter().zip(&noise).map(|(c, n)| (c + n) as f32).collect();
                table.insert(&self.topic_words[t][w], &v).unwrap();
            }
        }
        for w in 0..self.general.len() {
            let v: Vec<f32> = gaussian(&mut self.rng, dim, unit).into_iter().map(|x| x as f32).collect();
            table.insert(&self.general[w], &v).unwrap();
        }
        table
    }

    fn topic_word(&mut self, topic: usize) -> String {
        let w = self.rng.gen_range(0..self.spec.words_per_topic);
        self.topic_words[topic][w].clone()
    }

    fn general_word(&mut self) -> String {
        self.general.choose(&mut self.rng).unwrap().clone()
    }

    fn render(&mut self, content: &[String]) -> String {
        let mut words = Vec::with_capacity(content.len() * 2);
        for (i, w) in content.iter().enumerate() {
            if i > 0 && self.rng.gen_bool(0.35) {
                words.push(STOPWORDS.choose(&mut self.rng).unwrap().to_string());
            }
            words.push(w.clone());
        }
        let mut s = words.join(" ");
        if let Some(first) = s.get(..1) {
            s.replace_range(..1, &first.to_uppercase());
        }
        s.push('.');
        s
    }

    fn topical_content(&mut self, topic: usize) -> Vec<String> {
        let n = self.rng.gen_range(8..=15);
        (0..n)
            .map(|_| {
                if self.rng.gen_bool(0.5) {
                    self.topic_word(topic)
                } else {
                    self.general_word()
                }
            })
            .collect()
    }

    fn template_content(&mut self, topic: usize) -> Vec<String> {
        let t = self.rng.gen_range(0..self.templates.len());
        self.templates[t]
            .clone()
            .into_iter()
            .map(|slot| slot.unwrap_or_else(|| self.topic_word(topic)))
            .collect()
    }

    /// Keeps most words, swaps a few for topical synonyms, drops the rest.
    fn rewrite(&mut self, content: &[String], topic: usize, keep: f64) -> Vec<String> {
        let mut out = Vec::new();
        for w in content {
            let r: f64 = self.rng.gen();
            if r < keep {
                out.push(w.clone());
            } else if r < keep + 0.1 {
                out.push(self.topic_word(topic));
            }
        }
        if out.len() < 3 {
            out.extend(content.iter().take(3).cloned());
        }
        out
    }

    fn noise_doc(&mut self, id: String, tag: &str, tok: &Tokenizer) -> Document {
        let topic = self.rng.gen_range(0..self.spec.topics);
        let n = self.rng.gen_range(8..=16);
        let texts: Vec<String> = (0..n)
            .map(|_| {
                let c = if self.rng.gen_bool(self.spec.p_template) {
                    self.template_content(topic)
                } else {
                    self.topical_content(topic)
                };
                self.render(&c)
            })
            .collect();
        Document::build(id, tag, None, texts, tok)
    }
}

/// Generates the benchmark. Identical specs give identical output.
pub fn generate(spec: &SyntheticSpec, tokenizer: &Tokenizer) -> Result<SyntheticBenchmark> {
    let topic_words = (0..spec.topics)
        .map(|t| (0..spec.words_per_topic).map(|w| word('t', t * spec.words_per_topic + w)).collect())
        .collect();
    let general: Vec<String> = (0..spec.general_words).map(|w| word('g', w)).collect();
    let mut g = Generator {
        spec: *spec,
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
        topic_words,
        general,
        templates: Vec::new(),
    };
    let vectors = g.vectors();
    for _ in 0..spec.templates {
        let n = g.rng.gen_range(7..=11);
        let slots = [g.rng.gen_range(0..n), g.rng.gen_range(0..n)];
        let t = (0..n)
            .map(|i| (!slots.contains(&i)).then(|| g.general_word()))
            .collect();
        g.templates.push(t);
    }

    let mut src_docs = Vec::new();
    let mut tgt_docs = Vec::new();
    let mut doc_pairs = Vec::new();
    let mut labels = Vec::new();
    for p in 0..spec.gold_pairs {
        let topic = g.rng.gen_range(0..spec.topics);
        let (sid, tid) = (format!("src-{p:03}"), format!("tgt-{p:03}"));
        let n = g.rng.gen_range(14..=26);
        let mut src_texts = Vec::new();
        // target sentences with the source ordinal they rewrite
        let mut tgt: Vec<(String, Option<(usize, Label)>)> = Vec::new();
        for i in 0..n {
            let content = if g.rng.gen_bool(0.05) {
                g.template_content(topic)
            } else {
                g.topical_content(topic)
            };
            src_texts.push(g.render(&content));
            let r: f64 = g.rng.gen();
            if r < spec.p_good {
                let c = g.rewrite(&content, topic, 0.75);
                tgt.push((g.render(&c), Some((i, Label::Good))));
            } else if r < spec.p_good + spec.p_partial {
                let mut c = g.rewrite(&content, topic, 0.4);
                let extra = content.len() / 2;
                c.extend((0..extra).map(|_| g.topic_word(topic)));
                c.shuffle(&mut g.rng);
                let label = if g.rng.gen_bool(0.5) { Label::GoodPartial } else { Label::Partial };
                tgt.push((g.render(&c), Some((i, label))));
            }
            if g.rng.gen_bool(0.3) {
                let c = g.topical_content(topic);
                tgt.push((g.render(&c), None));
            }
        }
        let src_doc = Document::build(&sid, "source", None, &src_texts, tokenizer);
        let tgt_doc = Document::build(&tid, "target", None, tgt.iter().map(|x| &x.0), tokenizer);
        for (j, (_, origin)) in tgt.iter().enumerate() {
            if let Some((i, label)) = origin {
                labels.push(GoldPair {
                    source_key: sentence_id(&sid, *i),
                    target_key: sentence_id(&tid, j),
                    label: *label,
                });
            }
        }
        src_docs.push(src_doc);
        tgt_docs.push(tgt_doc);
        doc_pairs.push((sid, tid));
    }
    let noise_src: Vec<Document> = (0..spec.noise_docs)
        .map(|i| g.noise_doc(format!("noise-src-{i:04}"), "source", tokenizer))
        .collect();
    let noise_tgt: Vec<Document> = (0..spec.noise_docs)
        .map(|i| g.noise_doc(format!("noise-tgt-{i:04}"), "target", tokenizer))
        .collect();
    Ok(SyntheticBenchmark {
        dataset: EvalDataset {
            source: Corpus::new("source", src_docs)?,
            target: Corpus::new("target", tgt_docs)?,
            doc_pairs,
            labels,
            noise_source: Corpus::new("source", noise_src)?,
            noise_target: Corpus::new("target", noise_tgt)?,
        },
        vectors,
    })
}

/// Writes a three-documents-per-side corpus pair with axis-aligned word
/// vectors (animals, weather, finance) and returns a pipeline config that
/// reads them and writes into `dir/out`.
pub fn write_toy_pipeline(dir: &Path) -> Result<PipelineConfig> {
    const VECTORS: &[(&str, [f32; 3])] = &[
        ("cat", [1.0, 0.0, 0.0]),
        ("kitten", [1.0, 0.0, 0.0]),
        ("dog", [1.0, 0.0, 0.0]),
        ("purred", [1.0, 0.0, 0.0]),
        ("softly", [1.0, 0.0, 0.0]),
        ("rain", [0.0, 1.0, 0.0]),
        ("storm", [0.0, 1.0, 0.0]),
        ("heavy", [0.0, 1.0, 0.0]),
        ("fell", [0.0, 1.0, 0.0]),
        ("bank", [0.0, 0.0, 1.0]),
        ("money", [0.0, 0.0, 1.0]),
        ("paid", [0.0, 0.0, 1.0]),
    ];
    let source = r#"{"id":"sA","sentences":["The cat purred.","Heavy rain fell."]}
{"id":"sB","sentences":["The bank paid money."]}
{"id":"sC","sentences":["Dog and kitten."]}
"#;
    let target = r#"{"id":"tA","sentences":["Rain fell.","The cat purred softly."]}
{"id":"tB","sentences":["Money in the bank."]}
{"id":"tC","sentences":["Heavy storm."]}
"#;
    fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    let write = |name: &str, text: &str| -> Result<PathBuf> {
        let p = dir.join(name);
        fs::write(&p, text).map_err(|e| Error::file(&p, e))?;
        Ok(p)
    };
    let mut vectors = format!("{} 3\n", VECTORS.len());
    for (w, v) in VECTORS {
        vectors.push_str(&format!("{w} {} {} {}\n", v[0], v[1], v[2]));
    }
    Ok(PipelineConfig {
        source: write("source.jsonl", source)?,
        target: write("target.jsonl", target)?,
        word_vectors: Some(write("vectors.txt", &vectors)?),
        output_dir: dir.join("out"),
        k_doc: 1,
        k_sent: 1,
        theta_d: 0.5,
        theta_s: 0.65,
        ..PipelineConfig::default()
    })
}
