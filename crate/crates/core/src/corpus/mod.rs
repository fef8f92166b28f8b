//! Corpus ingestion: JSON Lines documents, sentence segmentation and
//! tokenization.
//!
//! One document per line:
//!
//! ```text
//! {"id": "d1", "title": "Optional", "sentences": ["A b.", "C d."]}
//! {"id": "d2", "text": "Raw text. It gets segmented."}
//! ```

mod split;
mod tokenize;

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub use split::split_sentences;
pub use tokenize::{content_tokens, Token, Tokenizer, DEFAULT_STOPWORDS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sentence {
    pub doc_id: String,
    pub ordinal: usize,
    pub text: String,
    pub tokens: Vec<Token>,
}

impl Sentence {
    /// Unit id used in embedding matrices: `"<doc_id>#<ordinal>"`.
    pub fn unit_id(&self) -> String {
        sentence_id(&self.doc_id, self.ordinal)
    }

    pub fn content_tokens(&self) -> Vec<String> {
        content_tokens(&self.tokens)
    }

    /// Number of non-punctuation tokens.
    pub fn word_count(&self) -> usize {
        self.tokens.iter().filter(|t| !t.is_punct).count()
    }
}

pub fn sentence_id(doc_id: &str, ordinal: usize) -> String {
    format!("{doc_id}#{ordinal}")
}

/// Splits a `"<doc_id>#<ordinal>"` unit id. Document ids may themselves
/// contain `#`; the last one separates the ordinal.
pub fn parse_sentence_id(id: &str) -> Option<(&str, usize)> {
    let (doc, ord) = id.rsplit_once('#')?;
    Some((doc, ord.parse().ok()?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub dataset_tag: String,
    pub title: Option<String>,
    pub sentences: Vec<Sentence>,
}

impl Document {
    pub fn build(
        doc_id: impl Into<String>,
        dataset_tag: impl Into<String>,
        title: Option<String>,
        sentence_texts: impl IntoIterator<Item = impl AsRef<str>>,
        tokenizer: &Tokenizer,
    ) -> Self {
        let doc_id = doc_id.into();
        let sentences = sentence_texts
            .into_iter()
            .map(|t| t.as_ref().trim().to_string())
            .filter(|t| !t.is_empty())
            .enumerate()
            .map(|(ordinal, text)| Sentence {
                doc_id: doc_id.clone(),
                ordinal,
                tokens: tokenizer.tokenize(&text),
                text,
            })
            .collect();
        Document {
            doc_id,
            dataset_tag: dataset_tag.into(),
            title,
            sentences,
        }
    }

    /// All tokens of the document in order.
    pub fn tokens(&self) -> impl Iterator<Item = &Token> {
        self.sentences.iter().flat_map(|s| s.tokens.iter())
    }
}

/// Field names used when reading corpus records.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSchema {
    pub id_field: String,
    pub title_field: String,
    pub text_field: String,
    pub sentences_field: String,
}

impl Default for CorpusSchema {
    fn default() -> Self {
        Self {
            id_field: "id".into(),
            title_field: "title".into(),
            text_field: "text".into(),
            sentences_field: "sentences".into(),
        }
    }
}

/// Streaming reader over a JSONL corpus. Yields documents in file order and
/// keeps only the set of seen ids in memory.
pub struct CorpusReader<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
    dataset_tag: String,
    schema: CorpusSchema,
    tokenizer: Tokenizer,
    seen: HashSet<String>,
    failed: bool,
}

impl<R: BufRead> CorpusReader<R> {
    pub fn new(reader: R, dataset_tag: &str, schema: CorpusSchema, tokenizer: Tokenizer) -> Self {
        Self {
            lines: reader.lines(),
            line_no: 0,
            dataset_tag: dataset_tag.to_string(),
            schema,
            tokenizer,
            seen: HashSet::new(),
            failed: false,
        }
    }

    fn parse_record(&mut self, line: &str) -> Result<Document> {
        let n = self.line_no;
        let value: Value =
            serde_json::from_str(line).map_err(|e| Error::parse(n, format!("invalid JSON: {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::parse(n, "record is not a JSON object"))?;
        let id = match obj.get(&self.schema.id_field) {
            Some(Value::String(s)) if !s.is_empty() => s.clone(),
            Some(Value::Number(num)) => num.to_string(),
            _ => {
                return Err(Error::parse(
                    n,
                    format!("missing or empty {:?} field", self.schema.id_field),
                ))
            }
        };
        let title = match obj.get(&self.schema.title_field) {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => return Err(Error::parse(n, "title must be a string")),
        };
        let texts: Vec<String> = match (
            obj.get(&self.schema.sentences_field),
            obj.get(&self.schema.text_field),
        ) {
            (Some(Value::Array(items)), _) => items
                .iter()
                .map(|v| {
                    v.as_str()
                        .map(str::to_string)
                        .ok_or_else(|| Error::parse(n, "sentences must be strings"))
                })
                .collect::<Result<_>>()?,
            (Some(_), _) => return Err(Error::parse(n, "sentences must be an array")),
            (None, Some(Value::String(text))) => split_sentences(text),
            (None, Some(_)) => return Err(Error::parse(n, "text must be a string")),
            (None, None) => {
                return Err(Error::parse(
                    n,
                    format!(
                        "record needs {:?} or {:?}",
                        self.schema.text_field, self.schema.sentences_field
                    ),
                ))
            }
        };
        let doc = Document::build(id, &self.dataset_tag, title, texts, &self.tokenizer);
        if doc.sentences.is_empty() {
            return Err(Error::EmptyDocument {
                line: n,
                doc_id: doc.doc_id,
            });
        }
        if !self.seen.insert(doc.doc_id.clone()) {
            return Err(Error::DuplicateId {
                line: n,
                doc_id: doc.doc_id,
                dataset: self.dataset_tag.clone(),
            });
        }
        Ok(doc)
    }
}

impl<R: BufRead> Iterator for CorpusReader<R> {
    type Item = Result<Document>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            let line = match self.lines.next()? {
                Ok(line) => line,
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e.into()));
                }
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            let res = self.parse_record(&line);
            if res.is_err() {
                self.failed = true;
            }
            return Some(res);
        }
    }
}

/// Opens a JSONL corpus file as a document stream.
pub fn load_corpus(
    path: &Path,
    dataset_tag: &str,
    schema: CorpusSchema,
    tokenizer: Tokenizer,
) -> Result<CorpusReader<BufReader<File>>> {
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    Ok(CorpusReader::new(
        BufReader::new(file),
        dataset_tag,
        schema,
        tokenizer,
    ))
}

/// Writes documents as JSONL with pre-split sentences.
pub fn write_corpus<'a, W: Write>(
    docs: impl IntoIterator<Item = &'a Document>,
    mut out: W,
) -> Result<()> {
    #[derive(Serialize)]
    struct Record<'a> {
        id: &'a str,
        #[serde(skip_serializing_if = "Option::is_none")]
        title: Option<&'a str>,
        sentences: Vec<&'a str>,
    }
    for doc in docs {
        let rec = Record {
            id: &doc.doc_id,
            title: doc.title.as_deref(),
            sentences: doc.sentences.iter().map(|s| s.text.as_str()).collect(),
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// A fully loaded corpus with id lookup.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub dataset_tag: String,
    pub documents: Vec<Document>,
    index: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(dataset_tag: impl Into<String>, documents: Vec<Document>) -> Result<Self> {
        let mut index = HashMap::with_capacity(documents.len());
        for (i, d) in documents.iter().enumerate() {
            if index.insert(d.doc_id.clone(), i).is_some() {
                return Err(Error::DuplicateUnit(d.doc_id.clone()));
            }
        }
        Ok(Self {
            dataset_tag: dataset_tag.into(),
            documents,
            index,
        })
    }

    pub fn read(path: &Path, dataset_tag: &str, tokenizer: &Tokenizer) -> Result<Self> {
        let docs = load_corpus(path, dataset_tag, CorpusSchema::default(), tokenizer.clone())?
            .collect::<Result<Vec<_>>>()?;
        Self::new(dataset_tag, docs)
    }

    pub fn document(&self, doc_id: &str) -> Option<&Document> {
        self.index.get(doc_id).map(|&i| &self.documents[i])
    }

    pub fn sentence(&self, unit_id: &str) -> Option<&Sentence> {
        let (doc, ord) = parse_sentence_id(unit_id)?;
        self.document(doc)?.sentences.get(ord)
    }

    pub fn sentences(&self) -> impl Iterator<Item = &Sentence> {
        self.documents.iter().flat_map(|d| d.sentences.iter())
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn read(input: &str) -> Vec<Result<Document>> {
        CorpusReader::new(
            Cursor::new(input.to_string()),
            "source",
            CorpusSchema::default(),
            Tokenizer::default(),
        )
        .collect()
    }

    #[test]
    fn presplit_record() {
        let docs = read(r#"{"id":"d1","sentences":["A b.","C d."]}"#);
        let doc = docs[0].as_ref().unwrap();
        assert_eq!(doc.sentences.len(), 2);
        assert_eq!(doc.sentences[0].ordinal, 0);
        assert_eq!(doc.sentences[1].ordinal, 1);
        assert_eq!(doc.sentences[1].unit_id(), "d1#1");
        assert_eq!(doc.dataset_tag, "source");
    }

    #[test]
    fn raw_text_is_segmented() {
        let docs = read(r#"{"id":"d1","title":"T","text":"A b. C d."}"#);
        let doc = docs[0].as_ref().unwrap();
        assert_eq!(doc.title.as_deref(), Some("T"));
        let texts: Vec<_> = doc.sentences.iter().map(|s| s.text.as_str()).collect();
        assert_eq!(texts, ["A b.", "C d."]);
    }

    #[test]
    fn empty_document_is_error() {
        let docs = read(r#"{"id":"d1","text":""}"#);
        assert!(matches!(&docs[0], Err(Error::EmptyDocument { doc_id, line: 1 }) if doc_id == "d1"));
    }

    #[test]
    fn duplicate_id_is_error() {
        let docs = read("{\"id\":\"d1\",\"text\":\"x\"}\n{\"id\":\"d1\",\"text\":\"y\"}\n");
        assert!(docs[0].is_ok());
        let err = docs[1].as_ref().unwrap_err();
        assert!(matches!(err, Error::DuplicateId { line: 2, .. }));
        assert!(err.to_string().contains("\"d1\""));
    }

    #[test]
    fn malformed_record_reports_line() {
        let docs = read("{\"id\":\"a\",\"text\":\"x\"}\n\n{not json\n");
        assert_eq!(docs.len(), 2);
        assert!(matches!(docs[1], Err(Error::Parse { line: 3, .. })));
        let docs = read("{\"text\":\"x\"}\n");
        assert!(matches!(docs[0], Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn sentence_ids_round_trip() {
        assert_eq!(parse_sentence_id("a#b#3"), Some(("a#b", 3)));
        assert_eq!(parse_sentence_id("nohash"), None);
    }

    #[test]
    fn write_then_read_is_identity() {
        let input = "{\"id\":\"d1\",\"title\":\"T\",\"text\":\"Hello there. General Kenobi!\"}\n\
                     {\"id\":\"d2\",\"sentences\":[\"  padded  \",\"x\"]}\n";
        let docs: Vec<Document> = read(input).into_iter().map(Result::unwrap).collect();
        let mut buf = Vec::new();
        write_corpus(&docs, &mut buf).unwrap();
        let again: Vec<Document> = read(std::str::from_utf8(&buf).unwrap())
            .into_iter()
            .map(Result::unwrap)
            .collect();
        assert_eq!(docs, again);
    }
}
