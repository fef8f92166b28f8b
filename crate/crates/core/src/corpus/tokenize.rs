use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bundled English stopword list, one token per line.
pub const DEFAULT_STOPWORDS: &str = include_str!("stopwords_en.txt");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub normalized: String,
    pub is_punct: bool,
    pub is_number: bool,
    pub is_stopword: bool,
}

impl Token {
    /// True when the token survives content filtering (not punctuation,
    /// number or stopword).
    pub fn is_content(&self) -> bool {
        !(self.is_punct || self.is_number || self.is_stopword)
    }
}

/// Whitespace + punctuation tokenizer with a stopword inventory.
///
/// Word tokens are maximal runs of word characters. Apostrophes and hyphens
/// stay inside a token when both neighbours are word characters; `.` and `,`
/// stay inside when both neighbours are digits (`3.5`, `1,000`). Every other
/// punctuation character is a token of its own.
#[derive(Debug, Clone)]
pub struct Tokenizer {
    stopwords: Arc<HashSet<String>>,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Self::from_stopword_text(DEFAULT_STOPWORDS)
    }
}

impl Tokenizer {
    pub fn new<I, S>(stopwords: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let set = stopwords
            .into_iter()
            .map(|s| s.as_ref().trim().to_lowercase())
            .filter(|s| !s.is_empty())
            .collect();
        Self {
            stopwords: Arc::new(set),
        }
    }

    pub fn from_stopword_text(text: &str) -> Self {
        Self::new(text.lines().filter(|l| !l.trim_start().starts_with('#')))
    }

    pub fn from_stopword_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Ok(Self::from_stopword_text(&text))
    }

    pub fn is_stopword(&self, normalized: &str) -> bool {
        self.stopwords.contains(normalized)
    }

    pub fn token(&self, surface: &str) -> Token {
        let normalized = surface.to_lowercase();
        let is_punct = surface.chars().all(|c| !is_word_char(c));
        let is_number = is_number(surface);
        let is_stopword = self.is_stopword(&normalized);
        Token {
            surface: surface.to_string(),
            normalized,
            is_punct,
            is_number,
            is_stopword,
        }
    }

    pub fn tokenize(&self, text: &str) -> Vec<Token> {
        split_surfaces(text)
            .into_iter()
            .map(|s| self.token(s))
            .collect()
    }
}

/// Normalized content tokens of a token sequence, multiplicity preserved.
pub fn content_tokens(tokens: &[Token]) -> Vec<String> {
    tokens
        .iter()
        .filter(|t| t.is_content())
        .map(|t| t.normalized.clone())
        .collect()
}

fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2010}'..='\u{205E}' // general punctuation block
                | '\u{00A1}' | '\u{00A7}' | '\u{00AB}' | '\u{00B6}' | '\u{00B7}' | '\u{00BB}'
                | '\u{00BF}' | '\u{00A9}' | '\u{00AE}' | '\u{00B0}' | '\u{00B1}' | '\u{00D7}'
                | '\u{00F7}' | '\u{3001}' | '\u{3002}' | '\u{300C}'..='\u{300F}'
                | '\u{FF01}' | '\u{FF0C}' | '\u{FF1A}' | '\u{FF1B}' | '\u{FF1F}'
        )
}

fn is_word_char(c: char) -> bool {
    !c.is_whitespace() && !c.is_control() && !is_punctuation(c)
}

fn is_number(surface: &str) -> bool {
    let mut digits = 0;
    for c in surface.chars() {
        if c.is_numeric() {
            digits += 1;
        } else if !matches!(c, '.' | ',') {
            return false;
        }
    }
    digits > 0
}

fn joins_inside(prev: char, c: char, next: char) -> bool {
    match c {
        '\'' | '\u{2019}' | '-' => is_word_char(prev) && is_word_char(next),
        '.' | ',' => prev.is_numeric() && next.is_numeric(),
        _ => false,
    }
}

fn split_surfaces(text: &str) -> Vec<&str> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (k, &(pos, c)) in chars.iter().enumerate() {
        if is_word_char(c) {
            if start.is_none() {
                start = Some(pos);
            }
            continue;
        }
        if let Some(s) = start {
            let prev = chars[k - 1].1;
            let next = chars.get(k + 1).map(|&(_, n)| n);
            if next.is_some_and(|n| joins_inside(prev, c, n)) {
                continue;
            }
            out.push(&text[s..pos]);
            start = None;
        }
        if !c.is_whitespace() && !c.is_control() {
            out.push(&text[pos..pos + c.len_utf8()]);
        }
    }
    if let Some(s) = start {
        out.push(&text[s..]);
    }
    out
}
