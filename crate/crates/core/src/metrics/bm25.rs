use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

pub const DEFAULT_K1: f64 = 1.2;
pub const DEFAULT_B: f64 = 0.75;

/// Collection statistics for Okapi BM25.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bm25Stats {
    pub doc_count: usize,
    pub doc_freq: HashMap<String, usize>,
    pub avg_doc_len: f64,
    pub k1: f64,
    pub b: f64,
}

impl Bm25Stats {
    /// Counts document frequencies over a collection of token multisets.
    /// Empty collections get `avg_doc_len = 1` so the length normalization
    /// stays defined.
    pub fn from_collection<'a, I, S>(docs: I) -> Self
    where
        I: IntoIterator<Item = &'a [S]>,
        S: AsRef<str> + 'a,
    {
        let mut doc_freq: HashMap<String, usize> = HashMap::new();
        let mut doc_count = 0usize;
        let mut total_len = 0usize;
        for doc in docs {
            doc_count += 1;
            total_len += doc.len();
            let unique: HashSet<&str> = doc.iter().map(AsRef::as_ref).collect();
            for t in unique {
                *doc_freq.entry(t.to_string()).or_default() += 1;
            }
        }
        let avg = if doc_count == 0 || total_len == 0 {
            1.0
        } else {
            total_len as f64 / doc_count as f64
        };
        Self {
            doc_count,
            doc_freq,
            avg_doc_len: avg,
            k1: DEFAULT_K1,
            b: DEFAULT_B,
        }
    }

    pub fn with_params(mut self, k1: f64, b: f64) -> Self {
        self.k1 = k1;
        self.b = b;
        self
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.doc_count as f64;
        let df = self.doc_freq.get(term).copied().unwrap_or(0) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }
}

/// BM25 score of `doc` for `query`. Each unique query term contributes once.
pub fn bm25<S: AsRef<str>>(query: &[S], doc: &[S], stats: &Bm25Stats) -> f64 {
    let mut tf: HashMap<&str, usize> = HashMap::new();
    for t in doc {
        *tf.entry(t.as_ref()).or_default() += 1;
    }
    let len_norm = 1.0 - stats.b + stats.b * doc.len() as f64 / stats.avg_doc_len;
    let unique: HashSet<&str> = query.iter().map(AsRef::as_ref).collect();
    unique
        .into_iter()
        .filter_map(|t| tf.get(t).map(|&f| (t, f as f64)))
        .map(|(t, f)| stats.idf(t) * f * (stats.k1 + 1.0) / (f + stats.k1 * len_norm))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stats(n: usize, df: &[(&str, usize)], avg: f64) -> Bm25Stats {
        Bm25Stats {
            doc_count: n,
            doc_freq: df.iter().map(|(t, d)| (t.to_string(), *d)).collect(),
            avg_doc_len: avg,
            k1: DEFAULT_K1,
            b: DEFAULT_B,
        }
    }

    #[test]
    fn absent_terms_contribute_nothing() {
        let s = stats(3, &[("a", 1)], 2.0);
        assert_eq!(bm25(&["z"], &["a", "b"], &s), 0.0);
        assert_eq!(bm25::<&str>(&[], &["a"], &s), 0.0);
    }

    #[test]
    fn single_term_value() {
        // hand evaluation: idf = ln(1 + 0.5/1.5) = ln(4/3); tf part = 2.2/2.2
        let s = stats(1, &[("a", 1)], 1.0);
        let v = bm25(&["a"], &["a"], &s);
        assert!((v - (4.0f64 / 3.0).ln()).abs() < 1e-12);
        assert!((v - 0.287_682).abs() < 1e-6);
    }

    #[test]
    fn collection_stats() {
        let docs: Vec<Vec<&str>> = vec![vec!["a", "a", "b"], vec!["b"]];
        let s = Bm25Stats::from_collection(docs.iter().map(Vec::as_slice));
        assert_eq!(s.doc_count, 2);
        assert_eq!(s.doc_freq["a"], 1);
        assert_eq!(s.doc_freq["b"], 2);
        assert_eq!(s.avg_doc_len, 2.0);
    }

    proptest! {
        #[test]
        fn monotone_in_tf(tf in 0usize..20, other in 0usize..10, n in 1usize..50, df in 0usize..50, avg in 0.5f64..30.0) {
            let df = df.min(n);
            let s = stats(n, &[("t", df)], avg);
            // keep |doc| fixed so only tf(t) changes
            let len = tf + 1 + other;
            let mk = |k: usize| {
                let mut d = vec!["t"; k];
                d.resize(len, "x");
                d
            };
            let lo = bm25(&["t"], &mk(tf), &s);
            let hi = bm25(&["t"], &mk(tf + 1), &s);
            prop_assert!(hi >= lo);
            prop_assert!(lo >= 0.0);
        }
    }
}
