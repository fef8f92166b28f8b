use std::collections::{HashMap, HashSet};
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Outcome of a threshold sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: String,
    pub f1_max: f64,
    pub precision_at_max: f64,
    /// Share of gold positives retrieved at the best cut ("TP%").
    pub recall_at_max: f64,
    /// Similarity cut (inclusive) achieving `f1_max`; `null` when nothing was
    /// scored.
    pub best_threshold: Option<f64>,
    /// Document threshold of the best cut for two-level sweeps.
    pub doc_threshold: Option<f64>,
    pub positives_total: usize,
    pub retrieved_at_max: usize,
    pub true_positives_at_max: usize,
    pub candidates: usize,
    pub seed: Option<u64>,
    pub units: usize,
    pub elapsed_secs: f64,
    pub throughput_units_per_sec: f64,
}

impl EvalReport {
    fn empty(positives_total: usize, candidates: usize) -> Self {
        Self {
            task: String::new(),
            f1_max: 0.0,
            precision_at_max: 0.0,
            recall_at_max: 0.0,
            best_threshold: None,
            doc_threshold: None,
            positives_total,
            retrieved_at_max: 0,
            true_positives_at_max: 0,
            candidates,
            seed: None,
            units: 0,
            elapsed_secs: 0.0,
            throughput_units_per_sec: 0.0,
        }
    }

    /// Copy with wall-clock fields zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> Self {
        Self {
            elapsed_secs: 0.0,
            throughput_units_per_sec: 0.0,
            ..self.clone()
        }
    }

    pub(crate) fn set_timing(&mut self, units: usize, elapsed_secs: f64) {
        self.units = units;
        self.elapsed_secs = elapsed_secs;
        self.throughput_units_per_sec = if elapsed_secs > 0.0 {
            units as f64 / elapsed_secs
        } else {
            0.0
        };
    }

    /// Human-readable one-line summary.
    pub fn table_row(&self) -> String {
        let thr = |t: Option<f64>| t.map_or("-".to_string(), |v| format!("{v:.4}"));
        format!(
            "{:<14} F1max {:.4}  P {:.4}  TP {:>5.1}%  theta {}  theta_d {}  retrieved {}/{}  {:.0} units/s",
            self.task,
            self.f1_max,
            self.precision_at_max,
            100.0 * self.recall_at_max,
            thr(self.best_threshold),
            thr(self.doc_threshold),
            self.true_positives_at_max,
            self.retrieved_at_max,
            self.throughput_units_per_sec,
        )
    }
}

/// F1 from raw counts: 2 tp / (retrieved + positives).
pub fn f1_from_counts(tp: usize, retrieved: usize, positives: usize) -> f64 {
    if retrieved + positives == 0 {
        0.0
    } else {
        2.0 * tp as f64 / (retrieved + positives) as f64
    }
}

/// Sweeps every distinct score as an inclusive cut and returns the cut with
/// the highest F1, preferring the higher threshold on ties. Gold pairs
/// missing from `scored` count as misses. Repeated keys keep their highest
/// score.
pub fn f1max_sweep<K: Eq + Hash + Clone>(scored: &[(K, f64)], gold: &HashSet<K>) -> Result<EvalReport> {
    if gold.is_empty() {
        return Err(Error::Empty("gold positive set is empty".into()));
    }
    let mut best: HashMap<&K, f64> = HashMap::with_capacity(scored.len());
    for (k, s) in scored {
        let e = best.entry(k).or_insert(*s);
        if *s > *e {
            *e = *s;
        }
    }
    let mut items: Vec<(f64, bool)> = best
        .into_iter()
        .map(|(k, s)| (s, gold.contains(k)))
        .collect();
    items.sort_by(|a, b| b.0.total_cmp(&a.0));
    Ok(sweep_sorted(&items, gold.len()))
}

/// Sweep over `(score, is_positive)` sorted by descending score.
pub(crate) fn sweep_sorted(items: &[(f64, bool)], positives: usize) -> EvalReport {
    let mut report = EvalReport::empty(positives, items.len());
    let mut best_f1 = f64::NEG_INFINITY;
    let mut tp = 0usize;
    let mut k = 0usize;
    while k < items.len() {
        let cut = items[k].0;
        while k < items.len() && items[k].0 == cut {
            tp += items[k].1 as usize;
            k += 1;
        }
        let f1 = f1_from_counts(tp, k, positives);
        if f1 > best_f1 {
            best_f1 = f1;
            report.f1_max = f1;
            report.best_threshold = Some(cut);
            report.retrieved_at_max = k;
            report.true_positives_at_max = tp;
            report.precision_at_max = tp as f64 / k as f64;
            report.recall_at_max = tp as f64 / positives as f64;
        }
    }
    report
}
