//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet};

use lha::embeddings::{EmbeddingMatrix, WordVectorTable};
use minilp::{ComparisonOp, OptimizationDirection, Problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Normalized bag of in-vocabulary tokens: (vector, weight) per unique word.
pub fn nbow(tokens: &[String], table: &WordVectorTable) -> Vec<(Vec<f64>, f64)> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for t in tokens {
        if table.get(t).is_some() {
            *counts.entry(t).or_default() += 1;
        }
    }
    let total: usize = counts.values().sum();
    counts
        .into_iter()
        .map(|(w, c)| {
            let v = table.get(w).unwrap().iter().map(|&x| x as f64).collect();
            (v, c as f64 / total as f64)
        })
        .collect()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Word mover's distance as a linear program.
pub fn wmd_lp(x: &[(Vec<f64>, f64)], y: &[(Vec<f64>, f64)]) -> f64 {
    let mut p = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<Vec<_>> = x
        .iter()
        .map(|(a, _)| y.iter().map(|(b, _)| p.add_var(dist(a, b), (0.0, f64::INFINITY))).collect())
        .collect();
    for (i, (_, w)) in x.iter().enumerate() {
        let row: Vec<_> = vars[i].iter().map(|&v| (v, 1.0)).collect();
        p.add_constraint(&row, ComparisonOp::Eq, *w);
    }
    for (j, (_, w)) in y.iter().enumerate() {
        let col: Vec<_> = vars.iter().map(|r| (r[j], 1.0)).collect();
        p.add_constraint(&col, ComparisonOp::Eq, *w);
    }
    p.solve().expect("feasible transport").objective()
}

/// Random table of `vocab` words `w0..` in `dim` dimensions.
pub fn random_table(vocab: usize, dim: usize, seed: u64) -> WordVectorTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = WordVectorTable::new(dim);
    for i in 0..vocab {
        let v: Vec<f32> = (0..dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
        t.insert(&format!("w{i}"), &v).unwrap();
    }
    t
}

/// Random token list drawing at most `max_unique` distinct words.
pub fn random_tokens(rng: &mut ChaCha8Rng, vocab: usize, max_unique: usize) -> Vec<String> {
    let unique = rng.gen_range(1..=max_unique);
    let words: Vec<usize> = (0..unique).map(|_| rng.gen_range(0..vocab)).collect();
    let len = rng.gen_range(unique..=unique * 3);
    (0..len)
        .map(|k| format!("w{}", if k < unique { words[k] } else { words[rng.gen_range(0..unique)] }))
        .collect()
}

/// Connected components of a bipartite edge list by depth-first search,
/// as (sorted sources, sorted targets) sets.
pub fn components(edges: &[(usize, usize)]) -> BTreeSet<(Vec<usize>, Vec<usize>)> {
    let mut seen_s = HashSet::new();
    let mut seen_t = HashSet::new();
    let mut out = BTreeSet::new();
    for &(s0, _) in edges {
        if seen_s.contains(&s0) {
            continue;
        }
        let mut src = BTreeSet::new();
        let mut tgt = BTreeSet::new();
        let mut stack = vec![(true, s0)];
        seen_s.insert(s0);
        while let Some((is_src, n)) = stack.pop() {
            if is_src {
                src.insert(n);
                for &(s, t) in edges {
                    if s == n && seen_t.insert(t) {
                        stack.push((false, t));
                    }
                }
            } else {
                tgt.insert(n);
                for &(s, t) in edges {
                    if t == n && seen_s.insert(s) {
                        stack.push((true, s));
                    }
                }
            }
        }
        out.insert((src.into_iter().collect(), tgt.into_iter().collect()));
    }
    out
}

/// Best F1 over every distinct threshold by direct counting; ties go to the
/// higher threshold. Returns (f1, threshold, precision, recall).
pub fn brute_force_f1max(scored: &[(u32, f64)], gold: &HashSet<u32>) -> (f64, Option<f64>, f64, f64) {
    let mut cuts: Vec<f64> = scored.iter().map(|s| s.1).collect();
    cuts.sort_by(|a, b| b.total_cmp(a));
    cuts.dedup();
    let mut best = (f64::NEG_INFINITY, None, 0.0, 0.0);
    for cut in cuts {
        let retrieved = scored.iter().filter(|s| s.1 >= cut).count();
        let tp = scored.iter().filter(|s| s.1 >= cut && gold.contains(&s.0)).count();
        let f1 = 2.0 * tp as f64 / (retrieved + gold.len()) as f64;
        if f1 > best.0 {
            best = (f1, Some(cut), tp as f64 / retrieved as f64, tp as f64 / gold.len() as f64);
        }
    }
    if best.1.is_none() {
        best.0 = 0.0;
    }
    best
}

/// `n` unit vectors with i.i.d. Gaussian coordinates.
pub fn gaussian_unit(n: usize, dim: usize, seed: u64) -> EmbeddingMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f32>> = (0..n)
        .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let ids = (0..n).map(|i| format!("p{i}")).collect();
    EmbeddingMatrix::from_rows(ids, rows, true).unwrap()
}
