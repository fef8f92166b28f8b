use std::collections::BTreeMap;

use super::transport;
use crate::embeddings::WordVectorTable;
use crate::error::{Error, Result};

/// Normalized bag of in-vocabulary words: unique tokens with their counts and
/// vectors.
#[derive(Debug, Clone)]
pub struct WordBag {
    pub words: Vec<String>,
    pub counts: Vec<u64>,
    vectors: Vec<Vec<f64>>,
    total: u64,
}

impl WordBag {
    /// Builds a bag from normalized tokens, dropping those without a vector.
    pub fn new<S: AsRef<str>>(tokens: &[S], table: &WordVectorTable) -> Result<Self> {
        let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
        for t in tokens {
            let t = t.as_ref();
            if table.get(t).is_some() {
                *counts.entry(t).or_default() += 1;
            }
        }
        if counts.is_empty() {
            return Err(Error::Unembeddable);
        }
        let mut bag = WordBag {
            words: Vec::with_capacity(counts.len()),
            counts: Vec::with_capacity(counts.len()),
            vectors: Vec::with_capacity(counts.len()),
            total: 0,
        };
        for (w, c) in counts {
            bag.words.push(w.to_string());
            bag.counts.push(c);
            bag.vectors
                .push(table.get(w).unwrap().iter().map(|&x| f64::from(x)).collect());
            bag.total += c;
        }
        Ok(bag)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Normalized term frequency of word `i`.
    pub fn weight(&self, i: usize) -> f64 {
        self.counts[i] as f64 / self.total as f64
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i]
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn ground_costs(x: &WordBag, y: &WordBag) -> Vec<f64> {
    let mut c = Vec::with_capacity(x.len() * y.len());
    for a in &x.vectors {
        for b in &y.vectors {
            c.push(euclidean(a, b));
        }
    }
    c
}

/// Exact word mover's distance between two bags.
pub fn wmd_bags(x: &WordBag, y: &WordBag) -> f64 {
    let cost = ground_costs(x, y);
    // scale both marginals to the common total x.total * y.total so the
    // problem is integral
    let supply: Vec<u64> = x.counts.iter().map(|c| c * y.total).collect();
    let demand: Vec<u64> = y.counts.iter().map(|c| c * x.total).collect();
    let plan = transport::solve(&supply, &demand, &cost);
    plan.cost / plan.total as f64
}

/// Relaxed word mover's distance: the larger of the two one-sided costs
/// where every word ships all of its mass to its nearest counterpart.
pub fn rwmd_bags(x: &WordBag, y: &WordBag) -> f64 {
    let cost = ground_costs(x, y);
    let m = y.len();
    let forward: f64 = (0..x.len())
        .map(|i| {
            let nearest = cost[i * m..(i + 1) * m]
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            x.weight(i) * nearest
        })
        .sum();
    let backward: f64 = (0..m)
        .map(|j| {
            let nearest = (0..x.len())
                .map(|i| cost[i * m + j])
                .fold(f64::INFINITY, f64::min);
            y.weight(j) * nearest
        })
        .sum();
    forward.max(backward)
}

pub fn wmd<S: AsRef<str>>(x: &[S], y: &[S], table: &WordVectorTable) -> Result<f64> {
    Ok(wmd_bags(&WordBag::new(x, table)?, &WordBag::new(y, table)?))
}

pub fn rwmd<S: AsRef<str>>(x: &[S], y: &[S], table: &WordVectorTable) -> Result<f64> {
    Ok(rwmd_bags(&WordBag::new(x, table)?, &WordBag::new(y, table)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> WordVectorTable {
        let mut t = WordVectorTable::new(2);
        t.insert("a", &[0.0, 0.0]).unwrap();
        t.insert("b", &[3.0, 4.0]).unwrap();
        t.insert("c", &[1.0, 0.0]).unwrap();
        t.insert("d", &[0.0, 2.0]).unwrap();
        t
    }

    #[test]
    fn identical_is_zero() {
        let t = table();
        let x = ["a", "b", "b", "c"];
        assert_eq!(wmd(&x, &x, &t).unwrap(), 0.0);
        assert_eq!(rwmd(&x, &x, &t).unwrap(), 0.0);
    }

    #[test]
    fn single_tokens_are_euclidean() {
        let t = table();
        assert!((wmd(&["a"], &["b"], &t).unwrap() - 5.0).abs() < 1e-12);
        assert!((rwmd(&["a"], &["b"], &t).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn oov_only_is_unembeddable() {
        let t = table();
        assert!(matches!(wmd(&["zz"], &["a"], &t), Err(Error::Unembeddable)));
        assert!(matches!(rwmd(&["a"], &[] as &[&str], &t), Err(Error::Unembeddable)));
    }

    #[test]
    fn duplicate_tokens_carry_mass() {
        let t = table();
        // x = {a: 2/3, c: 1/3}, y = {c}: all mass goes to c
        let d = wmd(&["a", "a", "c"], &["c"], &t).unwrap();
        assert!((d - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn hand_solved_two_by_two() {
        let t = table();
        // x = {a, b}, y = {c, d}: a->c 1, a->d 2, b->c sqrt(20), b->d sqrt(13)
        // plans: a->c,b->d = 1+sqrt13 ; a->d,b->c = 2+sqrt20
        let d = wmd(&["a", "b"], &["c", "d"], &t).unwrap();
        assert!((d - (1.0 + 13f64.sqrt()) / 2.0).abs() < 1e-12);
        let r = rwmd(&["a", "b"], &["c", "d"], &t).unwrap();
        assert!(r <= d + 1e-12);
    }
}
