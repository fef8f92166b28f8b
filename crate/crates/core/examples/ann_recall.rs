//! Measures recall@10 of the default ANN parameters against exhaustive search.
//!
//! cargo run --release -p lha-core --example ann_recall -- [points] [dim] [trees] [search_k]

use std::collections::HashSet;
use std::time::Instant;

use lha::ann_index::{exact_knn, AnnIndex, AnnParams};
use lha::embeddings::EmbeddingMatrix;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

fn gaussian_unit(n: usize, dim: usize, seed: u64) -> EmbeddingMatrix {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f32>> = (0..n)
        .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let ids = (0..n).map(|i| format!("p{i}")).collect();
    EmbeddingMatrix::from_rows(ids, rows, true).unwrap()
}

fn main() {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().unwrap()).collect();
    let n = args.first().copied().unwrap_or(50_000);
    let dim = args.get(1).copied().unwrap_or(32);
    let mut params = AnnParams::default();
    if let Some(&t) = args.get(2) {
        params.n_trees = t;
    }
    if let Some(&s) = args.get(3) {
        params.search_k = s;
    }
    let data = gaussian_unit(n, dim, 1);
    let probes = gaussian_unit(1000, dim, 2);
    let t = Instant::now();
    let idx = AnnIndex::build(&data, params).unwrap();
    println!("build {:?} ({params:?})", t.elapsed());
    let t = Instant::now();
    let mut hit = 0usize;
    for q in probes.rows() {
        let approx: HashSet<String> = idx.query(q, 10).unwrap().into_iter().map(|n| n.unit_id).collect();
        hit += exact_knn(&data, q, 10)
            .unwrap()
            .into_iter()
            .filter(|n| approx.contains(&n.unit_id))
            .count();
    }
    println!("recall@10 {:.4} in {:?}", hit as f64 / 10_000.0, t.elapsed());
}
