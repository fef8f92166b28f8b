mod common;

use common::{nbow, random_table, random_tokens, wmd_lp};
use lha::metrics::{rwmd, wmd};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn wmd_matches_lp_and_bounds_rwmd() {
    let table = random_table(40, 5, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..150 {
        let x = random_tokens(&mut rng, 40, 6);
        let y = random_tokens(&mut rng, 40, 6);
        let d = wmd(&x, &y, &table).unwrap();
        let oracle = wmd_lp(&nbow(&x, &table), &nbow(&y, &table));
        assert!((d - oracle).abs() < 1e-6, "{d} vs {oracle}");
        assert!(rwmd(&x, &y, &table).unwrap() <= d + 1e-12);
    }
}

#[test]
fn wmd_is_a_metric_on_bags() {
    let table = random_table(30, 4, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let x = random_tokens(&mut rng, 30, 5);
        let y = random_tokens(&mut rng, 30, 5);
        let z = random_tokens(&mut rng, 30, 5);
        let (xy, yz, xz) = (
            wmd(&x, &y, &table).unwrap(),
            wmd(&y, &z, &table).unwrap(),
            wmd(&x, &z, &table).unwrap(),
        );
        assert!(xz <= xy + yz + 1e-9);
        assert!((xy - wmd(&y, &x, &table).unwrap()).abs() < 1e-9);
        assert!(wmd(&x, &x, &table).unwrap().abs() < 1e-12);
    }
}

#[test]
fn wmd_scales_with_embedding_space() {
    let table = random_table(30, 4, 6);
    let scaled = table.scaled(2.5);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..50 {
        let x = random_tokens(&mut rng, 30, 6);
        let y = random_tokens(&mut rng, 30, 6);
        let a = wmd(&x, &y, &table).unwrap();
        let b = wmd(&x, &y, &scaled).unwrap();
        assert!((2.5 * a - b).abs() < 1e-5 * (1.0 + b), "{a} {b}");
    }
}
