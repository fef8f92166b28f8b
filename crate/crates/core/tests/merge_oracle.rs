mod common;

use std::collections::{BTreeSet, HashSet};

use common::components;
use lha::sent_align::{merge_pairs, ScoredPair};
use proptest::prelude::*;

fn pairs_strategy() -> impl Strategy<Value = Vec<ScoredPair>> {
    prop::collection::btree_set((0usize..8, 0usize..8), 0..20).prop_flat_map(|cells| {
        let n = cells.len();
        prop::collection::vec(0.0f64..1.0, n).prop_map(move |scores| {
            cells
                .iter()
                .zip(scores)
                .map(|(&(source, target), score)| ScoredPair { source, target, score })
                .collect()
        })
    })
}

proptest! {
    #[test]
    fn merge_equals_connected_components(pairs in pairs_strategy()) {
        let groups = merge_pairs(&pairs);
        let edges: Vec<(usize, usize)> = pairs.iter().map(|p| (p.source, p.target)).collect();
        let got: BTreeSet<(Vec<usize>, Vec<usize>)> =
            groups.iter().map(|g| (g.source.clone(), g.target.clone())).collect();
        prop_assert_eq!(got, components(&edges));

        let mut seen_s = HashSet::new();
        let mut seen_t = HashSet::new();
        for g in &groups {
            prop_assert!(g.source.iter().all(|s| seen_s.insert(*s)));
            prop_assert!(g.target.iter().all(|t| seen_t.insert(*t)));
            let best = pairs
                .iter()
                .filter(|p| g.source.contains(&p.source))
                .map(|p| p.score)
                .fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(g.score, best);
        }

        let induced: Vec<ScoredPair> = groups
            .iter()
            .flat_map(|g| {
                g.source.iter().flat_map(move |&s| {
                    g.target.iter().map(move |&t| ScoredPair { source: s, target: t, score: g.score })
                })
            })
            .collect();
        let again: Vec<_> = merge_pairs(&induced).into_iter().map(|g| (g.source, g.target)).collect();
        let first: Vec<_> = groups.into_iter().map(|g| (g.source, g.target)).collect();
        prop_assert_eq!(again, first);
    }
}
