mod common;

use cccp_core::baseline::{baseline_tree_scores, zeta, BaselineParams};
use cccp_core::{validate_tree, AuthorId, Platform, Post};
use common::{raw_tree, seeded_trees, RawTree};
use proptest::prelude::*;

fn check_against_oracle(raw: &RawTree) {
    let tree = raw.tree();
    let oracle = raw.baseline(0.5, 0.25);
    let rows = baseline_tree_scores(&tree, &BaselineParams::default());
    assert_eq!(rows.len(), oracle.len());
    for row in rows {
        let want = oracle[row.author.as_str()];
        let got = row.score.unwrap();
        assert!((got - want).abs() <= 1e-9, "{}: {got} vs {want}", row.author.as_str());
    }
}

#[test]
fn matches_brute_force_on_seeded_trees() {
    for raw in seeded_trees(200, 15, 42) {
        check_against_oracle(&raw);
    }
}

proptest! {
    #[test]
    fn matches_brute_force(raw in raw_tree(15, 4)) {
        check_against_oracle(&raw);
    }

    #[test]
    fn scores_stay_in_unit_interval(raw in raw_tree(20, 4)) {
        for row in baseline_tree_scores(&raw.tree(), &BaselineParams::default()) {
            let s = row.score.unwrap();
            prop_assert!((0.0..=1.0).contains(&s));
        }
    }

    #[test]
    fn relabeling_authors_keeps_scores(raw in raw_tree(15, 4)) {
        let tree = raw.tree();
        let mut renamed = raw.clone();
        for a in renamed.author.iter_mut() {
            *a = format!("renamed-{a}");
        }
        let before = baseline_tree_scores(&tree, &BaselineParams::default());
        let after = baseline_tree_scores(&renamed.tree(), &BaselineParams::default());
        prop_assert_eq!(before.len(), after.len());
        for (b, a) in before.iter().zip(&after) {
            prop_assert_eq!(format!("renamed-{}", b.author.as_str()), a.author.as_str());
            prop_assert_eq!(b.score, a.score);
        }
    }
}

/// On a chain, moving the author's single later post further down never
/// raises zeta for the root.
#[test]
fn zeta_decreases_along_chains() {
    for n in 2..=20 {
        let mut last = f64::INFINITY;
        for at in 1..n {
            let posts: Vec<Post> = (0..n)
                .map(|i| Post {
                    id: format!("p{i:02}"),
                    parent_id: (i > 0).then(|| format!("p{:02}", i - 1)),
                    author: AuthorId::new(if i == at { "X" } else { "Y" }).unwrap(),
                    timestamp: 10 + i as u64,
                    conversation_id: "chain".into(),
                    platform: Platform::Synthetic,
                })
                .collect();
            let tree = validate_tree(posts).unwrap();
            let z = zeta(&tree, &AuthorId::new("X").unwrap(), "p00", &BaselineParams::default()).unwrap();
            assert!((z - libm::pow(0.5, at as f64 - 1.0)).abs() < 1e-15);
            assert!(z <= last);
            last = z;
        }
    }
}
