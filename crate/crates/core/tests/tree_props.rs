mod common;

use cccp_core::{validate_tree, PathMode, Platform};
use common::{raw_tree, RawTree};
use proptest::prelude::*;

proptest! {
    #[test]
    fn flows_match_dfs_oracle(raw in raw_tree(12, 4)) {
        let tree = raw.tree();
        let flows: Vec<Vec<String>> = tree
            .flows()
            .iter()
            .map(|f| f.ids(&tree).into_iter().map(String::from).collect())
            .collect();
        prop_assert_eq!(&flows, &raw.flows());
        prop_assert_eq!(flows.len(), tree.leaf_count());
        for f in &flows {
            prop_assert_eq!(&f[0], &raw.ids[0]);
        }
        for id in &raw.ids {
            prop_assert!(flows.iter().any(|f| f.contains(id)));
        }
    }

    #[test]
    fn path_distance_matches_bfs(raw in raw_tree(20, 3)) {
        let tree = raw.tree();
        for (a, id_a) in raw.ids.iter().enumerate() {
            let bfs = raw.bfs(a);
            for (b, id_b) in raw.ids.iter().enumerate() {
                prop_assert_eq!(tree.path_distance(id_a, id_b).unwrap(), bfs[b]);
            }
        }
    }

    #[test]
    fn path_distance_is_a_metric(raw in raw_tree(20, 3)) {
        let tree = raw.tree();
        let n = tree.len();
        for a in 0..n {
            for b in 0..n {
                let d = tree.path_distance_at(a, b);
                prop_assert_eq!(d, tree.path_distance_at(b, a));
                prop_assert_eq!(d == 0, a == b);
                for c in 0..n {
                    prop_assert!(d <= tree.path_distance_at(a, c) + tree.path_distance_at(c, b));
                }
            }
        }
    }

    #[test]
    fn root_distance_is_path_distance_plus_one(raw in raw_tree(20, 3)) {
        let tree = raw.tree();
        for v in 0..tree.len() {
            prop_assert_eq!(tree.root_distance_at(v), tree.path_distance_at(tree.root(), v) + 1);
        }
    }

    #[test]
    fn ancestor_mode_agrees_on_lineage(raw in raw_tree(15, 3)) {
        let tree = raw.tree();
        for a in 0..tree.len() {
            for b in 0..tree.len() {
                let related = tree.is_ancestor_or_self(a, b) || tree.is_ancestor_or_self(b, a);
                let d = PathMode::AncestorOnly.distance(&tree, a, b);
                prop_assert_eq!(d.is_some(), related);
                if let Some(d) = d {
                    prop_assert_eq!(d, tree.path_distance_at(a, b));
                }
            }
        }
    }

    #[test]
    fn validation_ignores_input_order(raw in raw_tree(15, 3), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut posts = raw.posts("c", Platform::Reddit);
        let sorted = validate_tree(posts.clone()).unwrap();
        posts.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(validate_tree(posts).unwrap(), sorted);
    }

    #[test]
    fn prefix_is_sorted_by_time_then_id(raw in raw_tree(15, 3), k in 0usize..16) {
        let tree = raw.tree();
        let k = k.min(tree.len());
        let prefix = tree.chronological_prefix(k);
        prop_assert_eq!(prefix.len(), k);
        for w in prefix.windows(2) {
            prop_assert!((w[0].timestamp, &w[0].id) < (w[1].timestamp, &w[1].id));
        }
    }
}

#[test]
fn five_chain_leaf_has_root_distance_five() {
    let raw = RawTree::build(&[0, 1, 2, 3], &[0, 1, 0, 1, 0], &[1, 1, 1, 1]);
    let tree = raw.tree();
    assert_eq!(tree.root_distance("n004").unwrap(), 5);
    assert_eq!(raw.bfs(0)[4] + 1, 5);
}
