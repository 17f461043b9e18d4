mod common;

use cccp_core::centrality::{flow_centrality, EndpointMode};
use common::{raw_tree, seeded_trees, RawTree};
use proptest::prelude::*;

fn check(raw: &RawTree, mode: EndpointMode) {
    let oracle = raw.centrality(mode == EndpointMode::Include);
    let got = flow_centrality(&raw.tree(), mode);
    assert_eq!(got.len(), oracle.len());
    for c in got {
        assert_eq!(c.value, oracle[c.author.as_str()], "{}", c.author.as_str());
    }
}

#[test]
fn matches_flow_enumeration_on_seeded_trees() {
    for raw in seeded_trees(200, 15, 7) {
        check(&raw, EndpointMode::Exclude);
        check(&raw, EndpointMode::Include);
    }
}

proptest! {
    #[test]
    fn matches_flow_enumeration(raw in raw_tree(15, 4)) {
        check(&raw, EndpointMode::Exclude);
        check(&raw, EndpointMode::Include);
    }

    #[test]
    fn including_endpoints_never_lowers(raw in raw_tree(15, 4)) {
        let tree = raw.tree();
        let ex = flow_centrality(&tree, EndpointMode::Exclude);
        let inc = flow_centrality(&tree, EndpointMode::Include);
        for (e, i) in ex.iter().zip(&inc) {
            prop_assert_eq!(&e.author, &i.author);
            prop_assert!((0.0..=1.0).contains(&e.value));
            prop_assert!(e.value <= i.value);
        }
    }
}
