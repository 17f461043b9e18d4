mod common;

use cccp_core::rb::{build_pairs, extract_distance_embedding, rb_tree_scores, train_rb, DistanceBucket, PairOptions, PositiveRule, RbConfig};
use cccp_core::synth::{generate_synthetic, SynthConfig};
use cccp_core::{Corpus, PathMode};
use common::{raw_tree, RawTree};
use proptest::prelude::*;

fn earlier_foreign(raw: &RawTree, i: usize) -> impl Iterator<Item = usize> + '_ {
    (0..raw.len()).filter(move |&j| raw.ts[j] < raw.ts[i] && raw.author[j] != raw.author[i])
}

proptest! {
    #[test]
    fn pair_counts_follow_the_rule(raw in raw_tree(15, 4)) {
        let tree = raw.tree();
        let expected: usize = (0..raw.len()).map(|i| earlier_foreign(&raw, i).count()).sum();
        let parent_pos = (1..raw.len())
            .filter(|&i| raw.author[raw.parent[i].unwrap()] != raw.author[i])
            .count();
        let ancestor_pos: usize = (1..raw.len())
            .map(|i| {
                let mut n = 0;
                let mut cur = raw.parent[i];
                while let Some(p) = cur {
                    n += usize::from(raw.author[p] != raw.author[i]);
                    cur = raw.parent[p];
                }
                n
            })
            .sum();

        let parent = build_pairs(&tree, &PairOptions::default());
        prop_assert_eq!(parent.len(), expected);
        prop_assert_eq!(parent.iter().filter(|p| p.label).count(), parent_pos);
        for p in &parent {
            prop_assert_eq!(p.label, p.reply_distance == Some(1) && tree.parent(p.v_i) == Some(p.v_j));
            prop_assert!(tree.timestamp(p.v_j) < tree.timestamp(p.v_i));
            prop_assert_ne!(tree.author(p.v_j), tree.author(p.v_i));
        }

        let anc = build_pairs(&tree, &PairOptions { positives: PositiveRule::Ancestors, path_mode: PathMode::Undirected });
        prop_assert_eq!(anc.len(), expected);
        prop_assert_eq!(anc.iter().filter(|p| p.label).count(), ancestor_pos);
    }
}

fn separable_corpus() -> Corpus {
    generate_synthetic(&SynthConfig {
        n_conversations: 60,
        size_range: (5, 20),
        root_attachment_bias: 0.3,
        revisit_rate: 0.3,
        seed: 3,
        ..SynthConfig::default()
    })
    .unwrap()
}

#[test]
fn separable_corpus_is_learned() {
    let corpus = separable_corpus();
    for tree in corpus.trees() {
        for p in build_pairs(tree, &PairOptions::default()) {
            assert_eq!(p.label, p.reply_distance == Some(1));
        }
    }
    let (model, diag) = train_rb(&corpus, &RbConfig::default()).unwrap();
    assert!(diag.precision() >= 0.95, "precision {}", diag.precision());

    let emb = extract_distance_embedding(&model).unwrap();
    assert_eq!(emb[0].0, DistanceBucket::Exact(1));
    assert_eq!(emb[1].0, DistanceBucket::Exact(2));
    assert!(emb[0].1 > emb[1].1);

    // Every later post replies to its only predecessor by someone else.
    let duo = RawTree::build(&[0], &[0, 1], &[5]).tree();
    let rows = rb_tree_scores(&duo, &model, &PairOptions::default()).unwrap();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].score.unwrap() >= 0.9);
}

#[test]
fn training_is_deterministic() {
    let corpus = separable_corpus();
    let config = RbConfig { train: cccp_core::nn::TrainConfig { epochs: 5, ..RbConfig::default().train }, ..RbConfig::default() };
    let (a, da) = train_rb(&corpus, &config).unwrap();
    let (b, db) = train_rb(&corpus, &config).unwrap();
    assert_eq!(a, b);
    assert_eq!(da, db);
}
