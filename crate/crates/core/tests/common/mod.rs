//! Random tree generation and brute-force oracles shared by the integration
//! tests. The oracles work on plain parent vectors and never call the
//! distance or flow methods of `ConversationTree`.
#![allow(dead_code)]

use std::collections::{BTreeMap, VecDeque};

use cccp_core::nn::{Activation, Layer, Loss, ModelParams};
use cccp_core::{validate_tree, AuthorId, ConversationTree, Platform, Post};
use proptest::prelude::*;

/// A tree in generation order: `parent[i] < i`, timestamps never decrease.
#[derive(Clone, Debug)]
pub struct RawTree {
    pub ids: Vec<String>,
    pub parent: Vec<Option<usize>>,
    pub author: Vec<String>,
    pub ts: Vec<u64>,
}

impl RawTree {
    /// `picks[i]` chooses the parent of node `i + 1` among `0..=i`; `steps`
    /// are timestamp increments (0 allowed when the parent is older).
    pub fn build(picks: &[usize], authors: &[u8], steps: &[u64]) -> Self {
        let n = picks.len() + 1;
        let mut parent = vec![None];
        let mut ts = vec![1_000u64];
        for i in 1..n {
            let p = picks[i - 1] % i;
            parent.push(Some(p));
            let t = (ts[i - 1] + steps[i - 1]).max(ts[p] + 1);
            ts.push(t);
        }
        Self {
            ids: (0..n).map(|i| format!("n{i:03}")).collect(),
            parent,
            author: (0..n).map(|i| format!("a{}", authors[i])).collect(),
            ts,
        }
    }

    /// The posts of a validated tree, which are already in chronological order.
    pub fn from_tree(tree: &ConversationTree) -> Self {
        let posts = tree.posts();
        let pos = |id: &str| posts.iter().position(|p| p.id == id).unwrap();
        Self {
            ids: posts.iter().map(|p| p.id.clone()).collect(),
            parent: posts.iter().map(|p| p.parent_id.as_deref().map(pos)).collect(),
            author: posts.iter().map(|p| p.author.as_str().to_string()).collect(),
            ts: posts.iter().map(|p| p.timestamp).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn posts(&self, conversation: &str, platform: Platform) -> Vec<Post> {
        (0..self.len())
            .map(|i| Post {
                id: self.ids[i].clone(),
                parent_id: self.parent[i].map(|p| self.ids[p].clone()),
                author: AuthorId::new(self.author[i].clone()).unwrap(),
                timestamp: self.ts[i],
                conversation_id: conversation.into(),
                platform,
            })
            .collect()
    }

    pub fn tree(&self) -> ConversationTree {
        validate_tree(self.posts("c", Platform::Synthetic)).unwrap()
    }

    pub fn children(&self, v: usize) -> Vec<usize> {
        let mut c: Vec<usize> = (0..self.len()).filter(|&i| self.parent[i] == Some(v)).collect();
        c.sort_by(|&a, &b| (self.ts[a], &self.ids[a]).cmp(&(self.ts[b], &self.ids[b])));
        c
    }

    /// Breadth-first distances from `src` over undirected edges.
    pub fn bfs(&self, src: usize) -> Vec<usize> {
        let n = self.len();
        let mut adj = vec![Vec::new(); n];
        for (i, p) in self.parent.iter().enumerate() {
            if let Some(p) = *p {
                adj[i].push(p);
                adj[p].push(i);
            }
        }
        let mut dist = vec![usize::MAX; n];
        dist[src] = 0;
        let mut q = VecDeque::from([src]);
        while let Some(u) = q.pop_front() {
            for &w in &adj[u] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    q.push_back(w);
                }
            }
        }
        dist
    }

    /// Every root-to-leaf path, as ids.
    pub fn flows(&self) -> Vec<Vec<String>> {
        fn walk(t: &RawTree, v: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<String>>) {
            path.push(v);
            let kids = t.children(v);
            if kids.is_empty() {
                out.push(path.iter().map(|&i| t.ids[i].clone()).collect());
            }
            for k in kids {
                walk(t, k, path, out);
            }
            path.pop();
        }
        let mut out = Vec::new();
        walk(self, 0, &mut Vec::new(), &mut out);
        out
    }

    fn author_of(&self, id: &str) -> &str {
        let i = self.ids.iter().position(|x| x == id).unwrap();
        &self.author[i]
    }

    /// Author score as the mean of the union of seen-probabilities, evaluated
    /// straight from the definitions with `libm::pow`.
    pub fn baseline(&self, zeta_base: f64, theta_base: f64) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        let depth = self.bfs(0);
        for a in self.author.iter() {
            if out.contains_key(a) {
                continue;
            }
            let own: Vec<usize> = (0..self.len()).filter(|&i| &self.author[i] == a).collect();
            let last_ts = own.iter().map(|&i| self.ts[i]).max().unwrap();
            let foreign: Vec<usize> = (0..self.len())
                .filter(|&j| &self.author[j] != a && self.ts[j] < last_ts)
                .collect();
            if foreign.is_empty() {
                out.insert(a.clone(), 1.0);
                continue;
            }
            let mut total = 0.0;
            for &j in &foreign {
                let dist = self.bfs(j);
                let later: Vec<usize> = own.iter().copied().filter(|&i| self.ts[i] > self.ts[j]).collect();
                let zeta = if later.is_empty() {
                    0.0
                } else {
                    later.iter().map(|&i| libm::pow(zeta_base, dist[i] as f64 - 1.0)).sum::<f64>() / later.len() as f64
                };
                let theta = libm::pow(theta_base, depth[j] as f64);
                total += 1.0 - (1.0 - zeta) * (1.0 - theta);
            }
            out.insert(a.clone(), total / foreign.len() as f64);
        }
        out
    }

    /// Share of flows in which each author owns at least one counted node.
    pub fn centrality(&self, include_endpoints: bool) -> BTreeMap<String, f64> {
        let flows = self.flows();
        let mut out: BTreeMap<String, f64> = self.author.iter().map(|a| (a.clone(), 0.0)).collect();
        for flow in &flows {
            let counted: &[String] = if include_endpoints {
                flow
            } else if flow.len() > 2 {
                &flow[1..flow.len() - 1]
            } else {
                &[]
            };
            let mut seen: Vec<&str> = counted.iter().map(|id| self.author_of(id)).collect();
            seen.sort();
            seen.dedup();
            for a in seen {
                *out.get_mut(a).unwrap() += 1.0;
            }
        }
        for v in out.values_mut() {
            *v /= flows.len() as f64;
        }
        out
    }
}

/// Trees of `2..=max` nodes drawn from `pool` authors.
pub fn raw_tree(max: usize, pool: u8) -> impl Strategy<Value = RawTree> {
    (2..=max).prop_flat_map(move |n| {
        (
            proptest::collection::vec(any::<usize>(), n - 1),
            proptest::collection::vec(0..pool, n),
            proptest::collection::vec(0u64..4, n - 1),
        )
            .prop_map(|(picks, authors, steps)| RawTree::build(&picks, &authors, &steps))
    })
}

/// Deterministic pseudo-random trees for the fixed-count oracle sweeps.
pub fn seeded_trees(count: usize, max: usize, seed: u64) -> Vec<RawTree> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.gen_range(2..=max);
            let pool = rng.gen_range(1..=5u8);
            let picks: Vec<usize> = (1..n).map(|_| rng.gen()).collect();
            let authors: Vec<u8> = (0..n).map(|_| rng.gen_range(0..pool)).collect();
            let steps: Vec<u64> = (1..n).map(|_| rng.gen_range(0..4)).collect();
            RawTree::build(&picks, &authors, &steps)
        })
        .collect()
}

/// A network of one to three layers, up to 32 units wide, with a random
/// input and a matching target.
pub fn random_case(seed: u64) -> (ModelParams, Vec<f64>, Vec<f64>, Loss) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let layers = rng.gen_range(1..=3);
    let input = rng.gen_range(1..=32);
    let hidden: Vec<usize> = (1..layers).map(|_| rng.gen_range(1..=32)).collect();
    let act = [Activation::Relu, Activation::Sigmoid, Activation::Identity][rng.gen_range(0..3)];
    let bce = rng.gen_bool(0.5);
    let (out, head, loss) = if bce {
        (1, Activation::Sigmoid, Loss::Bce)
    } else {
        (rng.gen_range(2..=32), Activation::Softmax, Loss::Cce)
    };
    let init = ModelParams::init(input, &hidden, act, out, head, rng.gen()).unwrap();
    // Random biases too: with all-zero biases a dead relu upstream puts the
    // next layer exactly on its kink, where central differences see half a slope.
    let layers = init
        .layers()
        .iter()
        .map(|l| {
            let bias = (0..l.outputs()).map(|_| rng.gen_range(-0.5..0.5)).collect();
            Layer::new(l.inputs(), l.outputs(), l.weights().to_vec(), bias, l.activation()).unwrap()
        })
        .collect();
    let params = ModelParams::new(layers).unwrap();
    let x: Vec<f64> = (0..input).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut y = vec![0.0; out];
    if bce {
        y[0] = f64::from(rng.gen_range(0..2u8));
    } else {
        y[rng.gen_range(0..out)] = 1.0;
    }
    (params, x, y, loss)
}
