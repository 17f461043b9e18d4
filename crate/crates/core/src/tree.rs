//! Reply-tree model: validation, conversation flows and distances.
//!
//! A [`ConversationTree`] stores its posts in chronological order
//! (timestamp, then id), so the root is always index 0, every parent has a
//! smaller index than its children, and a chronological prefix is a slice.

use alloc::collections::BTreeMap;
use alloc::collections::VecDeque;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

/// Trees with more nodes than this are excluded from analysis.
pub const MAX_TREE_SIZE: usize = 100;

/// Position of a post inside a [`ConversationTree`] (chronological rank).
pub type NodeIndex = usize;

/// Opaque, non-empty author token.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AuthorId(String);

/// Returned when an author token is empty.
#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("author id must not be empty")]
pub struct EmptyAuthorId;

impl AuthorId {
    pub fn new(value: impl Into<String>) -> Result<Self, EmptyAuthorId> {
        let value = value.into();
        if value.is_empty() {
            return Err(EmptyAuthorId);
        }
        Ok(Self(value))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AuthorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Platform {
    Reddit,
    Twitter,
    Synthetic,
}

impl Platform {
    pub const ALL: [Platform; 3] = [Platform::Reddit, Platform::Twitter, Platform::Synthetic];

    pub fn as_str(self) -> &'static str {
        match self {
            Platform::Reddit => "reddit",
            Platform::Twitter => "twitter",
            Platform::Synthetic => "synthetic",
        }
    }
}

impl fmt::Display for Platform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("unknown platform `{0}`")]
pub struct UnknownPlatform(pub String);

impl FromStr for Platform {
    type Err = UnknownPlatform;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reddit" => Ok(Platform::Reddit),
            "twitter" => Ok(Platform::Twitter),
            "synthetic" => Ok(Platform::Synthetic),
            other => Err(UnknownPlatform(other.to_string())),
        }
    }
}

/// One message in a conversation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Post {
    pub id: String,
    /// `None` only for the root post.
    pub parent_id: Option<String>,
    pub author: AuthorId,
    /// Seconds since the Unix epoch (UTC).
    pub timestamp: u64,
    pub conversation_id: String,
    pub platform: Platform,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum TreeError {
    #[error("conversation has no posts")]
    Empty,
    #[error("post belongs to conversation `{found}`, expected `{expected}`")]
    MixedConversation { expected: String, found: String },
    #[error("conversation `{0}` mixes posts from several platforms")]
    MixedPlatform(String),
    #[error("duplicate post id `{0}`")]
    DuplicateId(String),
    #[error("conversation has {0} posts, more than the limit of 100")]
    TooLarge(usize),
    #[error("conversation consists of a single post")]
    SingletonTree,
    #[error("post `{0}` replies to a post that is not in the conversation")]
    MissingParent(String),
    #[error("conversation has {0} root posts")]
    MultipleRoots(usize),
    #[error("reply edges through post `{0}` form a cycle")]
    Cycle(String),
    #[error("post `{child}` is not later than its parent `{parent}`")]
    TimestampOrderViolation { child: String, parent: String },
    #[error("unknown post `{0}`")]
    UnknownNode(String),
}

impl TreeError {
    /// Stable short name of the error class, used in load reports.
    pub fn kind(&self) -> &'static str {
        match self {
            TreeError::Empty => "Empty",
            TreeError::MixedConversation { .. } => "MixedConversation",
            TreeError::MixedPlatform(_) => "MixedPlatform",
            TreeError::DuplicateId(_) => "DuplicateId",
            TreeError::TooLarge(_) => "TooLarge",
            TreeError::SingletonTree => "SingletonTree",
            TreeError::MissingParent(_) => "MissingParent",
            TreeError::MultipleRoots(_) => "MultipleRoots",
            TreeError::Cycle(_) => "Cycle",
            TreeError::TimestampOrderViolation { .. } => "TimestampOrderViolation",
            TreeError::UnknownNode(_) => "UnknownNode",
        }
    }
}

/// How the distance between two posts is measured.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum PathMode {
    /// Edge count of the undirected tree path.
    #[default]
    Undirected,
    /// Edge count only when one post is an ancestor of the other.
    AncestorOnly,
}

impl PathMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PathMode::Undirected => "undirected",
            PathMode::AncestorOnly => "ancestor-only",
        }
    }

    /// Distance between two nodes under this mode; `None` when undefined
    /// (unrelated nodes in ancestor-only mode).
    pub fn distance(self, tree: &ConversationTree, a: NodeIndex, b: NodeIndex) -> Option<usize> {
        match self {
            PathMode::Undirected => Some(tree.path_distance_at(a, b)),
            PathMode::AncestorOnly => {
                if tree.is_ancestor_or_self(a, b) || tree.is_ancestor_or_self(b, a) {
                    Some(tree.path_distance_at(a, b))
                } else {
                    None
                }
            }
        }
    }
}

impl FromStr for PathMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "undirected" => Ok(PathMode::Undirected),
            "ancestor-only" => Ok(PathMode::AncestorOnly),
            other => Err(alloc::format!("unknown path mode `{other}`")),
        }
    }
}

/// A root-to-leaf path through the reply tree.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Flow {
    nodes: Vec<NodeIndex>,
}

impl Flow {
    pub fn nodes(&self) -> &[NodeIndex] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes that are neither the first nor the last element.
    pub fn interior(&self) -> &[NodeIndex] {
        if self.nodes.len() <= 2 {
            &[]
        } else {
            &self.nodes[1..self.nodes.len() - 1]
        }
    }

    pub fn ids<'t>(&self, tree: &'t ConversationTree) -> Vec<&'t str> {
        self.nodes.iter().map(|&ix| tree.post(ix).id.as_str()).collect()
    }
}

/// The posts of one author within one tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuthorPostSet {
    pub author: AuthorId,
    /// Chronologically ordered, never empty.
    pub nodes: Vec<NodeIndex>,
}

/// A validated reply tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConversationTree {
    conversation_id: String,
    platform: Platform,
    posts: Vec<Post>,
    index: BTreeMap<String, NodeIndex>,
    parent: Vec<Option<NodeIndex>>,
    children: Vec<Vec<NodeIndex>>,
    depth: Vec<usize>,
}

/// Validates a list of posts as a single conversation tree.
///
/// The result does not depend on the order of `posts`.
pub fn validate_tree(posts: impl IntoIterator<Item = Post>) -> Result<ConversationTree, TreeError> {
    let mut posts: Vec<Post> = posts.into_iter().collect();
    if posts.is_empty() {
        return Err(TreeError::Empty);
    }
    posts.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.id.cmp(&b.id)));

    let conversation_id = posts[0].conversation_id.clone();
    let platform = posts[0].platform;
    for p in &posts {
        if p.conversation_id != conversation_id {
            // Report the lexicographically larger id so the error is order independent.
            let (expected, found) = if p.conversation_id < conversation_id {
                (p.conversation_id.clone(), conversation_id.clone())
            } else {
                (conversation_id.clone(), p.conversation_id.clone())
            };
            return Err(TreeError::MixedConversation { expected, found });
        }
    }
    if posts.iter().any(|p| p.platform != platform) {
        return Err(TreeError::MixedPlatform(conversation_id));
    }

    let mut index = BTreeMap::new();
    for (ix, p) in posts.iter().enumerate() {
        if index.insert(p.id.clone(), ix).is_some() {
            return Err(TreeError::DuplicateId(p.id.clone()));
        }
    }

    let n = posts.len();
    if n > MAX_TREE_SIZE {
        return Err(TreeError::TooLarge(n));
    }
    if n < 2 {
        return Err(TreeError::SingletonTree);
    }

    let mut parent = Vec::with_capacity(n);
    let mut roots = 0usize;
    for p in &posts {
        match &p.parent_id {
            None => {
                roots += 1;
                parent.push(None);
            }
            Some(pid) => match index.get(pid) {
                Some(&pix) => parent.push(Some(pix)),
                None => return Err(TreeError::MissingParent(p.id.clone())),
            },
        }
    }
    if roots > 1 {
        return Err(TreeError::MultipleRoots(roots));
    }

    let mut children: Vec<Vec<NodeIndex>> = alloc::vec![Vec::new(); n];
    for (ix, par) in parent.iter().enumerate() {
        if let Some(pix) = *par {
            children[pix].push(ix);
        }
    }

    // With every parent resolved, nodes unreachable from the root sit on a cycle.
    let root = parent.iter().position(Option::is_none);
    let mut reached = alloc::vec![false; n];
    if let Some(root) = root {
        let mut queue = VecDeque::from([root]);
        reached[root] = true;
        while let Some(ix) = queue.pop_front() {
            for &c in &children[ix] {
                if !reached[c] {
                    reached[c] = true;
                    queue.push_back(c);
                }
            }
        }
    }
    if let Some(ix) = reached.iter().position(|r| !r) {
        return Err(TreeError::Cycle(posts[ix].id.clone()));
    }

    for (ix, par) in parent.iter().enumerate() {
        if let Some(pix) = *par {
            if posts[pix].timestamp >= posts[ix].timestamp {
                return Err(TreeError::TimestampOrderViolation {
                    child: posts[ix].id.clone(),
                    parent: posts[pix].id.clone(),
                });
            }
        }
    }

    // Parents now precede children, so the root is index 0 and one pass fills depths.
    debug_assert_eq!(root, Some(0));
    let mut depth = alloc::vec![1usize; n];
    for ix in 1..n {
        depth[ix] = depth[parent[ix].expect("non-root has a parent")] + 1;
    }

    Ok(ConversationTree {
        conversation_id,
        platform,
        posts,
        index,
        parent,
        children,
        depth,
    })
}

impl ConversationTree {
    pub fn conversation_id(&self) -> &str {
        &self.conversation_id
    }

    pub fn platform(&self) -> Platform {
        self.platform
    }

    pub fn len(&self) -> usize {
        self.posts.len()
    }

    /// Always false for a validated tree.
    pub fn is_empty(&self) -> bool {
        self.posts.is_empty()
    }

    /// All posts in chronological order.
    pub fn posts(&self) -> &[Post] {
        &self.posts
    }

    pub fn post(&self, ix: NodeIndex) -> &Post {
        &self.posts[ix]
    }

    pub fn author(&self, ix: NodeIndex) -> &AuthorId {
        &self.posts[ix].author
    }

    pub fn timestamp(&self, ix: NodeIndex) -> u64 {
        self.posts[ix].timestamp
    }

    pub fn root(&self) -> NodeIndex {
        0
    }

    pub fn index_of(&self, id: &str) -> Result<NodeIndex, TreeError> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| TreeError::UnknownNode(id.to_string()))
    }

    pub fn parent(&self, ix: NodeIndex) -> Option<NodeIndex> {
        self.parent[ix]
    }

    pub fn children(&self, ix: NodeIndex) -> &[NodeIndex] {
        &self.children[ix]
    }

    pub fn is_leaf(&self, ix: NodeIndex) -> bool {
        self.children[ix].is_empty()
    }

    pub fn leaf_count(&self) -> usize {
        self.children.iter().filter(|c| c.is_empty()).count()
    }

    /// Edge count from the root plus one; the root itself is at 1.
    pub fn root_distance_at(&self, ix: NodeIndex) -> usize {
        self.depth[ix]
    }

    pub fn root_distance(&self, id: &str) -> Result<usize, TreeError> {
        Ok(self.root_distance_at(self.index_of(id)?))
    }

    /// Undirected edge count between two nodes.
    pub fn path_distance_at(&self, a: NodeIndex, b: NodeIndex) -> usize {
        let (mut a, mut b) = (a, b);
        let mut dist = 0;
        while self.depth[a] > self.depth[b] {
            a = self.parent[a].expect("deeper node has a parent");
            dist += 1;
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent[b].expect("deeper node has a parent");
            dist += 1;
        }
        while a != b {
            a = self.parent[a].expect("distinct nodes at equal depth are not the root");
            b = self.parent[b].expect("distinct nodes at equal depth are not the root");
            dist += 2;
        }
        dist
    }

    pub fn path_distance(&self, u: &str, v: &str) -> Result<usize, TreeError> {
        Ok(self.path_distance_at(self.index_of(u)?, self.index_of(v)?))
    }

    /// True when `ancestor` lies on the path from the root to `node`
    /// (inclusive of `node` itself).
    pub fn is_ancestor_or_self(&self, ancestor: NodeIndex, node: NodeIndex) -> bool {
        let mut cur = Some(node);
        while let Some(ix) = cur {
            if ix == ancestor {
                return true;
            }
            if ix < ancestor {
                return false;
            }
            cur = self.parent[ix];
        }
        false
    }

    /// Every root-to-leaf path, in depth-first order with children visited
    /// chronologically.
    pub fn flows(&self) -> Vec<Flow> {
        let mut out = Vec::with_capacity(self.leaf_count());
        let mut path = Vec::new();
        let mut stack = alloc::vec![(self.root(), 1usize)];
        while let Some((ix, depth)) = stack.pop() {
            path.truncate(depth - 1);
            path.push(ix);
            if self.is_leaf(ix) {
                out.push(Flow { nodes: path.clone() });
            } else {
                for &c in self.children[ix].iter().rev() {
                    stack.push((c, depth + 1));
                }
            }
        }
        out
    }

    /// The first `k` posts in chronological order; `k` is clamped to the
    /// tree size.
    pub fn chronological_prefix(&self, k: usize) -> &[Post] {
        &self.posts[..k.min(self.posts.len())]
    }

    /// Distinct authors in order of first appearance.
    pub fn authors(&self) -> Vec<&AuthorId> {
        let mut seen: Vec<&AuthorId> = Vec::new();
        for p in &self.posts {
            if !seen.contains(&&p.author) {
                seen.push(&p.author);
            }
        }
        seen
    }

    /// Posts written by `author`, or `None` if the author did not take part.
    pub fn author_posts(&self, author: &AuthorId) -> Option<AuthorPostSet> {
        let nodes: Vec<NodeIndex> = (0..self.len()).filter(|&ix| self.author(ix) == author).collect();
        if nodes.is_empty() {
            None
        } else {
            Some(AuthorPostSet {
                author: author.clone(),
                nodes,
            })
        }
    }
}


#[cfg(test)]
mod tests {
    use super::test_util::{post, tree};
    use super::*;
    use alloc::format;
    use alloc::vec;

    fn chain(n: usize) -> Vec<Post> {
        (0..n)
            .map(|i| {
                let parent = if i == 0 { None } else { Some(format!("n{}", i - 1)) };
                post(&format!("n{i}"), parent.as_deref(), "a", i as u64)
            })
            .collect()
    }

    #[test]
    fn minimal_tree_validates() {
        let t = validate_tree(vec![post("r", None, "A", 0), post("a", Some("r"), "B", 5)]).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.post(t.root()).id, "r");
    }

    #[test]
    fn missing_parent_is_rejected() {
        let err = validate_tree(vec![post("r", None, "A", 0), post("a", Some("missing"), "B", 1)]);
        assert_eq!(err, Err(TreeError::MissingParent("a".into())));
    }

    #[test]
    fn size_limits() {
        assert!(validate_tree(chain(100)).is_ok());
        assert_eq!(validate_tree(chain(101)), Err(TreeError::TooLarge(101)));
        assert_eq!(validate_tree(chain(1)), Err(TreeError::SingletonTree));
        assert_eq!(validate_tree(Vec::new()), Err(TreeError::Empty));
    }

    #[test]
    fn structural_errors() {
        let roots = vec![post("r", None, "A", 0), post("s", None, "B", 1), post("a", Some("r"), "B", 2)];
        assert_eq!(validate_tree(roots), Err(TreeError::MultipleRoots(2)));

        let cycle = vec![
            post("r", None, "A", 0),
            post("a", Some("r"), "B", 1),
            post("x", Some("y"), "B", 2),
            post("y", Some("x"), "C", 3),
        ];
        assert_eq!(validate_tree(cycle), Err(TreeError::Cycle("x".into())));

        let inverted = vec![post("r", None, "A", 5), post("a", Some("r"), "B", 5)];
        assert!(matches!(
            validate_tree(inverted),
            Err(TreeError::TimestampOrderViolation { .. })
        ));

        let dup = vec![post("r", None, "A", 0), post("r", Some("r"), "B", 1)];
        assert_eq!(validate_tree(dup), Err(TreeError::DuplicateId("r".into())));
    }

    #[test]
    fn mixed_conversation_is_rejected() {
        let mut b = post("a", Some("r"), "B", 1);
        b.conversation_id = "other".into();
        assert!(matches!(
            validate_tree(vec![post("r", None, "A", 0), b]),
            Err(TreeError::MixedConversation { .. })
        ));
    }

    #[test]
    fn flows_of_chain_and_star() {
        let t = tree(&[("r", None, "A"), ("a", Some("r"), "B"), ("b", Some("a"), "C")]);
        let flows: Vec<Vec<&str>> = t.flows().iter().map(|f| f.ids(&t)).collect();
        assert_eq!(flows, vec![vec!["r", "a", "b"]]);

        let t = tree(&[("r", None, "A"), ("a", Some("r"), "B"), ("b", Some("r"), "C"), ("c", Some("r"), "D")]);
        let flows: Vec<Vec<&str>> = t.flows().iter().map(|f| f.ids(&t)).collect();
        assert_eq!(flows, vec![vec!["r", "a"], vec!["r", "b"], vec!["r", "c"]]);
    }

    #[test]
    fn distances() {
        let t = tree(&[
            ("r", None, "A"),
            ("a", Some("r"), "B"),
            ("b", Some("r"), "C"),
            ("c", Some("a"), "D"),
        ]);
        assert_eq!(t.path_distance("r", "a").unwrap(), 1);
        assert_eq!(t.path_distance("a", "a").unwrap(), 0);
        assert_eq!(t.path_distance("a", "b").unwrap(), 2);
        assert_eq!(t.path_distance("c", "b").unwrap(), 3);
        assert_eq!(t.root_distance("r").unwrap(), 1);
        assert_eq!(t.root_distance("a").unwrap(), 2);
        assert_eq!(t.root_distance("c").unwrap(), 3);
        assert_eq!(t.path_distance("r", "zz"), Err(TreeError::UnknownNode("zz".into())));
        assert_eq!(t.root_distance("zz"), Err(TreeError::UnknownNode("zz".into())));

        let (a, b, c) = (t.index_of("a").unwrap(), t.index_of("b").unwrap(), t.index_of("c").unwrap());
        assert_eq!(PathMode::AncestorOnly.distance(&t, a, b), None);
        assert_eq!(PathMode::AncestorOnly.distance(&t, c, 0), Some(2));
        assert_eq!(PathMode::Undirected.distance(&t, a, b), Some(2));
    }

    #[test]
    fn chain_leaf_root_distance() {
        let t = validate_tree(chain(5)).unwrap();
        assert_eq!(t.root_distance("n4").unwrap(), 5);
    }

    #[test]
    fn chronological_prefix_breaks_ties_by_id() {
        let t = validate_tree(vec![
            post("r", None, "A", 0),
            post("z", Some("r"), "B", 3),
            post("m", Some("r"), "C", 3),
        ])
        .unwrap();
        assert!(t.chronological_prefix(0).is_empty());
        let ids: Vec<&str> = t.chronological_prefix(3).iter().map(|p| p.id.as_str()).collect();
        assert_eq!(ids, vec!["r", "m", "z"]);
    }

    #[test]
    fn author_sets() {
        let t = tree(&[("r", None, "A"), ("x", Some("r"), "B"), ("y", Some("x"), "A")]);
        let a = AuthorId::new("A").unwrap();
        assert_eq!(t.author_posts(&a).unwrap().nodes, vec![0, 2]);
        assert!(t.author_posts(&AuthorId::new("Q").unwrap()).is_none());
        assert_eq!(t.authors().len(), 2);
    }

    #[test]
    fn author_id_rejects_empty() {
        assert_eq!(AuthorId::new(""), Err(EmptyAuthorId));
    }
}
