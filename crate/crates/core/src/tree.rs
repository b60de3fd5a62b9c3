//! Parent-linked binary search tree stored in an index arena.
//!
//! Nodes are never freed, so a [`NodeId`] stays valid for the lifetime of the
//! [`NodeStore`] no matter how many rotations relink it.

use std::cmp::Ordering;
use std::fmt::Write as _;

use thiserror::Error;

/// Element stored in a node. Keys are the integers `1..=n` in every experiment.
pub type Key = u32;

/// Symbol used for an absent child in the canonical shape encoding.
pub const EMPTY_SLOT: char = '·';

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub key: Key,
    pub left: Option<NodeId>,
    pub right: Option<NodeId>,
    pub parent: Option<NodeId>,
}

impl Node {
    fn leaf(key: Key, parent: Option<NodeId>) -> Self {
        Node {
            key,
            left: None,
            right: None,
            parent,
        }
    }

    pub fn child(&self, side: Side) -> Option<NodeId> {
        match side {
            Side::Left => self.left,
            Side::Right => self.right,
        }
    }

    fn child_mut(&mut self, side: Side) -> &mut Option<NodeId> {
        match side {
            Side::Left => &mut self.left,
            Side::Right => &mut self.right,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("key {0} is already present")]
    DuplicateKey(Key),
    #[error("node {0:?} is the root and cannot be rotated up")]
    RotateRoot(NodeId),
    #[error("tree is empty")]
    Empty,
    #[error("invariant violated: {0}")]
    Invariant(#[from] InvariantViolation),
    #[error("malformed shape at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
}

/// First structural invariant found broken by [`NodeStore::validate`].
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InvariantViolation {
    #[error("store has {0} nodes but no root")]
    MissingRoot(usize),
    #[error("root {0:?} has a parent")]
    RootHasParent(NodeId),
    #[error("{parent:?} lists {child:?} as a child but the child's parent is {actual:?}")]
    LinkAsymmetry {
        parent: NodeId,
        child: NodeId,
        actual: Option<NodeId>,
    },
    #[error("in-order keys not increasing: {prev} followed by {next}")]
    Order { prev: Key, next: Key },
    #[error("{reachable} nodes reachable from root, {stored} stored")]
    Size { reachable: usize, stored: usize },
}

/// Arena of keyed nodes forming one binary search tree.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeStore {
    nodes: Vec<Node>,
    root: Option<NodeId>,
}

impl NodeStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        NodeStore {
            nodes: Vec::with_capacity(n),
            root: None,
        }
    }

    /// Builds an unbalanced tree by inserting `keys` in order.
    pub fn from_keys(keys: &[Key]) -> Result<Self, TreeError> {
        let mut store = Self::with_capacity(keys.len());
        for &k in keys {
            store.insert_leaf(k)?;
        }
        Ok(store)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> Option<NodeId> {
        self.root
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn key(&self, id: NodeId) -> Key {
        self.nodes[id.index()].key
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id.index()].parent
    }

    pub fn ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len() as u32).map(NodeId)
    }

    /// Which child of its parent `id` is, or `None` for the root.
    pub fn side_of(&self, id: NodeId) -> Option<Side> {
        let parent = self.parent(id)?;
        if self.node(parent).left == Some(id) {
            Some(Side::Left)
        } else {
            Some(Side::Right)
        }
    }

    pub fn find(&self, key: Key) -> Option<NodeId> {
        let mut cur = self.root;
        while let Some(id) = cur {
            let node = self.node(id);
            cur = match key.cmp(&node.key) {
                Ordering::Less => node.left,
                Ordering::Greater => node.right,
                Ordering::Equal => return Some(id),
            };
        }
        None
    }

    /// Attaches `key` as a new leaf at the external position found by BST search.
    pub fn insert_leaf(&mut self, key: Key) -> Result<NodeId, TreeError> {
        let id = NodeId(self.nodes.len() as u32);
        let Some(mut cur) = self.root else {
            self.nodes.push(Node::leaf(key, None));
            self.root = Some(id);
            return Ok(id);
        };
        let side = loop {
            let node = self.node(cur);
            let side = match key.cmp(&node.key) {
                Ordering::Less => Side::Left,
                Ordering::Greater => Side::Right,
                Ordering::Equal => return Err(TreeError::DuplicateKey(key)),
            };
            match node.child(side) {
                Some(next) => cur = next,
                None => break side,
            }
        };
        self.nodes.push(Node::leaf(key, Some(cur)));
        *self.nodes[cur.index()].child_mut(side) = Some(id);
        Ok(id)
    }

    /// Rotates `v` up one level, demoting its parent to be `v`'s child.
    ///
    /// With `u` the parent of `v` and `v` a left child: `v`'s left subtree
    /// rises one level, its right subtree becomes `u`'s left subtree at the
    /// same level, and `u`'s right subtree sinks one level. Mirrored for a
    /// right child.
    pub fn rotate_up(&mut self, v: NodeId) -> Result<(), TreeError> {
        let u = self.parent(v).ok_or(TreeError::RotateRoot(v))?;
        let side = if self.node(u).left == Some(v) {
            Side::Left
        } else {
            Side::Right
        };
        let grand = self.parent(u);

        // the inner subtree of v changes hands
        let inner = self.node(v).child(side.opposite());
        *self.nodes[u.index()].child_mut(side) = inner;
        if let Some(b) = inner {
            self.nodes[b.index()].parent = Some(u);
        }
        *self.nodes[v.index()].child_mut(side.opposite()) = Some(u);
        self.nodes[u.index()].parent = Some(v);

        self.nodes[v.index()].parent = grand;
        match grand {
            None => self.root = Some(v),
            Some(g) => {
                let g_node = &mut self.nodes[g.index()];
                if g_node.left == Some(u) {
                    g_node.left = Some(v);
                } else {
                    g_node.right = Some(v);
                }
            }
        }
        Ok(())
    }

    /// Number of parent links from `v` to the root.
    pub fn depth(&self, v: NodeId) -> u32 {
        let mut d = 0;
        let mut cur = v;
        while let Some(p) = self.parent(cur) {
            d += 1;
            cur = p;
        }
        d
    }

    /// The `k`-th ancestor of `v` (`k = 0` is `v` itself).
    pub fn ancestor(&self, v: NodeId, k: u32) -> Option<NodeId> {
        let mut cur = v;
        for _ in 0..k {
            cur = self.parent(cur)?;
        }
        Some(cur)
    }

    /// Parent of the external leaf reached by searching for a probe value.
    ///
    /// The probe is given doubled (`2 * key` for a key, `2 * key ± 1` for the
    /// gap next to it) so gaps between consecutive integers can be searched.
    /// Returns `None` if the tree is empty or the probe hits an existing key.
    pub fn external_parent(&self, doubled_probe: i64) -> Option<(NodeId, Side)> {
        let mut cur = self.root?;
        loop {
            let node = self.node(cur);
            let side = match doubled_probe.cmp(&(2 * node.key as i64)) {
                Ordering::Less => Side::Left,
                Ordering::Greater => Side::Right,
                Ordering::Equal => return None,
            };
            match node.child(side) {
                Some(next) => cur = next,
                None => return Some((cur, side)),
            }
        }
    }

    /// Keys in symmetric order.
    pub fn in_order(&self) -> Vec<Key> {
        let mut out = Vec::with_capacity(self.len());
        let mut stack = Vec::new();
        let mut cur = self.root;
        loop {
            while let Some(id) = cur {
                stack.push(id);
                cur = self.node(id).left;
            }
            let Some(id) = stack.pop() else { break };
            out.push(self.key(id));
            cur = self.node(id).right;
        }
        out
    }

    /// Checks order, link symmetry, the single root and the size count.
    pub fn validate(&self) -> Result<(), InvariantViolation> {
        let Some(root) = self.root else {
            return if self.nodes.is_empty() {
                Ok(())
            } else {
                Err(InvariantViolation::MissingRoot(self.nodes.len()))
            };
        };
        if self.parent(root).is_some() {
            return Err(InvariantViolation::RootHasParent(root));
        }
        let mut reachable = 0usize;
        let mut stack = vec![root];
        while let Some(id) = stack.pop() {
            reachable += 1;
            if reachable > self.nodes.len() {
                break;
            }
            let node = self.node(id);
            for child in [node.left, node.right].into_iter().flatten() {
                let actual = self.parent(child);
                if actual != Some(id) {
                    return Err(InvariantViolation::LinkAsymmetry {
                        parent: id,
                        child,
                        actual,
                    });
                }
                stack.push(child);
            }
        }
        if reachable != self.nodes.len() {
            return Err(InvariantViolation::Size {
                reachable,
                stored: self.nodes.len(),
            });
        }
        let keys = self.in_order();
        for w in keys.windows(2) {
            if w[0] >= w[1] {
                return Err(InvariantViolation::Order { prev: w[0], next: w[1] });
            }
        }
        Ok(())
    }

    /// Preorder encoding `(key left right)` with `·` for an absent child.
    ///
    /// Two stores produce the same string iff they hold the same keys in the
    /// same shape. The empty tree encodes as `·`.
    pub fn canonical_shape(&self) -> String {
        enum Item {
            Node(NodeId),
            Empty,
            Close,
        }
        let mut out = String::with_capacity(self.len() * 8);
        let mut stack = vec![match self.root {
            Some(r) => Item::Node(r),
            None => Item::Empty,
        }];
        let mut need_space = false;
        while let Some(item) = stack.pop() {
            match item {
                Item::Close => {
                    out.push(')');
                    need_space = true;
                }
                Item::Empty => {
                    if need_space {
                        out.push(' ');
                    }
                    out.push(EMPTY_SLOT);
                    need_space = true;
                }
                Item::Node(id) => {
                    if need_space {
                        out.push(' ');
                    }
                    let node = self.node(id);
                    let _ = write!(out, "({}", node.key);
                    need_space = true;
                    stack.push(Item::Close);
                    stack.push(node.right.map_or(Item::Empty, Item::Node));
                    stack.push(node.left.map_or(Item::Empty, Item::Node));
                }
            }
        }
        out
    }

    /// Inverse of [`canonical_shape`](Self::canonical_shape).
    ///
    /// Node ids are assigned in preorder. The result is validated, so a
    /// string describing a non-BST is rejected.
    pub fn parse_shape(s: &str) -> Result<Self, TreeError> {
        let mut store = NodeStore::new();
        let mut parser = ShapeParser { src: s, pos: 0 };
        // each frame: node id, number of children read so far
        let mut frames: Vec<(NodeId, u8)> = Vec::new();
        let mut done = false;
        loop {
            parser.skip_spaces();
            if done {
                if parser.pos != s.len() {
                    return Err(parser.error("trailing input"));
                }
                break;
            }
            let slot = match parser.peek() {
                Some('(') => {
                    parser.bump('(');
                    let key = parser.key()?;
                    let id = NodeId(store.nodes.len() as u32);
                    let parent = frames.last().map(|f| f.0);
                    store.nodes.push(Node::leaf(key, parent));
                    Some(id)
                }
                Some(EMPTY_SLOT) => {
                    parser.bump(EMPTY_SLOT);
                    None
                }
                _ => return Err(parser.error("expected '(' or '·'")),
            };
            match frames.last_mut() {
                None => {
                    store.root = slot;
                    if slot.is_none() {
                        done = true;
                    }
                }
                Some((parent, filled)) => {
                    let parent = *parent;
                    let side = if *filled == 0 { Side::Left } else { Side::Right };
                    *filled += 1;
                    *store.nodes[parent.index()].child_mut(side) = slot;
                }
            }
            if let Some(id) = slot {
                frames.push((id, 0));
            }
            // close every frame that has both children
            while let Some(&(_, 2)) = frames.last() {
                parser.skip_spaces();
                if parser.peek() != Some(')') {
                    return Err(parser.error("expected ')'"));
                }
                parser.bump(')');
                frames.pop();
                if frames.is_empty() {
                    done = true;
                }
            }
        }
        store.validate()?;
        Ok(store)
    }
}

struct ShapeParser<'a> {
    src: &'a str,
    pos: usize,
}

impl ShapeParser<'_> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self, c: char) {
        self.pos += c.len_utf8();
    }

    fn skip_spaces(&mut self) {
        while self.peek() == Some(' ') {
            self.pos += 1;
        }
    }

    fn key(&mut self) -> Result<Key, TreeError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        self.src[start..self.pos].parse().map_err(|_| TreeError::Parse {
            pos: start,
            msg: "expected a key".into(),
        })
    }

    fn error(&self, msg: &str) -> TreeError {
        TreeError::Parse {
            pos: self.pos,
            msg: msg.into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn depth_of(store: &NodeStore, key: Key) -> u32 {
        store.depth(store.find(key).unwrap())
    }

    #[test]
    fn first_insert_is_root() {
        let mut s = NodeStore::new();
        let id = s.insert_leaf(5).unwrap();
        assert_eq!(s.root(), Some(id));
        assert_eq!(s.depth(id), 0);
    }

    #[test]
    fn increasing_keys_make_a_right_path() {
        let s = NodeStore::from_keys(&[1, 2, 3, 4, 5, 6]).unwrap();
        assert_eq!(depth_of(&s, 6), 5);
        assert_eq!(s.canonical_shape(), "(1 · (2 · (3 · (4 · (5 · (6 · ·))))))");
    }

    #[test]
    fn permutation_tree_matches_figure() {
        let s = NodeStore::from_keys(&[3, 5, 2, 4, 1, 6]).unwrap();
        assert_eq!(s.canonical_shape(), "(3 (2 (1 · ·) ·) (5 (4 · ·) (6 · ·)))");
        assert_eq!(depth_of(&s, 4), 2);
    }

    #[test]
    fn duplicate_key_rejected() {
        let mut s = NodeStore::from_keys(&[2, 1]).unwrap();
        assert_eq!(s.insert_leaf(1), Err(TreeError::DuplicateKey(1)));
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn rotating_root_rejected() {
        let mut s = NodeStore::from_keys(&[2, 1]).unwrap();
        let root = s.root().unwrap();
        assert_eq!(s.rotate_up(root), Err(TreeError::RotateRoot(root)));
    }

    #[test]
    fn rotate_middle_of_chain() {
        let mut s = NodeStore::from_keys(&[1, 2, 3]).unwrap();
        s.rotate_up(s.find(2).unwrap()).unwrap();
        assert_eq!(s.canonical_shape(), "(2 (1 · ·) (3 · ·))");
        s.validate().unwrap();
    }

    #[test]
    fn rotation_moves_subtrees_as_in_figure() {
        // u = 6 with left child v = 4; a = {2}, b = {5}, c = {8}
        let mut s = NodeStore::from_keys(&[10, 6, 4, 8, 2, 5]).unwrap();
        let before: Vec<u32> = [2, 4, 5, 6, 8].iter().map(|&k| depth_of(&s, k)).collect();
        s.rotate_up(s.find(4).unwrap()).unwrap();
        s.validate().unwrap();
        let after: Vec<u32> = [2, 4, 5, 6, 8].iter().map(|&k| depth_of(&s, k)).collect();
        assert_eq!(after[0], before[0] - 1); // a up
        assert_eq!(after[1], before[1] - 1); // v up
        assert_eq!(after[2], before[2]); // b level
        assert_eq!(after[3], before[3] + 1); // u down
        assert_eq!(after[4], before[4] + 1); // c down
        assert_eq!(depth_of(&s, 10), 0);
    }

    #[test]
    fn rotations_are_inverse() {
        let mut s = NodeStore::from_keys(&[10, 6, 4, 8, 2, 5, 12]).unwrap();
        let original = s.canonical_shape();
        let v = s.find(4).unwrap();
        let u = s.parent(v).unwrap();
        s.rotate_up(v).unwrap();
        assert_ne!(s.canonical_shape(), original);
        s.rotate_up(u).unwrap();
        assert_eq!(s.canonical_shape(), original);
    }

    #[test]
    fn rotate_updates_root() {
        let mut s = NodeStore::from_keys(&[2, 1]).unwrap();
        let one = s.find(1).unwrap();
        s.rotate_up(one).unwrap();
        assert_eq!(s.root(), Some(one));
        assert_eq!(s.canonical_shape(), "(1 · (2 · ·))");
    }

    #[test]
    fn depth_of_path_leaf() {
        for n in 1..20u32 {
            let keys: Vec<u32> = (1..=n).rev().collect();
            let s = NodeStore::from_keys(&keys).unwrap();
            assert_eq!(depth_of(&s, 1), n - 1);
        }
    }

    #[test]
    fn validate_catches_corrupt_parent_link() {
        let mut s = NodeStore::from_keys(&[2, 1, 3]).unwrap();
        let three = s.find(3).unwrap();
        let one = s.find(1).unwrap();
        s.nodes[three.index()].parent = Some(one);
        assert!(matches!(s.validate(), Err(InvariantViolation::LinkAsymmetry { .. })));
    }

    #[test]
    fn validate_catches_order_violation() {
        let mut s = NodeStore::from_keys(&[2, 1, 3]).unwrap();
        let one = s.find(1).unwrap();
        s.nodes[one.index()].key = 7;
        assert!(matches!(s.validate(), Err(InvariantViolation::Order { .. })));
    }

    #[test]
    fn validate_catches_detached_node() {
        let mut s = NodeStore::from_keys(&[2, 1]).unwrap();
        let root = s.root().unwrap();
        let one = s.find(1).unwrap();
        s.nodes[root.index()].left = None;
        s.nodes[one.index()].parent = None;
        assert!(matches!(s.validate(), Err(InvariantViolation::Size { .. })));
    }

    #[test]
    fn canonical_examples() {
        assert_eq!(NodeStore::from_keys(&[1]).unwrap().canonical_shape(), "(1 · ·)");
        assert_eq!(
            NodeStore::from_keys(&[2, 1, 3]).unwrap().canonical_shape(),
            "(2 (1 · ·) (3 · ·))"
        );
        assert_eq!(
            NodeStore::from_keys(&[1, 3, 2]).unwrap().canonical_shape(),
            "(1 · (3 (2 · ·) ·))"
        );
        assert_eq!(NodeStore::new().canonical_shape(), "·");
    }

    #[test]
    fn parse_round_trip() {
        for keys in [&[3, 5, 2, 4, 1, 6][..], &[1], &[4, 2, 6, 1, 3, 5, 7], &[]] {
            let s = NodeStore::from_keys(keys).unwrap();
            let text = s.canonical_shape();
            let parsed = NodeStore::parse_shape(&text).unwrap();
            assert_eq!(parsed.canonical_shape(), text);
            assert_eq!(parsed.in_order(), s.in_order());
        }
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(NodeStore::parse_shape("(1 · ").is_err());
        assert!(NodeStore::parse_shape("(1 · ·) x").is_err());
        assert!(NodeStore::parse_shape("(x · ·)").is_err());
        // well-formed but not a search tree
        assert!(matches!(
            NodeStore::parse_shape("(1 (2 · ·) ·)"),
            Err(TreeError::Invariant(_))
        ));
    }

    #[test]
    fn external_parent_finds_gaps() {
        let s = NodeStore::from_keys(&[3, 5, 2, 4, 1, 6]).unwrap();
        // gap between 3 and 4 hangs off 4's left slot
        let (p, side) = s.external_parent(2 * 3 + 1).unwrap();
        assert_eq!((s.key(p), side), (4, Side::Left));
        let (p, side) = s.external_parent(2 * 6 + 1).unwrap();
        assert_eq!((s.key(p), side), (6, Side::Right));
        assert!(s.external_parent(2 * 4).is_none());
    }
}
