//! Bottom-up randomized rebalancing after a leaf insertion.
//!
//! All three schemes share the same upward walk: starting at the new leaf,
//! flip a coin while the current node has a parent; tail moves to the parent,
//! head stops the walk. They differ only in what is done at the stop node:
//!
//! * `Zig` rotates the stop node up once (if it is not the root).
//! * `ZigZag` needs a grandparent. In the zig-zig / zag-zag case it rotates
//!   the parent up once; in the zig-zag / zag-zig case it rotates the stop
//!   node up twice.
//! * `ZigZig` is `ZigZag` except that the zig-zig / zag-zag case rotates the
//!   parent up and then the stop node.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::coin::{Coin, Flip};
use crate::tree::{Key, NodeId, NodeStore, TreeError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Plain leaf insertion, no coins, no rotations.
    #[serde(rename = "none")]
    Unbalanced,
    Zig,
    ZigZag,
    ZigZig,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Unbalanced, Scheme::Zig, Scheme::ZigZag, Scheme::ZigZig];
    pub const RANDOMIZED: [Scheme; 3] = [Scheme::Zig, Scheme::ZigZag, Scheme::ZigZig];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Unbalanced => "none",
            Scheme::Zig => "zig",
            Scheme::ZigZag => "zigzag",
            Scheme::ZigZig => "zigzig",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown scheme {0:?} (expected none, zig, zigzag or zigzig)")]
pub struct UnknownScheme(pub String);

impl FromStr for Scheme {
    type Err = UnknownScheme;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|scheme| scheme.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| UnknownScheme(s.to_string()))
    }
}

/// What one rebalancing pass did.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RebalanceOutcome {
    pub rotations_performed: u8,
    /// Depth of the inserted leaf before rebalancing.
    pub leaf_depth: u32,
    /// Depth of the node where the walk stopped, before any rotation.
    pub stop_depth: u32,
    pub flips: u32,
    pub reached_root: bool,
}

impl RebalanceOutcome {
    /// Number of tails seen, i.e. how far the walk climbed from the leaf.
    pub fn distance(&self) -> u32 {
        self.leaf_depth - self.stop_depth
    }
}

/// Walks up from `leaf` until a head or the root. Returns the stop node,
/// the number of flips and the number of steps climbed.
fn walk<C: Coin + ?Sized>(store: &NodeStore, leaf: NodeId, coin: &mut C) -> (NodeId, u32, u32) {
    let mut cur = leaf;
    let mut flips = 0;
    let mut climbed = 0;
    while let Some(parent) = store.parent(cur) {
        flips += 1;
        match coin.flip() {
            Flip::Tail => {
                cur = parent;
                climbed += 1;
            }
            Flip::Head => break,
        }
    }
    (cur, flips, climbed)
}

/// Applies `scheme`'s restructuring rule at the stop node `v`.
/// Returns the number of rotations performed.
pub fn apply_at(store: &mut NodeStore, v: NodeId, scheme: Scheme) -> u8 {
    let rotate = |store: &mut NodeStore, id| {
        store.rotate_up(id).expect("rebalancing only rotates non-root nodes");
    };
    match scheme {
        Scheme::Unbalanced => 0,
        Scheme::Zig => {
            if store.parent(v).is_none() {
                return 0;
            }
            rotate(store, v);
            1
        }
        Scheme::ZigZag | Scheme::ZigZig => {
            let Some(parent) = store.parent(v) else { return 0 };
            if store.parent(parent).is_none() {
                return 0;
            }
            let same_side = store.side_of(v) == store.side_of(parent);
            if same_side {
                rotate(store, parent);
                if scheme == Scheme::ZigZig {
                    rotate(store, v);
                    2
                } else {
                    1
                }
            } else {
                rotate(store, v);
                rotate(store, v);
                2
            }
        }
    }
}

/// Runs the walk from `leaf` and applies `scheme` at the stop node.
pub fn rebalance<C: Coin + ?Sized>(
    store: &mut NodeStore,
    leaf: NodeId,
    scheme: Scheme,
    coin: &mut C,
) -> RebalanceOutcome {
    let leaf_depth = store.depth(leaf);
    if scheme == Scheme::Unbalanced {
        return RebalanceOutcome {
            leaf_depth,
            stop_depth: leaf_depth,
            ..Default::default()
        };
    }
    let (stop, flips, climbed) = walk(store, leaf, coin);
    let reached_root = store.parent(stop).is_none();
    let rotations_performed = apply_at(store, stop, scheme);
    RebalanceOutcome {
        rotations_performed,
        leaf_depth,
        stop_depth: leaf_depth - climbed,
        flips,
        reached_root,
    }
}

pub fn rebalance_zig<C: Coin + ?Sized>(store: &mut NodeStore, v: NodeId, coin: &mut C) -> RebalanceOutcome {
    rebalance(store, v, Scheme::Zig, coin)
}

pub fn rebalance_zigzag<C: Coin + ?Sized>(store: &mut NodeStore, v: NodeId, coin: &mut C) -> RebalanceOutcome {
    rebalance(store, v, Scheme::ZigZag, coin)
}

pub fn rebalance_zigzig<C: Coin + ?Sized>(store: &mut NodeStore, v: NodeId, coin: &mut C) -> RebalanceOutcome {
    rebalance(store, v, Scheme::ZigZig, coin)
}

/// Leaf insertion followed by the chosen scheme.
pub fn insert_rebalanced<C: Coin + ?Sized>(
    store: &mut NodeStore,
    key: Key,
    scheme: Scheme,
    coin: &mut C,
) -> Result<RebalanceOutcome, TreeError> {
    let leaf = store.insert_leaf(key)?;
    Ok(rebalance(store, leaf, scheme, coin))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coin::{CoinSource, ScriptedCoin};

    fn build(keys: &[Key], scheme: Scheme, coin: &mut impl Coin) -> NodeStore {
        let mut s = NodeStore::new();
        for &k in keys {
            insert_rebalanced(&mut s, k, scheme, coin).unwrap();
        }
        s
    }

    fn is_path(s: &NodeStore) -> bool {
        s.ids().all(|id| {
            let n = s.node(id);
            n.left.is_none() || n.right.is_none()
        })
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert!("splay".parse::<Scheme>().is_err());
    }

    #[test]
    fn zig_p0_rotates_the_leaf() {
        let mut s = NodeStore::from_keys(&[15, 9, 13, 11, 12]).unwrap();
        let v = s.insert_leaf(7).unwrap();
        let mut coin = CoinSource::new(0.0, 3);
        let out = rebalance_zig(&mut s, v, &mut coin);
        assert_eq!(out.flips, 1);
        assert_eq!(out.rotations_performed, 1);
        assert_eq!(out.distance(), 0);
        // 7 rotated onto the path as 9's parent
        assert_eq!(s.canonical_shape(), "(15 (7 · (9 · (13 (11 · (12 · ·)) ·))) ·)");
    }

    #[test]
    fn zig_p1_climbs_to_root() {
        let mut s = NodeStore::from_keys(&[1, 2, 3, 4]).unwrap();
        let v = s.insert_leaf(5).unwrap();
        let mut coin = CoinSource::new(1.0, 3);
        let out = rebalance_zig(&mut s, v, &mut coin);
        assert_eq!(
            out,
            RebalanceOutcome {
                rotations_performed: 0,
                leaf_depth: 4,
                stop_depth: 0,
                flips: 4,
                reached_root: true,
            }
        );
    }

    #[test]
    fn single_node_draws_nothing() {
        let mut s = NodeStore::new();
        let mut coin = CoinSource::new(0.5, 0);
        for scheme in Scheme::RANDOMIZED {
            let mut s2 = s.clone();
            let out = insert_rebalanced(&mut s2, 1, scheme, &mut coin).unwrap();
            assert_eq!(out.flips, 0);
            assert_eq!(out.rotations_performed, 0);
            assert!(out.reached_root);
        }
        assert_eq!(coin.flips_drawn(), 0);
        insert_rebalanced(&mut s, 1, Scheme::Unbalanced, &mut coin).unwrap();
    }

    #[test]
    fn zigzag_same_side_rotates_parent() {
        // w = 6, u = 4, v = 2 all left children
        let mut s = NodeStore::from_keys(&[6, 4, 7, 5, 2, 1, 3]).unwrap();
        let v = s.find(2).unwrap();
        assert_eq!(apply_at(&mut s, v, Scheme::ZigZag), 1);
        assert_eq!(s.canonical_shape(), "(4 (2 (1 · ·) (3 · ·)) (6 (5 · ·) (7 · ·)))");
    }

    #[test]
    fn zigzag_opposite_side_rotates_node_twice() {
        // w = 7, u = 2 (left of w), v = 4 (right of u)
        let mut s = NodeStore::from_keys(&[7, 2, 8, 1, 4, 3, 5]).unwrap();
        let v = s.find(4).unwrap();
        assert_eq!(apply_at(&mut s, v, Scheme::ZigZag), 2);
        assert_eq!(s.canonical_shape(), "(4 (2 (1 · ·) (3 · ·)) (7 (5 · ·) (8 · ·)))");
    }

    #[test]
    fn zigzig_same_side_rotates_twice() {
        let mut s = NodeStore::from_keys(&[6, 4, 7, 5, 2, 1, 3]).unwrap();
        let v = s.find(2).unwrap();
        assert_eq!(apply_at(&mut s, v, Scheme::ZigZig), 2);
        assert_eq!(s.canonical_shape(), "(2 (1 · ·) (4 (3 · ·) (6 (5 · ·) (7 · ·))))");
    }

    #[test]
    fn zigzig_opposite_side_matches_zigzag() {
        let keys = [7, 2, 8, 1, 4, 3, 5];
        let mut a = NodeStore::from_keys(&keys).unwrap();
        let mut b = a.clone();
        let v = a.find(4).unwrap();
        apply_at(&mut a, v, Scheme::ZigZag);
        apply_at(&mut b, v, Scheme::ZigZig);
        assert_eq!(a, b);
    }

    #[test]
    fn child_of_root_is_left_alone() {
        for scheme in [Scheme::ZigZag, Scheme::ZigZig] {
            let mut s = NodeStore::from_keys(&[2]).unwrap();
            let v = s.insert_leaf(1).unwrap();
            let mut coin = ScriptedCoin::tails_then_head(0);
            let out = rebalance(&mut s, v, scheme, &mut coin);
            assert_eq!(out.rotations_performed, 0);
            assert!(!out.reached_root);
            assert_eq!(s.canonical_shape(), "(2 (1 · ·) ·)");
        }
    }

    #[test]
    fn scripted_walk_stops_at_requested_ancestor() {
        let mut s = NodeStore::from_keys(&[1, 2, 3, 4]).unwrap();
        let v = s.insert_leaf(5).unwrap();
        let mut coin = ScriptedCoin::tails_then_head(2);
        let out = rebalance_zig(&mut s, v, &mut coin);
        assert_eq!(out.stop_depth, 2);
        assert_eq!(out.flips, 3);
        assert_eq!(coin.remaining(), 0);
        // node 3 rotated up above 2
        assert_eq!(s.canonical_shape(), "(1 · (3 (2 · ·) (4 · (5 · ·))))");
    }

    #[test]
    fn unbalanced_uses_no_coins() {
        let mut coin = CoinSource::new(0.5, 0);
        let s = build(&[1, 2, 3, 4, 5, 6], Scheme::Unbalanced, &mut coin);
        assert_eq!(coin.flips_drawn(), 0);
        assert_eq!(s.canonical_shape(), "(1 · (2 · (3 · (4 · (5 · (6 · ·))))))");
    }

    #[test]
    fn zig_p0_keeps_a_single_path() {
        let mut coin = CoinSource::new(0.0, 0);
        let mut s = NodeStore::new();
        for &k in &[17, 3, 40, 22, 9, 31, 1, 64, 28, 12, 55, 2] {
            insert_rebalanced(&mut s, k, Scheme::Zig, &mut coin).unwrap();
            assert!(is_path(&s));
        }
    }

    #[test]
    fn p1_matches_unbalanced() {
        let keys = [5, 9, 1, 7, 3, 8, 2, 6, 4];
        let base = NodeStore::from_keys(&keys).unwrap();
        for scheme in Scheme::RANDOMIZED {
            let mut coin = CoinSource::new(1.0, 11);
            assert_eq!(build(&keys, scheme, &mut coin), base, "{scheme}");
        }
    }

    #[test]
    fn pairs_p0_shapes() {
        let pairs = [2, 1, 4, 3, 6, 5];
        let zig = build(&pairs, Scheme::Zig, &mut CoinSource::new(0.0, 0));
        assert_eq!(zig.canonical_shape(), "(1 · (6 (5 (4 (3 (2 · ·) ·) ·) ·) ·))");
        let zz = build(&pairs, Scheme::ZigZag, &mut CoinSource::new(0.0, 0));
        assert_eq!(zz.canonical_shape(), "(5 (4 (3 (2 (1 · ·) ·) ·) ·) (6 · ·))");
    }

    #[test]
    fn zigzig_p0_moves_insertion_point_up() {
        // on an increasing sequence every stop is a zag-zag case and
        // rotates the new leaf to the top of its grandparent's position
        let mut coin = CoinSource::new(0.0, 0);
        let mut s = NodeStore::new();
        let mut stops = Vec::new();
        for k in 1..=64 {
            let out = insert_rebalanced(&mut s, k, Scheme::ZigZig, &mut coin).unwrap();
            stops.push(out.stop_depth);
        }
        let early: u32 = stops[8..24].iter().sum();
        let late: u32 = stops[48..64].iter().sum();
        assert!(late <= early, "early {early}, late {late}");
        assert!(stops.iter().all(|&d| d <= 2));
    }

    #[test]
    fn walk_distance_and_flip_means() {
        for p in [0.25, 0.5, 0.75] {
            let mut coin = CoinSource::new(p, 99);
            let mut s = NodeStore::new();
            let (mut dist, mut dist2, mut flips, mut flips2) = (0.0, 0.0, 0.0, 0.0);
            let n = 4096;
            for k in 1..=n {
                let o = insert_rebalanced(&mut s, k, Scheme::Zig, &mut coin).unwrap();
                let (d, f) = (o.distance() as f64, o.flips as f64);
                dist += d;
                dist2 += d * d;
                flips += f;
                flips2 += f * f;
            }
            let nf = n as f64;
            let se = |s: f64, s2: f64| ((s2 / nf - (s / nf).powi(2)) / nf).sqrt();
            assert!(dist / nf <= p / (1.0 - p) + 3.0 * se(dist, dist2));
            assert!(flips / nf <= 1.0 / (1.0 - p) + 3.0 * se(flips, flips2));
        }
    }
}
