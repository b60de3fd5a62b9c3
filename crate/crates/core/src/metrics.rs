//! Depth statistics of a tree.

use std::io::Write;

use crate::tree::{Key, NodeStore, TreeError};

/// Node count per depth; index is the depth.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DepthHistogram(pub Vec<u64>);

impl DepthHistogram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, depth: u32, count: u64) {
        let d = depth as usize;
        if self.0.len() <= d {
            self.0.resize(d + 1, 0);
        }
        self.0[d] += count;
    }

    pub fn merge(&mut self, other: &DepthHistogram) {
        for (d, &c) in other.0.iter().enumerate() {
            if c > 0 {
                self.add(d as u32, c);
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    pub fn depth_sum(&self) -> u64 {
        self.0.iter().enumerate().map(|(d, &c)| d as u64 * c).sum()
    }

    /// Depth with the largest count (smallest such depth on ties).
    pub fn mode(&self) -> Option<u32> {
        let max = *self.0.iter().max()?;
        if max == 0 {
            return None;
        }
        self.0.iter().position(|&c| c == max).map(|d| d as u32)
    }

    pub fn get(&self, depth: u32) -> u64 {
        self.0.get(depth as usize).copied().unwrap_or(0)
    }

    /// CSV rows `depth,count`, one per depth up to the deepest populated one.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "depth,count")?;
        for (d, c) in self.0.iter().enumerate() {
            writeln!(w, "{d},{c}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthStats {
    pub n: usize,
    pub depth_sum: u64,
    pub avg_depth: f64,
    pub right_height: u32,
    pub left_height: u32,
    pub height: u32,
    pub histogram: DepthHistogram,
    /// Depth of the parent of the finger's insertion point, when the
    /// driver tracks one.
    pub insertion_point_depth: Option<u32>,
    pub rotations_total: u64,
    pub flips_total: u64,
}

/// One traversal over the tree. Counters not derivable from the shape
/// (rotations, flips, insertion point) are left empty for the caller.
pub fn compute_stats(store: &NodeStore) -> Result<DepthStats, TreeError> {
    let root = store.root().ok_or(TreeError::Empty)?;
    let mut histogram = DepthHistogram(Vec::new());
    let mut min_key = (Key::MAX, 0u32);
    let mut max_key = (Key::MIN, 0u32);
    let mut stack = vec![(root, 0u32)];
    while let Some((id, d)) = stack.pop() {
        histogram.add(d, 1);
        let node = store.node(id);
        if node.key < min_key.0 {
            min_key = (node.key, d);
        }
        if node.key > max_key.0 {
            max_key = (node.key, d);
        }
        stack.extend(node.left.map(|c| (c, d + 1)));
        stack.extend(node.right.map(|c| (c, d + 1)));
    }
    let n = store.len();
    let depth_sum = histogram.depth_sum();
    Ok(DepthStats {
        n,
        depth_sum,
        avg_depth: depth_sum as f64 / n as f64,
        right_height: max_key.1,
        left_height: min_key.1,
        height: (histogram.0.len() - 1) as u32,
        histogram,
        insertion_point_depth: None,
        rotations_total: 0,
        flips_total: 0,
    })
}

/// Sum of the depths of the internal nodes on a root path to an external
/// leaf at depth `d`: `0 + 1 + ... + (d - 1)`.
pub fn external_leaf_path_depth_sum(d: u64) -> u64 {
    if d == 0 {
        0
    } else {
        d * (d - 1) / 2
    }
}

/// Adds `store`'s depth histogram into `acc`.
pub fn depth_profile_accumulate(mut acc: DepthHistogram, store: &NodeStore) -> DepthHistogram {
    if let Ok(stats) = compute_stats(store) {
        acc.merge(&stats.histogram);
    }
    acc
}

/// Depth of the parent of the external leaf next to `finger` on the side
/// `toward_greater` (the gap between `finger` and its successor, or its
/// predecessor otherwise).
pub fn gap_parent_depth(store: &NodeStore, finger: Key, toward_greater: bool) -> Option<u32> {
    let probe = 2 * finger as i64 + if toward_greater { 1 } else { -1 };
    store.external_parent(probe).map(|(parent, _)| store.depth(parent))
}
