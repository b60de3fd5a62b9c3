//! Randomized bottom-up rebalancing of binary search trees.
//!
//! After an ordinary leaf insertion, a walk climbs from the new leaf by coin
//! flips and stops at some ancestor, where a local rotation (zig, zig-zag or
//! zig-zig) is applied. The crate has the tree, the three schemes, the
//! structured insertion orders, an exact outcome enumerator for small `n`, a
//! reflected random walk model and the experiment drivers.

pub mod acceptance;
pub mod coin;
pub mod experiments;
pub mod metrics;
pub mod oracle;
pub mod process;
pub mod rebalance;
pub mod sequences;
pub mod tree;

pub use coin::{Coin, CoinSource, Flip, ScriptedCoin};
pub use metrics::{compute_stats, DepthHistogram, DepthStats};
pub use rebalance::{insert_rebalanced, rebalance, RebalanceOutcome, Scheme};
pub use sequences::{generate, SequenceKind};
pub use tree::{Key, NodeId, NodeStore, Side, TreeError};
