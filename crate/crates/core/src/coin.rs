//! Seeded Bernoulli coin driving every rebalancing decision.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flip {
    /// Move one node up and keep walking.
    Tail,
    /// Stop here and rebalance.
    Head,
}

/// Anything that can produce a stream of coin flips.
pub trait Coin {
    fn flip(&mut self) -> Flip;
}

/// Coin that shows tail with probability `p_tail`.
///
/// A draw is a uniform `u` in `[0, 1)`; the result is tail iff `u < p_tail`,
/// so `p_tail = 0` never shows tail and `p_tail = 1` always does. A draw is
/// consumed even in those degenerate cases.
#[derive(Debug, Clone)]
pub struct CoinSource {
    p_tail: f64,
    rng: ChaCha8Rng,
    flips_drawn: u64,
}

impl CoinSource {
    /// # Panics
    /// If `p_tail` is outside `[0, 1]`.
    pub fn new(p_tail: f64, seed: u64) -> Self {
        assert!(
            (0.0..=1.0).contains(&p_tail),
            "tail probability {p_tail} outside [0, 1]"
        );
        CoinSource {
            p_tail,
            rng: ChaCha8Rng::seed_from_u64(seed),
            flips_drawn: 0,
        }
    }

    pub fn p_tail(&self) -> f64 {
        self.p_tail
    }

    pub fn flips_drawn(&self) -> u64 {
        self.flips_drawn
    }
}

impl Coin for CoinSource {
    fn flip(&mut self) -> Flip {
        self.flips_drawn += 1;
        let u: f64 = self.rng.random();
        if u < self.p_tail {
            Flip::Tail
        } else {
            Flip::Head
        }
    }
}

/// Replays a fixed list of flips; panics when exhausted. Handy in tests.
#[derive(Debug, Clone)]
pub struct ScriptedCoin {
    flips: std::vec::IntoIter<Flip>,
}

impl ScriptedCoin {
    pub fn new(flips: impl IntoIterator<Item = Flip>) -> Self {
        ScriptedCoin {
            flips: flips.into_iter().collect::<Vec<_>>().into_iter(),
        }
    }

    /// `tails` tails followed by a head.
    pub fn tails_then_head(tails: usize) -> Self {
        Self::new(std::iter::repeat_n(Flip::Tail, tails).chain([Flip::Head]))
    }

    pub fn remaining(&self) -> usize {
        self.flips.len()
    }
}

impl Coin for ScriptedCoin {
    fn flip(&mut self) -> Flip {
        self.flips.next().expect("scripted coin ran out of flips")
    }
}
