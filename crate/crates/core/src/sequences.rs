//! Insertion orders: random permutations and the structured families.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::tree::Key;

/// Stream used for permutation draws, kept apart from the coin stream of the
/// same seed.
const PERMUTATION_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SequenceKind {
    /// Uniform random permutation of `1..=n` drawn from the given seed.
    Permutation(u64),
    /// `1, 2, ..., n`
    Increasing,
    /// `n, n-1, ..., 1`
    Decreasing,
    /// `1, n, 2, n-1, ..., n/2, n/2+1`
    Converging,
    /// `2, 1, 4, 3, ..., n, n-1`
    Pairs,
    /// `2, 4, ..., n, n-1, n-3, ..., 3, 1`
    Bitonic,
    /// `2, 4, ..., n, 1, 3, ..., n-1`
    Runs,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SequenceError {
    #[error("{kind} sequences need an even length, got {n}")]
    OddLength { kind: SequenceKind, n: usize },
    #[error("sequence length must be positive")]
    Empty,
    #[error("not a permutation of 1..={n}: {detail}")]
    NotPermutation { n: usize, detail: String },
    #[error("unknown sequence kind {0:?}")]
    Unknown(String),
}

impl SequenceKind {
    /// Every kind, with `seed` for the permutation.
    pub fn all(seed: u64) -> [SequenceKind; 7] {
        [
            SequenceKind::Permutation(seed),
            SequenceKind::Increasing,
            SequenceKind::Decreasing,
            SequenceKind::Converging,
            SequenceKind::Pairs,
            SequenceKind::Bitonic,
            SequenceKind::Runs,
        ]
    }

    pub fn name(self) -> &'static str {
        match self {
            SequenceKind::Permutation(_) => "permutation",
            SequenceKind::Increasing => "increasing",
            SequenceKind::Decreasing => "decreasing",
            SequenceKind::Converging => "converging",
            SequenceKind::Pairs => "pairs",
            SequenceKind::Bitonic => "bitonic",
            SequenceKind::Runs => "runs",
        }
    }

    pub fn requires_even(self) -> bool {
        matches!(
            self,
            SequenceKind::Converging | SequenceKind::Pairs | SequenceKind::Bitonic | SequenceKind::Runs
        )
    }

    /// Finger families: each key is the neighbour of the previous one.
    pub fn is_finger_family(self) -> bool {
        matches!(
            self,
            SequenceKind::Increasing | SequenceKind::Decreasing | SequenceKind::Converging
        )
    }

    /// Same family with a different permutation seed; other kinds unchanged.
    pub fn reseeded(self, seed: u64) -> Self {
        match self {
            SequenceKind::Permutation(_) => SequenceKind::Permutation(seed),
            other => other,
        }
    }

    pub fn check_length(self, n: usize) -> Result<(), SequenceError> {
        if n == 0 {
            return Err(SequenceError::Empty);
        }
        if self.requires_even() && n % 2 == 1 {
            return Err(SequenceError::OddLength { kind: self, n });
        }
        Ok(())
    }
}

impl fmt::Display for SequenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parses a family name. A bare `permutation` gets seed 0; `permutation:<seed>`
/// sets it explicitly.
impl FromStr for SequenceKind {
    type Err = SequenceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        if let Some(seed) = s.strip_prefix("permutation:") {
            return seed
                .parse()
                .map(SequenceKind::Permutation)
                .map_err(|_| SequenceError::Unknown(s.clone()));
        }
        SequenceKind::all(0)
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or(SequenceError::Unknown(s))
    }
}

/// The insertion order of `kind` over `1..=n`.
pub fn generate(kind: SequenceKind, n: usize) -> Result<Vec<Key>, SequenceError> {
    kind.check_length(n)?;
    let n = n as Key;
    let half = n / 2;
    let seq = match kind {
        SequenceKind::Permutation(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(PERMUTATION_STREAM);
            let mut v: Vec<Key> = (1..=n).collect();
            v.shuffle(&mut rng);
            v
        }
        SequenceKind::Increasing => (1..=n).collect(),
        SequenceKind::Decreasing => (1..=n).rev().collect(),
        SequenceKind::Converging => (1..=half).flat_map(|i| [i, n + 1 - i]).collect(),
        SequenceKind::Pairs => (1..=half).flat_map(|i| [2 * i, 2 * i - 1]).collect(),
        SequenceKind::Bitonic => {
            let evens = (1..=half).map(|i| 2 * i);
            let odds = (1..=half).rev().map(|i| 2 * i - 1);
            evens.chain(odds).collect()
        }
        SequenceKind::Runs => {
            let evens = (1..=half).map(|i| 2 * i);
            let odds = (1..=half).map(|i| 2 * i - 1);
            evens.chain(odds).collect()
        }
    };
    Ok(seq)
}

fn check_permutation(seq: &[Key]) -> Result<(), SequenceError> {
    let n = seq.len();
    let mut seen = vec![false; n + 1];
    for &k in seq {
        let idx = k as usize;
        if idx == 0 || idx > n {
            return Err(SequenceError::NotPermutation {
                n,
                detail: format!("{k} out of range"),
            });
        }
        if std::mem::replace(&mut seen[idx], true) {
            return Err(SequenceError::NotPermutation {
                n,
                detail: format!("{k} repeated"),
            });
        }
    }
    Ok(())
}

/// True iff every key after the first is the immediate predecessor or
/// successor of the previous key among the keys inserted so far.
pub fn is_finger_sequence(seq: &[Key]) -> Result<bool, SequenceError> {
    check_permutation(seq)?;
    let mut inserted = BTreeSet::new();
    let mut prev: Option<Key> = None;
    for &k in seq {
        if let Some(p) = prev {
            let (lo, hi) = if p < k { (p, k) } else { (k, p) };
            if inserted.range(lo + 1..hi).next().is_some() {
                return Ok(false);
            }
        }
        inserted.insert(k);
        prev = Some(k);
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::NodeStore;

    #[test]
    fn small_examples() {
        assert_eq!(generate(SequenceKind::Converging, 6).unwrap(), [1, 6, 2, 5, 3, 4]);
        assert_eq!(generate(SequenceKind::Pairs, 6).unwrap(), [2, 1, 4, 3, 6, 5]);
        assert_eq!(generate(SequenceKind::Bitonic, 6).unwrap(), [2, 4, 6, 5, 3, 1]);
        assert_eq!(generate(SequenceKind::Runs, 6).unwrap(), [2, 4, 6, 1, 3, 5]);
        assert_eq!(generate(SequenceKind::Increasing, 3).unwrap(), [1, 2, 3]);
        assert_eq!(generate(SequenceKind::Decreasing, 3).unwrap(), [3, 2, 1]);
    }

    #[test]
    fn odd_lengths_rejected_where_required() {
        for kind in SequenceKind::all(0) {
            let r = generate(kind, 7);
            assert_eq!(r.is_err(), kind.requires_even(), "{kind}");
        }
        assert_eq!(generate(SequenceKind::Increasing, 0), Err(SequenceError::Empty));
    }

    #[test]
    fn every_output_is_a_permutation() {
        for n in (2..=64).step_by(2) {
            for kind in SequenceKind::all(n as u64) {
                let mut seq = generate(kind, n).unwrap();
                seq.sort_unstable();
                assert_eq!(seq, (1..=n as Key).collect::<Vec<_>>(), "{kind} n={n}");
            }
        }
    }

    #[test]
    fn permutation_depends_only_on_seed() {
        let a = generate(SequenceKind::Permutation(5), 100).unwrap();
        let b = generate(SequenceKind::Permutation(5), 100).unwrap();
        let c = generate(SequenceKind::Permutation(6), 100).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn permutation_is_uniform_on_three_keys() {
        let mut counts = std::collections::HashMap::new();
        let trials = 60_000;
        for seed in 0..trials {
            *counts
                .entry(generate(SequenceKind::Permutation(seed), 3).unwrap())
                .or_insert(0u32) += 1;
        }
        assert_eq!(counts.len(), 6);
        let q = 1.0 / 6.0;
        let sigma = (q * (1.0 - q) / trials as f64).sqrt();
        for c in counts.values() {
            assert!((*c as f64 / trials as f64 - q).abs() < 4.0 * sigma);
        }
    }

    #[test]
    fn finger_recognition() {
        assert!(is_finger_sequence(&[1, 2, 3, 4, 5, 6]).unwrap());
        assert!(is_finger_sequence(&generate(SequenceKind::Converging, 6).unwrap()).unwrap());
        assert!(is_finger_sequence(&generate(SequenceKind::Decreasing, 9).unwrap()).unwrap());
        assert!(!is_finger_sequence(&generate(SequenceKind::Pairs, 6).unwrap()).unwrap());
        assert!(!is_finger_sequence(&generate(SequenceKind::Bitonic, 6).unwrap()).unwrap());
        assert!(is_finger_sequence(&[3, 1, 2]).unwrap());
        assert!(!is_finger_sequence(&[2, 1, 3]).unwrap());
    }

    #[test]
    fn finger_rejects_non_permutations() {
        assert!(is_finger_sequence(&[1, 1, 2]).is_err());
        assert!(is_finger_sequence(&[1, 4]).is_err());
        assert!(is_finger_sequence(&[0, 1]).is_err());
    }

    #[test]
    fn pairs_bitonic_runs_build_the_same_unbalanced_tree() {
        for n in (2..=40).step_by(2) {
            let shapes: Vec<String> = [SequenceKind::Pairs, SequenceKind::Bitonic, SequenceKind::Runs]
                .into_iter()
                .map(|k| {
                    NodeStore::from_keys(&generate(k, n).unwrap())
                        .unwrap()
                        .canonical_shape()
                })
                .collect();
            assert_eq!(shapes[0], shapes[1]);
            assert_eq!(shapes[0], shapes[2]);
        }
    }

    #[test]
    fn names_parse() {
        for kind in SequenceKind::all(0) {
            assert_eq!(kind.name().parse::<SequenceKind>().unwrap(), kind);
        }
        assert_eq!(
            "permutation:9".parse::<SequenceKind>().unwrap(),
            SequenceKind::Permutation(9)
        );
        assert!("zigzag".parse::<SequenceKind>().is_err());
    }
}
