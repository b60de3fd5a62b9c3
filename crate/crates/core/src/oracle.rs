//! Exact outcome distributions by exhaustive enumeration of coin branches.
//!
//! For a leaf inserted at depth `d` the upward walk has `d + 1` outcomes:
//! head after `k` tails (`k = 0..d`), which stops at the `k`-th ancestor with
//! probability `(1 - p) p^k`, or `d` tails in a row, which reaches the root
//! with probability `p^d`. Each outcome is followed depth-first and the
//! probability of every final tree is summed per canonical shape.

use std::collections::BTreeMap;
use std::fmt::Debug;
use std::io::Write;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::metrics::compute_stats;
use crate::rebalance::{apply_at, Scheme};
use crate::tree::{Key, NodeStore, TreeError};

/// Default cap on the number of enumerated branch leaves.
pub const DEFAULT_BRANCH_LIMIT: u128 = 10_000_000;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("enumeration would visit up to {estimate} branches (limit {limit})")]
    TooManyBranches { estimate: u128, limit: u128 },
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("probability {0} outside [0, 1]")]
    BadProbability(String),
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Arithmetic needed to carry branch probabilities.
pub trait Probability: Clone + Debug + PartialEq {
    type Sum: Default;

    fn nil() -> Self;
    fn unit() -> Self;
    fn from_ratio(num: u64, den: u64) -> Self;
    fn is_zero(&self) -> bool;
    fn times(&self, other: &Self) -> Self;
    fn complement(&self) -> Self;
    fn approx(&self) -> f64;
    fn in_unit_interval(&self) -> bool;
    fn accumulate(sum: &mut Self::Sum, x: &Self);
    fn finish(sum: &Self::Sum) -> Self;
    fn csv_header() -> &'static [&'static str];
    fn csv_fields(&self) -> Vec<String>;
}

impl Probability for BigRational {
    type Sum = BigRational;

    fn nil() -> Self {
        Zero::zero()
    }
    fn unit() -> Self {
        One::one()
    }
    fn from_ratio(num: u64, den: u64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn times(&self, other: &Self) -> Self {
        self * other
    }
    fn complement(&self) -> Self {
        <BigRational as One>::one() - self
    }
    fn approx(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn in_unit_interval(&self) -> bool {
        !Signed::is_negative(self) && self <= &<BigRational as One>::one()
    }
    fn accumulate(sum: &mut Self::Sum, x: &Self) {
        *sum += x;
    }
    fn finish(sum: &Self::Sum) -> Self {
        sum.clone()
    }
    fn csv_header() -> &'static [&'static str] {
        &["shape", "probability_numerator", "probability_denominator"]
    }
    fn csv_fields(&self) -> Vec<String> {
        vec![self.numer().to_string(), self.denom().to_string()]
    }
}

impl Probability for f64 {
    type Sum = KahanSum;

    fn nil() -> Self {
        0.0
    }
    fn unit() -> Self {
        1.0
    }
    fn from_ratio(num: u64, den: u64) -> Self {
        num as f64 / den as f64
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn times(&self, other: &Self) -> Self {
        self * other
    }
    fn complement(&self) -> Self {
        1.0 - self
    }
    fn approx(&self) -> f64 {
        *self
    }
    fn in_unit_interval(&self) -> bool {
        (0.0..=1.0).contains(self)
    }
    fn accumulate(sum: &mut Self::Sum, x: &Self) {
        sum.add(*x);
    }
    fn finish(sum: &Self::Sum) -> Self {
        sum.value()
    }
    fn csv_header() -> &'static [&'static str] {
        &["shape", "probability"]
    }
    fn csv_fields(&self) -> Vec<String> {
        vec![self.to_string()]
    }
}

/// Parses `a/b` or a decimal such as `0.25` into an exact rational.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once('/') {
        let num: BigInt = a.trim().parse().ok()?;
        let den: BigInt = b.trim().parse().ok()?;
        if Zero::is_zero(&den) {
            return None;
        }
        return Some(BigRational::new(num, den));
    }
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !frac.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int}{frac}");
    let num: BigInt = digits.parse().ok()?;
    let den = num_traits::pow(BigInt::from(10u32), frac.len());
    Some(BigRational::new(num, den))
}

/// Exact distribution over final tree shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution<P: Probability> {
    /// Canonical shape → probability, sorted by shape.
    pub entries: BTreeMap<String, P>,
    pub p: P,
    pub scheme: Scheme,
    pub sequence: Vec<Key>,
}

impl<P: Probability> OutcomeDistribution<P> {
    pub fn total(&self) -> P {
        let mut sum = P::Sum::default();
        for prob in self.entries.values() {
            P::accumulate(&mut sum, prob);
        }
        P::finish(&sum)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, shape: &str) -> Option<&P> {
        self.entries.get(shape)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        out.write_record(P::csv_header())?;
        for (shape, prob) in &self.entries {
            let mut row = vec![shape.clone()];
            row.extend(prob.csv_fields());
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Upper bound on branch leaves: the `i`-th insertion lands at depth at most
/// `i - 1` and so fans out at most `i` ways.
pub fn branch_estimate(n: usize, scheme: Scheme) -> u128 {
    if scheme == Scheme::Unbalanced {
        return 1;
    }
    (1..=n as u128)
        .try_fold(1u128, |acc, i| acc.checked_mul(i))
        .unwrap_or(u128::MAX)
}

pub fn enumerate_distribution<P: Probability>(
    seq: &[Key],
    scheme: Scheme,
    p: P,
) -> Result<OutcomeDistribution<P>, OracleError> {
    enumerate_distribution_with_limit(seq, scheme, p, DEFAULT_BRANCH_LIMIT)
}

pub fn enumerate_distribution_with_limit<P: Probability>(
    seq: &[Key],
    scheme: Scheme,
    p: P,
    limit: u128,
) -> Result<OutcomeDistribution<P>, OracleError> {
    if !p.in_unit_interval() {
        return Err(OracleError::BadProbability(format!("{p:?}")));
    }
    let estimate = branch_estimate(seq.len(), scheme);
    if estimate > limit {
        return Err(OracleError::TooManyBranches { estimate, limit });
    }
    let mut sums: BTreeMap<String, P::Sum> = BTreeMap::new();
    let ctx = Enumeration {
        seq,
        scheme,
        tail: p.clone(),
        head: p.complement(),
    };
    ctx.descend(&NodeStore::with_capacity(seq.len()), 0, P::unit(), &mut sums)?;
    let entries = sums.iter().map(|(k, s)| (k.clone(), P::finish(s))).collect();
    Ok(OutcomeDistribution {
        entries,
        p,
        scheme,
        sequence: seq.to_vec(),
    })
}

struct Enumeration<'a, P> {
    seq: &'a [Key],
    scheme: Scheme,
    tail: P,
    head: P,
}

impl<P: Probability> Enumeration<'_, P> {
    fn descend(
        &self,
        store: &NodeStore,
        idx: usize,
        weight: P,
        sums: &mut BTreeMap<String, P::Sum>,
    ) -> Result<(), OracleError> {
        let Some(&key) = self.seq.get(idx) else {
            P::accumulate(sums.entry(store.canonical_shape()).or_default(), &weight);
            return Ok(());
        };
        let mut base = store.clone();
        let leaf = base.insert_leaf(key)?;
        if self.scheme == Scheme::Unbalanced {
            return self.descend(&base, idx + 1, weight, sums);
        }
        let depth = base.depth(leaf);
        let mut tails = P::unit();
        for k in 0..depth {
            let branch = weight.times(&self.head).times(&tails);
            if !branch.is_zero() {
                let mut next = base.clone();
                let stop = next.ancestor(leaf, k).expect("k < depth");
                apply_at(&mut next, stop, self.scheme);
                self.descend(&next, idx + 1, branch, sums)?;
            }
            tails = tails.times(&self.tail);
        }
        let to_root = weight.times(&tails);
        if !to_root.is_zero() {
            self.descend(&base, idx + 1, to_root, sums)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeStat {
    AvgDepth,
    RightHeight,
    LeftHeight,
}

/// `Σ probability × stat(shape)` over the distribution.
pub fn expected_stat<P: Probability>(dist: &OutcomeDistribution<P>, stat: ShapeStat) -> Result<f64, OracleError> {
    let mut sum = P::Sum::default();
    for (shape, prob) in &dist.entries {
        let stats = compute_stats(&NodeStore::parse_shape(shape)?)?;
        let value = match stat {
            ShapeStat::AvgDepth => P::from_ratio(stats.depth_sum, stats.n as u64),
            ShapeStat::RightHeight => P::from_ratio(stats.right_height as u64, 1),
            ShapeStat::LeftHeight => P::from_ratio(stats.left_height as u64, 1),
        };
        P::accumulate(&mut sum, &prob.times(&value));
    }
    Ok(P::finish(&sum).approx())
}

/// One row of the case table for inserting the pair `2i, 2i-1` with `Zig`
/// when the right height is `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairCase {
    pub probability: f64,
    pub height_change: i32,
}

/// The ten cases, in order, with their probabilities and right-height change.
pub fn pair_cases(p: f64, d: u32) -> [PairCase; 10] {
    let d = d as i32;
    let q = 1.0 - p;
    let pw = |e: i32| p.powi(e);
    let first_climbs = pw(d + 1);
    let first_rotates_leaf = q;
    let first_rotates_above = p * (1.0 - pw(d));
    let case = |probability, height_change| PairCase {
        probability,
        height_change,
    };
    [
        case(first_climbs * pw(d + 2), 1),
        case(first_climbs * q, 2),
        case(first_climbs * p * (1.0 - pw(d + 1)), 0),
        case(first_rotates_leaf * pw(d + 2), 0),
        case(first_rotates_leaf * q, 0),
        case(first_rotates_leaf * p * q, 1),
        case(first_rotates_leaf * p * p * (1.0 - pw(d)), -1),
        case(first_rotates_above * pw(d + 1), 0),
        case(first_rotates_above * q, 1),
        case(first_rotates_above * p * (1.0 - pw(d)), -1),
    ]
}

/// Expected right-height change for one pair, written out term by term
/// grouped by the size of the change.
pub fn pair_height_change_raw(p: f64, d: u32) -> f64 {
    let d = d as i32;
    let pw = |e: i32| p.powi(e);
    let minus_one = (1.0 - p) * p * p * (1.0 - pw(d)) + p * (1.0 - pw(d)) * p * (1.0 - pw(d));
    let plus_one = pw(d + 1) * pw(d + 2) + (1.0 - p) * p * (1.0 - p) + p * (1.0 - pw(d)) * (1.0 - p);
    let plus_two = pw(d + 1) * (1.0 - p);
    -minus_one + plus_one + 2.0 * plus_two
}

/// Closed form `2p³ − 5p² + 2p + p^{d+1}(1 + 2p − p² + (p − 1)p^{d+1})`.
pub fn pair_height_change_reduced(p: f64, d: u32) -> f64 {
    let tail = p.powi(d as i32 + 1);
    2.0 * p.powi(3) - 5.0 * p * p + 2.0 * p + tail * (1.0 + 2.0 * p - p * p + (p - 1.0) * tail)
}

/// Both forms of the expected pair height change: `(raw, reduced)`.
pub fn expected_pair_height_change(p: f64, d: u32) -> (f64, f64) {
    (pair_height_change_raw(p, d), pair_height_change_reduced(p, d))
}
