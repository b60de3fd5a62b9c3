//! Reflected lazy random walk `Y_i = max(0, Y_{i-1} + X_i)`, `Y_0 = 0`, with
//! steps `X_i ∈ {-1, 0, +1}`. Models the depth of an insertion point that a
//! rebalancing step may push up or down.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

/// Samples kept when a trajectory is requested.
pub const TRAJECTORY_SAMPLES: u64 = 1000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProcessError {
    #[error("step probabilities must be non-negative and sum to 1, got -1:{p_minus} 0:{p_zero} +1:{p_plus}")]
    InvalidParams { p_minus: f64, p_zero: f64, p_plus: f64 },
    #[error("bound needs p_minus > p_plus, got p_minus={p_minus} p_plus={p_plus}")]
    NoNegativeDrift { p_minus: f64, p_plus: f64 },
    #[error("need n >= 2 and at least one trial (n={n}, trials={trials})")]
    TooSmall { n: u64, trials: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcessParams {
    pub p_minus: f64,
    pub p_zero: f64,
    pub p_plus: f64,
}

impl ProcessParams {
    pub fn new(p_minus: f64, p_zero: f64, p_plus: f64) -> Result<Self, ProcessError> {
        let ok = [p_minus, p_zero, p_plus].iter().all(|&x| x >= 0.0 && x.is_finite())
            && (p_minus + p_zero + p_plus - 1.0).abs() <= 1e-12;
        if !ok {
            return Err(ProcessError::InvalidParams {
                p_minus,
                p_zero,
                p_plus,
            });
        }
        Ok(ProcessParams {
            p_minus,
            p_zero,
            p_plus,
        })
    }

    /// No lazy steps: `+1` with `p_plus`, `-1` otherwise.
    pub fn two_sided(p_plus: f64) -> Result<Self, ProcessError> {
        Self::new(1.0 - p_plus, 0.0, p_plus)
    }

    /// `p_plus / (p_plus + p_minus)`, the up-probability of a non-lazy step.
    pub fn alpha(&self) -> f64 {
        self.p_plus / (self.p_plus + self.p_minus)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessRun {
    pub n: u64,
    pub final_y: u64,
    /// `Σ X_i`, the walk without reflection.
    pub free_sum: i64,
    /// `(step, Y_step)` every `n / 1000` steps, if requested.
    pub trajectory_sample: Option<Vec<(u64, u64)>>,
}

fn run(params: &ProcessParams, n: u64, seed: u64, keep: bool) -> ProcessRun {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let down = params.p_minus;
    let stay = params.p_minus + params.p_zero;
    let stride = (n / TRAJECTORY_SAMPLES).max(1);
    let mut trajectory = keep.then(|| Vec::with_capacity((n / stride) as usize + 1));
    let mut y: u64 = 0;
    let mut z: i64 = 0;
    for i in 1..=n {
        let u: f64 = rng.random();
        if u < down {
            y = y.saturating_sub(1);
            z -= 1;
        } else if u >= stay {
            y += 1;
            z += 1;
        }
        if let Some(t) = trajectory.as_mut() {
            if i % stride == 0 {
                t.push((i, y));
            }
        }
    }
    ProcessRun {
        n,
        final_y: y,
        free_sum: z,
        trajectory_sample: trajectory,
    }
}

/// One run of `n` steps.
pub fn simulate(params: &ProcessParams, n: u64, seed: u64) -> ProcessRun {
    run(params, n, seed, false)
}

/// Like [`simulate`] but also keeps a thinned trajectory.
pub fn simulate_with_trajectory(params: &ProcessParams, n: u64, seed: u64) -> ProcessRun {
    run(params, n, seed, true)
}

/// Mean of `Y_n` over independent runs and the growth exponent it implies.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentEstimate {
    pub n: u64,
    pub trials: usize,
    pub mean: f64,
    pub std_err: f64,
    /// `lg(mean) / lg(n)`; negative infinity when every run ended at 0.
    pub exponent: f64,
}

impl ExponentEstimate {
    pub fn is_degenerate(&self) -> bool {
        self.exponent == f64::NEG_INFINITY
    }
}

/// Runs `trials` walks seeded `seed, seed + 1, ...` and takes the log of
/// the mean final value.
pub fn estimate_exponent(
    params: &ProcessParams,
    n: u64,
    trials: usize,
    seed: u64,
) -> Result<ExponentEstimate, ProcessError> {
    if n < 2 || trials == 0 {
        return Err(ProcessError::TooSmall { n, trials });
    }
    let finals: Vec<u64> = (0..trials as u64)
        .into_par_iter()
        .map(|t| simulate(params, n, seed.wrapping_add(t)).final_y)
        .collect();
    let (mean, std_err) = mean_and_stderr(finals.iter().map(|&y| y as f64));
    let exponent = if mean == 0.0 {
        f64::NEG_INFINITY
    } else {
        mean.log2() / (n as f64).log2()
    };
    Ok(ExponentEstimate {
        n,
        trials,
        mean,
        std_err,
        exponent,
    })
}

/// Upper bound `α(1-α)/(1-2α)²` on `E[Y_n]` for every `n` when the walk
/// drifts down, with `α = p_plus / (p_plus + p_minus)`.
pub fn negative_drift_mean_bound(params: &ProcessParams) -> Result<f64, ProcessError> {
    if params.p_minus <= params.p_plus {
        return Err(ProcessError::NoNegativeDrift {
            p_minus: params.p_minus,
            p_plus: params.p_plus,
        });
    }
    let a = params.alpha();
    Ok(a * (1.0 - a) / (1.0 - 2.0 * a).powi(2))
}

/// Sample mean and standard error of the mean (zero for a single sample).
pub fn mean_and_stderr(xs: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let mut count = 0usize;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for x in xs {
        count += 1;
        let delta = x - mean;
        mean += delta / count as f64;
        m2 += delta * (x - mean);
    }
    if count < 2 {
        return (mean, 0.0);
    }
    let var = m2 / (count - 1) as f64;
    (mean, (var / count as f64).sqrt())
}
