//! Seeded experiment drivers producing CSV tables.
//!
//! Trial `t` of a cell uses seed `seed_base + t` for its coin and, for
//! random permutations, for the permutation as well. Trials of a cell run in
//! parallel and are aggregated in trial order, so output is byte-identical
//! for identical inputs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::coin::CoinSource;
use crate::metrics::{compute_stats, gap_parent_depth, DepthHistogram};
use crate::oracle::OracleError;
use crate::process::{estimate_exponent, mean_and_stderr, ProcessError, ProcessParams};
use crate::rebalance::{insert_rebalanced, Scheme};
use crate::sequences::{generate, SequenceError, SequenceKind};
use crate::tree::{NodeStore, TreeError};

pub const DEFAULT_TRIALS: usize = 25;
pub const DEFAULT_PROFILE_N: usize = 1000;
pub const DEFAULT_PROFILE_TREES: usize = 100;
pub const DEFAULT_COUNTERS: usize = 1000;
pub const DEFAULT_PROCESS_STEPS: u64 = 1_000_000;
pub const PAIRS_STUDY_P: [f64; 3] = [0.25, 0.5, 0.75];

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Sequence(#[from] SequenceError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Process(#[from] ProcessError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub schemes: Vec<Scheme>,
    pub sequences: Vec<SequenceKind>,
    pub n: Vec<usize>,
    pub p: Vec<f64>,
    pub trials: usize,
    pub seed_base: u64,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            schemes: vec![Scheme::Zig],
            sequences: SequenceKind::all(0).to_vec(),
            n: vec![1024],
            p: vec![0.5],
            trials: DEFAULT_TRIALS,
            seed_base: 0,
            out: None,
        }
    }
}

impl ExperimentConfig {
    /// Checks every field before anything runs.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |msg: String| Err(ExperimentError::InvalidConfig(msg));
        if self.schemes.is_empty() || self.sequences.is_empty() || self.n.is_empty() || self.p.is_empty() {
            return bad("schemes, sequences, n and p must all be non-empty".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if let Some(p) = self.p.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return bad(format!("p={p} outside [0, 1]"));
        }
        if let Some(n) = self.n.iter().find(|&&n| n == 0 || n > u32::MAX as usize) {
            return bad(format!("n={n} out of range"));
        }
        for &kind in &self.sequences {
            for &n in &self.n {
                kind.check_length(n)?;
            }
        }
        Ok(())
    }
}

/// Aggregated statistics of one (scheme, sequence, n, p) cell. Column order
/// is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub scheme: Scheme,
    pub sequence: String,
    pub n: usize,
    pub p: f64,
    pub trials: usize,
    pub seed_base: u64,
    pub avg_depth_mean: f64,
    pub avg_depth_stderr: f64,
    pub right_height_mean: f64,
    pub left_height_mean: f64,
    /// Rotations per insertion.
    pub rotations_mean: f64,
    /// Coin flips per insertion.
    pub flips_mean: f64,
    /// Only for finger sequences.
    pub insertion_point_depth_mean: Option<f64>,
}

/// One finished build.
#[derive(Debug, Clone)]
pub struct Trial {
    pub store: NodeStore,
    pub rotations: u64,
    pub flips: u64,
    /// Parent depth of the gap next to the last key, on the side of the last
    /// finger move. `None` for non-finger families or `n < 2`.
    pub insertion_point_depth: Option<u32>,
}

/// Builds one tree by inserting `kind`'s sequence with `scheme` at tail
/// probability `p`, everything seeded by `seed`.
pub fn build_tree(scheme: Scheme, kind: SequenceKind, n: usize, p: f64, seed: u64) -> Result<Trial, ExperimentError> {
    let keys = generate(kind.reseeded(seed), n)?;
    let mut coin = CoinSource::new(p, seed);
    let mut store = NodeStore::with_capacity(n);
    let (mut rotations, mut flips) = (0u64, 0u64);
    for &k in &keys {
        let outcome = insert_rebalanced(&mut store, k, scheme, &mut coin)?;
        rotations += outcome.rotations_performed as u64;
        flips += outcome.flips as u64;
    }
    let insertion_point_depth = match keys[..] {
        [.., prev, last] if kind.is_finger_family() => gap_parent_depth(&store, last, last > prev),
        _ => None,
    };
    Ok(Trial {
        store,
        rotations,
        flips,
        insertion_point_depth,
    })
}

fn run_cell(
    scheme: Scheme,
    kind: SequenceKind,
    n: usize,
    p: f64,
    trials: usize,
    seed_base: u64,
) -> Result<ResultRow, ExperimentError> {
    struct Sample {
        avg: f64,
        right: f64,
        left: f64,
        rotations: f64,
        flips: f64,
        ipd: Option<f64>,
    }
    let samples = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let trial = build_tree(scheme, kind, n, p, seed_base.wrapping_add(t))?;
            let stats = compute_stats(&trial.store)?;
            Ok(Sample {
                avg: stats.avg_depth,
                right: stats.right_height as f64,
                left: stats.left_height as f64,
                rotations: trial.rotations as f64 / n as f64,
                flips: trial.flips as f64 / n as f64,
                ipd: trial.insertion_point_depth.map(f64::from),
            })
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    let mean = |f: &dyn Fn(&Sample) -> f64| mean_and_stderr(samples.iter().map(f)).0;
    let (avg_depth_mean, avg_depth_stderr) = mean_and_stderr(samples.iter().map(|s| s.avg));
    let insertion_point_depth_mean = if samples.iter().all(|s| s.ipd.is_some()) {
        Some(mean(&|s| s.ipd.unwrap_or_default()))
    } else {
        None
    };
    Ok(ResultRow {
        scheme,
        sequence: kind.name().to_string(),
        n,
        p,
        trials,
        seed_base,
        avg_depth_mean,
        avg_depth_stderr,
        right_height_mean: mean(&|s| s.right),
        left_height_mean: mean(&|s| s.left),
        rotations_mean: mean(&|s| s.rotations),
        flips_mean: mean(&|s| s.flips),
        insertion_point_depth_mean,
    })
}

/// Every (scheme, sequence, n, p) cell in that nesting order.
pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<ResultRow>, ExperimentError> {
    config.validate()?;
    let mut rows = Vec::new();
    for &scheme in &config.schemes {
        for &kind in &config.sequences {
            for &n in &config.n {
                for &p in &config.p {
                    rows.push(run_cell(scheme, kind, n, p, config.trials, config.seed_base)?);
                }
            }
        }
    }
    Ok(rows)
}

/// Depth histogram summed over `trees` independent builds.
pub fn run_profile(
    scheme: Scheme,
    kind: SequenceKind,
    n: usize,
    p: f64,
    trees: usize,
    seed: u64,
) -> Result<DepthHistogram, ExperimentError> {
    let config = ExperimentConfig {
        schemes: vec![scheme],
        sequences: vec![kind],
        n: vec![n],
        p: vec![p],
        trials: trees,
        seed_base: seed,
        out: None,
    };
    config.validate()?;
    let histograms = (0..trees as u64)
        .into_par_iter()
        .map(|t| {
            let trial = build_tree(scheme, kind, n, p, seed.wrapping_add(t))?;
            Ok(compute_stats(&trial.store)?.histogram)
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    let mut acc = DepthHistogram::new();
    for h in &histograms {
        acc.merge(h);
    }
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProcessRow {
    pub p_plus: f64,
    pub p_minus: f64,
    pub p_zero: f64,
    pub n: u64,
    pub trials: usize,
    pub mean_final_y: f64,
    pub std_err: f64,
    pub exponent: f64,
}

/// Growth exponent of the two-sided walk (`p_minus = 1 - p_plus`) for each
/// `p_plus`, with `counters` independent walks of `n` steps.
pub fn run_process_figure(
    p_plus: &[f64],
    n: u64,
    counters: usize,
    seed: u64,
) -> Result<Vec<ProcessRow>, ExperimentError> {
    let params = p_plus
        .iter()
        .map(|&p| ProcessParams::two_sided(p))
        .collect::<Result<Vec<_>, _>>()?;
    params
        .iter()
        .map(|params| {
            let est = estimate_exponent(params, n, counters, seed)?;
            Ok(ProcessRow {
                p_plus: params.p_plus,
                p_minus: params.p_minus,
                p_zero: params.p_zero,
                n,
                trials: counters,
                mean_final_y: est.mean,
                std_err: est.std_err,
                exponent: est.exponent,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairsStudyRow {
    pub p: f64,
    pub n: usize,
    pub trials: usize,
    pub avg_depth_mean: f64,
    pub left_height_mean: f64,
    pub right_height_mean: f64,
    /// `lg(avg_depth_mean) / lg(n)`
    pub exponent: f64,
}

/// Zig on pairs at each `p`, one row per (p, n).
pub fn run_zig_pairs_study(
    p: &[f64],
    n: &[usize],
    trials: usize,
    seed: u64,
) -> Result<Vec<PairsStudyRow>, ExperimentError> {
    let config = ExperimentConfig {
        schemes: vec![Scheme::Zig],
        sequences: vec![SequenceKind::Pairs],
        n: n.to_vec(),
        p: p.to_vec(),
        trials,
        seed_base: seed,
        out: None,
    };
    config.validate()?;
    let mut rows = Vec::new();
    for &p in p {
        for &n in n {
            let cell = run_cell(Scheme::Zig, SequenceKind::Pairs, n, p, trials, seed)?;
            rows.push(PairsStudyRow {
                p,
                n,
                trials,
                avg_depth_mean: cell.avg_depth_mean,
                left_height_mean: cell.left_height_mean,
                right_height_mean: cell.right_height_mean,
                exponent: exponent_of(cell.avg_depth_mean, n),
            });
        }
    }
    Ok(rows)
}

/// `lg(value) / lg(n)`, negative infinity for a zero value.
pub fn exponent_of(value: f64, n: usize) -> f64 {
    if value <= 0.0 || n < 2 {
        f64::NEG_INFINITY
    } else {
        value.log2() / (n as f64).log2()
    }
}

/// Header plus one line per row, LF line endings.
pub fn write_csv<W: Write, T: Serialize>(w: W, rows: &[T]) -> Result<(), ExperimentError> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn csv_string<T: Serialize>(rows: &[T]) -> Result<String, ExperimentError> {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows)?;
    Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
}

/// How to draw a CSV as line plots.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub x: &'static str,
    pub y: &'static [&'static str],
    /// Columns whose values select one line.
    pub group_by: &'static [&'static str],
    pub log_x: bool,
    pub log_y: bool,
    pub title: String,
}

impl PlotSpec {
    pub fn sweep(over_p: bool) -> Self {
        PlotSpec {
            x: if over_p { "p" } else { "n" },
            y: &["avg_depth_mean"],
            group_by: if over_p {
                &["scheme", "sequence", "n"]
            } else {
                &["scheme", "sequence", "p"]
            },
            log_x: !over_p,
            log_y: !over_p,
            title: "average node depth".into(),
        }
    }

    pub fn profile() -> Self {
        PlotSpec {
            x: "depth",
            y: &["count"],
            group_by: &[],
            log_x: false,
            log_y: false,
            title: "depth profile".into(),
        }
    }

    pub fn process() -> Self {
        PlotSpec {
            x: "p_plus",
            y: &["exponent"],
            group_by: &["n"],
            log_x: false,
            log_y: false,
            title: "lg E[Y_n] / lg n".into(),
        }
    }

    pub fn pairs_study() -> Self {
        PlotSpec {
            x: "n",
            y: &["avg_depth_mean", "left_height_mean", "right_height_mean"],
            group_by: &["p"],
            log_x: true,
            log_y: true,
            title: "zig on pairs".into(),
        }
    }

    /// A standalone matplotlib script that plots `csv_name` found next to it.
    pub fn script(&self, csv_name: &str) -> String {
        let list = |cols: &[&str]| cols.iter().map(|c| format!("{c:?}")).collect::<Vec<_>>().join(", ");
        format!(
            r#"import csv
import os
from collections import defaultdict

import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
X = {x:?}
YS = [{ys}]
GROUP = [{group}]

with open(os.path.join(HERE, {csv:?}), newline="") as f:
    rows = list(csv.DictReader(f))

lines = defaultdict(list)
for row in rows:
    key = tuple(row[g] for g in GROUP)
    for y in YS:
        if row[y] not in ("", "-inf", "inf", "NaN"):
            lines[key + (y,)].append((float(row[X]), float(row[y])))

fig, ax = plt.subplots()
for key, points in sorted(lines.items()):
    points.sort()
    label = " ".join(f"{{g}}={{v}}" for g, v in zip(GROUP, key)) + ("" if len(YS) == 1 else " " + key[-1])
    ax.plot([p[0] for p in points], [p[1] for p in points], marker=".", label=label.strip())
ax.set_xlabel(X)
ax.set_ylabel(YS[0] if len(YS) == 1 else "value")
ax.set_title({title:?})
{logx}{logy}ax.legend(fontsize="small")
fig.savefig(os.path.join(HERE, {png:?}), dpi=150)
"#,
            x = self.x,
            ys = list(self.y),
            group = list(self.group_by),
            csv = csv_name,
            title = self.title,
            logx = if self.log_x {
                "ax.set_xscale(\"log\", base=2)\n"
            } else {
                ""
            },
            logy = if self.log_y {
                "ax.set_yscale(\"log\", base=2)\n"
            } else {
                ""
            },
            png = Path::new(csv_name).with_extension("png").to_string_lossy(),
        )
    }
}

/// Writes `csv` to `path` and a plot script to `path` with `.plot.py`
/// replacing the extension.
pub fn write_output(path: &Path, csv: &str, plot: &PlotSpec) -> Result<PathBuf, ExperimentError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, csv)?;
    let script_path = path.with_extension("plot.py");
    let csv_name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    fs::write(&script_path, plot.script(&csv_name))?;
    Ok(script_path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(
        schemes: &[Scheme],
        sequences: &[SequenceKind],
        n: &[usize],
        p: &[f64],
        trials: usize,
    ) -> ExperimentConfig {
        ExperimentConfig {
            schemes: schemes.to_vec(),
            sequences: sequences.to_vec(),
            n: n.to_vec(),
            p: p.to_vec(),
            trials,
            seed_base: 11,
            out: None,
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let ok = config(&[Scheme::Zig], &[SequenceKind::Pairs], &[8], &[0.5], 2);
        assert!(ok.validate().is_ok());
        assert!(ExperimentConfig {
            trials: 0,
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(ExperimentConfig {
            p: vec![1.5],
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(ExperimentConfig {
            n: vec![0],
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(ExperimentConfig {
            n: vec![7],
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(ExperimentConfig { schemes: vec![], ..ok }.validate().is_err());
    }

    #[test]
    fn zig_at_zero_builds_paths() {
        let rows = run_sweep(&config(&[Scheme::Zig], &SequenceKind::all(3), &[1024], &[0.0], 2)).unwrap();
        assert_eq!(rows.len(), 7);
        for row in rows {
            assert_eq!(row.avg_depth_mean, 511.5, "{}", row.sequence);
            assert_eq!(row.avg_depth_stderr, 0.0);
        }
    }

    #[test]
    fn random_permutation_depth() {
        let rows = run_sweep(&config(
            &[Scheme::Unbalanced],
            &[SequenceKind::Permutation(0)],
            &[1024],
            &[0.5],
            25,
        ))
        .unwrap();
        let target = 2.0 * (1024f64).ln();
        assert!(
            (rows[0].avg_depth_mean - target).abs() <= 4.0,
            "{}",
            rows[0].avg_depth_mean
        );
        assert_eq!(rows[0].rotations_mean, 0.0);
        assert_eq!(rows[0].insertion_point_depth_mean, None);
    }

    #[test]
    fn finger_rows_carry_insertion_point() {
        let rows = run_sweep(&config(
            &[Scheme::Zig],
            &[SequenceKind::Increasing, SequenceKind::Pairs],
            &[64],
            &[0.5],
            3,
        ))
        .unwrap();
        assert!(rows[0].insertion_point_depth_mean.is_some());
        assert!(rows[1].insertion_point_depth_mean.is_none());
    }

    #[test]
    fn increasing_at_one_is_a_path_for_the_insertion_point() {
        let trial = build_tree(Scheme::ZigZag, SequenceKind::Increasing, 50, 1.0, 0).unwrap();
        assert_eq!(trial.insertion_point_depth, Some(49));
        assert_eq!(trial.rotations, 0);
    }

    #[test]
    fn zigzag_pairs_grow_linearly() {
        let rows = run_sweep(&config(
            &[Scheme::ZigZag],
            &[SequenceKind::Pairs],
            &[256, 512, 1024, 2048],
            &[0.5],
            10,
        ))
        .unwrap();
        let ratios: Vec<f64> = rows.iter().map(|r| r.avg_depth_mean / r.n as f64).collect();
        for w in ratios.windows(2) {
            assert!((w[1] / w[0] - 1.0).abs() < 0.3, "{ratios:?}");
        }
    }

    #[test]
    fn profiles_sum_over_trees() {
        let h = run_profile(Scheme::Zig, SequenceKind::Converging, 200, 0.5, 10, 1).unwrap();
        assert_eq!(h.total(), 2000);
        let zz = run_profile(Scheme::ZigZag, SequenceKind::Increasing, 1000, 0.5, 20, 1).unwrap();
        let limit = 8.0 * (1000f64).log2();
        let deep: u64 =
            zz.0.iter()
                .enumerate()
                .filter(|(d, _)| *d as f64 > limit)
                .map(|(_, c)| c)
                .sum();
        assert_eq!(deep, 0);
        // the converging profile has a long tail
        let conv = run_profile(Scheme::Zig, SequenceKind::Converging, 1000, 0.5, 20, 1).unwrap();
        assert!(conv.0.len() as f64 > 2.0 * limit);
    }

    #[test]
    fn output_is_reproducible() {
        let cfg = config(
            &Scheme::ALL,
            &[SequenceKind::Permutation(0), SequenceKind::Runs],
            &[64, 128],
            &[0.3, 0.8],
            4,
        );
        let a = csv_string(&run_sweep(&cfg).unwrap()).unwrap();
        let b = csv_string(&run_sweep(&cfg).unwrap()).unwrap();
        assert_eq!(a, b);
        let header = a.lines().next().unwrap();
        assert_eq!(
            header,
            "scheme,sequence,n,p,trials,seed_base,avg_depth_mean,avg_depth_stderr,right_height_mean,\
             left_height_mean,rotations_mean,flips_mean,insertion_point_depth_mean"
        );
        assert!(!a.contains('\r'));
        assert_eq!(a.lines().count(), 1 + 4 * 2 * 2 * 2);
    }

    #[test]
    fn process_rows() {
        let rows = run_process_figure(&[0.0, 1.0], 1000, 3, 0).unwrap();
        assert_eq!(rows[0].exponent, f64::NEG_INFINITY);
        assert_eq!(rows[1].exponent, 1.0);
        let text = csv_string(&rows).unwrap();
        assert!(text.starts_with("p_plus,p_minus,p_zero,n,trials,mean_final_y,std_err,exponent\n"));
        assert!(run_process_figure(&[1.5], 10, 1, 0).is_err());
    }

    #[test]
    fn pairs_study_directions() {
        let rows = run_zig_pairs_study(&[0.25, 0.75], &[1024], 5, 2).unwrap();
        assert!(rows[0].right_height_mean > 10.0 * rows[0].left_height_mean.max(1.0));
        assert!(rows[1].left_height_mean > 10.0 * rows[1].right_height_mean.max(1.0));
    }

    #[test]
    fn plot_script_names_its_csv() {
        let s = PlotSpec::sweep(true).script("fig.csv");
        assert!(s.contains("\"fig.csv\""));
        assert!(s.contains("\"fig.png\""));
        assert!(s.contains("GROUP = [\"scheme\", \"sequence\", \"n\"]"));
    }
}
