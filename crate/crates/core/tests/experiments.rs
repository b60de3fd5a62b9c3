use bstlab::experiments::{csv_string, run_sweep, write_output, ExperimentConfig, PlotSpec};
use bstlab::oracle::{enumerate_distribution, expected_stat, ShapeStat};
use bstlab::process::{simulate, ProcessParams};
use bstlab::{generate, Scheme, SequenceKind};
use proptest::prelude::*;

fn single_cell(scheme: Scheme, kind: SequenceKind, n: usize, p: f64, trials: usize) -> ExperimentConfig {
    ExperimentConfig {
        schemes: vec![scheme],
        sequences: vec![kind],
        n: vec![n],
        p: vec![p],
        trials,
        seed_base: 99,
        out: None,
    }
}

#[test]
fn sweep_means_match_exact_expectations() {
    // permutations are reseeded per trial, so only fixed orders are compared
    let kinds = [
        SequenceKind::Increasing,
        SequenceKind::Converging,
        SequenceKind::Pairs,
        SequenceKind::Runs,
    ];
    for scheme in Scheme::RANDOMIZED {
        for kind in kinds {
            for p in [0.25, 0.5, 0.75] {
                let keys = generate(kind, 6).unwrap();
                let dist = enumerate_distribution(&keys, scheme, p).unwrap();
                let expected = expected_stat(&dist, ShapeStat::AvgDepth).unwrap();
                let row = &run_sweep(&single_cell(scheme, kind, 6, p, 100_000)).unwrap()[0];
                let diff = (row.avg_depth_mean - expected).abs();
                assert!(
                    diff <= 4.0 * row.avg_depth_stderr.max(1e-12),
                    "{scheme} {kind} p={p}: {} vs {expected}",
                    row.avg_depth_mean
                );
            }
        }
    }
}

#[test]
fn csv_and_plot_files_are_written() {
    let dir = std::env::temp_dir().join(format!("bstlab-exp-{}", std::process::id()));
    let path = dir.join("sweep.csv");
    let rows = run_sweep(&single_cell(Scheme::Zig, SequenceKind::Bitonic, 64, 0.5, 3)).unwrap();
    let text = csv_string(&rows).unwrap();
    let script = write_output(&path, &text, &PlotSpec::sweep(true)).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), text);
    assert_eq!(script, dir.join("sweep.plot.py"));
    assert!(std::fs::read_to_string(&script).unwrap().contains("\"sweep.csv\""));
    std::fs::remove_dir_all(dir).unwrap();
}

proptest! {
    #[test]
    fn walk_stays_between_free_sum_and_n(a in 0.0..1.0f64, b in 0.0..1.0f64, n in 1..5000u64, seed in any::<u64>()) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let params = ProcessParams::new(lo, hi - lo, 1.0 - hi).unwrap();
        let run = simulate(&params, n, seed);
        prop_assert!(run.final_y <= n);
        prop_assert!(run.final_y as i64 >= run.free_sum);
    }
}
