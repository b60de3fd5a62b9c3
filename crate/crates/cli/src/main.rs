use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use bstlab::acceptance::{criterion_ids, run_selected};
use bstlab::experiments::{
    csv_string, run_process_figure, run_profile, run_sweep, run_zig_pairs_study, write_output, ExperimentConfig,
    PlotSpec, DEFAULT_COUNTERS, DEFAULT_PROCESS_STEPS, DEFAULT_PROFILE_N, DEFAULT_PROFILE_TREES, DEFAULT_TRIALS,
    PAIRS_STUDY_P,
};
use bstlab::oracle::{enumerate_distribution, parse_rational, OutcomeDistribution, Probability};
use bstlab::{generate, Key, Scheme, SequenceKind};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

#[derive(Parser)]
#[command(name = "bstlab", version, about = "Randomized bottom-up BST rebalancing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Average depth and heights for every (scheme, sequence, n, p) cell.
    Sweep(Common),
    /// Depth histogram summed over many trees.
    Profile(Common),
    /// Growth exponent of the reflected random walk for each p (= p_plus).
    Process(Common),
    /// Zig on pairs: average depth, left and right height.
    PairsStudy(Common),
    /// Exact distribution of final shapes for a short sequence.
    Distribution {
        #[command(flatten)]
        common: Common,
        /// Explicit insertion order, overrides --sequence and --n.
        #[arg(long, value_delimiter = ',')]
        keys: Vec<Key>,
        /// Floating-point probabilities instead of exact fractions.
        #[arg(long)]
        float: bool,
    },
    /// Runs the acceptance suite; exits nonzero if any criterion fails.
    Accept {
        /// Only these criterion ids.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

#[derive(Args, Debug, Default)]
struct Common {
    /// TOML file with any of the flags below; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    scheme: Vec<Scheme>,
    #[arg(long, value_delimiter = ',')]
    sequence: Vec<SequenceKind>,
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    /// Probabilities as decimals or fractions like 1/3.
    #[arg(long, value_delimiter = ',')]
    p: Vec<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path; a plot script is written next to it. Stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    scheme: Option<Vec<String>>,
    sequence: Option<Vec<String>>,
    n: Option<Vec<usize>>,
    p: Option<Vec<toml::Value>>,
    trials: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
}

/// Flags merged over the config file. Empty lists mean "use the default".
#[derive(Debug, Default)]
struct Settings {
    schemes: Vec<Scheme>,
    sequences: Vec<SequenceKind>,
    n: Vec<usize>,
    p: Vec<String>,
    trials: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
}

impl Settings {
    fn resolve(common: Common) -> Result<Settings> {
        let file = match &common.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                toml::from_str::<FileConfig>(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => FileConfig::default(),
        };
        let file_schemes = file
            .scheme
            .unwrap_or_default()
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<Scheme>, _>>()?;
        let file_sequences = file
            .sequence
            .unwrap_or_default()
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<SequenceKind>, _>>()?;
        let file_p = file.p.unwrap_or_default().into_iter().map(|v| match v {
            toml::Value::String(s) => s,
            other => other.to_string(),
        });
        Ok(Settings {
            schemes: prefer(common.scheme, file_schemes),
            sequences: prefer(common.sequence, file_sequences),
            n: prefer(common.n, file.n.unwrap_or_default()),
            p: prefer(common.p, file_p.collect()),
            trials: common.trials.or(file.trials),
            seed: common.seed.or(file.seed),
            out: common.out.or(file.out),
        })
    }

    fn p_values(&self, default: &[f64]) -> Result<Vec<f64>> {
        if self.p.is_empty() {
            return Ok(default.to_vec());
        }
        self.p.iter().map(|s| parse_probability(s)).collect()
    }

    fn single<T: Copy + std::fmt::Debug>(values: &[T], default: T, what: &str) -> Result<T> {
        match values {
            [] => Ok(default),
            [one] => Ok(*one),
            _ => bail!("{what} takes a single value here, got {values:?}"),
        }
    }
}

/// Flag values if any were given, otherwise the config file's.
fn prefer<T>(flag: Vec<T>, file: Vec<T>) -> Vec<T> {
    if flag.is_empty() {
        file
    } else {
        flag
    }
}

fn parse_probability(s: &str) -> Result<f64> {
    let value = parse_rational(s)
        .map(|r| Probability::approx(&r))
        .with_context(|| format!("cannot read probability {s:?}"))?;
    if !(0.0..=1.0).contains(&value) {
        bail!("probability {s} outside [0, 1]");
    }
    Ok(value)
}

fn emit(out: Option<&Path>, csv: &str, plot: PlotSpec) -> Result<()> {
    match out {
        Some(path) => {
            let script = write_output(path, csv, &plot)?;
            eprintln!("wrote {} and {}", path.display(), script.display());
        }
        None => io::stdout().write_all(csv.as_bytes())?,
    }
    Ok(())
}

fn sweep(common: Common) -> Result<()> {
    let s = Settings::resolve(common)?;
    let defaults = ExperimentConfig::default();
    let config = ExperimentConfig {
        schemes: prefer(s.schemes.clone(), defaults.schemes),
        sequences: prefer(s.sequences.clone(), defaults.sequences),
        n: prefer(s.n.clone(), defaults.n),
        p: s.p_values(&defaults.p)?,
        trials: s.trials.unwrap_or(DEFAULT_TRIALS),
        seed_base: s.seed.unwrap_or(defaults.seed_base),
        out: s.out.clone(),
    };
    let rows = run_sweep(&config)?;
    let over_p = config.p.len() > 1 || config.n.len() == 1;
    emit(config.out.as_deref(), &csv_string(&rows)?, PlotSpec::sweep(over_p))
}

fn profile(common: Common) -> Result<()> {
    let s = Settings::resolve(common)?;
    let scheme = Settings::single(&s.schemes, Scheme::Zig, "--scheme")?;
    let kind = Settings::single(&s.sequences, SequenceKind::Permutation(0), "--sequence")?;
    let n = Settings::single(&s.n, DEFAULT_PROFILE_N, "--n")?;
    let p = Settings::single(&s.p_values(&[0.5])?, 0.5, "--p")?;
    let trees = s.trials.unwrap_or(DEFAULT_PROFILE_TREES);
    let histogram = run_profile(scheme, kind, n, p, trees, s.seed.unwrap_or(0))?;
    let mut buf = Vec::new();
    histogram.write_csv(&mut buf)?;
    emit(s.out.as_deref(), &String::from_utf8(buf)?, PlotSpec::profile())
}

fn process(common: Common) -> Result<()> {
    let s = Settings::resolve(common)?;
    let n = Settings::single(&s.n, DEFAULT_PROCESS_STEPS as usize, "--n")?;
    let p_plus = s.p_values(&[0.4, 0.5, 0.6])?;
    let rows = run_process_figure(
        &p_plus,
        n as u64,
        s.trials.unwrap_or(DEFAULT_COUNTERS),
        s.seed.unwrap_or(0),
    )?;
    emit(s.out.as_deref(), &csv_string(&rows)?, PlotSpec::process())
}

fn pairs_study(common: Common) -> Result<()> {
    let s = Settings::resolve(common)?;
    let n = if s.n.is_empty() {
        (8..=14).map(|e| 1usize << e).collect()
    } else {
        s.n.clone()
    };
    let p = s.p_values(&PAIRS_STUDY_P)?;
    let rows = run_zig_pairs_study(&p, &n, s.trials.unwrap_or(DEFAULT_TRIALS), s.seed.unwrap_or(0))?;
    emit(s.out.as_deref(), &csv_string(&rows)?, PlotSpec::pairs_study())
}

fn distribution(common: Common, keys: Vec<Key>, float: bool) -> Result<()> {
    let s = Settings::resolve(common)?;
    let scheme = Settings::single(&s.schemes, Scheme::Zig, "--scheme")?;
    let keys = if keys.is_empty() {
        let mut kind = Settings::single(&s.sequences, SequenceKind::Increasing, "--sequence")?;
        if let Some(seed) = s.seed {
            kind = kind.reseeded(seed);
        }
        generate(kind, Settings::single(&s.n, 4, "--n")?)?
    } else {
        keys
    };
    let p_text = Settings::single(&s.p.iter().map(String::as_str).collect::<Vec<_>>(), "1/2", "--p")?;
    let mut buf = Vec::new();
    if float {
        write_distribution(
            &enumerate_distribution(&keys, scheme, parse_probability(p_text)?)?,
            &mut buf,
        )?;
    } else {
        let p = parse_rational(p_text).with_context(|| format!("cannot read probability {p_text:?}"))?;
        write_distribution(&enumerate_distribution(&keys, scheme, p)?, &mut buf)?;
    }
    let text = String::from_utf8(buf)?;
    match s.out {
        Some(path) => fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn write_distribution<P: Probability>(dist: &OutcomeDistribution<P>, w: &mut Vec<u8>) -> Result<()> {
    dist.write_csv(w)?;
    Ok(())
}

fn accept(only: Vec<u8>) -> Result<ExitCode> {
    if let Some(bad) = only.iter().find(|id| !criterion_ids().any(|c| c == **id)) {
        bail!("no criterion {bad}");
    }
    let report = run_selected(|id| only.is_empty() || only.contains(&id));
    for result in &report.results {
        println!("{result}");
    }
    Ok(if report.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn main() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Sweep(c) => sweep(c)?,
        Command::Profile(c) => profile(c)?,
        Command::Process(c) => process(c)?,
        Command::PairsStudy(c) => pairs_study(c)?,
        Command::Distribution { common, keys, float } => distribution(common, keys, float)?,
        Command::Accept { only } => return accept(only),
    }
    Ok(ExitCode::SUCCESS)
}
