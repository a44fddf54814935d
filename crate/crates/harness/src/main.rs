use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Parser, Subcommand};

use delaychain::sim::run_execution;
use delaychain::stream::trial_seed;
use delaychain_harness::config::{ConfigError, ExperimentConfig};
use delaychain_harness::exit;
use delaychain_harness::experiment::{run_experiment, run_seeded};
use delaychain_harness::figures::{bound_curve, figure1_rows, small_f_eta_gap, write_rows};
use delaychain_harness::oracle_suite::run_oracle_suite;
use delaychain_harness::replay::write_trace;
use delaychain_harness::stats::{statistical_suite, StatsConfig};

#[derive(Parser, Debug)]
#[command(name = "delaychain", about = "Longest-chain security under random delays")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed (trial seed for `replay`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Trial count (sample count for `stats`).
    #[arg(long, global = true)]
    trials: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Verb {
    /// Run an experiment and compare violation frequencies with the bounds.
    Simulate,
    /// Bound curves over a grid of confirmation depths.
    Bounds {
        #[arg(long, default_value_t = 20)]
        points: u64,
        /// Reference-slot count for the extensive bounds.
        #[arg(long, default_value_t = 1)]
        t: u64,
    },
    /// Threshold comparison on the unit grid.
    Figure1,
    /// Exhaustive recursion-versus-enumeration sweep.
    Oracle {
        #[arg(long, default_value_t = 6)]
        max_symbols: usize,
        #[arg(long, default_value_t = 2)]
        max_padding: usize,
    },
    /// Distributional checks.
    Stats,
    /// Re-run one trial and export its trace.
    Replay {
        /// Trial index; its seed is derived from the configured base seed.
        #[arg(long, conflicts_with = "seed")]
        trial: Option<u64>,
    },
}

/// An error with its exit code.
struct Failure(u8, anyhow::Error);

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        let e = e.into();
        let code = if e.downcast_ref::<ConfigError>().is_some() { exit::CONFIG_ERROR } else { 1 };
        Failure(code, e)
    }
}

fn config_error(msg: impl Into<String>) -> Failure {
    Failure(exit::CONFIG_ERROR, ConfigError::Invalid(msg.into()).into())
}

fn load(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let path = cli.config.as_deref().ok_or_else(|| config_error("--config is required"))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(t) = cli.trials {
        cfg.trials = t;
    }
    Ok(cfg)
}

/// Writes `name` under `--out`, or to stdout when no directory is given.
fn emit(cli: &Cli, name: &str, write: impl FnOnce(&mut dyn Write) -> anyhow::Result<()>) -> anyhow::Result<()> {
    match &cli.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(name);
            let mut f = std::io::BufWriter::new(std::fs::File::create(&path).with_context(|| path.display().to_string())?);
            write(&mut f)?;
            f.flush()?;
        }
        None => {
            let mut lock = std::io::stdout().lock();
            write(&mut lock)?;
        }
    }
    Ok(())
}

fn write_timing(dir: Option<&Path>, started: Instant) -> anyhow::Result<()> {
    if let Some(dir) = dir {
        std::fs::write(dir.join("timing.txt"), format!("{:.3}\n", started.elapsed().as_secs_f64()))?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    let started = Instant::now();
    match &cli.verb {
        Verb::Simulate => {
            let mut cfg = load(cli)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            cfg.resolve()?;
            let report = run_experiment(&cfg, cli.workers)?;
            emit(cli, "report.csv", |w| Ok(report.write_csv(w)?))?;
            if let Some(dir) = &cli.out {
                report.write_contradictions(&mut std::fs::File::create(dir.join("contradictions.csv"))?)?;
                write_timing(Some(dir), started)?;
            }
            for c in &report.contradictions {
                eprintln!("contradiction: trial {} seed {} {} at slot {}: {}", c.trial, c.seed, c.check, c.slot, c.detail);
            }
            Ok(report.exit_code())
        }
        Verb::Bounds { points, t } => {
            let cfg = load(cli)?;
            let r = cfg.resolve()?;
            if !r.params.applicable() {
                eprintln!("bounds inapplicable: epsilon = {}", r.params.epsilon);
                return Ok(exit::PASS);
            }
            let step = (r.k as u64 / 10).max(1);
            let rows = bound_curve(&r.params, r.parties.len(), r.mu, *t, step, *points)?;
            eprintln!(
                "p = {:.6} q = {:.6} epsilon = {:.6} k = {} mu = {:.6}",
                r.params.p, r.params.q, r.params.epsilon, r.k, r.mu
            );
            emit(cli, "bounds.csv", |w| Ok(write_rows(&rows, w)?))?;
            Ok(exit::PASS)
        }
        Verb::Figure1 => {
            let rows = figure1_rows();
            eprintln!("max |random_exp - const_4eta| for f*eta < 0.2: {:.12}", small_f_eta_gap(&rows));
            emit(cli, "figure1.csv", |w| Ok(write_rows(&rows, w)?))?;
            Ok(exit::PASS)
        }
        Verb::Oracle { max_symbols, max_padding } => {
            if *max_symbols > delaychain_harness::oracle_suite::MAX_SYMBOLS {
                return Err(config_error(format!(
                    "--max-symbols must be at most {}",
                    delaychain_harness::oracle_suite::MAX_SYMBOLS
                )));
            }
            let report = run_oracle_suite(*max_symbols, *max_padding);
            eprintln!(
                "{} strings, {} comparisons, {} mismatches",
                report.strings,
                report.comparisons,
                report.mismatches.len()
            );
            if !report.pass() {
                emit(cli, "oracle_mismatches.csv", |w| Ok(report.write_mismatches(w)?))?;
                return Ok(exit::CONTRADICTION);
            }
            Ok(exit::PASS)
        }
        Verb::Stats => {
            let cfg = StatsConfig { samples: cli.trials.unwrap_or(100_000), seed: cli.seed.unwrap_or(1) };
            if cfg.samples == 0 {
                return Err(config_error("--trials must be at least 1"));
            }
            let checks = statistical_suite(&cfg);
            emit(cli, "stats.csv", |w| Ok(write_rows(&checks, w)?))?;
            write_timing(cli.out.as_deref(), started)?;
            let failed: Vec<_> = checks.iter().filter(|c| !c.pass).collect();
            for c in &failed {
                eprintln!("fail: {} {} empirical {} reference {} z {:.2}", c.check, c.parameter, c.empirical, c.reference, c.z);
            }
            Ok(if failed.is_empty() { exit::PASS } else { exit::STATISTICAL_FAIL })
        }
        Verb::Replay { trial } => {
            let cfg = load(cli)?;
            let r = cfg.resolve()?;
            let index = trial.unwrap_or(0);
            let seed = cli.seed.unwrap_or_else(|| trial_seed(cfg.seed, index));
            let outcome = run_seeded(&cfg, &r, index, seed)?;
            let mut adv = cfg.adversary.policy.instantiate(r.s, r.k, &r.parties);
            let trace = run_execution(&r.sim, &mut *adv, seed)?;
            emit(cli, "trace.csv", |w| Ok(write_trace(&trace, w)?))?;
            eprintln!(
                "seed {seed}: settlement {} chain_quality {} blocks {} special-chain depth {}",
                outcome.settlement,
                outcome.chain_quality,
                trace.tree.len(),
                trace.special_depth_upto(r.horizon)
            );
            let failed = outcome.margin.failed + outcome.balanced.failed + outcome.advantage.failed + outcome.invariants.failed;
            Ok(if failed > 0 { exit::CONTRADICTION } else { exit::PASS })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::CONFIG_ERROR } else { exit::PASS };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.workers > 0 {
        // Ignored if a global pool already exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build_global();
    }
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}
