//! Acceptance criteria 1 to 7. Prints one line per criterion and exits
//! non-zero if any fails.

use std::time::{Duration, Instant};

use delaychain::bounds::synchronous_threshold;
use delaychain_harness::config::{ExperimentConfig, Policy};
use delaychain_harness::experiment::{run_experiment, ExperimentReport};
use delaychain_harness::figures::{figure1_rows, small_f_eta_gap, write_rows};
use delaychain_harness::oracle_suite::{mutant_step, run_oracle_suite, run_oracle_suite_with};
use delaychain_harness::stats::{statistical_suite, Sense, StatsConfig};

const ORACLE_SYMBOLS: usize = 6;
const ORACLE_PADDING: usize = 2;

const FORK_TRIALS: u64 = 100;
const FORK_HORIZON: i64 = 2000;
const FORK_EVERY: i64 = 50;

const MIN_VIOLATIONS: u64 = 50;

const DOMINANCE_TRIALS: u64 = 10_000;
/// How close the clamped bound at the chosen `k` must be to the target.
const TARGET_BOUND: f64 = 0.2;
const TARGET_TOLERANCE: f64 = 1e-3;

const STATS_SAMPLES: u64 = 100_000;

/// Largest `|β_random_exp - β_const_4η|` over `fη < 0.2` on the 0.01 grid.
const GOLDEN_GAP: f64 = 0.003202197861438827;
const GAP_TOLERANCE: f64 = 1e-12;
const SYNC_TOLERANCE: f64 = 1e-9;

const WORKERS: [usize; 2] = [1, 4];

struct Outcome {
    pass: bool,
    detail: String,
}

fn criterion(n: u32, name: &str, budget: Duration, run: impl FnOnce() -> Outcome) -> bool {
    let started = Instant::now();
    let out = run();
    let elapsed = started.elapsed();
    let in_budget = elapsed <= budget;
    let pass = out.pass && in_budget;
    println!(
        "criterion {n} {name}: {} ({}; {:.1}s of {}s budget{})",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        elapsed.as_secs_f64(),
        budget.as_secs(),
        if in_budget { "" } else { ", over budget" }
    );
    pass
}

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(text).expect("shipped configuration parses")
}

fn csv_bytes(r: &ExperimentReport) -> Vec<u8> {
    let mut out = Vec::new();
    r.write_csv(&mut out).unwrap();
    r.write_contradictions(&mut out).unwrap();
    out
}

fn oracle_equivalence() -> Outcome {
    let r = run_oracle_suite(ORACLE_SYMBOLS, ORACLE_PADDING);
    let mutant = run_oracle_suite_with(ORACLE_SYMBOLS, ORACLE_PADDING, mutant_step);
    for m in r.mismatches.iter().take(5) {
        println!("  mismatch w={} s={} recursion={} oracle={}", m.w, m.s, m.recursion, m.oracle);
    }
    Outcome {
        pass: r.pass() && !mutant.pass(),
        detail: format!(
            "{} strings, {} comparisons, {} mismatches; mutant caught by {} mismatches",
            r.strings,
            r.comparisons,
            r.mismatches.len(),
            mutant.mismatches.len()
        ),
    }
}

fn fork_validity() -> Outcome {
    let mut checked = 0;
    let mut failed = 0;
    let mut contradictions = 0;
    for policy in [Policy::Null, Policy::PrivateChain, Policy::MaxDelayBalance] {
        let mut cfg = config(include_str!("../../../configs/quick.toml"));
        cfg.name = format!("fork_validity_{}", policy.name());
        cfg.trials = FORK_TRIALS;
        cfg.adversary.policy = policy;
        cfg.property.s = 200;
        cfg.property.k = Some(100);
        cfg.property.horizon = Some(FORK_HORIZON);
        cfg.property.common_prefix_t = 0;
        cfg.checks.invariants_stride = FORK_EVERY;
        cfg.checks.fork_every = FORK_EVERY;
        let r = run_experiment(&cfg, 0).expect("runs");
        let inv = r.row("invariants").expect("invariant row");
        checked += inv.lemma_checks;
        failed += inv.lemma_failures;
        contradictions += r.contradictions.len();
        for c in r.contradictions.iter().take(3) {
            println!("  {} trial {} seed {} {} slot {}: {}", c.experiment, c.trial, c.seed, c.check, c.slot, c.detail);
        }
    }
    Outcome {
        pass: failed == 0 && contradictions == 0 && checked > 0,
        detail: format!("3 policies x {FORK_TRIALS} executions, {checked} invariant checks, {failed} failures"),
    }
}

fn lemma_assertions() -> Outcome {
    let (mut settle_v, mut cq_v, mut checks, mut fails, mut holds, mut adv) = (0, 0, 0, 0, 0, 0);
    for text in [
        include_str!("../../../configs/lemma_sweep_private_chain.toml"),
        include_str!("../../../configs/lemma_sweep_max_delay_balance.toml"),
    ] {
        let r = run_experiment(&config(text), 0).expect("runs");
        let s = r.row("settlement").expect("settlement row");
        let c = r.row("chain_quality").expect("chain-quality row");
        settle_v += s.violations;
        cq_v += c.violations;
        checks += s.lemma_checks + c.lemma_checks;
        fails += s.lemma_failures + c.lemma_failures + r.contradictions.len() as u64;
        holds += r.advantage_holds_at_violation;
        adv += r.advantage_checks;
    }
    Outcome {
        pass: settle_v >= MIN_VIOLATIONS && cq_v >= MIN_VIOLATIONS && fails == 0,
        detail: format!(
            "{settle_v} settlement and {cq_v} chain-quality violating trials, {checks} assertions, {fails} failures; \
             advantage also held at the violating slot in {holds} of {adv} cases"
        ),
    }
}

fn bound_dominance() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (text, property) in [
        (include_str!("../../../configs/settlement_private_chain.toml"), "settlement"),
        (include_str!("../../../configs/settlement_max_delay_balance.toml"), "settlement"),
        (include_str!("../../../configs/chain_quality_private_chain.toml"), "chain_quality"),
        (include_str!("../../../configs/chain_quality_max_delay_balance.toml"), "chain_quality"),
    ] {
        let mut cfg = config(text);
        cfg.trials = DOMINANCE_TRIALS;
        let r = run_experiment(&cfg, 0).expect("runs");
        let row = r.row(property).expect("row");
        let bound = row.bound_clamped.expect("bounds apply");
        let ok = row.pass && (bound - TARGET_BOUND).abs() <= TARGET_TOLERANCE && r.contradiction_free();
        pass &= ok;
        parts.push(format!(
            "{} {} k={} freq={:.4} bound={:.4} threshold={:.4}",
            property,
            row.policy,
            row.k,
            row.frequency,
            bound,
            row.threshold.unwrap_or(f64::NAN)
        ));
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn statistical() -> Outcome {
    let checks = statistical_suite(&StatsConfig { samples: STATS_SAMPLES, seed: 1 });
    let failed: Vec<_> = checks.iter().filter(|c| !c.pass).collect();
    for c in &failed {
        println!("  {} {} empirical={} reference={} z={:.2}", c.check, c.parameter, c.empirical, c.reference, c.z);
    }
    let worst = checks
        .iter()
        .filter(|c| c.z.is_finite())
        .map(|c| match c.sense {
            Sense::Upper => c.z,
            Sense::Lower => -c.z,
            Sense::Equal => c.z.abs(),
        })
        .fold(f64::NEG_INFINITY, f64::max);
    Outcome {
        pass: failed.is_empty(),
        detail: format!("{} checks at {STATS_SAMPLES} samples, {} failed, worst z {worst:.2}", checks.len(), failed.len()),
    }
}

fn figure1() -> Outcome {
    let rows = figure1_rows();
    let mut problems = Vec::new();
    let (first, last) = (rows[0], rows[rows.len() - 1]);
    if first.beta_random_exp != 0.5 || last.beta_random_exp != 0.0 {
        problems.push("exponential endpoints".to_string());
    }
    let golden_sync = (3.0 - 5f64.sqrt()) / 2.0;
    if (synchronous_threshold(0.0) - 0.5).abs() > SYNC_TOLERANCE
        || (synchronous_threshold(1.0) - golden_sync).abs() > SYNC_TOLERANCE
    {
        problems.push("synchronous endpoints".to_string());
    }
    for w in rows.windows(2) {
        let (a, b) = (w[0], w[1]);
        if !(b.beta_const_eta < a.beta_const_eta
            && b.beta_const_4eta < a.beta_const_4eta
            && b.beta_const_16eta < a.beta_const_16eta)
        {
            problems.push(format!("not decreasing in f*eta at {}", b.f_eta));
        }
    }
    for r in rows.iter().filter(|r| r.f_eta > 0.0) {
        if !(r.beta_const_16eta < r.beta_const_4eta && r.beta_const_4eta < r.beta_const_eta) {
            problems.push(format!("not decreasing in delay at {}", r.f_eta));
        }
    }
    let gap = small_f_eta_gap(&rows);
    if (gap - GOLDEN_GAP).abs() > GAP_TOLERANCE {
        problems.push(format!("gap {gap} differs from {GOLDEN_GAP}"));
    }
    let mut detail = format!("{} rows, gap {gap:.12}", rows.len());
    if !problems.is_empty() {
        detail = format!("{detail}; {}", problems.join(", "));
    }
    Outcome { pass: problems.is_empty(), detail }
}

fn determinism() -> Outcome {
    let mut same = true;
    let mut compared = 0;
    for text in [
        include_str!("../../../configs/quick.toml"),
        include_str!("../../../configs/lemma_sweep_max_delay_balance.toml"),
    ] {
        let cfg = config(text);
        let outs: Vec<Vec<u8>> = WORKERS.iter().map(|&w| csv_bytes(&run_experiment(&cfg, w).unwrap())).collect();
        same &= outs.windows(2).all(|p| p[0] == p[1]);
        compared += 1;
    }
    let stats: Vec<Vec<u8>> = WORKERS
        .iter()
        .map(|&w| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(w).build().unwrap();
            let checks = pool.install(|| statistical_suite(&StatsConfig { samples: 2000, seed: 9 }));
            let mut out = Vec::new();
            write_rows(&checks, &mut out).unwrap();
            out
        })
        .collect();
    same &= stats[0] == stats[1];
    compared += 1;
    Outcome { pass: same, detail: format!("{compared} outputs compared across workers {WORKERS:?}") }
}

fn main() {
    let min = |m: u64| Duration::from_secs(60 * m);
    let results = [
        criterion(1, "oracle equivalence", min(15), oracle_equivalence),
        criterion(2, "fork validity", min(5), fork_validity),
        criterion(3, "margin and advantage assertions", min(10), lemma_assertions),
        criterion(4, "bound dominance", min(30), bound_dominance),
        criterion(5, "statistical suite", min(20), statistical),
        criterion(6, "threshold comparison", Duration::from_secs(1), figure1),
        criterion(7, "determinism", min(5), determinism),
    ];
    let failed = results.iter().filter(|&&p| !p).count();
    println!("acceptance: {} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
