//! Seeded Monte Carlo runs of one configuration.
//!
//! Trial `i` uses seed `trial_seed(base, i)` and nothing else, so results do
//! not depend on the worker count or on execution order. Outcomes are
//! collected in trial order and reduced sequentially.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use delaychain::bounds::Probability;
use delaychain::sim::checks::{Checker, Contradiction, Tally};
use delaychain::sim::{run_execution, SimError};
use delaychain::stream::trial_seed;

use crate::config::{ExperimentConfig, Resolved};
use crate::stats::{one_sided_pass, wilson_interval};

/// Everything measured in one trial.
#[derive(Clone, Debug, Default)]
pub struct TrialOutcome {
    pub index: u64,
    pub seed: u64,
    pub settlement: bool,
    pub chain_quality: bool,
    pub common_prefix: bool,
    pub settlement_slots: u64,
    pub chain_quality_slots: u64,
    pub margin: Tally,
    pub balanced: Tally,
    pub advantage: Tally,
    pub advantage_holds_at_violation: u64,
    pub invariants: Tally,
    pub early_deliveries: u64,
}

impl TrialOutcome {
    fn tallies(&self) -> [(&'static str, &Tally); 4] {
        [
            ("margin_plus_unheard", &self.margin),
            ("balanced_fork", &self.balanced),
            ("advantage_plus_unheard", &self.advantage),
            ("invariants", &self.invariants),
        ]
    }
}

/// Runs and checks trial `index`.
pub fn run_trial(cfg: &ExperimentConfig, r: &Resolved, index: u64) -> Result<TrialOutcome, SimError> {
    let seed = trial_seed(cfg.seed, index);
    run_seeded(cfg, r, index, seed)
}

/// Runs and checks one trial with an explicit seed.
pub fn run_seeded(cfg: &ExperimentConfig, r: &Resolved, index: u64, seed: u64) -> Result<TrialOutcome, SimError> {
    let mut adv = cfg.adversary.policy.instantiate(r.s, r.k, &r.parties);
    let trace = run_execution(&r.sim, &mut *adv, seed)?;
    let c = Checker::new(&trace, &r.parties);
    let mut out = TrialOutcome { index, seed, early_deliveries: trace.early_deliveries as u64, ..Default::default() };
    let checks = &cfg.checks;
    if checks.settlement {
        let v = c.settlement(r.s, r.k);
        out.settlement = v.any();
        out.settlement_slots = v.count();
        if checks.lemmas {
            let (m, b) = c.settlement_lemmas(r.s, &v);
            out.margin = m;
            out.balanced = b;
        }
    }
    if checks.chain_quality {
        let v = c.chain_quality(r.s, r.k, r.mu, checks.quality_mode);
        out.chain_quality = !v.is_empty();
        out.chain_quality_slots = v.iter().map(|&(_, a, b)| (b - a + 1) as u64).sum();
        if checks.lemmas && checks.quality_mode == delaychain::sim::checks::QualityMode::Special {
            let (t, holds) = c.chain_quality_lemma(r.s, r.k, r.mu, &v);
            out.advantage = t;
            out.advantage_holds_at_violation = holds;
        }
    }
    if cfg.property.common_prefix_t > 0 {
        out.common_prefix = c.common_prefix(cfg.property.common_prefix_t, r.k).is_some();
    }
    if checks.invariants_stride > 0 || checks.fork_every > 0 {
        out.invariants = c.invariants(checks.invariants_stride, checks.fork_every);
    }
    Ok(out)
}

/// One property's aggregate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportRow {
    pub experiment: String,
    pub property: &'static str,
    pub policy: &'static str,
    pub s: i64,
    pub k: i64,
    pub horizon: i64,
    pub parties: usize,
    pub trials: u64,
    pub violations: u64,
    pub frequency: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub bound_raw: Option<f64>,
    pub bound_clamped: Option<f64>,
    /// `bound + 3 SE`, the largest frequency that still passes.
    pub threshold: Option<f64>,
    pub pass: bool,
    pub lemma_checks: u64,
    pub lemma_failures: u64,
}

/// A failed analytic inequality, with the seed that reproduces it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContradictionRow {
    pub experiment: String,
    pub trial: u64,
    pub seed: u64,
    pub tally: &'static str,
    pub check: &'static str,
    pub slot: i64,
    pub party: Option<u64>,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
    pub contradictions: Vec<ContradictionRow>,
    /// Violating slots in which the advantage inequality also held at the
    /// violating slot itself.
    pub advantage_holds_at_violation: u64,
    pub advantage_checks: u64,
    pub early_deliveries: u64,
}

impl ExperimentReport {
    pub fn statistical_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn contradiction_free(&self) -> bool {
        self.contradictions.is_empty()
    }

    /// 0 pass, 1 statistical failure, 2 contradiction.
    pub fn exit_code(&self) -> u8 {
        if !self.contradiction_free() {
            2
        } else if !self.statistical_pass() {
            1
        } else {
            0
        }
    }

    pub fn row(&self, property: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.property == property)
    }

    pub fn write_csv(&self, out: &mut (impl Write + ?Sized)) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_contradictions(&self, out: &mut (impl Write + ?Sized)) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.contradictions {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_files(&self, dir: &Path) -> anyhow::Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_csv(&mut std::fs::File::create(dir.join("report.csv"))?)?;
        self.write_contradictions(&mut std::fs::File::create(dir.join("contradictions.csv"))?)?;
        Ok(())
    }
}

/// Runs every trial on `workers` threads (0 = rayon default).
pub fn run_experiment(cfg: &ExperimentConfig, workers: usize) -> anyhow::Result<ExperimentReport> {
    let r = cfg.resolve()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
    let outcomes: Vec<TrialOutcome> = pool.install(|| {
        (0..cfg.trials).into_par_iter().map(|i| run_trial(cfg, &r, i)).collect::<Result<Vec<_>, _>>()
    })?;
    Ok(aggregate(cfg, &r, &outcomes))
}

/// Folds trial outcomes, in index order, into a report.
pub fn aggregate(cfg: &ExperimentConfig, r: &Resolved, outcomes: &[TrialOutcome]) -> ExperimentReport {
    let n = outcomes.len() as u64;
    let mut contradictions = Vec::new();
    let (mut settle_checks, mut settle_fail, mut cq_checks, mut cq_fail) = (0, 0, 0, 0);
    let (mut holds, mut early) = (0, 0);
    for o in outcomes {
        settle_checks += o.margin.checked + o.balanced.checked;
        settle_fail += o.margin.failed + o.balanced.failed;
        cq_checks += o.advantage.checked;
        cq_fail += o.advantage.failed;
        holds += o.advantage_holds_at_violation;
        early += o.early_deliveries;
        for (tally, t) in o.tallies() {
            for c in &t.examples {
                contradictions.push(contradiction_row(&cfg.name, o, tally, c));
            }
        }
    }
    let policy = cfg.adversary.policy.name();
    let row = |property: &'static str, violations: u64, bound: Option<Probability>, checks: u64, fails: u64| {
        let freq = violations as f64 / n as f64;
        let (lo, hi) = wilson_interval(violations, n);
        let (pass, threshold) = match bound {
            Some(b) => one_sided_pass(freq, b.clamped, n),
            None => (true, None),
        };
        ReportRow {
            experiment: cfg.name.clone(),
            property,
            policy,
            s: r.s,
            k: r.k,
            horizon: r.horizon,
            parties: r.parties.len(),
            trials: n,
            violations,
            frequency: freq,
            wilson_low: lo,
            wilson_high: hi,
            bound_raw: bound.map(|b| b.raw),
            bound_clamped: bound.map(|b| b.clamped),
            threshold,
            pass,
            lemma_checks: checks,
            lemma_failures: fails,
        }
    };
    let k = r.k as u64;
    let mut rows = Vec::new();
    if cfg.checks.settlement {
        let v = outcomes.iter().filter(|o| o.settlement).count() as u64;
        let bound = r.params.settlement_bound(k, r.parties.len()).ok().map(|b| b.total);
        rows.push(row("settlement", v, bound, settle_checks, settle_fail));
    }
    if cfg.checks.chain_quality {
        let v = outcomes.iter().filter(|o| o.chain_quality).count() as u64;
        let bound = r.params.chain_quality_bound(k, r.mu, r.parties.len()).ok().map(|b| b.total);
        rows.push(row("chain_quality", v, bound, cq_checks, cq_fail));
    }
    if cfg.property.common_prefix_t > 0 {
        let t = cfg.property.common_prefix_t as u64;
        let v = outcomes.iter().filter(|o| o.common_prefix).count() as u64;
        let bound = r
            .params
            .settlement_bound(k, r.parties.len())
            .ok()
            .map(|b| Probability::new(t as f64 * b.total.raw));
        rows.push(row("common_prefix", v, bound, 0, 0));
    }
    let invariants: (u64, u64) =
        outcomes.iter().fold((0, 0), |acc, o| (acc.0 + o.invariants.checked, acc.1 + o.invariants.failed));
    if invariants.0 > 0 {
        rows.push(row("invariants", 0, None, invariants.0, invariants.1));
    }
    ExperimentReport {
        rows,
        contradictions,
        advantage_holds_at_violation: holds,
        advantage_checks: cq_checks,
        early_deliveries: early,
    }
}

fn contradiction_row(name: &str, o: &TrialOutcome, tally: &'static str, c: &Contradiction) -> ContradictionRow {
    ContradictionRow {
        experiment: name.to_string(),
        trial: o.index,
        seed: o.seed,
        tally,
        check: c.check,
        slot: c.slot,
        party: c.party,
        detail: c.detail.clone(),
    }
}
