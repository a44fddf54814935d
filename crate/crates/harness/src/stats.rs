//! Interval estimates and the distributional checks.
//!
//! One-sided checks compare an empirical frequency with an upper bound `b`
//! and fail only when the frequency exceeds `b + 3 SE`, with
//! `SE = sqrt(b (1 - b) / n)` taken at the bound. Equalities are checked
//! two-sided with the same standard error at the expected value.

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use delaychain::bounds::{random_walk_bound, reach_tail_bound, unheard_excursion_bound, unheard_tail_bound, SecurityParams};
use delaychain::charstring::{compress, renewal_offsets, sample_char_string, CharStringBuild};
use delaychain::delay::DelayDistribution;
use delaychain::fork::reach_prefixes;
use delaychain::leader::{JointLaw, LeaderConfig, LeaderModel, PartyId};
use delaychain::stream::{trial_seed, Domain, KeyedUniforms, StreamKey};
use delaychain::tristring::Symbol;
use delaychain::unheard::{unheard, KeyedDelays, UnheardSeries};

pub const SLACK_SE: f64 = 3.0;

/// 95% Wilson score interval for `x` successes in `n` trials.
pub fn wilson_interval(x: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_int = n;
    let z = Normal::standard().inverse_cdf(0.975);
    let (n, p) = (n as f64, x as f64 / n as f64);
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    let lo = if x == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if x == n_int { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// Standard error of a frequency over `n` samples when the true value is `b`.
pub fn standard_error(b: f64, n: u64) -> f64 {
    let b = b.clamp(0.0, 1.0);
    (b * (1.0 - b) / n as f64).sqrt()
}

/// `(pass, bound + 3 SE)` for an upper bound `b`.
pub fn one_sided_pass(freq: f64, b: f64, n: u64) -> (bool, Option<f64>) {
    let threshold = b + SLACK_SE * standard_error(b, n);
    (freq <= threshold, Some(threshold))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    /// Empirical at most the reference.
    Upper,
    /// Empirical at least the reference.
    Lower,
    /// Empirical equal to the reference.
    Equal,
}

/// One distributional comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StatCheck {
    pub check: String,
    pub parameter: String,
    pub samples: u64,
    pub empirical: f64,
    pub reference: f64,
    pub sense: Sense,
    pub se: f64,
    /// `(empirical - reference) / se`, 0 when `se` is 0 and they agree.
    pub z: f64,
    pub pass: bool,
}

impl StatCheck {
    pub fn new(check: &str, parameter: String, hits: u64, samples: u64, reference: f64, sense: Sense) -> Self {
        let empirical = hits as f64 / samples as f64;
        let se = standard_error(reference, samples);
        let diff = empirical - reference;
        let z = if se > 0.0 { diff / se } else if diff.abs() < 1e-12 { 0.0 } else { diff.signum() * f64::INFINITY };
        let pass = match sense {
            Sense::Upper => diff <= SLACK_SE * se || reference >= 1.0,
            Sense::Lower => -diff <= SLACK_SE * se || reference <= 0.0,
            Sense::Equal => diff.abs() <= SLACK_SE * se,
        };
        StatCheck { check: check.to_string(), parameter, samples, empirical, reference, sense, se, z, pass }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct StatsConfig {
    pub samples: u64,
    pub seed: u64,
}

impl Default for StatsConfig {
    fn default() -> Self {
        StatsConfig { samples: 100_000, seed: 1 }
    }
}

fn stream(seed: u64, check: i64, chunk: u64) -> rand_chacha::ChaCha8Rng {
    KeyedUniforms::rng(StreamKey { seed, domain: Domain::Trial, slot: check, ordinal: chunk, recipient: 0 })
}

/// Whether the walk with `+1` steps of probability `(1 - ε)/2` reaches
/// `W[j] ≥ -cj` for some `k ≤ j ≤ horizon`.
pub fn walk_excursion<R: RngCore>(rng: &mut R, epsilon: f64, c: f64, k: u64, horizon: u64) -> bool {
    let up = (1.0 - epsilon) / 2.0;
    let threshold = (up * 2f64.powi(64)).min(u64::MAX as f64) as u64;
    let mut w: i64 = 0;
    for j in 1..=horizon {
        w += if up > 0.0 && rng.next_u64() < threshold { 1 } else { -1 };
        if j >= k && w as f64 >= -c * j as f64 {
            return true;
        }
    }
    false
}

const CHUNK: u64 = 1024;

/// Counts hits of `trial(rng)` over `samples` draws split into keyed chunks.
fn count_walks(cfg: &StatsConfig, check: i64, trial: impl Fn(&mut rand_chacha::ChaCha8Rng) -> bool + Sync) -> u64 {
    let chunks = cfg.samples.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|ch| {
            let mut rng = stream(cfg.seed, check, ch);
            let n = CHUNK.min(cfg.samples - ch * CHUNK);
            (0..n).filter(|_| trial(&mut rng)).count() as u64
        })
        .sum()
}

/// `ε`, `c`, `k`, horizon of the random-walk checks.
pub const WALKS: [(f64, f64, u64, u64); 2] = [(0.3, 0.15, 200, 5000), (1.0, 0.5, 50, 500)];

pub fn random_walk_checks(cfg: &StatsConfig) -> Vec<StatCheck> {
    WALKS
        .iter()
        .enumerate()
        .map(|(i, &(eps, c, k, horizon))| {
            let hits = count_walks(cfg, i as i64, |rng| walk_excursion(rng, eps, c, k, horizon));
            StatCheck::new(
                "random_walk_excursion",
                format!("eps={eps} c={c} k={k} horizon={horizon}"),
                hits,
                cfg.samples,
                random_walk_bound(eps, c, k as f64),
                Sense::Upper,
            )
        })
        .collect()
}

/// A leader/delay setting sampled without an adversary.
#[derive(Clone, Debug)]
pub struct Setting {
    pub name: &'static str,
    pub leaders: LeaderConfig,
    pub delay: DelayDistribution,
    pub params: SecurityParams,
}

impl Setting {
    pub fn new(name: &'static str, f: f64, alpha: f64, population: u64, delay: DelayDistribution) -> Self {
        let law = JointLaw::from_f_alpha(f, alpha).expect("valid law");
        let leaders = LeaderConfig::new(law, LeaderModel::Iid { population }).expect("valid population");
        let params = SecurityParams::compute(leaders.params(), &delay).expect("valid parameters");
        Setting { name, leaders, delay, params }
    }

    fn sample(&self, seed: u64, horizon: usize) -> CharStringBuild {
        sample_char_string(&self.leaders, &self.delay, horizon, seed).expect("iid-compatible law")
    }
}

fn par_samples<T: Send>(cfg: &StatsConfig, salt: u64, f: impl Fn(u64) -> T + Sync + Send) -> Vec<T> {
    let base = trial_seed(cfg.seed, salt);
    (0..cfg.samples).into_par_iter().map(|i| f(trial_seed(base, i))).collect()
}

/// `P(Reach[horizon] ≥ a) ≤ ((1-p)/p)^a` for `a = 1..=8`.
pub fn reach_tail_checks(cfg: &StatsConfig, setting: &Setting, horizon: usize, salt: u64) -> Vec<StatCheck> {
    let reaches = par_samples(cfg, salt, |seed| {
        let b = setting.sample(seed, horizon);
        *reach_prefixes(&b.char_string).last().expect("non-empty")
    });
    let p = setting.params.p;
    (1..=8)
        .map(|a| {
            let hits = reaches.iter().filter(|&&r| r >= a).count() as u64;
            StatCheck::new(
                "reach_tail",
                format!("{} p={p:.6} a={a}", setting.name),
                hits,
                cfg.samples,
                reach_tail_bound(p, a as f64),
                Sense::Upper,
            )
        })
        .collect()
}

/// Label and gap of the `n`-th renewal (1-based). A fixed index, rather
/// than the renewal covering a fixed slot, keeps the gap unbiased.
fn nth_renewal(b: &CharStringBuild, n: usize) -> Option<(i64, Symbol)> {
    let slots = b.renewals();
    let t = *slots.get(n - 1)?;
    let prev = if n == 1 { b.anchor.t0 } else { slots[n - 2] };
    Some((t - prev, b.char_string.get(t as usize)))
}

/// The label of a renewal with gap `g` is `0` with probability
/// `α P(Δ < g)` (checked for `g = 1..=6`), and `0` with probability at
/// least `p` overall.
pub fn label_law_checks(cfg: &StatsConfig, setting: &Setting, salt: u64) -> Vec<StatCheck> {
    let (n, horizon) = (100usize, 3000usize);
    let draws = par_samples(cfg, salt, |seed| nth_renewal(&setting.sample(seed, horizon), n));
    let draws: Vec<(i64, Symbol)> = draws.into_iter().map(|d| d.expect("renewal before horizon")).collect();
    let alpha = setting.params.alpha;
    let mut out: Vec<StatCheck> = (1..=6)
        .map(|g| {
            let bin: Vec<&(i64, Symbol)> = draws.iter().filter(|d| d.0 == g).collect();
            let zeros = bin.iter().filter(|d| d.1 == Symbol::Honest).count() as u64;
            StatCheck::new(
                "label_given_gap",
                format!("{} g={g}", setting.name),
                zeros,
                bin.len() as u64,
                alpha * setting.delay.prob_less_than(g),
                Sense::Equal,
            )
        })
        .collect();
    let zeros = draws.iter().filter(|d| d.1 == Symbol::Honest).count() as u64;
    out.push(StatCheck::new(
        "label_at_least_p",
        format!("{} p={:.6}", setting.name, setting.params.p),
        zeros,
        cfg.samples,
        setting.params.p,
        Sense::Lower,
    ));
    out
}

/// `P(Unheard_h[i] > a) ≤ (1-q)^a` for `a = 0..=10`.
pub fn unheard_tail_checks(cfg: &StatsConfig, setting: &Setting, slot: usize, salt: u64) -> Vec<StatCheck> {
    let h = PartyId(0);
    let values = par_samples(cfg, salt, |seed| {
        let b = setting.sample(seed, slot);
        unheard(&b.char_string, &KeyedDelays { law: &setting.delay, seed }, h, slot)
    });
    let q = setting.params.q;
    (0..=10)
        .map(|a| {
            let hits = values.iter().filter(|&&u| u > a).count() as u64;
            StatCheck::new(
                "unheard_tail",
                format!("{} q={q:.6} a={a}", setting.name),
                hits,
                cfg.samples,
                unheard_tail_bound(q, a as f64),
                Sense::Upper,
            )
        })
        .collect()
}

/// Parameters of the excursion check: reference slot, `k'`, renewals
/// inspected after `k'`, `B` and `c`.
pub const EXCURSION: (i64, usize, usize, f64, f64) = (500, 5, 60, 6.0, 1.0);

/// `P(CompressedUnheard[j] ≥ B + c(j - k') for some j ≥ k')
/// ≤ e^{-Bq} / ((1-q)(1-(1-q)^c))`.
pub fn unheard_excursion_check(cfg: &StatsConfig, setting: &Setting, salt: u64) -> StatCheck {
    let (s, k_prime, extra, big_b, c) = EXCURSION;
    let count = k_prime + extra;
    let f = setting.params.f;
    // Enough slots for `count` renewals after `s` with overwhelming probability.
    let horizon = s as usize + (4.0 * count as f64 / f) as usize + 200;
    let parties = [PartyId(0)];
    let hits = par_samples(cfg, salt, |seed| {
        let b = setting.sample(seed, horizon);
        let series = UnheardSeries::build(&b.char_string, &KeyedDelays { law: &setting.delay, seed }, &parties);
        let renewals = b.renewals();
        assert!(renewal_offsets(&renewals, s, count).is_ok(), "horizon too short for {count} renewals");
        let u = compress(|i| series.unheard_all(i), &renewals, s, count).expect("checked");
        (k_prime..=count).any(|j| u[j] as f64 >= big_b + c * (j - k_prime) as f64)
    })
    .into_iter()
    .filter(|&x| x)
    .count() as u64;
    let q = setting.params.q;
    StatCheck::new(
        "unheard_excursion",
        format!("{} q={q:.6} B={big_b} c={c} k'={k_prime}", setting.name),
        hits,
        cfg.samples,
        unheard_excursion_bound(q, big_b, c),
        Sense::Upper,
    )
}

/// The settings used by [`statistical_suite`].
pub fn standard_settings() -> [Setting; 4] {
    [
        // Δ ≡ 0 makes p = α.
        Setting::new("instant", 0.2, 0.7, 3, DelayDistribution::constant(0)),
        Setting::new("geometric", 0.1, 0.9, 4, DelayDistribution::geometric(0.5).expect("valid")),
        Setting::new("slow", 0.3, 0.9, 3, DelayDistribution::geometric(0.3).expect("valid")),
        Setting::new("fast", 0.2, 0.9, 3, DelayDistribution::geometric(0.7).expect("valid")),
    ]
}

/// Every distributional check.
pub fn statistical_suite(cfg: &StatsConfig) -> Vec<StatCheck> {
    let [instant, geometric, slow, fast] = standard_settings();
    let mut out = random_walk_checks(cfg);
    out.extend(reach_tail_checks(cfg, &instant, 5000, 10));
    out.extend(reach_tail_checks(cfg, &geometric, 5000, 11));
    out.extend(label_law_checks(cfg, &geometric, 12));
    out.extend(label_law_checks(cfg, &slow, 13));
    out.extend(unheard_tail_checks(cfg, &slow, 1000, 14));
    out.push(unheard_excursion_check(cfg, &fast, 15));
    out
}

/// Draws one uniform; used by tests to confirm chunked streams differ.
pub fn first_uniform(seed: u64, check: i64, chunk: u64) -> f64 {
    stream(seed, check, chunk).random::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_contains_estimate() {
        for (x, n) in [(0, 10), (3, 10), (10, 10), (1, 10_000)] {
            let (lo, hi) = wilson_interval(x, n);
            let p = x as f64 / n as f64;
            assert!(lo <= p && p <= hi, "{x}/{n}: {lo} {hi}");
        }
        let (lo, hi) = wilson_interval(0, 100);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.036994).abs() < 1e-5);
    }

    #[test]
    fn one_sided_convention() {
        assert!(one_sided_pass(0.21, 0.2, 10_000).0);
        assert!(!one_sided_pass(0.22, 0.2, 10_000).0);
        assert!(one_sided_pass(0.0, 0.0, 10).0);
    }

    #[test]
    fn always_down_walk_never_returns() {
        let mut rng = stream(1, 0, 0);
        assert!((0..100).all(|_| !walk_excursion(&mut rng, 1.0, 0.5, 10, 200)));
        assert!((0..100).all(|_| walk_excursion(&mut rng, -1.0, 0.5, 10, 200)));
    }

    #[test]
    fn chunks_are_distinct() {
        assert_ne!(first_uniform(1, 0, 0), first_uniform(1, 0, 1));
        assert_ne!(first_uniform(1, 0, 0), first_uniform(1, 1, 0));
    }
}
