//! Closed-form security arithmetic.
//!
//! `p = α P(Δ < G)` and `q = P(Δ ≤ G)` with `G` geometric on `{1, 2, ...}`
//! with parameter `f`; `ε = 2p - 1`. The failure-probability expressions
//! below are upper bounds and are only informative when below 1, so every
//! value is reported both raw and clamped to `[0, 1]`.

use serde::Serialize;

use crate::delay::DelayDistribution;
use crate::leader::LeaderParams;

/// Series over `G` stop once the remaining geometric mass is below this.
pub const SERIES_TAIL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BoundsError {
    #[error("f = {0} must lie in (0, 1]")]
    BadF(f64),
    #[error("alpha = {0} must lie in (0, 1]")]
    BadAlpha(f64),
    #[error("mu = {mu} must satisfy 0 < mu < epsilon = {epsilon}")]
    MuOutOfRange { mu: f64, epsilon: f64 },
    #[error("bounds need epsilon > 0, got {0}")]
    Inapplicable(f64),
}

/// `(f, α, p, q, ε)` for a leader law and a delay law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SecurityParams {
    pub f: f64,
    pub alpha: f64,
    /// `P(Δ < G)`.
    pub timely: f64,
    pub p: f64,
    pub q: f64,
    pub epsilon: f64,
}

impl SecurityParams {
    pub fn compute(leader: LeaderParams, law: &DelayDistribution) -> Result<Self, BoundsError> {
        let LeaderParams { f, alpha } = leader;
        if !(f > 0.0 && f <= 1.0) {
            return Err(BoundsError::BadF(f));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(BoundsError::BadAlpha(alpha));
        }
        let mut timely = 0.0;
        let mut q = 0.0;
        let mut g: u64 = 1;
        // P(G = g) = f (1 - f)^(g - 1); `tail` is P(G > g).
        let mut weight = f;
        loop {
            timely += weight * law.prob_less_than(g as i64);
            q += weight * law.cdf(g);
            let tail = (1.0 - f).powf(g as f64);
            if tail < SERIES_TAIL {
                break;
            }
            weight *= 1.0 - f;
            g += 1;
        }
        let p = alpha * timely;
        Ok(SecurityParams { f, alpha, timely, p, q, epsilon: 2.0 * p - 1.0 })
    }

    /// Whether the bounds apply (`ε > 0`).
    pub fn applicable(&self) -> bool {
        self.epsilon > 0.0
    }

    pub fn require_applicable(&self) -> Result<(), BoundsError> {
        if self.applicable() {
            Ok(())
        } else {
            Err(BoundsError::Inapplicable(self.epsilon))
        }
    }
}

/// A probability bound before and after clamping to `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Probability {
    pub raw: f64,
    pub clamped: f64,
}

impl Probability {
    pub fn new(raw: f64) -> Self {
        Probability { raw, clamped: raw.clamp(0.0, 1.0) }
    }
}

/// `2 / (1 - (1/2)^(ε/2))`.
fn unheard_prefactor(epsilon: f64) -> f64 {
    2.0 / (1.0 - 0.5f64.powf(epsilon / 2.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SettlementBound {
    pub p_settlement: f64,
    pub p_unheard: f64,
    pub total: Probability,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChainQualityBound {
    pub p_cq: f64,
    pub p_unheard: f64,
    pub total: Probability,
}

/// `p_settlement = e^{-kfε³/12} + 3 e^{-kfε²/32}`,
/// `p_unheard = 2/(1 - (1/2)^{ε/2}) · e^{-kfε/16}`,
/// total `p_settlement + |I| p_unheard`.
pub fn settlement_bound(f: f64, epsilon: f64, k: f64, parties: usize) -> SettlementBound {
    let kf = k * f;
    let p_settlement = (-kf * epsilon.powi(3) / 12.0).exp() + 3.0 * (-kf * epsilon.powi(2) / 32.0).exp();
    let p_unheard = unheard_prefactor(epsilon) * (-kf * epsilon / 16.0).exp();
    SettlementBound { p_settlement, p_unheard, total: Probability::new(p_settlement + parties as f64 * p_unheard) }
}

/// `p_CQ = 4 e^{-kf(ε-μ)²/48}`,
/// `p̃_unheard = 2/(1 - (1/2)^{ε/2}) · e^{-kf(ε-μ)/8}`,
/// total `p_CQ + |I| p̃_unheard`. Requires `0 < μ < ε`.
pub fn chain_quality_bound(
    f: f64,
    epsilon: f64,
    k: f64,
    mu: f64,
    parties: usize,
) -> Result<ChainQualityBound, BoundsError> {
    if !(mu > 0.0 && mu < epsilon) {
        return Err(BoundsError::MuOutOfRange { mu, epsilon });
    }
    let kf = k * f;
    let d = epsilon - mu;
    let p_cq = 4.0 * (-kf * d * d / 48.0).exp();
    let p_unheard = unheard_prefactor(epsilon) * (-kf * d / 8.0).exp();
    Ok(ChainQualityBound { p_cq, p_unheard, total: Probability::new(p_cq + parties as f64 * p_unheard) })
}

impl SecurityParams {
    pub fn settlement_bound(&self, k: u64, parties: usize) -> Result<SettlementBound, BoundsError> {
        self.require_applicable()?;
        Ok(settlement_bound(self.f, self.epsilon, k as f64, parties))
    }

    pub fn chain_quality_bound(&self, k: u64, mu: f64, parties: usize) -> Result<ChainQualityBound, BoundsError> {
        self.require_applicable()?;
        chain_quality_bound(self.f, self.epsilon, k as f64, mu, parties)
    }
}

/// Every term of the intensive and extensive bounds for one setting.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundsReport {
    pub p_settlement: f64,
    pub p_unheard: f64,
    pub p_cq: f64,
    pub p_unheard_tilde: f64,
    pub settlement_total: Probability,
    pub cq_total: Probability,
    pub common_prefix_total: Probability,
    pub extensive_cq_total: Probability,
}

/// The intensive totals and their extensive versions over `T` reference
/// slots (union bound: multiply by `T`).
pub fn corollary_bounds(
    params: &SecurityParams,
    t: u64,
    k: u64,
    parties: usize,
    mu: f64,
) -> Result<BoundsReport, BoundsError> {
    let s = params.settlement_bound(k, parties)?;
    let c = params.chain_quality_bound(k, mu, parties)?;
    Ok(BoundsReport {
        p_settlement: s.p_settlement,
        p_unheard: s.p_unheard,
        p_cq: c.p_cq,
        p_unheard_tilde: c.p_unheard,
        settlement_total: s.total,
        cq_total: c.total,
        common_prefix_total: Probability::new(t as f64 * s.total.raw),
        extensive_cq_total: Probability::new(t as f64 * c.total.raw),
    })
}

/// Smallest `k` whose settlement total (raw) is at most `target`.
pub fn k_for_settlement(params: &SecurityParams, parties: usize, target: f64) -> Result<u64, BoundsError> {
    params.require_applicable()?;
    Ok(smallest_k(|k| settlement_bound(params.f, params.epsilon, k as f64, parties).total.raw, target))
}

/// Smallest `k` whose chain-quality total (raw) is at most `target`.
pub fn k_for_chain_quality(params: &SecurityParams, mu: f64, parties: usize, target: f64) -> Result<u64, BoundsError> {
    params.require_applicable()?;
    chain_quality_bound(params.f, params.epsilon, 0.0, mu, parties)?;
    Ok(smallest_k(
        |k| chain_quality_bound(params.f, params.epsilon, k as f64, mu, parties).expect("checked").total.raw,
        target,
    ))
}

fn smallest_k(g: impl Fn(u64) -> f64, target: f64) -> u64 {
    let mut hi = 1u64;
    while g(hi) > target {
        hi *= 2;
    }
    let mut lo = 0u64;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if g(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// The largest adversarial fraction `β` with `β < (1-β)/(1+(1-β)x)`,
/// `x = fΔ`: the smaller root of `xβ² - (2+x)β + 1 = 0`, and `1/2` at `x = 0`.
pub fn synchronous_threshold(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.5;
    }
    // Rationalised form of [(2+x) - sqrt((2+x)² - 4x)] / (2x); avoids
    // cancellation for small x.
    2.0 / ((2.0 + x) + ((2.0 + x).powi(2) - 4.0 * x).sqrt())
}

/// `(1 - fη)/2` for exponential delays with mean `η`; 0 when `fη > 1`.
pub fn exponential_boundary(f_eta: f64) -> f64 {
    if f_eta > 1.0 {
        0.0
    } else {
        (1.0 - f_eta) / 2.0
    }
}

/// One row of the threshold comparison.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Figure1Row {
    pub f_eta: f64,
    pub beta_random_exp: f64,
    pub beta_const_eta: f64,
    pub beta_const_4eta: f64,
    pub beta_const_16eta: f64,
}

pub fn figure1_dataset(grid: &[f64]) -> Vec<Figure1Row> {
    grid.iter()
        .map(|&x| Figure1Row {
            f_eta: x,
            beta_random_exp: exponential_boundary(x),
            beta_const_eta: synchronous_threshold(x),
            beta_const_4eta: synchronous_threshold(4.0 * x),
            beta_const_16eta: synchronous_threshold(16.0 * x),
        })
        .collect()
}

/// `0, step, 2·step, ..., 1` without accumulated rounding.
pub fn unit_grid(steps: usize) -> Vec<f64> {
    (0..=steps).map(|i| i as f64 / steps as f64).collect()
}

/// Constants used on the way to the settlement bound: `c = ε/2`,
/// `k' = ⌈3kf/4⌉`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SettlementConstants {
    pub c: f64,
    pub k_prime: u64,
}

pub fn settlement_constants(params: &SecurityParams, k: u64) -> SettlementConstants {
    SettlementConstants { c: params.epsilon / 2.0, k_prime: (3.0 * k as f64 * params.f / 4.0).ceil() as u64 }
}

/// Constants used on the way to the chain-quality bound: `μ, γ+μ, cr, c, ε`
/// is an arithmetic sequence with step `γ = (ε - μ)/4`, and `k' = ⌈rkf⌉`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChainQualityConstants {
    pub gamma: f64,
    pub c: f64,
    pub r: f64,
    pub k_prime: u64,
}

pub fn chain_quality_constants(params: &SecurityParams, k: u64, mu: f64) -> ChainQualityConstants {
    let gamma = (params.epsilon - mu) / 4.0;
    let c = params.epsilon - gamma;
    let r = (c - gamma) / c;
    ChainQualityConstants { gamma, c, r, k_prime: (r * k as f64 * params.f).ceil() as u64 }
}

/// `P(W[j] ≥ -cj for some j ≥ k) ≤ 2 e^{-k(ε-c)²/3}` for the walk with
/// `+1` steps of probability `(1-ε)/2`.
pub fn random_walk_bound(epsilon: f64, c: f64, k: f64) -> f64 {
    2.0 * (-k * (epsilon - c).powi(2) / 3.0).exp()
}

/// `P(Reach ≥ a) ≤ ((1-p)/p)^a`.
pub fn reach_tail_bound(p: f64, a: f64) -> f64 {
    ((1.0 - p) / p).powf(a)
}

/// `P(Unheard > a) ≤ (1-q)^a`.
pub fn unheard_tail_bound(q: f64, a: f64) -> f64 {
    (1.0 - q).powf(a)
}

/// `P(CompressedUnheard[j] ≥ B + c(j-k') for some j ≥ k')
/// ≤ e^{-Bq} / ((1-q)(1-(1-q)^c))`.
pub fn unheard_excursion_bound(q: f64, b: f64, c: f64) -> f64 {
    (-b * q).exp() / ((1.0 - q) * (1.0 - (1.0 - q).powf(c)))
}

/// `P(CompressedMargin[j] ≥ 0 for some j ≥ k) ≤ e^{-kε³/3}`.
pub fn margin_excursion_bound(epsilon: f64, k: f64) -> f64 {
    (-k * epsilon.powi(3) / 3.0).exp()
}

/// `P(T^s_{k'} > k) ≤ e^{-kf(1-r)²/2}` for `k' = ⌈rkf⌉`.
pub fn time_scale_bound(f: f64, k: f64, r: f64) -> f64 {
    (-k * f * (1.0 - r).powi(2) / 2.0).exp()
}

/// Stationary law of `(B, Reach)` for the chain whose first coordinate is
/// the backward recurrence time of the renewal process and second the
/// reach: `π(b, r) = f(1-f)^b (1 - ρ) ρ^r` with `ρ = (1-p)/p`.
pub fn reach_equilibrium(f: f64, p: f64, b: u64, r: u64) -> f64 {
    let rho = (1.0 - p) / p;
    f * (1.0 - f).powf(b as f64) * (1.0 - rho) * rho.powf(r as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(f: f64, alpha: f64, law: &DelayDistribution) -> SecurityParams {
        SecurityParams::compute(LeaderParams { f, alpha }, law).unwrap()
    }

    #[test]
    fn zero_delay() {
        let sp = params(0.3, 0.8, &DelayDistribution::constant(0));
        assert!((sp.p - 0.8).abs() < 1e-12);
        assert!((sp.q - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_two() {
        let sp = params(0.1, 1.0, &DelayDistribution::constant(2));
        assert!((sp.timely - 0.81).abs() < 1e-12);
    }

    #[test]
    fn geometric_closed_form() {
        let (q0, f) = (0.5, 0.5);
        let sp = params(f, 1.0, &DelayDistribution::geometric(q0).unwrap());
        assert!((sp.timely - 2.0 / 3.0).abs() < 1e-12);
        assert!((sp.timely - q0 / (1.0 - (1.0 - q0) * (1.0 - f))).abs() < 1e-12);
    }

    #[test]
    fn k_zero() {
        let eps = 0.4;
        let s = settlement_bound(0.05, eps, 0.0, 3);
        assert_eq!(s.p_settlement, 4.0);
        assert!((s.p_unheard - 2.0 / (1.0 - 0.5f64.powf(0.2))).abs() < 1e-12);
        assert_eq!(s.total.clamped, 1.0);
        let c = chain_quality_bound(0.05, eps, 0.0, 0.1, 3).unwrap();
        assert_eq!(c.p_cq, 4.0);
        assert!(chain_quality_bound(0.05, eps, 10.0, 0.4, 3).is_err());
    }

    #[test]
    fn thresholds() {
        assert_eq!(synchronous_threshold(0.0), 0.5);
        assert!((synchronous_threshold(1.0) - (3.0 - 5f64.sqrt()) / 2.0).abs() < 1e-12);
        assert_eq!(exponential_boundary(0.0), 0.5);
        assert_eq!(exponential_boundary(1.0), 0.0);
        assert!((exponential_boundary(0.2) - 0.4).abs() < 1e-15);
        assert_eq!(exponential_boundary(1.5), 0.0);
    }

    #[test]
    fn inapplicable_is_flagged() {
        let sp = params(0.5, 0.6, &DelayDistribution::constant(3));
        assert!(!sp.applicable());
        assert!(matches!(sp.settlement_bound(100, 1), Err(BoundsError::Inapplicable(_))));
    }

    #[test]
    fn smallest_k_is_tight() {
        let sp = params(0.05, 0.95, &DelayDistribution::geometric(0.5).unwrap());
        let k = k_for_settlement(&sp, 5, 0.2).unwrap();
        assert!(sp.settlement_bound(k, 5).unwrap().total.raw <= 0.2);
        assert!(sp.settlement_bound(k - 1, 5).unwrap().total.raw > 0.2);
    }
}
