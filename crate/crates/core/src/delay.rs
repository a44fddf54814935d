//! Message-delay distributions and their internal representation.
//!
//! A delay law is a distribution on `{0, 1, 2, ...} ∪ {∞}`. Its failure rate
//! at `i` is the chance the delay equals `i` given that it is at least `i`:
//!
//! ```text
//! FR[i] = P(Δ = i) / P(Δ ≥ i)        (1 when P(Δ ≥ i) = 0)
//! ```
//!
//! Given uniforms `U[0], U[1], ...` the delay is read off as
//! `D = min { i : U[i] ≤ FR[i] }`, and the refreshed residual after `d`
//! elapsed slots reuses the same stream shifted by `d`:
//! `refresh_d(D) = min { i : U[i + d] ≤ FR[i] }`. For non-decreasing failure
//! rates this gives `D ≤ d + refresh_d(D)` pathwise.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::stream::Uniforms;

/// A realised delay.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Delay {
    Finite(u64),
    Never,
}

impl Delay {
    pub fn finite(self) -> Option<u64> {
        match self {
            Delay::Finite(d) => Some(d),
            Delay::Never => None,
        }
    }

    /// Slot at which a message sent in `slot` arrives, if ever.
    pub fn arrival(self, slot: i64) -> Option<i64> {
        self.finite().map(|d| slot + d as i64)
    }

    /// `self < g` with `∞` larger than every finite gap.
    pub fn less_than(self, g: i64) -> bool {
        matches!(self, Delay::Finite(d) if (d as i64) < g)
    }
}

impl fmt::Display for Delay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Delay::Finite(d) => write!(f, "{d}"),
            Delay::Never => write!(f, "inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DelayError {
    #[error("invalid delay parameter: {0}")]
    InvalidParameter(String),
    #[error("probabilities must be non-negative, found {0}")]
    Negative(f64),
    #[error("probabilities sum to {0}, expected 1")]
    NotNormalized(f64),
}

const SUM_TOLERANCE: f64 = 1e-12;
/// Finite mass below this fraction of the mass at infinity is treated as gone.
const NEVER_CUTOFF: f64 = 1e-15;

/// A delay law: an explicit head `P(Δ = d)` for `d < head.len()`, an optional
/// geometric tail beyond it, and a point mass at infinity.
///
/// The tail puts mass `tail_mass · q (1 - q)^j` on `head.len() + j`.
#[derive(Clone, Debug, PartialEq)]
pub struct DelayDistribution {
    head: Vec<f64>,
    tail_mass: f64,
    tail_q: f64,
    infinity: f64,
    /// `P(Δ ≥ i)` for `i < head.len()`, including the tail and infinity.
    head_survival: Vec<f64>,
    head_rates: Vec<f64>,
}

impl DelayDistribution {
    fn build(head: Vec<f64>, tail_mass: f64, tail_q: f64, infinity: f64) -> Result<Self, DelayError> {
        for &p in head.iter().chain([tail_mass, infinity].iter()) {
            if !(p >= 0.0) {
                return Err(DelayError::Negative(p));
            }
        }
        if tail_mass > 0.0 && !(tail_q > 0.0 && tail_q <= 1.0) {
            return Err(DelayError::InvalidParameter(format!("geometric tail parameter {tail_q} outside (0, 1]")));
        }
        let total: f64 = head.iter().sum::<f64>() + tail_mass + infinity;
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(DelayError::NotNormalized(total));
        }
        let mut head_survival = vec![0.0; head.len()];
        let mut acc = tail_mass + infinity;
        for i in (0..head.len()).rev() {
            acc += head[i];
            head_survival[i] = acc;
        }
        let head_rates = head
            .iter()
            .zip(&head_survival)
            .map(|(&p, &s)| if s <= 0.0 { 1.0 } else { (p / s).min(1.0) })
            .collect();
        Ok(DelayDistribution { head, tail_mass, tail_q, infinity, head_survival, head_rates })
    }

    /// `Δ ≡ c`.
    pub fn constant(c: u64) -> Self {
        let mut head = vec![0.0; c as usize + 1];
        head[c as usize] = 1.0;
        Self::build(head, 0.0, 1.0, 0.0).expect("point mass is valid")
    }

    /// `P(Δ = d) = q (1 - q)^d` for `q ∈ (0, 1]`.
    pub fn geometric(q: f64) -> Result<Self, DelayError> {
        if !(q > 0.0 && q <= 1.0) {
            return Err(DelayError::InvalidParameter(format!("geometric q = {q} outside (0, 1]")));
        }
        Self::build(Vec::new(), 1.0, q, 0.0)
    }

    /// The integer part of an exponential with the given mean, optionally
    /// capped: all mass at or beyond `cap` is moved onto `cap`.
    pub fn discrete_exponential(mean: f64, cap: Option<u64>) -> Result<Self, DelayError> {
        if !(mean > 0.0) || !mean.is_finite() {
            return Err(DelayError::InvalidParameter(format!("exponential mean {mean} must be positive")));
        }
        let q = 1.0 - (-1.0 / mean).exp();
        match cap {
            None => Self::geometric(q),
            Some(c) => {
                let mut head: Vec<f64> = (0..c).map(|d| q * (1.0 - q).powi(d as i32)).collect();
                head.push((1.0 - q).powi(c as i32));
                Self::build(head, 0.0, 1.0, 0.0)
            }
        }
    }

    /// An explicit finite table `pmf[d] = P(Δ = d)` plus mass at infinity.
    pub fn table(pmf: Vec<f64>, infinity: f64) -> Result<Self, DelayError> {
        Self::build(pmf, 0.0, 1.0, infinity)
    }

    /// `base` with probability `finite_weight`, otherwise `∞`.
    pub fn mixture_inf(base: &DelayDistribution, finite_weight: f64) -> Result<Self, DelayError> {
        if !(0.0..=1.0).contains(&finite_weight) {
            return Err(DelayError::InvalidParameter(format!("finite weight {finite_weight} outside [0, 1]")));
        }
        let head = base.head.iter().map(|p| p * finite_weight).collect();
        Self::build(
            head,
            base.tail_mass * finite_weight,
            base.tail_q,
            base.infinity * finite_weight + (1.0 - finite_weight),
        )
    }

    pub fn mass_at_infinity(&self) -> f64 {
        self.infinity
    }

    /// `P(Δ = d)`.
    pub fn pmf(&self, d: u64) -> f64 {
        let l = self.head.len() as u64;
        if d < l {
            self.head[d as usize]
        } else {
            self.tail_mass * self.tail_q * (1.0 - self.tail_q).powf((d - l) as f64)
        }
    }

    /// `P(Δ ≥ d)`, counting the mass at infinity.
    pub fn survival(&self, d: u64) -> f64 {
        let l = self.head.len() as u64;
        if d < l {
            self.head_survival[d as usize]
        } else {
            self.tail_mass * (1.0 - self.tail_q).powf((d - l) as f64) + self.infinity
        }
    }

    /// `P(Δ ≤ d)`.
    pub fn cdf(&self, d: u64) -> f64 {
        (1.0 - self.survival(d + 1)).clamp(0.0, 1.0)
    }

    /// `P(Δ < g)` for an integer gap `g`; zero for `g ≤ 0`.
    pub fn prob_less_than(&self, g: i64) -> f64 {
        if g <= 0 {
            0.0
        } else {
            self.cdf(g as u64 - 1)
        }
    }

    /// Failure rate at index `i`.
    pub fn failure_rate(&self, i: u64) -> f64 {
        let l = self.head.len() as u64;
        if i < l {
            return self.head_rates[i as usize];
        }
        if self.tail_mass <= 0.0 {
            return if self.infinity > 0.0 { 0.0 } else { 1.0 };
        }
        if self.infinity <= 0.0 {
            return self.tail_q;
        }
        let a = self.tail_mass * (1.0 - self.tail_q).powf((i - l) as f64);
        self.tail_q * a / (a + self.infinity)
    }

    /// `FR[0..n]`.
    pub fn failure_rates(&self, n: usize) -> Vec<f64> {
        (0..n as u64).map(|i| self.failure_rate(i)).collect()
    }

    /// Whether `i ↦ FR[i]` is non-decreasing over the whole support.
    pub fn has_nondecreasing_failure_rate(&self) -> bool {
        // Past the head the rate is constant, or decreasing when there is
        // mass at infinity, so one index into the tail settles it.
        if self.tail_mass > 0.0 && self.infinity > 0.0 {
            return false;
        }
        let rates = self.failure_rates(self.head.len() + 1);
        rates.windows(2).all(|w| w[1] >= w[0] - 1e-12)
    }

    /// Reads `min { i : U[offset + i] ≤ FR[i] }`.
    fn first_hit<U: Uniforms>(&self, u: &mut U, offset: u64) -> Delay {
        let l = self.head.len() as u64;
        let mut i = 0u64;
        loop {
            if i >= l && self.infinity > 0.0 {
                if self.tail_mass <= 0.0 {
                    return Delay::Never;
                }
                let a = self.tail_mass * (1.0 - self.tail_q).powf((i - l) as f64);
                if a < NEVER_CUTOFF * self.infinity {
                    return Delay::Never;
                }
            }
            if u.uniform(offset + i) <= self.failure_rate(i) {
                return Delay::Finite(i);
            }
            i += 1;
        }
    }

    /// Delay sampled from the internal representation over `u`.
    pub fn sample<U: Uniforms>(&self, u: &mut U) -> Delay {
        self.first_hit(u, 0)
    }

    /// Refreshed residual after `elapsed` slots over the same stream.
    pub fn refreshed_residual<U: Uniforms>(&self, u: &mut U, elapsed: u64) -> Delay {
        self.first_hit(u, elapsed)
    }
}

/// The internal representation of one delay: a law plus a uniform stream.
pub struct InternalRepresentation<'a, U> {
    pub law: &'a DelayDistribution,
    pub uniforms: U,
}

impl<'a, U: Uniforms> InternalRepresentation<'a, U> {
    pub fn new(law: &'a DelayDistribution, uniforms: U) -> Self {
        InternalRepresentation { law, uniforms }
    }

    pub fn sample_delay(&mut self) -> Delay {
        self.law.sample(&mut self.uniforms)
    }

    pub fn refreshed_residual(&mut self, elapsed: u64) -> Delay {
        self.law.refreshed_residual(&mut self.uniforms, elapsed)
    }
}

/// Declarative form of a delay law, as written in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DelaySpec {
    Constant { delay: u64 },
    Geometric { q: f64 },
    DiscreteExponential { mean: f64, cap: Option<u64> },
    Table { pmf: Vec<f64>, #[serde(default)] infinity: f64 },
    MixtureInf { finite_weight: f64, base: Box<DelaySpec> },
}

impl DelaySpec {
    pub fn build(&self) -> Result<DelayDistribution, DelayError> {
        match self {
            DelaySpec::Constant { delay } => Ok(DelayDistribution::constant(*delay)),
            DelaySpec::Geometric { q } => DelayDistribution::geometric(*q),
            DelaySpec::DiscreteExponential { mean, cap } => DelayDistribution::discrete_exponential(*mean, *cap),
            DelaySpec::Table { pmf, infinity } => DelayDistribution::table(pmf.clone(), *infinity),
            DelaySpec::MixtureInf { finite_weight, base } => {
                DelayDistribution::mixture_inf(&base.build()?, *finite_weight)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::FixedUniforms;

    #[test]
    fn constant_two_ignores_uniforms() {
        let law = DelayDistribution::constant(2);
        assert_eq!(law.failure_rates(3), vec![0.0, 0.0, 1.0]);
        let mut u = FixedUniforms(vec![0.01, 0.99, 0.5]);
        assert_eq!(law.sample(&mut u), Delay::Finite(2));
    }

    #[test]
    fn two_point_example() {
        let law = DelayDistribution::table(vec![0.5, 0.5], 0.0).unwrap();
        assert_eq!(law.failure_rates(2), vec![0.5, 1.0]);
        let mut u = FixedUniforms(vec![0.9, 0.3]);
        assert_eq!(law.sample(&mut u), Delay::Finite(1));
    }

    #[test]
    fn refresh_reuses_stream() {
        let law = DelayDistribution::geometric(0.5).unwrap();
        // D = min{i : U[i] ≤ 0.5} = 2; refresh_1 = min{i : U[1 + i] ≤ 0.5} = 1.
        let mut u = FixedUniforms(vec![0.9, 0.7, 0.2, 0.1]);
        assert_eq!(law.sample(&mut u), Delay::Finite(2));
        assert_eq!(law.refreshed_residual(&mut u, 1), Delay::Finite(1));
        assert_eq!(law.refreshed_residual(&mut u, 2), Delay::Finite(0));
        assert_eq!(law.sample(&mut FixedUniforms(vec![0.9, 0.3])), Delay::Finite(1));
    }

    #[test]
    fn infinity_handling() {
        let base = DelayDistribution::constant(1);
        let law = DelayDistribution::mixture_inf(&base, 0.25).unwrap();
        assert!((law.mass_at_infinity() - 0.75).abs() < 1e-15);
        assert!((law.failure_rate(1) - 0.25).abs() < 1e-15);
        assert_eq!(law.failure_rate(5), 0.0);
        let mut u = FixedUniforms(vec![0.5, 0.2]);
        assert_eq!(law.sample(&mut u), Delay::Finite(1));
        let mut u = FixedUniforms(vec![0.5, 0.5]);
        assert_eq!(law.sample(&mut u), Delay::Never);
        let never = DelayDistribution::table(vec![0.5], 0.5).unwrap();
        let mut u = FixedUniforms(vec![0.9]);
        assert_eq!(never.sample(&mut u), Delay::Never);
        assert!(!law.has_nondecreasing_failure_rate());
    }

    #[test]
    fn validation() {
        assert!(DelayDistribution::table(vec![0.5, 0.4], 0.0).is_err());
        assert!(DelayDistribution::table(vec![-0.5, 1.5], 0.0).is_err());
        assert!(DelayDistribution::geometric(0.0).is_err());
        assert!(DelayDistribution::discrete_exponential(-1.0, None).is_err());
    }

    #[test]
    fn capped_exponential_is_ndfr() {
        let law = DelayDistribution::discrete_exponential(3.0, Some(12)).unwrap();
        assert!(law.has_nondecreasing_failure_rate());
        assert!((law.survival(0) - 1.0).abs() < 1e-12);
        assert!((law.failure_rate(12) - 1.0).abs() < 1e-12);
        let bumpy = DelayDistribution::table(vec![0.2, 0.0, 0.8], 0.0).unwrap();
        assert!(!bumpy.has_nondecreasing_failure_rate());
    }

    #[test]
    fn spec_builds_mixture() {
        let spec = DelaySpec::MixtureInf { finite_weight: 0.5, base: Box::new(DelaySpec::Geometric { q: 0.3 }) };
        let law = spec.build().unwrap();
        assert!((law.mass_at_infinity() - 0.5).abs() < 1e-12);
        assert!((law.pmf(0) - 0.15).abs() < 1e-12);
    }
}
