//! The characteristic string.
//!
//! It has the same `⊥` and `1` positions as the leader string. A uniquely
//! honest slot `T_j` stays `0` (is *special*) only if its leader provably
//! heard the previous special block in time: `R_j < T_j - T_{j-1}`, where
//! `R_j` is the delay of the last special broadcast at or before `T_{j-1}`
//! to the leader of `T_j`. In the iid model that delay is refreshed by the
//! slots already elapsed, which keeps the labels independent across
//! renewals.
//!
//! Before slot 1 the string is extended backwards with virtual renewals
//! until one is labelled special, so that `T_1` always has a predecessor.

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::delay::{Delay, DelayDistribution};
use crate::leader::{leader_string, LeaderConfig, LeaderModel, LeaderParams, PartyId, SlotLeaders};
use crate::stream::{Domain, KeyedUniforms, StreamKey};
use crate::tristring::{Symbol, TriString};

/// Renewals sampled before the search for a virtual special slot gives up.
pub const DEFAULT_NEGATIVE_CUTOFF: usize = 10_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CharStringError {
    #[error("the iid model needs a delay law with non-decreasing failure rate")]
    NotNdfr,
    #[error("delays may be infinite only in the one-time leader model")]
    InfiniteDelayInIid,
    #[error("requested renewal {requested} lies past the horizon ({available} available)")]
    PastHorizon { requested: usize, available: usize },
}

/// The negative-time part of the renewal process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NegativeAnchor {
    /// `T_0 ≤ 0`, the last renewal at or before slot 0.
    pub t0: i64,
    /// The last special slot at or before `T_0`.
    pub last_special: i64,
    /// Virtual renewals `T_0, T_{-1}, ...` with their labels, newest first.
    pub renewals: Vec<(i64, Symbol)>,
    /// Set when the cutoff was hit and slot 0 stands in as special.
    pub genesis_fallback: bool,
}

/// Samples renewals at or before slot 0 until one is labelled special.
///
/// A virtual renewal is labelled `0` with probability `α · P(Δ < gap)`,
/// where `gap` is the distance to the renewal before it.
pub fn negative_time_extension(
    params: LeaderParams,
    law: &DelayDistribution,
    seed: u64,
    cutoff: usize,
) -> NegativeAnchor {
    let mut rng = KeyedUniforms::rng(StreamKey::domain(seed, Domain::NegativeTime));
    let geo = (params.f < 1.0).then(|| Geometric::new(params.f).expect("f in (0, 1)"));
    let skip = |rng: &mut rand_chacha::ChaCha8Rng| geo.as_ref().map_or(0, |g| g.sample(rng) as i64);
    let t0 = -skip(&mut rng);
    let mut renewals = Vec::new();
    let mut t = t0;
    for _ in 0..cutoff {
        let prev = t - 1 - skip(&mut rng);
        let p0 = params.alpha * law.prob_less_than(t - prev);
        let label = if rng.random::<f64>() < p0 { Symbol::Honest } else { Symbol::Adversarial };
        renewals.push((t, label));
        if label == Symbol::Honest {
            return NegativeAnchor { t0, last_special: t, renewals, genesis_fallback: false };
        }
        t = prev;
    }
    NegativeAnchor { t0, last_special: 0, renewals, genesis_fallback: true }
}

/// Uniform stream behind the delay of the (unique) block of `slot` to `to`.
pub fn special_stream(seed: u64, slot: i64, to: PartyId) -> KeyedUniforms {
    KeyedUniforms::new(StreamKey::delay(seed, slot, 0, to.0))
}

/// Which reading of `R_j` to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Marking {
    /// `R_j = delay(T_{j*} → h_j)`.
    OneTime,
    /// `R_j = refresh_{T_{j-1} - T_{j*}}(delay(T_{j*} → h_j))`.
    Iid,
}

impl Marking {
    pub fn for_model(model: LeaderModel) -> Self {
        match model {
            LeaderModel::Iid { .. } => Marking::Iid,
            LeaderModel::OneTime { .. } => Marking::OneTime,
        }
    }
}

/// One uniquely honest slot considered for marking.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkRecord {
    pub slot: i64,
    pub previous_renewal: i64,
    pub previous_special: i64,
    pub residual: Delay,
    pub special: bool,
}

/// Turns the uniquely honest slots of a leader string into special or
/// adversarial ones.
///
/// `leaders` must list every non-empty slot of `1..=horizon` in order.
pub fn mark_special(
    leaders: &[SlotLeaders],
    horizon: usize,
    law: &DelayDistribution,
    marking: Marking,
    seed: u64,
    anchor: &NegativeAnchor,
) -> (TriString, Vec<MarkRecord>) {
    let mut out = leader_string(leaders, horizon);
    let mut records = Vec::new();
    let mut prev = anchor.t0;
    let mut last_special = anchor.last_special;
    for l in leaders.iter().filter(|l| l.slot >= 1 && l.slot as usize <= horizon) {
        if l.symbol() == Symbol::Honest {
            let mut u = special_stream(seed, last_special, l.honest[0]);
            let residual = match marking {
                Marking::OneTime => law.sample(&mut u),
                Marking::Iid => law.refreshed_residual(&mut u, (prev - last_special).max(0) as u64),
            };
            let special = residual.less_than(l.slot - prev);
            records.push(MarkRecord {
                slot: l.slot,
                previous_renewal: prev,
                previous_special: last_special,
                residual,
                special,
            });
            if special {
                last_special = l.slot;
            } else {
                out.set(l.slot as usize, Symbol::Adversarial);
            }
        }
        prev = l.slot;
    }
    (out, records)
}

/// Everything derived from the leader draw of one execution.
#[derive(Clone, Debug)]
pub struct CharStringBuild {
    pub leaders: Vec<SlotLeaders>,
    pub leader_string: TriString,
    pub char_string: TriString,
    pub anchor: NegativeAnchor,
    pub marks: Vec<MarkRecord>,
}

impl CharStringBuild {
    /// Slots of the renewal process within `1..=horizon`.
    pub fn renewals(&self) -> Vec<i64> {
        self.leaders.iter().map(|l| l.slot).collect()
    }
}

/// Checks the delay law against the leader model.
pub fn check_law(model: LeaderModel, law: &DelayDistribution) -> Result<(), CharStringError> {
    if let LeaderModel::Iid { .. } = model {
        if law.mass_at_infinity() > 0.0 {
            return Err(CharStringError::InfiniteDelayInIid);
        }
        if !law.has_nondecreasing_failure_rate() {
            return Err(CharStringError::NotNdfr);
        }
    }
    Ok(())
}

/// Builds the characteristic string of an already drawn leader schedule.
pub fn build_from_leaders(
    cfg: &LeaderConfig,
    law: &DelayDistribution,
    leaders: Vec<SlotLeaders>,
    horizon: usize,
    seed: u64,
    cutoff: usize,
) -> Result<CharStringBuild, CharStringError> {
    check_law(cfg.model, law)?;
    let anchor = negative_time_extension(cfg.params(), law, seed, cutoff);
    let ls = leader_string(&leaders, horizon);
    let (cs, marks) = mark_special(&leaders, horizon, law, Marking::for_model(cfg.model), seed, &anchor);
    Ok(CharStringBuild { leaders, leader_string: ls, char_string: cs, anchor, marks })
}

/// Samples leaders and the characteristic string without running a protocol.
pub fn sample_char_string(
    cfg: &LeaderConfig,
    law: &DelayDistribution,
    horizon: usize,
    seed: u64,
) -> Result<CharStringBuild, CharStringError> {
    let leaders = crate::leader::LeaderSchedule::up_to(cfg, seed, horizon as i64);
    build_from_leaders(cfg, law, leaders, horizon, seed, DEFAULT_NEGATIVE_CUTOFF)
}

/// `T^s_j`: offsets of the renewals strictly after `s`.
pub fn renewal_offsets(renewals: &[i64], s: i64, count: usize) -> Result<Vec<i64>, CharStringError> {
    let start = renewals.partition_point(|&t| t <= s);
    let avail = renewals.len() - start;
    if count > avail {
        return Err(CharStringError::PastHorizon { requested: count, available: avail });
    }
    Ok(renewals[start..start + count].iter().map(|&t| t - s).collect())
}

/// Samples a process at `s` and at the next `count` renewals after `s`:
/// `out[0] = X[s]`, `out[j] = X[s + T^s_j]`.
pub fn compress<T>(
    process: impl Fn(i64) -> T,
    renewals: &[i64],
    s: i64,
    count: usize,
) -> Result<Vec<T>, CharStringError> {
    let offs = renewal_offsets(renewals, s, count)?;
    Ok(std::iter::once(process(s)).chain(offs.into_iter().map(|o| process(s + o))).collect())
}

/// The compressed characteristic string `CS[s + T^s_1], CS[s + T^s_2], ...`.
pub fn compressed_char_string(
    cs: &TriString,
    renewals: &[i64],
    s: i64,
    count: usize,
) -> Result<Vec<Symbol>, CharStringError> {
    let v = compress(|i| if i >= 1 { Some(cs.get(i as usize)) } else { None }, renewals, s, count)?;
    Ok(v.into_iter().skip(1).map(|x| x.expect("renewals lie in 1..=horizon")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::leader::{JointLaw, LawEntry};
    use crate::tristring::w;

    fn unique_only(pop: u64) -> LeaderConfig {
        let law = JointLaw::new(vec![LawEntry { honest: 1, adversary: false, p: 1.0 }]).unwrap();
        LeaderConfig::new(law, LeaderModel::Iid { population: pop }).unwrap()
    }

    #[test]
    fn zero_delay_keeps_leader_string() {
        let law = JointLaw::from_f_alpha(0.3, 0.7).unwrap();
        let cfg = LeaderConfig::new(law, LeaderModel::Iid { population: 5 }).unwrap();
        let b = sample_char_string(&cfg, &DelayDistribution::constant(0), 500, 11).unwrap();
        assert_eq!(b.char_string, b.leader_string);
    }

    #[test]
    fn constant_delay_two_with_back_to_back_slots() {
        // Every slot is uniquely honest, so each gap is 1 and a delay of 2
        // is never early enough.
        let cfg = unique_only(3);
        let b = sample_char_string(&cfg, &DelayDistribution::constant(2), 50, 1).unwrap();
        assert_eq!(b.char_string.zeros(), 0);
        assert_eq!(b.char_string.ones(), 50);
    }

    #[test]
    fn same_skeleton_as_leader_string() {
        let law = JointLaw::bernoulli_mining(4, 0.05, 0.02).unwrap();
        let cfg = LeaderConfig::new(law, LeaderModel::Iid { population: 4 }).unwrap();
        let b = sample_char_string(&cfg, &DelayDistribution::geometric(0.4).unwrap(), 2000, 5).unwrap();
        for (i, s) in b.leader_string.iter() {
            let c = b.char_string.get(i);
            match s {
                Symbol::Empty => assert_eq!(c, Symbol::Empty),
                Symbol::Adversarial => assert_eq!(c, Symbol::Adversarial),
                Symbol::Honest => assert_ne!(c, Symbol::Empty),
            }
        }
    }

    #[test]
    fn iid_rejects_bad_laws() {
        let cfg = unique_only(2);
        let bumpy = DelayDistribution::table(vec![0.5, 0.0, 0.5], 0.0).unwrap();
        assert_eq!(sample_char_string(&cfg, &bumpy, 10, 0).unwrap_err(), CharStringError::NotNdfr);
        let inf = DelayDistribution::table(vec![0.5], 0.5).unwrap();
        assert_eq!(sample_char_string(&cfg, &inf, 10, 0).unwrap_err(), CharStringError::InfiniteDelayInIid);
    }

    #[test]
    fn compression() {
        let cs = w(".0..1.0");
        let renewals: Vec<i64> = vec![2, 5, 7];
        assert_eq!(renewal_offsets(&renewals, 2, 2).unwrap(), vec![3, 5]);
        assert_eq!(compressed_char_string(&cs, &renewals, 2, 2).unwrap(), vec![Symbol::Adversarial, Symbol::Honest]);
        assert_eq!(compress(|i| i * 10, &renewals, 0, 3).unwrap(), vec![0, 20, 50, 70]);
        assert!(compress(|i| i, &renewals, 5, 2).is_err());
    }

    #[test]
    fn negative_extension_stops_at_special() {
        let params = LeaderParams { f: 0.2, alpha: 0.6 };
        let law = DelayDistribution::geometric(0.5).unwrap();
        for seed in 0..50 {
            let a = negative_time_extension(params, &law, seed, DEFAULT_NEGATIVE_CUTOFF);
            assert!(a.t0 <= 0);
            assert!(!a.genesis_fallback);
            assert_eq!(a.renewals.last().unwrap(), &(a.last_special, Symbol::Honest));
            assert!(a.renewals[..a.renewals.len() - 1].iter().all(|r| r.1 == Symbol::Adversarial));
        }
        let never = LeaderParams { f: 0.5, alpha: 0.0 };
        let a = negative_time_extension(never, &law, 1, 20);
        assert!(a.genesis_fallback);
        assert_eq!(a.last_special, 0);
    }
}
