//! Leader election and the leader string.
//!
//! Each slot independently draws a pair `(N, A)`: the number of honest
//! leaders and whether the adversary is a leader. The leader string records
//! `⊥` when nobody leads, `0` when exactly one honest party leads alone and
//! `1` otherwise.

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::stream::{Domain, KeyedUniforms, StreamKey};
use crate::tristring::{Symbol, TriString};

/// Identity of an honest party.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PartyId(pub u64);

/// One atom of the joint law of `(N, A)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LawEntry {
    pub honest: u32,
    pub adversary: bool,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LeaderError {
    #[error("leader law is invalid: {0}")]
    InvalidLaw(String),
    #[error("slot may elect {needed} honest leaders but the population has {population}")]
    PopulationTooSmall { needed: u32, population: u64 },
}

/// `f = P(A + N > 0)` and `α = P(N = 1, A = 0 | A + N > 0)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LeaderParams {
    pub f: f64,
    pub alpha: f64,
}

/// The joint law of `(N, A)` as a finite table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointLaw {
    entries: Vec<LawEntry>,
}

impl JointLaw {
    pub fn new(entries: Vec<LawEntry>) -> Result<Self, LeaderError> {
        if entries.is_empty() {
            return Err(LeaderError::InvalidLaw("empty support".into()));
        }
        if let Some(e) = entries.iter().find(|e| !(e.p >= 0.0)) {
            return Err(LeaderError::InvalidLaw(format!("negative probability {}", e.p)));
        }
        let total: f64 = entries.iter().map(|e| e.p).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(LeaderError::InvalidLaw(format!("probabilities sum to {total}")));
        }
        let law = JointLaw { entries };
        if law.params().f <= 0.0 {
            return Err(LeaderError::InvalidLaw("no slot is ever non-empty".into()));
        }
        Ok(law)
    }

    /// The three-atom law with the given `f` and `α`: a lone honest leader,
    /// a lone adversarial leader, or nobody.
    pub fn from_f_alpha(f: f64, alpha: f64) -> Result<Self, LeaderError> {
        if !(f > 0.0 && f <= 1.0) || !(0.0..=1.0).contains(&alpha) {
            return Err(LeaderError::InvalidLaw(format!("f = {f}, alpha = {alpha}")));
        }
        JointLaw::new(vec![
            LawEntry { honest: 0, adversary: false, p: 1.0 - f },
            LawEntry { honest: 1, adversary: false, p: f * alpha },
            LawEntry { honest: 0, adversary: true, p: f * (1.0 - alpha) },
        ])
    }

    /// `N ~ Binomial(n, ρ)` independent of `A ~ Bernoulli(β)`.
    pub fn bernoulli_mining(n: u32, rho: f64, beta: f64) -> Result<Self, LeaderError> {
        let mut entries = Vec::new();
        let mut binom = (1.0 - rho).powi(n as i32);
        for k in 0..=n {
            if k > 0 {
                binom *= (n - k + 1) as f64 / k as f64 * rho / (1.0 - rho);
            }
            entries.push(LawEntry { honest: k, adversary: false, p: binom * (1.0 - beta) });
            entries.push(LawEntry { honest: k, adversary: true, p: binom * beta });
        }
        JointLaw::new(entries)
    }

    pub fn entries(&self) -> &[LawEntry] {
        &self.entries
    }

    pub fn params(&self) -> LeaderParams {
        let empty: f64 = self.entries.iter().filter(|e| e.honest == 0 && !e.adversary).map(|e| e.p).sum();
        let unique: f64 = self.entries.iter().filter(|e| e.honest == 1 && !e.adversary).map(|e| e.p).sum();
        let f = 1.0 - empty;
        let alpha = if f > 0.0 { unique / f } else { 0.0 };
        LeaderParams { f, alpha }
    }

    pub fn max_honest(&self) -> u32 {
        self.entries.iter().filter(|e| e.p > 0.0).map(|e| e.honest).max().unwrap_or(0)
    }

    fn pick(&self, u: f64, nonempty_only: bool) -> LawEntry {
        let scale = if nonempty_only { self.params().f } else { 1.0 };
        let mut acc = 0.0;
        let mut last = None;
        for e in &self.entries {
            if nonempty_only && e.honest == 0 && !e.adversary {
                continue;
            }
            if e.p <= 0.0 {
                continue;
            }
            acc += e.p / scale;
            last = Some(*e);
            if u <= acc {
                return *e;
            }
        }
        last.expect("law has positive mass")
    }
}

/// How honest identities are assigned to elected slots.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum LeaderModel {
    /// A fixed population; leaders are drawn uniformly without replacement.
    Iid { population: u64 },
    /// Every honest leader is a fresh party that never leads again.
    /// Parties `0..observers` never lead; miners are numbered after them.
    OneTime { observers: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct LeaderConfig {
    pub law: JointLaw,
    pub model: LeaderModel,
}

impl LeaderConfig {
    pub fn new(law: JointLaw, model: LeaderModel) -> Result<Self, LeaderError> {
        if let LeaderModel::Iid { population } = model {
            if law.max_honest() as u64 > population {
                return Err(LeaderError::PopulationTooSmall { needed: law.max_honest(), population });
            }
        }
        Ok(LeaderConfig { law, model })
    }

    pub fn params(&self) -> LeaderParams {
        self.law.params()
    }

    /// Parties tracked through the whole execution.
    pub fn tracked_parties(&self) -> u64 {
        match self.model {
            LeaderModel::Iid { population } => population,
            LeaderModel::OneTime { observers } => observers,
        }
    }
}

/// Leaders of one slot. Honest leaders are listed in ordinal order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotLeaders {
    pub slot: i64,
    pub honest: Vec<PartyId>,
    pub adversary: bool,
}

impl SlotLeaders {
    pub fn symbol(&self) -> Symbol {
        match (self.honest.len(), self.adversary) {
            (0, false) => Symbol::Empty,
            (1, false) => Symbol::Honest,
            _ => Symbol::Adversarial,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.honest.is_empty() && !self.adversary
    }
}

fn assign_identities<R: Rng>(cfg: &LeaderConfig, n: u32, rng: &mut R, next_miner: &mut u64) -> Vec<PartyId> {
    match cfg.model {
        LeaderModel::Iid { population } => {
            let mut ids: Vec<PartyId> =
                sample(rng, population as usize, n as usize).into_iter().map(|i| PartyId(i as u64)).collect();
            ids.sort();
            ids
        }
        LeaderModel::OneTime { observers } => (0..n)
            .map(|_| {
                let id = PartyId(observers + *next_miner);
                *next_miner += 1;
                id
            })
            .collect(),
    }
}

/// Draws the leaders of one slot from a stream keyed by the slot alone.
///
/// In the one-time model fresh miner identities are taken from
/// `next_miner`, which the caller threads through slots in order.
pub fn draw_slot(cfg: &LeaderConfig, slot: i64, seed: u64, next_miner: &mut u64) -> SlotLeaders {
    let mut rng = KeyedUniforms::rng(StreamKey { seed, domain: Domain::Leader, slot, ordinal: 0, recipient: 0 });
    let e = cfg.law.pick(rng.random::<f64>(), false);
    let honest = assign_identities(cfg, e.honest, &mut rng, next_miner);
    SlotLeaders { slot, honest, adversary: e.adversary }
}

/// Sequential generator of non-empty slots.
///
/// Gaps between non-empty slots are geometric on `{1, 2, ...}` with
/// success probability `f`, and each non-empty slot draws `(N, A)` from the
/// law conditioned on being non-empty. This has the same distribution as
/// calling [`draw_slot`] on every slot but skips the empty ones.
#[derive(Clone, Debug)]
pub struct LeaderSchedule {
    cfg: LeaderConfig,
    rng: ChaCha8Rng,
    gap: Option<Geometric>,
    slot: i64,
    next_miner: u64,
}

impl LeaderSchedule {
    pub fn new(cfg: &LeaderConfig, seed: u64) -> Self {
        let f = cfg.params().f;
        let gap = if f >= 1.0 { None } else { Some(Geometric::new(f).expect("f in (0, 1)")) };
        LeaderSchedule {
            cfg: cfg.clone(),
            rng: KeyedUniforms::rng(StreamKey::domain(seed, Domain::Leader)),
            gap,
            slot: 0,
            next_miner: 0,
        }
    }

    /// Leaders of the next non-empty slot after the previous one returned.
    pub fn next_nonempty(&mut self) -> SlotLeaders {
        let skip = match &self.gap {
            Some(g) => g.sample(&mut self.rng),
            None => 0,
        };
        self.slot += 1 + skip as i64;
        let e = self.cfg.law.pick(self.rng.random::<f64>(), true);
        let honest = assign_identities(&self.cfg, e.honest, &mut self.rng, &mut self.next_miner);
        SlotLeaders { slot: self.slot, honest, adversary: e.adversary }
    }

    /// All non-empty slots in `1..=horizon`.
    pub fn up_to(cfg: &LeaderConfig, seed: u64, horizon: i64) -> Vec<SlotLeaders> {
        let mut s = LeaderSchedule::new(cfg, seed);
        let mut out = Vec::new();
        loop {
            let l = s.next_nonempty();
            if l.slot > horizon {
                return out;
            }
            out.push(l);
        }
    }
}

/// The leader string over `1..=horizon` from a sparse list of non-empty slots.
pub fn leader_string(leaders: &[SlotLeaders], horizon: usize) -> TriString {
    let mut out = TriString::empty_of_len(horizon);
    for l in leaders {
        if l.slot >= 1 && (l.slot as usize) <= horizon {
            out.set(l.slot as usize, l.symbol());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_of_simple_laws() {
        let l = JointLaw::new(vec![LawEntry { honest: 1, adversary: false, p: 1.0 }]).unwrap();
        assert_eq!(l.params(), LeaderParams { f: 1.0, alpha: 1.0 });
        let l = JointLaw::new(vec![
            LawEntry { honest: 0, adversary: false, p: 0.8 },
            LawEntry { honest: 2, adversary: false, p: 0.2 },
        ])
        .unwrap();
        let p = l.params();
        assert!((p.f - 0.2).abs() < 1e-12);
        assert_eq!(p.alpha, 0.0);
    }

    #[test]
    fn bernoulli_mining_closed_form() {
        let (n, rho, beta) = (7u32, 0.03, 0.1);
        let p = JointLaw::bernoulli_mining(n, rho, beta).unwrap().params();
        let f = 1.0 - (1.0 - rho).powi(n as i32) * (1.0 - beta);
        let alpha = n as f64 * rho * (1.0 - rho).powi(n as i32 - 1) * (1.0 - beta) / f;
        assert!((p.f - f).abs() < 1e-12);
        assert!((p.alpha - alpha).abs() < 1e-12);
    }

    #[test]
    fn always_unique_leader() {
        let law = JointLaw::new(vec![LawEntry { honest: 1, adversary: false, p: 1.0 }]).unwrap();
        let cfg = LeaderConfig::new(law, LeaderModel::Iid { population: 4 }).unwrap();
        let mut m = 0;
        for slot in 1..50 {
            assert_eq!(draw_slot(&cfg, slot, 3, &mut m).symbol(), Symbol::Honest);
        }
        let sched = LeaderSchedule::up_to(&cfg, 3, 20);
        assert_eq!(sched.len(), 20);
        assert_eq!(leader_string(&sched, 20).zeros(), 20);
    }

    #[test]
    fn population_check() {
        let law = JointLaw::bernoulli_mining(5, 0.1, 0.0).unwrap();
        assert!(LeaderConfig::new(law, LeaderModel::Iid { population: 4 }).is_err());
    }

    #[test]
    fn one_time_identities_are_fresh() {
        let law = JointLaw::bernoulli_mining(3, 0.5, 0.0).unwrap();
        let cfg = LeaderConfig::new(law, LeaderModel::OneTime { observers: 2 }).unwrap();
        let ls = LeaderSchedule::up_to(&cfg, 9, 200);
        let mut ids: Vec<u64> = ls.iter().flat_map(|l| l.honest.iter().map(|p| p.0)).collect();
        let n = ids.len();
        assert!(ids.iter().all(|&i| i >= 2));
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), n);
    }
}
