//! Special blocks a party has not heard about yet.
//!
//! `LatestHeard_h[i]` is the last special slot `i' ≤ i` whose block reached
//! `h` by slot `i`; `Unheard_h[i]` counts the special slots after it, up to
//! and including `i`. For a set of parties the latest-heard slot is the
//! minimum and the unheard count the maximum over the set.

use crate::charstring::{compress, special_stream, CharStringError};
use crate::delay::DelayDistribution;
use crate::leader::PartyId;
use crate::tristring::{Symbol, TriString};

/// When the block of special slot `slot` reaches `to`, if ever.
pub trait DelaySource {
    fn arrival(&self, slot: i64, to: PartyId) -> Option<i64>;
}

/// Arrivals read from the keyed delay streams, as scheduled.
pub struct KeyedDelays<'a> {
    pub law: &'a DelayDistribution,
    pub seed: u64,
}

impl DelaySource for KeyedDelays<'_> {
    fn arrival(&self, slot: i64, to: PartyId) -> Option<i64> {
        self.law.sample(&mut special_stream(self.seed, slot, to)).arrival(slot)
    }
}

impl<F: Fn(i64, PartyId) -> Option<i64>> DelaySource for F {
    fn arrival(&self, slot: i64, to: PartyId) -> Option<i64> {
        self(slot, to)
    }
}

/// `LatestHeard_h[i]`; `None` stands for `-∞`.
pub fn latest_heard(cs: &TriString, src: &impl DelaySource, h: PartyId, i: usize) -> Option<i64> {
    (1..=i.min(cs.len()))
        .rev()
        .filter(|&t| cs.get(t) == Symbol::Honest)
        .find(|&t| src.arrival(t as i64, h).is_some_and(|a| a <= i as i64))
        .map(|t| t as i64)
}

/// `Unheard_h[i]`.
pub fn unheard(cs: &TriString, src: &impl DelaySource, h: PartyId, i: usize) -> usize {
    let from = latest_heard(cs, src, h, i).unwrap_or(0).max(0) as usize;
    cs.count(from + 1, i, Symbol::Honest)
}

/// `LatestHeard_I[i]`: the minimum over `parties`.
pub fn latest_heard_set(cs: &TriString, src: &impl DelaySource, parties: &[PartyId], i: usize) -> Option<i64> {
    parties.iter().map(|&h| latest_heard(cs, src, h, i)).min().flatten()
}

/// `Unheard_I[i]`: the maximum over `parties`.
pub fn unheard_set(cs: &TriString, src: &impl DelaySource, parties: &[PartyId], i: usize) -> usize {
    parties.iter().map(|&h| unheard(cs, src, h, i)).max().unwrap_or(0)
}

/// `LatestHeard` and `Unheard` of several parties over a whole horizon,
/// stored as step functions.
#[derive(Clone, Debug)]
pub struct UnheardSeries {
    parties: Vec<PartyId>,
    /// Per party: `(slot, latest heard from that slot on)`, slots increasing.
    steps: Vec<Vec<(i64, i64)>>,
    /// `zeros[i]` = number of special slots in `1..=i`.
    zeros: Vec<u32>,
}

impl UnheardSeries {
    pub fn build(cs: &TriString, src: &impl DelaySource, parties: &[PartyId]) -> Self {
        let specials = cs.positions(Symbol::Honest);
        Self::from_arrivals(cs, parties, |h| {
            specials.iter().filter_map(|&t| src.arrival(t as i64, h).map(|a| (a, t as i64))).collect()
        })
    }

    /// Builds from per-party lists of `(arrival slot, special slot)`.
    pub fn from_arrivals(cs: &TriString, parties: &[PartyId], mut arrivals: impl FnMut(PartyId) -> Vec<(i64, i64)>) -> Self {
        let mut zeros = Vec::with_capacity(cs.len() + 1);
        zeros.push(0u32);
        let mut acc = 0;
        for &s in cs.symbols() {
            acc += u32::from(s == Symbol::Honest);
            zeros.push(acc);
        }
        let steps = parties
            .iter()
            .map(|&h| {
                let mut ev = arrivals(h);
                ev.sort_unstable();
                let mut out: Vec<(i64, i64)> = Vec::new();
                let mut best = i64::MIN;
                for (at, t) in ev {
                    if t > best {
                        best = t;
                        match out.last_mut() {
                            Some(last) if last.0 == at => last.1 = best,
                            _ => out.push((at, best)),
                        }
                    }
                }
                out
            })
            .collect();
        UnheardSeries { parties: parties.to_vec(), steps, zeros }
    }

    pub fn parties(&self) -> &[PartyId] {
        &self.parties
    }

    fn index(&self, h: PartyId) -> usize {
        self.parties.iter().position(|&p| p == h).expect("party tracked by the series")
    }

    /// `LatestHeard_h[i]`.
    pub fn latest_heard(&self, h: PartyId, i: i64) -> Option<i64> {
        self.latest_heard_at(self.index(h), i)
    }

    fn latest_heard_at(&self, k: usize, i: i64) -> Option<i64> {
        let st = &self.steps[k];
        let n = st.partition_point(|&(at, _)| at <= i);
        (n > 0).then(|| st[n - 1].1)
    }

    fn zeros_upto(&self, i: i64) -> u32 {
        self.zeros[(i.max(0) as usize).min(self.zeros.len() - 1)]
    }

    fn unheard_at(&self, k: usize, i: i64) -> u32 {
        let from = self.latest_heard_at(k, i).unwrap_or(0).max(0);
        self.zeros_upto(i) - self.zeros_upto(from)
    }

    /// `Unheard_h[i]`.
    pub fn unheard(&self, h: PartyId, i: i64) -> u32 {
        self.unheard_at(self.index(h), i)
    }

    /// `LatestHeard_I[i]` over all parties of the series.
    pub fn latest_heard_all(&self, i: i64) -> Option<i64> {
        (0..self.parties.len()).map(|k| self.latest_heard_at(k, i)).min().flatten()
    }

    /// `Unheard_I[i]` over all parties of the series.
    pub fn unheard_all(&self, i: i64) -> u32 {
        (0..self.parties.len()).map(|k| self.unheard_at(k, i)).max().unwrap_or(0)
    }

    /// `Unheard_I[i]` over a subset of the series' parties.
    pub fn unheard_subset(&self, parties: &[PartyId], i: i64) -> u32 {
        parties.iter().map(|&h| self.unheard(h, i)).max().unwrap_or(0)
    }
}

/// `Unheard_I` sampled at `s` and the next `count` renewals after it.
pub fn compressed_unheard(
    series: &UnheardSeries,
    renewals: &[i64],
    s: i64,
    count: usize,
) -> Result<Vec<u32>, CharStringError> {
    compress(|i| series.unheard_all(i), renewals, s, count)
}
