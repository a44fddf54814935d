//! Settlement, common prefix and chain quality on a finished execution,
//! plus the analytic inequalities that must hold whenever they fail.
//!
//! A settlement violation for `(s, k)` happens at slot `i ≥ s + k` when two
//! parties of `I` hold chains with different `[1:s]` prefixes at `i`, or when
//! one party's `[1:s]` prefix at `i` differs from its prefix at `i + 1`.
//! Tips only change at logged slots, so both conditions are evaluated once
//! per stretch of constant tips.

use std::cell::OnceCell;

use serde::Serialize;

use super::{BlockId, ExecutionTrace};
use crate::fork::{margin_prefixes, reach_prefixes, validate_fork, Disjointness};
use crate::leader::{LeaderModel, PartyId};
use crate::stream::{KeyedUniforms, StreamKey};
use crate::tristring::Symbol;
use crate::unheard::UnheardSeries;

/// Stored contradictions per tally; the count keeps going.
const KEEP: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Contradiction {
    pub check: &'static str,
    pub slot: i64,
    pub party: Option<u64>,
    pub detail: String,
}

/// How many instances of each inequality were checked and which failed.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Tally {
    pub checked: u64,
    pub failed: u64,
    pub examples: Vec<Contradiction>,
}

impl Tally {
    fn record(&mut self, ok: bool, c: impl FnOnce() -> Contradiction) {
        self.checked += 1;
        if !ok {
            self.failed += 1;
            if self.examples.len() < KEEP {
                self.examples.push(c());
            }
        }
    }

    pub fn merge(&mut self, other: Tally) {
        self.checked += other.checked;
        self.failed += other.failed;
        for e in other.examples {
            if self.examples.len() < KEEP {
                self.examples.push(e);
            }
        }
    }

    pub fn ok(&self) -> bool {
        self.failed == 0
    }
}

/// Violating slots as inclusive intervals.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Violations {
    pub intervals: Vec<(i64, i64)>,
}

impl Violations {
    fn add(&mut self, a: i64, b: i64) {
        match self.intervals.last_mut() {
            Some(last) if last.1 + 1 >= a => last.1 = last.1.max(b),
            _ => self.intervals.push((a, b)),
        }
    }

    pub fn any(&self) -> bool {
        !self.intervals.is_empty()
    }

    pub fn first(&self) -> Option<i64> {
        self.intervals.first().map(|x| x.0)
    }

    pub fn slots(&self) -> impl Iterator<Item = i64> + '_ {
        self.intervals.iter().flat_map(|&(a, b)| a..=b)
    }

    pub fn count(&self) -> u64 {
        self.intervals.iter().map(|&(a, b)| (b - a + 1) as u64).sum()
    }
}

/// Which blocks count towards chain quality.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityMode {
    Honest,
    Special,
}

/// `Unheard` of `parties` from the scheduled or the actual deliveries of
/// special blocks.
fn unheard_series(trace: &ExecutionTrace, parties: &[PartyId], actual: bool) -> UnheardSeries {
    let cs = trace.char_string();
    let specials: Vec<(i64, BlockId)> = cs
        .positions(Symbol::Honest)
        .into_iter()
        .map(|i| (i as i64, trace.special_block(i as i64).expect("special slot has a block")))
        .collect();
    UnheardSeries::from_arrivals(cs, parties, |h| {
        specials
            .iter()
            .filter_map(|&(i, b)| {
                let r = trace.record(b, h)?;
                let at = if actual { r.actual } else { r.scheduled };
                at.map(|a| (a, i))
            })
            .collect()
    })
}

/// Shared state for checking one execution against one party set.
pub struct Checker<'a> {
    pub trace: &'a ExecutionTrace,
    pub parties: Vec<PartyId>,
    scheduled: UnheardSeries,
    actual: OnceCell<UnheardSeries>,
    reach: Vec<i64>,
    /// Prefix counts of `0`s and `1`s: `ones[i]` over `1..=i`.
    zeros: Vec<i64>,
    ones: Vec<i64>,
}

impl<'a> Checker<'a> {
    pub fn new(trace: &'a ExecutionTrace, parties: &[PartyId]) -> Self {
        let cs = trace.char_string();
        let scheduled = unheard_series(trace, parties, false);
        let mut zeros = vec![0i64; cs.len() + 1];
        let mut ones = vec![0i64; cs.len() + 1];
        for (i, s) in cs.iter() {
            zeros[i] = zeros[i - 1] + i64::from(s == Symbol::Honest);
            ones[i] = ones[i - 1] + i64::from(s == Symbol::Adversarial);
        }
        Checker {
            trace,
            parties: parties.to_vec(),
            scheduled,
            actual: OnceCell::new(),
            reach: reach_prefixes(cs),
            zeros,
            ones,
        }
    }

    pub fn horizon(&self) -> i64 {
        self.trace.horizon
    }

    /// `Unheard_I[i]` under the scheduled delays.
    pub fn unheard(&self, i: i64) -> u32 {
        self.scheduled.unheard_all(i)
    }

    /// `LatestHeard_I[i]` from actual deliveries.
    pub fn latest_heard_actual(&self, i: i64) -> Option<i64> {
        self.actual.get_or_init(|| unheard_series(self.trace, &self.parties, true)).latest_heard_all(i)
    }

    /// Slots `a` from `from` on at which some party's tip may change, with
    /// the end of each stretch.
    fn stretches(&self, from: i64) -> Vec<(i64, i64)> {
        let mut points = vec![from];
        for p in &self.parties {
            points.extend(self.trace.chain_log[p.0 as usize].iter().map(|x| x.0).filter(|&t| t > from));
        }
        points.sort_unstable();
        points.dedup();
        let h = self.horizon();
        points.retain(|&t| t <= h);
        (0..points.len()).map(|j| (points[j], points.get(j + 1).map_or(h, |n| n - 1))).collect()
    }

    /// Settlement violations for `(s, k)`.
    pub fn settlement(&self, s: i64, k: i64) -> Violations {
        let anc = self.trace.tree.ancestor_table(s);
        let mut out = Violations::default();
        let from = s + k;
        if from > self.horizon() {
            return out;
        }
        for (a, b) in self.stretches(from) {
            let prefixes: Vec<BlockId> =
                self.parties.iter().map(|&p| anc[self.trace.tip_at(p, a) as usize]).collect();
            if prefixes.windows(2).any(|w| w[0] != w[1]) {
                out.add(a, b);
                continue;
            }
            if b < self.horizon()
                && self.parties.iter().zip(&prefixes).any(|(&p, &x)| anc[self.trace.tip_at(p, b + 1) as usize] != x)
            {
                out.add(b, b);
            }
        }
        out
    }

    /// At each settlement-violating slot `i`:
    /// `Margin_s(CS[1:i]) + Unheard_I[i] ≥ 0`, and, with
    /// `l = LatestHeard_I[i]`, `Margin_s(O_l(CS[1:i])) ≥ 0`.
    pub fn settlement_lemmas(&self, s: i64, violations: &Violations) -> (Tally, Tally) {
        let cs = self.trace.char_string();
        let margins = margin_prefixes(cs, s.max(1) as usize, Disjointness::AtOrAfter);
        let (mut margin_tally, mut balanced_tally) = (Tally::default(), Tally::default());
        for i in violations.slots() {
            let m = margins[i as usize].margin;
            let u = self.unheard(i) as i64;
            margin_tally.record(m + u >= 0, || Contradiction {
                check: "margin_plus_unheard",
                slot: i,
                party: None,
                detail: format!("s = {s}: margin {m} + unheard {u} < 0"),
            });
            // Margin_s(O_l(w[1:i])) = Margin_s(w[1:l]) + #1(w[l+1:i]).
            let l = self.latest_heard_actual(i).unwrap_or(0).clamp(0, i);
            let observed = margins[l as usize].margin + self.ones[i as usize] - self.ones[l as usize];
            balanced_tally.record(observed >= 0, || Contradiction {
                check: "balanced_fork",
                slot: i,
                party: None,
                detail: format!("s = {s}, l = {l}: observed margin {observed} < 0"),
            });
        }
        (margin_tally, balanced_tally)
    }

    /// Common-prefix violation for `(T, k)`: the first `s ≤ T` whose
    /// settlement fails.
    pub fn common_prefix(&self, t: i64, k: i64) -> Option<i64> {
        (1..=t).find(|&s| self.settlement(s, k).any())
    }

    fn quality_counts(&self, mode: QualityMode) -> Vec<u32> {
        let tree = &self.trace.tree;
        let mut cnt = Vec::with_capacity(tree.len());
        for (id, b) in tree.blocks().iter().enumerate() {
            let q = match mode {
                QualityMode::Honest => b.is_honest(),
                QualityMode::Special => self.trace.is_special(id as BlockId),
            };
            let base = b.parent.map_or(0, |p| cnt[p as usize]);
            cnt.push(base + u32::from(q));
        }
        cnt
    }

    /// Chain-quality violations: a party whose chain holds at most `kfμ`
    /// qualifying blocks in `[s+1, s+k]`, at some `i ≥ s + k`. Returns the
    /// violating `(party, stretch)` pairs.
    pub fn chain_quality(&self, s: i64, k: i64, mu: f64, mode: QualityMode) -> Vec<(PartyId, i64, i64)> {
        let from = s + k;
        if from > self.horizon() {
            return Vec::new();
        }
        let tree = &self.trace.tree;
        let lo = tree.ancestor_table(s);
        let hi = tree.ancestor_table(s + k);
        let cnt = self.quality_counts(mode);
        let threshold = k as f64 * self.trace.f * mu;
        let mut out = Vec::new();
        for &p in &self.parties {
            let log = &self.trace.chain_log[p.0 as usize];
            let mut a = from;
            let mut tip = self.trace.tip_at(p, from);
            let ends = log.iter().filter(|x| x.0 > from && x.0 <= self.horizon()).map(|x| (x.0, x.1));
            for (next, next_tip) in ends.chain(std::iter::once((self.horizon() + 1, 0))) {
                let c = cnt[hi[tip as usize] as usize] - cnt[lo[tip as usize] as usize];
                if (c as f64) <= threshold {
                    match out.last_mut() {
                        Some((q, _, e)) if *q == p && *e + 1 == a => *e = next - 1,
                        _ => out.push((p, a, next - 1)),
                    }
                }
                a = next;
                tip = next_tip;
            }
        }
        out
    }

    /// For each special-mode chain-quality violation `(h, i)`, the slot
    /// `i* = min(i, t - 1)` with `t` the first special block after `s + k`
    /// on `h`'s chain satisfies
    /// `Advantage_s(CS[1:i*]) + Unheard_I[i*] ≥ 0`, where
    /// `Advantage_s(CS[1:i]) = #1 - #0 over CS[s+1:i] + kfμ + Reach[s]`.
    ///
    /// Also counts how often the inequality holds at `i` itself.
    pub fn chain_quality_lemma(&self, s: i64, k: i64, mu: f64, violations: &[(PartyId, i64, i64)]) -> (Tally, u64) {
        let tree = &self.trace.tree;
        let cut = s + k;
        let mut first_special = Vec::with_capacity(tree.len());
        for (id, b) in tree.blocks().iter().enumerate() {
            let inherited = b.parent.and_then(|p| first_special[p as usize]);
            let own = (b.timestamp > cut && self.trace.is_special(id as BlockId)).then_some(b.timestamp);
            first_special.push(inherited.or(own));
        }
        let kfmu = k as f64 * self.trace.f * mu;
        let reach_s = self.reach[s.clamp(0, self.horizon()) as usize];
        let advantage = |i: i64| {
            let (i, s) = (i as usize, s as usize);
            (self.ones[i] - self.ones[s]) as f64 - (self.zeros[i] - self.zeros[s]) as f64 + kfmu + reach_s as f64
        };
        let mut tally = Tally::default();
        let mut holds_at_i = 0;
        for &(p, a, b) in violations {
            for i in a..=b {
                let tip = self.trace.tip_at(p, i);
                let star = first_special[tip as usize].map_or(i, |t| i.min(t - 1));
                let v = advantage(star) + self.unheard(star) as f64;
                tally.record(v >= 0.0, || Contradiction {
                    check: "advantage_plus_unheard",
                    slot: star,
                    party: Some(p.0),
                    detail: format!("s = {s}, violation at {i}: advantage + unheard = {v}"),
                });
                if advantage(i) + self.unheard(i) as f64 >= 0.0 {
                    holds_at_i += 1;
                }
            }
        }
        (tally, holds_at_i)
    }

    /// Execution invariants. `stride > 0` samples slots for the prefix-length
    /// bound; `fork_every > 0` also validates the fork of every
    /// `fork_every`-th slot.
    pub fn invariants(&self, stride: i64, fork_every: i64) -> Tally {
        let trace = self.trace;
        let tree = &trace.tree;
        let cs = trace.char_string();
        let mut t = Tally::default();

        for r in &trace.deliveries {
            let ok = match (r.actual, r.scheduled) {
                (Some(a), Some(s)) => a <= s,
                (Some(_), None) | (None, None) => true,
                (None, Some(s)) => s > trace.horizon,
            };
            t.record(ok, || Contradiction {
                check: "delivery_legality",
                slot: tree.timestamp(r.block),
                party: Some(r.recipient.0),
                detail: format!("{r:?}"),
            });
        }

        for (p, log) in trace.chain_log.iter().enumerate() {
            for w in log.windows(2) {
                t.record(tree.depth(w[1].1) > tree.depth(w[0].1) && w[1].0 > w[0].0, || Contradiction {
                    check: "chain_monotone",
                    slot: w[1].0,
                    party: Some(p as u64),
                    detail: format!("{:?} -> {:?}", w[0], w[1]),
                });
            }
        }

        let specials = cs.positions(Symbol::Honest);
        for w in specials.windows(2) {
            let (a, b) = (trace.special_block(w[0] as i64).unwrap(), trace.special_block(w[1] as i64).unwrap());
            t.record(tree.depth(b) > tree.depth(a), || Contradiction {
                check: "special_depth_growth",
                slot: w[1] as i64,
                party: None,
                detail: format!("depth {} after {}", tree.depth(b), tree.depth(a)),
            });
        }

        // Each special leader heard the previous special block in time.
        let seed = trace.seed;
        for w in specials.windows(2) {
            let (prev, cur) = (w[0] as i64, w[1] as i64);
            let b = trace.special_block(cur).unwrap();
            let leader = match tree.get(b).proposer {
                super::Proposer::Honest { party, .. } => party,
                _ => unreachable!("special blocks are honest"),
            };
            let pb = trace.special_block(prev).unwrap();
            let arrival = match trace.model {
                LeaderModel::Iid { .. } => trace.record(pb, leader).and_then(|r| r.actual),
                LeaderModel::OneTime { .. } => {
                    let mut u = KeyedUniforms::new(StreamKey::delay(seed, prev, 0, leader.0));
                    trace.delay.sample(&mut u).arrival(prev)
                }
            };
            t.record(arrival.is_some_and(|a| a < cur), || Contradiction {
                check: "special_heard_previous",
                slot: cur,
                party: Some(leader.0),
                detail: format!("previous special {prev} arrived at {arrival:?}"),
            });
        }

        // Viability: a party's chain is at least as long as every special
        // block it has received.
        for &i in &specials {
            let b = trace.special_block(i as i64).unwrap();
            for r in trace.records_of(b) {
                if let Some(a) = r.actual {
                    if a <= trace.horizon {
                        let tip = trace.tip_at(r.recipient, a);
                        t.record(tree.depth(tip) >= tree.depth(b), || Contradiction {
                            check: "viability",
                            slot: a,
                            party: Some(r.recipient.0),
                            detail: format!("holds depth {} after hearing special {i}", tree.depth(tip)),
                        });
                    }
                }
            }
        }

        // |C^h_i[1:s]| ≤ |C*_s| + Reach[s] on a grid of (s, i).
        if stride > 0 {
            let h = trace.horizon;
            let mut s = stride.min(h);
            while s <= h {
                let anc = tree.ancestor_table(s);
                let bound = trace.special_depth_upto(s) as i64 + self.reach[s as usize];
                let mut i = s;
                while i <= h {
                    for &p in &self.parties {
                        let len = tree.depth(anc[trace.tip_at(p, i) as usize]) as i64;
                        t.record(len <= bound, || Contradiction {
                            check: "prefix_length",
                            slot: i,
                            party: Some(p.0),
                            detail: format!("s = {s}: |C[1:s]| = {len} > {bound}"),
                        });
                    }
                    i += stride;
                }
                s += stride;
            }
        }

        if fork_every > 0 {
            let mut i = fork_every.min(trace.horizon);
            while i <= trace.horizon {
                let (fork, _) = trace.snapshot(i);
                let res = validate_fork(&fork, &cs.prefix(i as usize));
                t.record(res.is_ok(), || Contradiction {
                    check: "fork_valid",
                    slot: i,
                    party: None,
                    detail: format!("{res:?}"),
                });
                i += fork_every;
            }
        }
        t
    }
}
