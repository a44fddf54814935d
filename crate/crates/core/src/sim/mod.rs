//! Event-driven simulation of the longest-chain protocol.
//!
//! Only slots where something happens are visited: non-empty slots,
//! scheduled deliveries and adversary wakeups. Every honest message delay is
//! read from the keyed stream of `(slot, ordinal, recipient)`, which is the
//! same stream the characteristic string reads, so the string built after
//! the run describes exactly this execution.
//!
//! Each visited slot runs: leader election, honest send, adversary action,
//! delivery, adoption. Parties adopt strictly longer chains only; ties among
//! the longest received chains go to the adversary's tie-break.

pub mod adversary;
pub mod checks;

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::charstring::{build_from_leaders, CharStringBuild, CharStringError, DEFAULT_NEGATIVE_CUTOFF};
use crate::delay::DelayDistribution;
use crate::fork::Fork;
use crate::leader::{LeaderConfig, LeaderModel, LeaderSchedule, PartyId, SlotLeaders};
use crate::stream::{KeyedUniforms, StreamKey};
use crate::tristring::Symbol;

pub use adversary::{
    Adversary, AdversaryAction, AdversaryView, BlockRef, MaxDelayBalance, NewBlock, NullAdversary, PrivateChain,
    Recipients, Send,
};

pub type BlockId = u32;
pub const GENESIS: BlockId = 0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Proposer {
    Genesis,
    Honest { party: PartyId, ordinal: u32 },
    Adversary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Block {
    pub parent: Option<BlockId>,
    pub timestamp: i64,
    pub depth: u32,
    pub proposer: Proposer,
    /// Slot in which the block was made.
    pub created: i64,
}

impl Block {
    pub fn is_honest(&self) -> bool {
        matches!(self.proposer, Proposer::Honest { .. })
    }
}

/// Append-only block tree; ids increase with creation, so every parent has
/// a smaller id than its children.
#[derive(Clone, Debug)]
pub struct BlockTree {
    blocks: Vec<Block>,
}

impl Default for BlockTree {
    fn default() -> Self {
        Self::new()
    }
}

impl BlockTree {
    pub fn new() -> Self {
        BlockTree {
            blocks: vec![Block { parent: None, timestamp: 0, depth: 0, proposer: Proposer::Genesis, created: 0 }],
        }
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn get(&self, b: BlockId) -> &Block {
        &self.blocks[b as usize]
    }

    pub fn depth(&self, b: BlockId) -> u32 {
        self.get(b).depth
    }

    pub fn timestamp(&self, b: BlockId) -> i64 {
        self.get(b).timestamp
    }

    fn push(&mut self, parent: BlockId, timestamp: i64, proposer: Proposer, created: i64) -> BlockId {
        let depth = self.depth(parent) + 1;
        self.blocks.push(Block { parent: Some(parent), timestamp, depth, proposer, created });
        (self.blocks.len() - 1) as BlockId
    }

    /// The last block of `b`'s chain with timestamp at most `slot`.
    pub fn ancestor_at_or_before(&self, mut b: BlockId, slot: i64) -> BlockId {
        while self.timestamp(b) > slot {
            b = self.get(b).parent.expect("genesis has timestamp 0");
        }
        b
    }

    /// `anc[b]` = the last block of `b`'s chain with timestamp at most `slot`.
    pub fn ancestor_table(&self, slot: i64) -> Vec<BlockId> {
        let mut anc = Vec::with_capacity(self.blocks.len());
        for (id, b) in self.blocks.iter().enumerate() {
            let a = match b.parent {
                _ if b.timestamp <= slot => id as BlockId,
                Some(p) => anc[p as usize],
                None => id as BlockId,
            };
            anc.push(a);
        }
        anc
    }

    /// Genesis to `b`, inclusive.
    pub fn chain(&self, mut b: BlockId) -> Vec<BlockId> {
        let mut out = vec![b];
        while let Some(p) = self.get(b).parent {
            out.push(p);
            b = p;
        }
        out.reverse();
        out
    }

    pub fn is_ancestor(&self, a: BlockId, mut b: BlockId) -> bool {
        let d = self.depth(a);
        while self.depth(b) > d {
            b = self.get(b).parent.expect("non-genesis");
        }
        a == b
    }
}

/// One honest block sent to one tracked party.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct DeliveryRecord {
    pub block: BlockId,
    pub recipient: PartyId,
    /// Slot the delay stream schedules; `None` if never. For a leader's own
    /// block this is the virtual self-delay.
    pub scheduled: Option<i64>,
    pub actual: Option<i64>,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    CharString(#[from] CharStringError),
    #[error("illegal adversary action at slot {slot}: {reason}")]
    IllegalAction { slot: i64, reason: String },
    #[error("horizon must be positive, got {0}")]
    BadHorizon(i64),
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub leaders: LeaderConfig,
    pub delay: DelayDistribution,
    pub horizon: i64,
    pub negative_cutoff: usize,
}

impl SimConfig {
    pub fn new(leaders: LeaderConfig, delay: DelayDistribution, horizon: i64) -> Self {
        SimConfig { leaders, delay, horizon, negative_cutoff: DEFAULT_NEGATIVE_CUTOFF }
    }
}

/// Everything recorded about one execution.
#[derive(Clone, Debug)]
pub struct ExecutionTrace {
    pub seed: u64,
    pub horizon: i64,
    pub model: LeaderModel,
    pub f: f64,
    pub delay: DelayDistribution,
    pub build: CharStringBuild,
    pub tree: BlockTree,
    /// Tracked parties are `PartyId(0..n)`.
    pub parties: usize,
    /// Per tracked party: `(slot, tip)` whenever the held chain changes,
    /// starting with `(0, GENESIS)`.
    pub chain_log: Vec<Vec<(i64, BlockId)>>,
    pub deliveries: Vec<DeliveryRecord>,
    /// Deliveries made before their scheduled slot.
    pub early_deliveries: usize,
    /// `special_block[i]` for special slots `i` of the characteristic string.
    special_block: Vec<Option<BlockId>>,
    is_special: Vec<bool>,
    /// Record indices of honest blocks, grouped by block.
    records_by_block: Vec<(u32, u32)>,
}

impl ExecutionTrace {
    pub fn char_string(&self) -> &crate::tristring::TriString {
        &self.build.char_string
    }

    pub fn party_ids(&self) -> Vec<PartyId> {
        (0..self.parties as u64).map(PartyId).collect()
    }

    /// Tip held by `party` at the end of `slot`.
    pub fn tip_at(&self, party: PartyId, slot: i64) -> BlockId {
        let log = &self.chain_log[party.0 as usize];
        let n = log.partition_point(|&(t, _)| t <= slot);
        log[n.max(1) - 1].1
    }

    pub fn special_block(&self, slot: i64) -> Option<BlockId> {
        if slot < 1 || slot as usize >= self.special_block.len() {
            return None;
        }
        self.special_block[slot as usize]
    }

    pub fn is_special(&self, b: BlockId) -> bool {
        self.is_special[b as usize]
    }

    /// Deliveries of honest block `b`.
    pub fn records_of(&self, b: BlockId) -> &[DeliveryRecord] {
        let (lo, hi) = self.records_by_block[b as usize];
        &self.deliveries[lo as usize..hi as usize]
    }

    /// The record of `b` to `to`, if `b` is honest and `to` tracked.
    pub fn record(&self, b: BlockId, to: PartyId) -> Option<&DeliveryRecord> {
        self.records_of(b).iter().find(|r| r.recipient == to)
    }

    /// Depth of `C*_s`: the special block of the last special slot at or
    /// before `s`, or genesis.
    pub fn special_depth_upto(&self, s: i64) -> u32 {
        let hi = (s.max(0) as usize).min(self.special_block.len().saturating_sub(1));
        (1..=hi).rev().find_map(|i| self.special_block[i]).map_or(0, |b| self.tree.depth(b))
    }

    /// The fork of all blocks with timestamp at most `i` made by the end of
    /// slot `i`, with the block id of each vertex.
    pub fn snapshot(&self, i: i64) -> (Fork, Vec<BlockId>) {
        let mut fork = Fork::trivial();
        let mut vertex = vec![usize::MAX; self.tree.len()];
        vertex[0] = 0;
        let mut ids = vec![GENESIS];
        for (id, b) in self.tree.blocks().iter().enumerate().skip(1) {
            if b.timestamp > i || b.created > i {
                continue;
            }
            let p = vertex[b.parent.expect("non-genesis") as usize];
            if p == usize::MAX {
                continue;
            }
            vertex[id] = fork.add(p, b.timestamp as usize);
            ids.push(id as BlockId);
        }
        (fork, ids)
    }
}

struct Engine<'a, A: Adversary + ?Sized> {
    cfg: &'a SimConfig,
    seed: u64,
    adversary: &'a mut A,
    tree: BlockTree,
    tracked: usize,
    tips: Vec<BlockId>,
    chain_log: Vec<Vec<(i64, BlockId)>>,
    records: Vec<DeliveryRecord>,
    records_by_block: Vec<(u32, u32)>,
    heap: BinaryHeap<Reverse<(i64, u32)>>,
    early: usize,
    adversary_slots: Vec<i64>,
    leaders: Vec<SlotLeaders>,
    /// Honest broadcasts in order with running maximum depth.
    broadcasts: Vec<(BlockId, u32)>,
    /// Adversarial broadcasts to everyone: `(slot, block)` with running
    /// maximum depth.
    adversary_broadcasts: Vec<(i64, BlockId, u32)>,
}

impl<A: Adversary + ?Sized> Engine<'_, A> {
    fn delay_to(&self, slot: i64, ordinal: u32, to: PartyId) -> Option<i64> {
        let mut u = KeyedUniforms::new(StreamKey::delay(self.seed, slot, ordinal as u64, to.0));
        self.cfg.delay.sample(&mut u).arrival(slot)
    }

    fn set_tip(&mut self, p: usize, b: BlockId, slot: i64) {
        self.tips[p] = b;
        let log = &mut self.chain_log[p];
        match log.last_mut() {
            Some(last) if last.0 == slot => last.1 = b,
            _ => log.push((slot, b)),
        }
    }

    /// Chain held by a one-time miner elected at `t`: the longest chain
    /// delivered by `t - 1`, ties to the earliest delivery.
    fn miner_parent(&self, miner: PartyId, t: i64) -> BlockId {
        // (depth, arrival, tie order, block)
        let mut best: (u32, i64, usize, BlockId) = (0, 0, 0, GENESIS);
        let better = |cand: (u32, i64, usize, BlockId), best: (u32, i64, usize, BlockId)| {
            cand.0 > best.0 || (cand.0 == best.0 && (cand.1, cand.2) < (best.1, best.2))
        };
        for (idx, &(b, max_depth)) in self.broadcasts.iter().enumerate().rev() {
            if max_depth < best.0 {
                break;
            }
            let blk = self.tree.get(b);
            if blk.depth < best.0 {
                continue;
            }
            let ordinal = match blk.proposer {
                Proposer::Honest { ordinal, .. } => ordinal,
                _ => unreachable!("honest broadcast"),
            };
            if let Some(a) = self.delay_to(blk.timestamp, ordinal, miner) {
                let cand = (blk.depth, a, idx + 1, b);
                if a < t && better(cand, best) {
                    best = cand;
                }
            }
        }
        let off = self.broadcasts.len() + 1;
        for (idx, &(slot, b, max_depth)) in self.adversary_broadcasts.iter().enumerate().rev() {
            if max_depth < best.0 {
                break;
            }
            let cand = (self.tree.depth(b), slot, off + idx, b);
            if slot < t && better(cand, best) {
                best = cand;
            }
        }
        best.3
    }

    fn honest_send(&mut self, t: i64, leaders: &SlotLeaders, new_honest: &mut Vec<BlockId>) {
        for (ordinal, &h) in leaders.honest.iter().enumerate() {
            let ordinal = ordinal as u32;
            let parent = match self.cfg.leaders.model {
                LeaderModel::Iid { .. } => self.tips[h.0 as usize],
                LeaderModel::OneTime { .. } => self.miner_parent(h, t),
            };
            let b = self.tree.push(parent, t, Proposer::Honest { party: h, ordinal }, t);
            new_honest.push(b);
            let running = self.broadcasts.last().map_or(0, |x| x.1).max(self.tree.depth(b));
            self.broadcasts.push((b, running));
            let lo = self.records.len() as u32;
            for r in 0..self.tracked {
                let to = PartyId(r as u64);
                let scheduled = self.delay_to(t, ordinal, to);
                let idx = self.records.len() as u32;
                if to == h {
                    self.records.push(DeliveryRecord { block: b, recipient: to, scheduled, actual: Some(t) });
                    continue;
                }
                self.records.push(DeliveryRecord { block: b, recipient: to, scheduled, actual: None });
                if let Some(a) = scheduled {
                    self.heap.push(Reverse((a, idx)));
                }
            }
            self.records_by_block.resize(self.tree.len(), (0, 0));
            self.records_by_block[b as usize] = (lo, self.records.len() as u32);
            if (h.0 as usize) < self.tracked && matches!(self.cfg.leaders.model, LeaderModel::Iid { .. }) {
                self.set_tip(h.0 as usize, b, t);
            }
        }
    }

    fn illegal(&self, slot: i64, reason: impl Into<String>) -> SimError {
        SimError::IllegalAction { slot, reason: reason.into() }
    }

    /// Validates and applies an action; returns the adversarial deliveries.
    fn apply(&mut self, t: i64, action: AdversaryAction, inbox: &mut [Vec<BlockId>]) -> Result<(), SimError> {
        let mut made: Vec<BlockId> = Vec::with_capacity(action.blocks.len());
        for nb in &action.blocks {
            let parent = self.resolve(t, nb.parent, &made)?;
            if self.adversary_slots.binary_search(&nb.timestamp).is_err() {
                return Err(self.illegal(t, format!("timestamp {} is not an adversarial slot", nb.timestamp)));
            }
            if nb.timestamp > t {
                return Err(self.illegal(t, format!("timestamp {} lies in the future", nb.timestamp)));
            }
            if self.tree.timestamp(parent) >= nb.timestamp {
                return Err(self.illegal(t, "timestamps must increase along a chain"));
            }
            made.push(self.tree.push(parent, nb.timestamp, Proposer::Adversary, t));
        }
        self.records_by_block.resize(self.tree.len(), (0, 0));
        for &idx in &action.accelerate {
            let rec = *self.records.get(idx).ok_or_else(|| self.illegal(t, format!("no delivery record {idx}")))?;
            if rec.actual.is_none() {
                self.records[idx].actual = Some(t);
                self.early += 1;
                inbox[rec.recipient.0 as usize].push(rec.block);
            }
        }
        for send in &action.sends {
            let b = self.resolve(t, send.block, &made)?;
            if self.tree.get(b).created > t {
                return Err(self.illegal(t, "block does not exist yet"));
            }
            let mut deliver = |this: &mut Self, p: usize| {
                if this.tree.get(b).is_honest() {
                    let (lo, hi) = this.records_by_block[b as usize];
                    for i in lo..hi {
                        let r = this.records[i as usize];
                        if r.recipient.0 as usize == p && r.actual.is_none() {
                            this.records[i as usize].actual = Some(t);
                            this.early += 1;
                        }
                    }
                }
                inbox[p].push(b);
            };
            match &send.to {
                Recipients::All => {
                    for p in 0..self.tracked {
                        deliver(self, p);
                    }
                    let running = self.adversary_broadcasts.last().map_or(0, |x| x.2).max(self.tree.depth(b));
                    self.adversary_broadcasts.push((t, b, running));
                }
                Recipients::Parties(ps) => {
                    for p in ps {
                        if p.0 as usize >= self.tracked {
                            return Err(self.illegal(t, format!("party {} is not tracked", p.0)));
                        }
                        deliver(self, p.0 as usize);
                    }
                }
            }
        }
        Ok(())
    }

    fn resolve(&self, t: i64, r: BlockRef, made: &[BlockId]) -> Result<BlockId, SimError> {
        match r {
            BlockRef::Existing(b) if (b as usize) < self.tree.len() => Ok(b),
            BlockRef::New(i) if i < made.len() => Ok(made[i]),
            _ => Err(self.illegal(t, format!("unknown block {r:?}"))),
        }
    }

    fn adopt(&mut self, t: i64, inbox: &mut [Vec<BlockId>]) {
        let mut ties: Vec<BlockId> = Vec::new();
        for p in 0..self.tracked {
            if inbox[p].is_empty() {
                continue;
            }
            let cur = self.tree.depth(self.tips[p]);
            let best = inbox[p].iter().map(|&b| self.tree.depth(b)).max().expect("non-empty");
            if best > cur {
                ties.clear();
                for &b in &inbox[p] {
                    if self.tree.depth(b) == best && !ties.contains(&b) {
                        ties.push(b);
                    }
                }
                let pick = if ties.len() == 1 {
                    0
                } else {
                    self.adversary.tie_break(PartyId(p as u64), &ties, &self.tree).min(ties.len() - 1)
                };
                self.set_tip(p, ties[pick], t);
            }
            inbox[p].clear();
        }
    }

    fn run(mut self) -> Result<ExecutionTrace, SimError> {
        let horizon = self.cfg.horizon;
        let mut schedule = LeaderSchedule::new(&self.cfg.leaders, self.seed);
        let mut next = schedule.next_nonempty();
        let mut inbox: Vec<Vec<BlockId>> = vec![Vec::new(); self.tracked];
        let mut due: Vec<(PartyId, BlockId)> = Vec::new();
        let mut new_honest: Vec<BlockId> = Vec::new();
        let mut current = 0i64;
        let empty = |slot| SlotLeaders { slot, honest: Vec::new(), adversary: false };
        loop {
            let mut t = next.slot;
            if let Some(&Reverse((a, _))) = self.heap.peek() {
                t = t.min(a);
            }
            if let Some(w) = self.adversary.next_wakeup(current) {
                t = t.min(w.max(current + 1));
            }
            if t > horizon {
                break;
            }
            current = t;
            let leaders = if next.slot == t {
                let l = std::mem::replace(&mut next, schedule.next_nonempty());
                self.leaders.push(l.clone());
                l
            } else {
                empty(t)
            };
            if leaders.adversary {
                self.adversary_slots.push(t);
            }
            new_honest.clear();
            self.honest_send(t, &leaders, &mut new_honest);

            due.clear();
            while let Some(&Reverse((a, idx))) = self.heap.peek() {
                if a > t {
                    break;
                }
                self.heap.pop();
                let rec = &mut self.records[idx as usize];
                if rec.actual.is_none() {
                    rec.actual = Some(t);
                    due.push((rec.recipient, rec.block));
                    inbox[rec.recipient.0 as usize].push(rec.block);
                }
            }

            let view = AdversaryView {
                slot: t,
                horizon,
                leaders: &leaders,
                tree: &self.tree,
                tips: &self.tips,
                new_honest: &new_honest,
                due: &due,
                records: &self.records,
                adversary_slots: &self.adversary_slots,
            };
            let action = self.adversary.act(&view);
            self.apply(t, action, &mut inbox)?;
            self.adopt(t, &mut inbox);
        }

        let build = build_from_leaders(
            &self.cfg.leaders,
            &self.cfg.delay,
            self.leaders,
            horizon as usize,
            self.seed,
            self.cfg.negative_cutoff,
        )?;
        let mut special_block = vec![None; horizon as usize + 1];
        let mut is_special = vec![false; self.tree.len()];
        for (id, b) in self.tree.blocks().iter().enumerate() {
            if b.is_honest() && build.char_string.get(b.timestamp as usize) == Symbol::Honest {
                special_block[b.timestamp as usize] = Some(id as BlockId);
                is_special[id] = true;
            }
        }
        self.records_by_block.resize(self.tree.len(), (0, 0));
        Ok(ExecutionTrace {
            seed: self.seed,
            horizon,
            model: self.cfg.leaders.model,
            f: self.cfg.leaders.params().f,
            delay: self.cfg.delay.clone(),
            build,
            tree: self.tree,
            parties: self.tracked,
            chain_log: self.chain_log,
            deliveries: self.records,
            early_deliveries: self.early,
            special_block,
            is_special,
            records_by_block: self.records_by_block,
        })
    }
}

/// Runs one execution against `adversary`.
pub fn run_execution<A: Adversary + ?Sized>(
    cfg: &SimConfig,
    adversary: &mut A,
    seed: u64,
) -> Result<ExecutionTrace, SimError> {
    if cfg.horizon < 1 {
        return Err(SimError::BadHorizon(cfg.horizon));
    }
    crate::charstring::check_law(cfg.leaders.model, &cfg.delay)?;
    let tracked = cfg.leaders.tracked_parties() as usize;
    let engine = Engine {
        cfg,
        seed,
        adversary,
        tree: BlockTree::new(),
        tracked,
        tips: vec![GENESIS; tracked],
        chain_log: vec![vec![(0, GENESIS)]; tracked],
        records: Vec::new(),
        records_by_block: vec![(0, 0)],
        heap: BinaryHeap::new(),
        early: 0,
        adversary_slots: Vec::new(),
        leaders: Vec::new(),
        broadcasts: Vec::new(),
        adversary_broadcasts: Vec::new(),
    };
    engine.run()
}
