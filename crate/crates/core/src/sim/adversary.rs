//! Adversary interface and reference policies.

use super::{BlockId, BlockTree, DeliveryRecord, GENESIS};
use crate::leader::{PartyId, SlotLeaders};

/// What the adversary sees in a slot, after honest leaders have sent and
/// before anything is delivered.
pub struct AdversaryView<'a> {
    pub slot: i64,
    pub horizon: i64,
    pub leaders: &'a SlotLeaders,
    pub tree: &'a BlockTree,
    /// Chains held by tracked parties, including blocks their own leaders
    /// just made.
    pub tips: &'a [BlockId],
    pub new_honest: &'a [BlockId],
    /// Honest blocks whose scheduled delivery is this slot.
    pub due: &'a [(PartyId, BlockId)],
    pub records: &'a [DeliveryRecord],
    /// Every adversarial slot so far, increasing.
    pub adversary_slots: &'a [i64],
}

impl AdversaryView<'_> {
    /// Adversarial slots in `(after, upto]`.
    pub fn adversary_slots_in(&self, after: i64, upto: i64) -> &[i64] {
        let lo = self.adversary_slots.partition_point(|&x| x <= after);
        let hi = self.adversary_slots.partition_point(|&x| x <= upto);
        &self.adversary_slots[lo..hi.max(lo)]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockRef {
    Existing(BlockId),
    /// The `i`-th block created by the same action.
    New(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NewBlock {
    pub parent: BlockRef,
    pub timestamp: i64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Recipients {
    All,
    Parties(Vec<PartyId>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Send {
    pub block: BlockRef,
    pub to: Recipients,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AdversaryAction {
    pub blocks: Vec<NewBlock>,
    pub sends: Vec<Send>,
    /// Indices into `records` to deliver now.
    pub accelerate: Vec<usize>,
}

pub trait Adversary {
    fn act(&mut self, view: &AdversaryView) -> AdversaryAction;

    /// Picks among equally long chains newly offered to `party`.
    fn tie_break(&mut self, _party: PartyId, _candidates: &[BlockId], _tree: &BlockTree) -> usize {
        0
    }

    /// Earliest slot after `current` at which the policy wants to act even
    /// if nothing else happens.
    fn next_wakeup(&self, _current: i64) -> Option<i64> {
        None
    }

    fn name(&self) -> &'static str;
}

/// Mines nothing and sends nothing.
#[derive(Clone, Copy, Debug, Default)]
pub struct NullAdversary;

impl Adversary for NullAdversary {
    fn act(&mut self, _view: &AdversaryView) -> AdversaryAction {
        AdversaryAction::default()
    }

    fn name(&self) -> &'static str {
        "null"
    }
}

/// `anc_{≤s}` for every block, extended as the tree grows.
#[derive(Clone, Debug)]
struct AncestorCache {
    s: i64,
    anc: Vec<BlockId>,
}

impl AncestorCache {
    fn new(s: i64) -> Self {
        AncestorCache { s, anc: Vec::new() }
    }

    fn update(&mut self, tree: &BlockTree) {
        for id in self.anc.len()..tree.len() {
            let b = tree.get(id as BlockId);
            let a = match b.parent {
                _ if b.timestamp <= self.s => id as BlockId,
                Some(p) => self.anc[p as usize],
                None => id as BlockId,
            };
            self.anc.push(a);
        }
    }

    fn get(&self, b: BlockId) -> BlockId {
        self.anc[b as usize]
    }
}

/// Best root for a chain whose `[1:s]` prefix differs from the one ending
/// in `x`: a strict ancestor of `x`, or `x` itself when an adversarial slot
/// in `(ts(x), s]` can be used. Returns `(root, reachable length by t)`.
fn best_root(view: &AdversaryView, x: BlockId, s: i64, t: i64) -> Option<(BlockId, u32)> {
    let tree = view.tree;
    let mut best: Option<(BlockId, u32)> = None;
    let mut consider = |r: BlockId| {
        let len = tree.depth(r) + view.adversary_slots_in(tree.timestamp(r), t).len() as u32;
        if best.is_none_or(|(_, l)| len > l) {
            best = Some((r, len));
        }
    };
    if !view.adversary_slots_in(tree.timestamp(x), s).is_empty() {
        consider(x);
    }
    let mut cur = tree.get(x).parent;
    while let Some(r) = cur {
        consider(r);
        cur = tree.get(r).parent;
    }
    best
}

/// Chain of `need` new blocks on `root` using the earliest adversarial slots
/// after it; `None` if there are not enough of them up to `t`.
fn extension(view: &AdversaryView, root: BlockId, need: usize, t: i64) -> Option<Vec<i64>> {
    let slots = view.adversary_slots_in(view.tree.timestamp(root), t);
    (slots.len() >= need).then(|| slots[..need].to_vec())
}

fn chain_action(root: BlockId, stamps: &[i64]) -> (Vec<NewBlock>, BlockRef) {
    let mut blocks = Vec::with_capacity(stamps.len());
    for (i, &ts) in stamps.iter().enumerate() {
        let parent = if i == 0 { BlockRef::Existing(root) } else { BlockRef::New(i - 1) };
        blocks.push(NewBlock { parent, timestamp: ts });
    }
    let tip = if stamps.is_empty() { BlockRef::Existing(root) } else { BlockRef::New(stamps.len() - 1) };
    (blocks, tip)
}

/// Withholds a private chain that avoids the targets' `[1:s]` prefix and
/// releases it once, after slot `s + k`, as soon as it is strictly longer
/// than every chain the targets hold or are about to receive.
#[derive(Clone, Debug)]
pub struct PrivateChain {
    s: i64,
    k: i64,
    targets: Vec<PartyId>,
    cache: AncestorCache,
    released: bool,
}

impl PrivateChain {
    pub fn new(s: i64, k: i64, targets: Vec<PartyId>) -> Self {
        PrivateChain { s, k, targets, cache: AncestorCache::new(s), released: false }
    }

    pub fn released(&self) -> bool {
        self.released
    }
}

impl Adversary for PrivateChain {
    fn act(&mut self, view: &AdversaryView) -> AdversaryAction {
        let t = view.slot;
        if self.released || t <= self.s + self.k || self.targets.is_empty() {
            return AdversaryAction::default();
        }
        self.cache.update(view.tree);
        let tips: Vec<BlockId> = self.targets.iter().map(|p| view.tips[p.0 as usize]).collect();
        let longest = *tips.iter().max_by_key(|&&b| (view.tree.depth(b), std::cmp::Reverse(b))).expect("non-empty");
        let mut need = tips.iter().map(|&b| view.tree.depth(b) + 1).max().unwrap_or(1);
        for &(p, b) in view.due {
            if self.targets.contains(&p) {
                need = need.max(view.tree.depth(b));
            }
        }
        let x = self.cache.get(longest);
        let Some((root, len)) = best_root(view, x, self.s, t) else {
            return AdversaryAction::default();
        };
        if len < need {
            return AdversaryAction::default();
        }
        let add = (need - view.tree.depth(root)) as usize;
        let stamps = extension(view, root, add, t).expect("length counted from the same slots");
        let (blocks, tip) = chain_action(root, &stamps);
        self.released = true;
        AdversaryAction {
            blocks,
            sends: vec![Send { block: tip, to: Recipients::Parties(self.targets.clone()) }],
            accelerate: Vec::new(),
        }
    }

    fn tie_break(&mut self, _party: PartyId, candidates: &[BlockId], tree: &BlockTree) -> usize {
        candidates.iter().position(|&b| !tree.get(b).is_honest()).unwrap_or(0)
    }

    fn next_wakeup(&self, current: i64) -> Option<i64> {
        (!self.released && current < self.s + self.k + 1).then_some(self.s + self.k + 1)
    }

    fn name(&self) -> &'static str {
        "private_chain"
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Side {
    A,
    B,
}

/// Keeps two halves of the tracked parties on chains that disagree on the
/// `[1:s]` prefix for as long as adversarial slots allow.
///
/// Half A stays on the honest chain through `anc_{≤s}` of the longest tip;
/// half B is moved to an adversarial branch from a strict ancestor. When a
/// delivery would pull members of one half onto the other branch, that
/// branch is extended just enough to keep them, using the earliest unused
/// adversarial slots. Ties go to each half's own branch. Deliveries are
/// never accelerated.
#[derive(Clone, Debug)]
pub struct MaxDelayBalance {
    s: i64,
    half_a: Vec<PartyId>,
    half_b: Vec<PartyId>,
    tracked: usize,
    cache: AncestorCache,
    /// Branch of every block, once split: `None` outside both branches.
    side: Vec<Option<Side>>,
    heads: Option<(BlockId, BlockId)>,
    best: [BlockId; 2],
}

impl MaxDelayBalance {
    pub fn new(s: i64, tracked: usize) -> Self {
        let all: Vec<PartyId> = (0..tracked as u64).map(PartyId).collect();
        let (a, b) = all.split_at(tracked.div_ceil(2));
        MaxDelayBalance {
            s,
            half_a: a.to_vec(),
            half_b: b.to_vec(),
            tracked,
            cache: AncestorCache::new(s),
            side: Vec::new(),
            heads: None,
            best: [GENESIS; 2],
        }
    }

    fn half_of(&self, p: PartyId) -> Side {
        if (p.0 as usize) < self.half_a.len() {
            Side::A
        } else {
            Side::B
        }
    }

    fn label(&mut self, tree: &BlockTree) {
        let Some((a, b)) = self.heads else { return };
        for id in self.side.len()..tree.len() {
            let blk = tree.get(id as BlockId);
            let s = if id as BlockId == a {
                Some(Side::A)
            } else if id as BlockId == b {
                Some(Side::B)
            } else {
                blk.parent.and_then(|p| self.side.get(p as usize).copied().flatten())
            };
            self.side.push(s);
            if let Some(side) = s {
                let slot = &mut self.best[side as usize];
                if blk.depth > tree.depth(*slot) {
                    *slot = id as BlockId;
                }
            }
        }
    }

    fn side_of(&self, b: BlockId) -> Option<Side> {
        self.side.get(b as usize).copied().flatten()
    }

    fn try_split(&mut self, view: &AdversaryView) -> AdversaryAction {
        let t = view.slot;
        self.cache.update(view.tree);
        if self.half_b.is_empty() {
            return AdversaryAction::default();
        }
        let longest = (0..self.tracked).map(|p| view.tips[p]).max_by_key(|&b| view.tree.depth(b)).expect("tracked");
        let x = self.cache.get(longest);
        let Some((root, len)) = best_root(view, x, self.s, t) else {
            return AdversaryAction::default();
        };
        let mut need = 1;
        for p in &self.half_b {
            need = need.max(view.tree.depth(view.tips[p.0 as usize]) + 1);
        }
        for &(p, b) in view.due {
            if self.half_of(p) == Side::B {
                need = need.max(view.tree.depth(b));
            }
        }
        if len < need {
            return AdversaryAction::default();
        }
        let add = (need - view.tree.depth(root)) as usize;
        if add == 0 {
            return AdversaryAction::default();
        }
        let stamps = extension(view, root, add, t).expect("counted");
        let (blocks, tip) = chain_action(root, &stamps);
        // The first new block heads branch B; it gets the next id.
        let b_head = view.tree.len() as BlockId;
        self.heads = Some((x, b_head));
        self.side = vec![None; view.tree.len()];
        self.side[x as usize] = Some(Side::A);
        self.best = [x, x];
        // Re-label everything already made on top of x.
        for id in (x as usize + 1)..view.tree.len() {
            if let Some(p) = view.tree.get(id as BlockId).parent {
                if self.side[p as usize] == Some(Side::A) {
                    self.side[id] = Some(Side::A);
                    if view.tree.depth(id as BlockId) > view.tree.depth(self.best[0]) {
                        self.best[0] = id as BlockId;
                    }
                }
            }
        }
        self.best[1] = b_head;
        AdversaryAction { blocks, sends: vec![Send { block: tip, to: Recipients::Parties(self.half_b.clone()) }], accelerate: Vec::new() }
    }

    fn defend(&mut self, view: &AdversaryView) -> AdversaryAction {
        let t = view.slot;
        self.label(view.tree);
        let mut action = AdversaryAction::default();
        for side in [Side::A, Side::B] {
            let members = if side == Side::A { &self.half_a } else { &self.half_b };
            let mut need = 0u32;
            let mut threatened = Vec::new();
            for &m in members {
                let tip = view.tips[m.0 as usize];
                if self.side_of(tip) != Some(side) {
                    continue;
                }
                let (mut own, mut other) = (view.tree.depth(tip), 0u32);
                for &(p, b) in view.due.iter().filter(|d| d.0 == m) {
                    if self.side_of(b) == Some(side) {
                        own = own.max(view.tree.depth(b));
                    } else {
                        other = other.max(view.tree.depth(b));
                    }
                    let _ = p;
                }
                if other > own {
                    threatened.push(m);
                    need = need.max(other);
                }
            }
            if threatened.is_empty() {
                continue;
            }
            let top = self.best[side as usize];
            let have = view.tree.depth(top);
            let mut add = need.saturating_sub(have) as usize;
            if add == 0 && view.tree.get(top).is_honest() {
                // Forwarding an honest block would deliver it early.
                add = 1;
            }
            let Some(stamps) = extension(view, top, add, t) else { continue };
            let base = action.blocks.len();
            for (i, &ts) in stamps.iter().enumerate() {
                let parent = if i == 0 { BlockRef::Existing(top) } else { BlockRef::New(base + i - 1) };
                action.blocks.push(NewBlock { parent, timestamp: ts });
            }
            let tip = if stamps.is_empty() { BlockRef::Existing(top) } else { BlockRef::New(action.blocks.len() - 1) };
            action.sends.push(Send { block: tip, to: Recipients::Parties(threatened) });
        }
        action
    }
}

impl Adversary for MaxDelayBalance {
    fn act(&mut self, view: &AdversaryView) -> AdversaryAction {
        if view.slot <= self.s {
            return AdversaryAction::default();
        }
        if self.heads.is_some() {
            self.label(view.tree);
            let split = [Side::A, Side::B].iter().all(|&side| {
                (0..self.tracked).any(|p| self.side_of(view.tips[p]) == Some(side))
            });
            if split {
                return self.defend(view);
            }
            self.heads = None;
        }
        self.try_split(view)
    }

    fn tie_break(&mut self, party: PartyId, candidates: &[BlockId], tree: &BlockTree) -> usize {
        self.label(tree);
        let own = self.half_of(party);
        candidates.iter().position(|&b| self.side_of(b) == Some(own)).unwrap_or(0)
    }

    fn name(&self) -> &'static str {
        "max_delay_balance"
    }
}
