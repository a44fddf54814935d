//! Forks over a characteristic string and the reach/margin calculus.
//!
//! A fork for `w` is a rooted tree whose vertices carry slot labels: the
//! root has label 0, labels increase strictly along every path, every
//! special slot labels exactly one vertex, and special vertices sit at
//! strictly increasing depths. A tine is the path from the root to a vertex;
//! here a tine is named by its last vertex.

mod oracle;
mod recursion;

pub use oracle::{
    brute_force_balanced, brute_force_reach_margin, count_closed_forks, for_each_closed_fork, oracle_values,
    OracleValues,
};
pub use recursion::{
    balanced_fork_exists, margin_prefixes, margin_trace, observer_transform, reach_prefixes, reach_trace, step,
    RecursionState,
};

use serde::{Deserialize, Serialize};

use crate::tristring::{Symbol, TriString};

/// Index of a vertex inside a [`Fork`].
pub type Vertex = usize;

/// Which pairs of tines count as disjoint after `s`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Disjointness {
    /// No shared vertex with label `≥ s`: the last common vertex has label `< s`.
    #[default]
    AtOrAfter,
    /// No shared vertex with label `> s`.
    StrictlyAfter,
}

impl Disjointness {
    /// Whether two tines whose last common vertex has label `lca` are disjoint.
    pub fn disjoint(self, lca: usize, s: usize) -> bool {
        match self {
            Disjointness::AtOrAfter => lca < s,
            Disjointness::StrictlyAfter => lca <= s,
        }
    }

    /// The threshold `s'` such that this reading at `s` equals the default at `s'`.
    pub fn normalise(self, s: usize) -> usize {
        match self {
            Disjointness::AtOrAfter => s,
            Disjointness::StrictlyAfter => s + 1,
        }
    }
}

/// A labelled rooted tree. Vertex `parents[v]` is `None` only for a root.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fork {
    labels: Vec<usize>,
    parents: Vec<Option<Vertex>>,
}

impl Default for Fork {
    fn default() -> Self {
        Fork::trivial()
    }
}

impl Fork {
    /// The fork with only the root.
    pub fn trivial() -> Self {
        Fork { labels: vec![0], parents: vec![None] }
    }

    /// A raw labelled graph, not checked. Use [`validate_fork`] on it.
    pub fn from_parts(labels: Vec<usize>, parents: Vec<Option<Vertex>>) -> Self {
        assert_eq!(labels.len(), parents.len());
        Fork { labels, parents }
    }

    pub const ROOT: Vertex = 0;

    /// Adds a child of `parent` with the given label and returns it.
    pub fn add(&mut self, parent: Vertex, label: usize) -> Vertex {
        assert!(parent < self.labels.len());
        self.labels.push(label);
        self.parents.push(Some(parent));
        self.labels.len() - 1
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, v: Vertex) -> usize {
        self.labels[v]
    }

    pub fn parent(&self, v: Vertex) -> Option<Vertex> {
        self.parents[v]
    }

    pub fn vertices(&self) -> std::ops::Range<Vertex> {
        0..self.len()
    }

    /// Path from the root to `v`, root first. Assumes a well-formed tree.
    pub fn path(&self, v: Vertex) -> Vec<Vertex> {
        let mut out = vec![v];
        let mut x = v;
        while let Some(p) = self.parents[x] {
            out.push(p);
            x = p;
        }
        out.reverse();
        out
    }

    pub fn depth(&self, v: Vertex) -> usize {
        self.path(v).len() - 1
    }

    /// Depth of every vertex.
    pub fn depths(&self) -> Vec<usize> {
        (0..self.len()).map(|v| self.depth(v)).collect()
    }

    /// Length of the longest tine.
    pub fn height(&self) -> usize {
        self.depths().into_iter().max().unwrap_or(0)
    }

    pub fn children(&self, v: Vertex) -> Vec<Vertex> {
        (0..self.len()).filter(|&c| self.parents[c] == Some(v)).collect()
    }

    pub fn is_leaf(&self, v: Vertex) -> bool {
        !self.parents.contains(&Some(v))
    }

    /// Last common vertex of the tines ending at `u` and `v`.
    pub fn lca(&self, u: Vertex, v: Vertex) -> Vertex {
        let pu = self.path(u);
        let pv = self.path(v);
        let mut last = pu[0];
        for (a, b) in pu.iter().zip(&pv) {
            if a != b {
                break;
            }
            last = *a;
        }
        last
    }
}

/// The fork conditions, in the order they are checked.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axiom {
    /// A single root and every edge directed away from it.
    RootedTree,
    /// The root is labelled 0.
    RootLabel,
    /// Labels strictly increase along every path.
    IncreasingLabels,
    /// Every special slot labels exactly one vertex.
    UniqueSpecial,
    /// Special vertices have strictly increasing depth in their slots.
    IncreasingSpecialDepth,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
#[error("{axiom:?} violated: {detail}")]
pub struct ForkViolation {
    pub axiom: Axiom,
    pub detail: String,
}

fn violation(axiom: Axiom, detail: String) -> Result<(), ForkViolation> {
    Err(ForkViolation { axiom, detail })
}

/// Checks the fork conditions for `fork` against `w`. Non-root labels must
/// also name non-empty slots of `w`; that is reported under
/// [`Axiom::IncreasingLabels`] as a malformed labelling.
pub fn validate_fork(fork: &Fork, w: &TriString) -> Result<(), ForkViolation> {
    let n = fork.len();
    let roots: Vec<Vertex> = (0..n).filter(|&v| fork.parents[v].is_none()).collect();
    if roots != [Fork::ROOT] {
        return violation(Axiom::RootedTree, format!("roots {roots:?}, expected [0]"));
    }
    let mut depth = vec![usize::MAX; n];
    depth[Fork::ROOT] = 0;
    for v in 0..n {
        let mut chain = Vec::new();
        let mut x = v;
        while depth[x] == usize::MAX {
            if chain.len() > n {
                return violation(Axiom::RootedTree, format!("cycle through vertex {v}"));
            }
            chain.push(x);
            match fork.parents[x] {
                Some(p) if p < n => x = p,
                other => return violation(Axiom::RootedTree, format!("vertex {x} has parent {other:?}")),
            }
        }
        let mut d = depth[x];
        for &y in chain.iter().rev() {
            d += 1;
            depth[y] = d;
        }
    }
    if fork.labels[Fork::ROOT] != 0 {
        return violation(Axiom::RootLabel, format!("root label {}", fork.labels[Fork::ROOT]));
    }
    for v in 1..n {
        let l = fork.labels[v];
        if l == 0 || l > w.len() || w.get(l) == Symbol::Empty {
            return violation(Axiom::IncreasingLabels, format!("vertex {v} has label {l}, not a non-empty slot"));
        }
        let p = fork.parents[v].expect("non-root");
        if fork.labels[p] >= l {
            return violation(
                Axiom::IncreasingLabels,
                format!("edge {p}->{v} with labels {} -> {l}", fork.labels[p]),
            );
        }
    }
    let mut last_depth: Option<(usize, usize)> = None;
    for i in w.positions(Symbol::Honest) {
        let with: Vec<Vertex> = (0..n).filter(|&v| fork.labels[v] == i).collect();
        if with.len() != 1 {
            return violation(Axiom::UniqueSpecial, format!("slot {i} labels {} vertices", with.len()));
        }
        let d = depth[with[0]];
        if let Some((j, dj)) = last_depth {
            if d <= dj {
                return violation(
                    Axiom::IncreasingSpecialDepth,
                    format!("slot {j} at depth {dj} but slot {i} at depth {d}"),
                );
            }
        }
        last_depth = Some((i, d));
    }
    Ok(())
}

/// Whether `v` is labelled by a special slot of `w`.
pub fn is_special(fork: &Fork, w: &TriString, v: Vertex) -> bool {
    let l = fork.label(v);
    l >= 1 && l <= w.len() && w.get(l) == Symbol::Honest
}

/// A fork is closed when every leaf is special (or it is the bare root).
pub fn is_closed(fork: &Fork, w: &TriString) -> bool {
    (0..fork.len()).all(|v| !fork.is_leaf(v) || v == Fork::ROOT || is_special(fork, w, v))
}

/// The largest closed subfork: drops every vertex without a special
/// vertex at or below it. Returns the fork and the old-to-new index map.
pub fn closure(fork: &Fork, w: &TriString) -> (Fork, Vec<Option<Vertex>>) {
    let n = fork.len();
    let mut keep = vec![false; n];
    keep[Fork::ROOT] = true;
    for v in 0..n {
        if is_special(fork, w, v) {
            for x in fork.path(v) {
                keep[x] = true;
            }
        }
    }
    let mut map = vec![None; n];
    let mut labels = Vec::new();
    let mut parents = Vec::new();
    // Parents may have larger indices than children in a raw fork, so
    // number kept vertices in path order.
    let mut order: Vec<Vertex> = (0..n).filter(|&v| keep[v]).collect();
    order.sort_by_key(|&v| fork.depth(v));
    for v in order {
        map[v] = Some(labels.len());
        labels.push(fork.label(v));
        parents.push(fork.parent(v).map(|p| map[p].expect("parent kept before child")));
    }
    (Fork { labels, parents }, map)
}

/// `gap`, `reserve` and `reach` of one tine of a closed fork.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TineMetrics {
    pub gap: i64,
    pub reserve: i64,
    pub reach: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ForkError {
    #[error("tine metrics are defined on closed forks only")]
    NotClosed,
    #[error("vertex {0} does not exist")]
    NoSuchVertex(Vertex),
}

/// `gap(t) = height(F) - length(t)`, `reserve(t) = #{i > ℓ(t) : w[i] = 1}`,
/// `reach(t) = reserve(t) - gap(t)`.
pub fn tine_metrics(fork: &Fork, w: &TriString, t: Vertex) -> Result<TineMetrics, ForkError> {
    if t >= fork.len() {
        return Err(ForkError::NoSuchVertex(t));
    }
    if !is_closed(fork, w) {
        return Err(ForkError::NotClosed);
    }
    let gap = (fork.height() - fork.depth(t)) as i64;
    let reserve = w.count(fork.label(t) + 1, w.len(), Symbol::Adversarial) as i64;
    Ok(TineMetrics { gap, reserve, reach: reserve - gap })
}

/// `reach(F)`: the largest reach over all tines of a closed fork.
pub fn fork_reach(fork: &Fork, w: &TriString) -> Result<i64, ForkError> {
    fork.vertices().map(|v| tine_metrics(fork, w, v).map(|m| m.reach)).try_fold(i64::MIN, |a, r| Ok(a.max(r?)))
}

/// `margin_s(F)`: the largest `min(reach(t1), reach(t2))` over pairs of
/// tines disjoint after `s` (a tine may be paired with itself).
pub fn fork_margin(fork: &Fork, w: &TriString, s: usize, rule: Disjointness) -> Result<i64, ForkError> {
    let reach: Vec<i64> =
        fork.vertices().map(|v| tine_metrics(fork, w, v).map(|m| m.reach)).collect::<Result<_, _>>()?;
    let mut best = i64::MIN;
    for u in fork.vertices() {
        for v in u..fork.len() {
            if rule.disjoint(fork.label(fork.lca(u, v)), s) {
                best = best.max(reach[u].min(reach[v]));
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tristring::w;

    #[test]
    fn root_only_fork_is_valid() {
        assert_eq!(validate_fork(&Fork::trivial(), &w(".")), Ok(()));
    }

    #[test]
    fn duplicate_special_label() {
        let mut f = Fork::trivial();
        f.add(0, 1);
        f.add(0, 1);
        assert_eq!(validate_fork(&f, &w("0")).unwrap_err().axiom, Axiom::UniqueSpecial);
    }

    #[test]
    fn equal_depth_specials() {
        let mut f = Fork::trivial();
        f.add(0, 1);
        f.add(0, 2);
        assert_eq!(validate_fork(&f, &w("00")).unwrap_err().axiom, Axiom::IncreasingSpecialDepth);
    }

    #[test]
    fn structural_violations() {
        let f = Fork::from_parts(vec![0, 1], vec![None, None]);
        assert_eq!(validate_fork(&f, &w("1")).unwrap_err().axiom, Axiom::RootedTree);
        let f = Fork::from_parts(vec![0, 1, 1], vec![None, Some(2), Some(1)]);
        assert_eq!(validate_fork(&f, &w("1")).unwrap_err().axiom, Axiom::RootedTree);
        let f = Fork::from_parts(vec![2, 1], vec![None, Some(0)]);
        assert_eq!(validate_fork(&f, &w("11")).unwrap_err().axiom, Axiom::RootLabel);
        let mut f = Fork::trivial();
        let a = f.add(0, 2);
        f.add(a, 1);
        assert_eq!(validate_fork(&f, &w("11")).unwrap_err().axiom, Axiom::IncreasingLabels);
        let mut f = Fork::trivial();
        f.add(0, 1);
        assert_eq!(validate_fork(&f, &w(".")).unwrap_err().axiom, Axiom::IncreasingLabels);
    }

    #[test]
    fn closure_trims_adversarial_tails() {
        let s = w("011");
        let mut f = Fork::trivial();
        let h = f.add(0, 1);
        let a = f.add(h, 2);
        f.add(a, 3);
        f.add(0, 2);
        assert_eq!(validate_fork(&f, &s), Ok(()));
        assert!(!is_closed(&f, &s));
        let (c, map) = closure(&f, &s);
        let mut expect = Fork::trivial();
        expect.add(0, 1);
        assert_eq!(c, expect);
        assert_eq!(map[h], Some(1));
        assert_eq!(map[a], None);
    }

    #[test]
    fn tine_metric_examples() {
        let s = w("01");
        let mut f = Fork::trivial();
        let v = f.add(0, 1);
        assert_eq!(tine_metrics(&f, &s, v).unwrap(), TineMetrics { gap: 0, reserve: 1, reach: 1 });

        let s = w("001");
        let mut f = Fork::trivial();
        let a = f.add(0, 1);
        f.add(a, 2);
        assert_eq!(tine_metrics(&f, &s, 0).unwrap(), TineMetrics { gap: 2, reserve: 1, reach: -1 });

        let mut open = Fork::trivial();
        open.add(0, 1);
        assert_eq!(tine_metrics(&open, &w("1"), 0), Err(ForkError::NotClosed));
    }
}
