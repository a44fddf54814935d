//! Exhaustive enumeration of closed forks, for checking the recursions on
//! short strings.
//!
//! Vertices are added slot by slot in increasing label order. A special
//! slot adds exactly one vertex under any vertex that keeps special depths
//! increasing; an adversarial slot adds any multiset of children. Every
//! closed fork appears at least once (isomorphic copies may repeat).

use std::ops::ControlFlow;

use super::{Disjointness, Fork};
use crate::tristring::{Symbol, TriString};

struct Search<'a> {
    w: &'a TriString,
    labels: Vec<usize>,
    parents: Vec<Option<usize>>,
    depths: Vec<usize>,
    special: Vec<bool>,
    children: Vec<usize>,
    open_leaves: usize,
    last_special_depth: usize,
    zeros_after: Vec<usize>,
}

impl<'a> Search<'a> {
    fn new(w: &'a TriString) -> Self {
        let n = w.len();
        let mut zeros_after = vec![0; n + 1];
        for i in (0..n).rev() {
            zeros_after[i] = zeros_after[i + 1] + usize::from(w.get(i + 1) == Symbol::Honest);
        }
        Search {
            w,
            labels: vec![0],
            parents: vec![None],
            depths: vec![0],
            special: vec![false],
            children: vec![0],
            open_leaves: 0,
            last_special_depth: 0,
            zeros_after,
        }
    }

    fn push(&mut self, parent: usize, label: usize, special: bool) {
        let parent_open = !self.special[parent] && parent != 0 && self.children[parent] == 0;
        if parent_open {
            self.open_leaves -= 1;
        }
        self.children[parent] += 1;
        self.labels.push(label);
        self.parents.push(Some(parent));
        self.depths.push(self.depths[parent] + 1);
        self.special.push(special);
        self.children.push(0);
        if !special {
            self.open_leaves += 1;
        }
    }

    fn pop(&mut self) {
        let special = self.special.pop().expect("non-root");
        if !special {
            self.open_leaves -= 1;
        }
        self.labels.pop();
        self.depths.pop();
        self.children.pop();
        let parent = self.parents.pop().flatten().expect("non-root");
        self.children[parent] -= 1;
        if !self.special[parent] && parent != 0 && self.children[parent] == 0 {
            self.open_leaves += 1;
        }
    }

    fn fork(&self) -> Fork {
        Fork::from_parts(self.labels.clone(), self.parents.clone())
    }

    /// Positions `i..=|w|` still to place.
    fn run<F: FnMut(&Search) -> ControlFlow<()>>(&mut self, i: usize, visit: &mut F) -> ControlFlow<()> {
        if self.open_leaves > self.zeros_after[i - 1] {
            return ControlFlow::Continue(());
        }
        if i > self.w.len() {
            return if self.open_leaves == 0 { visit(self) } else { ControlFlow::Continue(()) };
        }
        match self.w.get(i) {
            Symbol::Empty => self.run(i + 1, visit),
            Symbol::Honest => {
                let saved = self.last_special_depth;
                for p in 0..self.labels.len() {
                    let d = self.depths[p] + 1;
                    if d <= saved {
                        continue;
                    }
                    self.push(p, i, true);
                    self.last_special_depth = d;
                    let r = self.run(i + 1, visit);
                    self.pop();
                    self.last_special_depth = saved;
                    r?;
                }
                ControlFlow::Continue(())
            }
            Symbol::Adversarial => {
                let cap = self.zeros_after[i];
                let existing = self.labels.len();
                self.multisets(i, existing, 0, cap, visit)
            }
        }
    }

    /// Adds up to `left` more children labelled `i`, with parent indices
    /// non-decreasing from `from`, among the first `existing` vertices.
    fn multisets<F: FnMut(&Search) -> ControlFlow<()>>(
        &mut self,
        i: usize,
        existing: usize,
        from: usize,
        left: usize,
        visit: &mut F,
    ) -> ControlFlow<()> {
        self.run(i + 1, visit)?;
        if left == 0 {
            return ControlFlow::Continue(());
        }
        for p in from..existing {
            self.push(p, i, false);
            let r = self.multisets(i, existing, p, left - 1, visit);
            self.pop();
            r?;
        }
        ControlFlow::Continue(())
    }
}

/// Calls `visit` on closed forks for `w` until it breaks.
pub fn for_each_closed_fork(w: &TriString, mut visit: impl FnMut(&Fork) -> ControlFlow<()>) {
    let mut s = Search::new(w);
    let _ = s.run(1, &mut |st: &Search| visit(&st.fork()));
}

/// Number of closed forks produced by the enumeration (with repeats).
pub fn count_closed_forks(w: &TriString) -> usize {
    let mut n = 0;
    let mut s = Search::new(w);
    let _ = s.run(1, &mut |_: &Search| {
        n += 1;
        ControlFlow::Continue(())
    });
    n
}

/// Exact `Reach(w)` and `Margin_s(w)` for every `s` in `1..=|w| + 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleValues {
    pub reach: i64,
    /// `margin[s - 1] = Margin_s(w)` under the default disjointness.
    pub margin: Vec<i64>,
}

impl OracleValues {
    pub fn margin(&self, s: usize, rule: Disjointness) -> i64 {
        let s = rule.normalise(s).clamp(1, self.margin.len());
        self.margin[s - 1]
    }
}

fn lca(parents: &[Option<usize>], depths: &[usize], mut u: usize, mut v: usize) -> usize {
    while depths[u] > depths[v] {
        u = parents[u].expect("non-root");
    }
    while depths[v] > depths[u] {
        v = parents[v].expect("non-root");
    }
    while u != v {
        u = parents[u].expect("non-root");
        v = parents[v].expect("non-root");
    }
    u
}

/// Maximises reach and margin over every closed fork of `w`.
pub fn oracle_values(w: &TriString) -> OracleValues {
    let n = w.len();
    let mut ones_after = vec![0i64; n + 1];
    for i in (0..n).rev() {
        ones_after[i] = ones_after[i + 1] + i64::from(w.get(i + 1) == Symbol::Adversarial);
    }
    let mut reach = i64::MIN;
    // best[L]: best min-reach over pairs whose last common vertex has label L.
    let mut best = vec![i64::MIN; n + 1];
    let mut r = Vec::new();
    let mut s = Search::new(w);
    let _ = s.run(1, &mut |st: &Search| {
        let height = *st.depths.iter().max().expect("root");
        r.clear();
        r.extend((0..st.labels.len()).map(|v| ones_after[st.labels[v]] - (height - st.depths[v]) as i64));
        for u in 0..r.len() {
            reach = reach.max(r[u]);
            for v in u..r.len() {
                let l = st.labels[lca(&st.parents, &st.depths, u, v)];
                best[l] = best[l].max(r[u].min(r[v]));
            }
        }
        ControlFlow::Continue(())
    });
    let mut margin = Vec::with_capacity(n + 1);
    let mut running = i64::MIN;
    for b in &best {
        running = running.max(*b);
        margin.push(running);
    }
    OracleValues { reach, margin }
}

/// `(Reach(w), Margin_s(w))` by enumeration.
pub fn brute_force_reach_margin(w: &TriString, s: usize, rule: Disjointness) -> (i64, i64) {
    let v = oracle_values(w);
    (v.reach, v.margin(s, rule))
}

/// Whether a fork for `w` has two `l`-viable tines disjoint after `s`.
///
/// Every such fork can be rebuilt from its closure plus two fresh
/// adversarial paths, so it suffices to look for closed-fork vertices `u`,
/// `v` whose last common vertex is labelled below `s` and whose maximal
/// adversarial extensions reach the depth of the deepest special vertex
/// labelled at most `l`.
pub fn brute_force_balanced(w: &TriString, s: usize, l: usize) -> bool {
    let n = w.len();
    let mut ones_after = vec![0usize; n + 1];
    for i in (0..n).rev() {
        ones_after[i] = ones_after[i + 1] + usize::from(w.get(i + 1) == Symbol::Adversarial);
    }
    let mut found = false;
    let mut search = Search::new(w);
    let _ = search.run(1, &mut |st: &Search| {
        let need = (0..st.labels.len())
            .filter(|&v| st.special[v] && st.labels[v] <= l)
            .map(|v| st.depths[v])
            .max()
            .unwrap_or(0);
        let reaches: Vec<usize> =
            (0..st.labels.len()).filter(|&v| st.depths[v] + ones_after[st.labels[v]] >= need).collect();
        for (a, &u) in reaches.iter().enumerate() {
            for &v in &reaches[a..] {
                if st.labels[lca(&st.parents, &st.depths, u, v)] < s {
                    found = true;
                    return ControlFlow::Break(());
                }
            }
        }
        ControlFlow::Continue(())
    });
    found
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fork::{fork_margin, fork_reach, is_closed, validate_fork};
    use crate::tristring::w;

    #[test]
    fn single_zero() {
        let v = oracle_values(&w("0"));
        assert_eq!(v.reach, 0);
        assert_eq!(v.margin(1, Disjointness::AtOrAfter), -1);
        assert_eq!(v.margin(2, Disjointness::AtOrAfter), 0);
    }

    #[test]
    fn enumerated_forks_are_valid_and_closed() {
        for s in ["0110", "1.01", "0011", "101"] {
            let x = w(s);
            let mut count = 0;
            for_each_closed_fork(&x, |f| {
                assert_eq!(validate_fork(f, &x), Ok(()), "{s}: {f:?}");
                assert!(is_closed(f, &x));
                count += 1;
                ControlFlow::Continue(())
            });
            assert!(count > 0);
        }
    }

    #[test]
    fn fast_evaluation_matches_definition() {
        let x = w("1010");
        let v = oracle_values(&x);
        let mut reach = i64::MIN;
        let mut margin = vec![i64::MIN; 5];
        for_each_closed_fork(&x, |f| {
            reach = reach.max(fork_reach(f, &x).unwrap());
            for s in 1..=5 {
                margin[s - 1] = margin[s - 1].max(fork_margin(f, &x, s, Disjointness::AtOrAfter).unwrap());
            }
            ControlFlow::Continue(())
        });
        assert_eq!(v.reach, reach);
        assert_eq!(v.margin, margin);
    }

    #[test]
    fn known_counts() {
        // "1" alone admits no adversarial vertex in a closed fork.
        assert_eq!(count_closed_forks(&w("1")), 1);
        // "10": the special vertex goes under the root or under one
        // adversarial vertex.
        assert_eq!(count_closed_forks(&w("10")), 2);
    }
}
