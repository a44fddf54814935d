use super::Disjointness;
use crate::tristring::{Symbol, TriString};

/// `(reach, margin_s)` after some prefix of a string.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RecursionState {
    pub reach: i64,
    pub margin: i64,
}

/// Advances the recursion by the symbol at 1-based position `i`.
///
/// Reach: `⊥` keeps it, `1` adds one, `0` subtracts one but not below 0.
/// Margin equals reach before position `s`; from `s` on, `⊥` keeps it,
/// `1` adds one and `0` subtracts one unless reach was positive while
/// margin was exactly 0, in which case it stays 0.
#[inline]
pub fn step(state: RecursionState, sym: Symbol, i: usize, s: usize) -> RecursionState {
    let reach = match sym {
        Symbol::Empty => state.reach,
        Symbol::Adversarial => state.reach + 1,
        Symbol::Honest => (state.reach - 1).max(0),
    };
    let margin = if i < s {
        reach
    } else {
        match sym {
            Symbol::Empty => state.margin,
            Symbol::Adversarial => state.margin + 1,
            Symbol::Honest if state.reach > state.margin && state.margin == 0 => 0,
            Symbol::Honest => state.margin - 1,
        }
    };
    RecursionState { reach, margin }
}

/// `Reach(w[1:i])` for `i = 0..=|w|`.
pub fn reach_prefixes(w: &TriString) -> Vec<i64> {
    margin_prefixes(w, usize::MAX, Disjointness::AtOrAfter).into_iter().map(|st| st.reach).collect()
}

/// `Reach(w[1:i])` for `i = 1..=|w|`.
pub fn reach_trace(w: &TriString) -> Vec<i64> {
    reach_prefixes(w)[1..].to_vec()
}

/// Recursion states for every prefix length `0..=|w|`.
pub fn margin_prefixes(w: &TriString, s: usize, rule: Disjointness) -> Vec<RecursionState> {
    let s = if s == usize::MAX { s } else { rule.normalise(s) };
    let mut out = Vec::with_capacity(w.len() + 1);
    let mut st = RecursionState::default();
    out.push(st);
    for (i, sym) in w.iter() {
        st = step(st, sym, i, s);
        out.push(st);
    }
    out
}

/// `Margin_s(w[1:i])` for `i = 1..=|w|`.
pub fn margin_trace(w: &TriString, s: usize, rule: Disjointness) -> Vec<i64> {
    margin_prefixes(w, s, rule)[1..].iter().map(|st| st.margin).collect()
}

/// `O_l(w)`: every `0` after position `l` becomes `⊥`.
pub fn observer_transform(w: &TriString, l: usize) -> TriString {
    w.iter().map(|(i, s)| if i > l && s == Symbol::Honest { Symbol::Empty } else { s }).collect()
}

/// Whether some fork for `w` has two `l`-viable tines disjoint after `s`,
/// decided by the sign of `Margin_s(O_l(w))`.
pub fn balanced_fork_exists(w: &TriString, s: usize, l: usize) -> bool {
    let o = observer_transform(w, l);
    margin_prefixes(&o, s, Disjointness::AtOrAfter).last().expect("non-empty").margin >= 0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tristring::w;

    #[test]
    fn reach_examples() {
        assert_eq!(reach_trace(&w("10100")), vec![1, 0, 1, 0, 0]);
        assert_eq!(*reach_prefixes(&w("")).last().unwrap(), 0);
        assert_eq!(reach_trace(&w("1.1")), vec![1, 1, 2]);
    }

    #[test]
    fn margin_of_single_zero() {
        // The root and the special vertex only share the root, but the root
        // tine has reach -1.
        assert_eq!(margin_trace(&w("0"), 1, Disjointness::AtOrAfter), vec![-1]);
    }

    #[test]
    fn margin_before_s_is_reach() {
        let x = w("1101.0");
        assert_eq!(margin_trace(&x, 7, Disjointness::AtOrAfter), reach_trace(&x));
        assert_eq!(
            margin_trace(&x, 3, Disjointness::StrictlyAfter),
            margin_trace(&x, 4, Disjointness::AtOrAfter)
        );
    }

    #[test]
    fn observer_examples() {
        assert_eq!(observer_transform(&w("0101"), 2).to_string(), "01.1");
        assert!(!balanced_fork_exists(&w("0"), 1, 1));
        assert!(!balanced_fork_exists(&w("00"), 2, 2));
        assert!(balanced_fork_exists(&w("0110"), 2, 4));
    }
}
