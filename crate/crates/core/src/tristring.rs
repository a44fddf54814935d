//! Strings over `{⊥, 0, 1}` indexed by slot.
//!
//! Slot `i` of a string `w` is written `w[i]` and indices start at 1. The
//! textual form uses `.` for `⊥`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// One symbol of a leader or characteristic string.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Symbol {
    /// `⊥`: nobody produced a block in the slot.
    Empty,
    /// `0`: a uniquely honest slot (leader string) or a special slot
    /// (characteristic string).
    Honest,
    /// `1`: any other non-empty slot.
    Adversarial,
}

impl Symbol {
    pub fn to_char(self) -> char {
        match self {
            Symbol::Empty => '.',
            Symbol::Honest => '0',
            Symbol::Adversarial => '1',
        }
    }

    pub fn from_char(c: char) -> Option<Symbol> {
        match c {
            '.' | '⊥' => Some(Symbol::Empty),
            '0' => Some(Symbol::Honest),
            '1' => Some(Symbol::Adversarial),
            _ => None,
        }
    }

    pub fn is_empty(self) -> bool {
        self == Symbol::Empty
    }
}

/// A finite string over `{⊥, 0, 1}` with 1-based indexing.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TriString {
    symbols: Vec<Symbol>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid symbol {found:?} at position {position}")]
pub struct ParseTriStringError {
    pub position: usize,
    pub found: char,
}

impl TriString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn empty_of_len(len: usize) -> Self {
        TriString { symbols: vec![Symbol::Empty; len] }
    }

    pub fn from_symbols(symbols: Vec<Symbol>) -> Self {
        TriString { symbols }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Symbol at 1-based index `i`.
    ///
    /// # Panics
    ///
    /// If `i == 0` or `i > len`.
    pub fn get(&self, i: usize) -> Symbol {
        assert!(i >= 1 && i <= self.len(), "index {i} outside 1..={}", self.len());
        self.symbols[i - 1]
    }

    pub fn set(&mut self, i: usize, s: Symbol) {
        assert!(i >= 1 && i <= self.len(), "index {i} outside 1..={}", self.len());
        self.symbols[i - 1] = s;
    }

    pub fn push(&mut self, s: Symbol) {
        self.symbols.push(s);
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    /// `(index, symbol)` pairs with 1-based indices.
    pub fn iter(&self) -> impl Iterator<Item = (usize, Symbol)> + '_ {
        self.symbols.iter().enumerate().map(|(k, &s)| (k + 1, s))
    }

    /// `w[1:i]`.
    pub fn prefix(&self, i: usize) -> TriString {
        TriString { symbols: self.symbols[..i.min(self.len())].to_vec() }
    }

    /// `w[lo:hi]`, inclusive, clipped to the string. Empty when `hi < lo`.
    pub fn window(&self, lo: usize, hi: usize) -> &[Symbol] {
        let lo = lo.max(1);
        let hi = hi.min(self.len());
        if hi < lo {
            &[]
        } else {
            &self.symbols[lo - 1..hi]
        }
    }

    pub fn count(&self, lo: usize, hi: usize, s: Symbol) -> usize {
        self.window(lo, hi).iter().filter(|&&x| x == s).count()
    }

    /// `N_0` over the whole string.
    pub fn zeros(&self) -> usize {
        self.count(1, self.len(), Symbol::Honest)
    }

    /// `N_1` over the whole string.
    pub fn ones(&self) -> usize {
        self.count(1, self.len(), Symbol::Adversarial)
    }

    /// Number of non-`⊥` symbols.
    pub fn nonempty(&self) -> usize {
        self.len() - self.count(1, self.len(), Symbol::Empty)
    }

    /// Indices `i` with `w[i] = s`.
    pub fn positions(&self, s: Symbol) -> Vec<usize> {
        self.iter().filter(|&(_, x)| x == s).map(|(i, _)| i).collect()
    }
}

impl FromStr for TriString {
    type Err = ParseTriStringError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .enumerate()
            .map(|(k, c)| Symbol::from_char(c).ok_or(ParseTriStringError { position: k + 1, found: c }))
            .collect::<Result<Vec<_>, _>>()
            .map(TriString::from_symbols)
    }
}

impl fmt::Display for TriString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.symbols {
            write!(f, "{}", s.to_char())?;
        }
        Ok(())
    }
}

impl FromIterator<Symbol> for TriString {
    fn from_iter<I: IntoIterator<Item = Symbol>>(iter: I) -> Self {
        TriString { symbols: iter.into_iter().collect() }
    }
}

/// Parse a string literal known to be valid. Test and doc helper.
///
/// # Panics
///
/// On any character outside `.`, `⊥`, `0`, `1`.
pub fn w(s: &str) -> TriString {
    s.parse().expect("valid tri-string literal")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_counts() {
        let x = w("01.1.0");
        assert_eq!(x.to_string(), "01.1.0");
        assert_eq!(x.zeros(), 2);
        assert_eq!(x.ones(), 2);
        assert_eq!(x.nonempty(), 4);
        assert_eq!(x.get(3), Symbol::Empty);
        assert_eq!(x.count(2, 4, Symbol::Adversarial), 2);
        assert!(x.window(5, 2).is_empty());
        assert_eq!(w("⊥0").to_string(), ".0");
    }

    #[test]
    fn rejects_garbage() {
        let err = "01x".parse::<TriString>().unwrap_err();
        assert_eq!(err.position, 3);
    }
}
