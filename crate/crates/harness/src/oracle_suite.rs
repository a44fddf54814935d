//! Exhaustive comparison of the reach/margin recursion with fork enumeration.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use delaychain::fork::{oracle_values, step, Disjointness, RecursionState};
use delaychain::tristring::{Symbol, TriString};

/// Largest supported number of non-empty symbols.
pub const MAX_SYMBOLS: usize = 7;

/// The recursion step under test.
pub type StepFn = fn(RecursionState, Symbol, usize, usize) -> RecursionState;

/// The shipped recursion with its third margin case off by one.
pub fn mutant_step(state: RecursionState, sym: Symbol, i: usize, s: usize) -> RecursionState {
    let next = step(state, sym, i, s);
    if i >= s && sym == Symbol::Honest && state.reach > state.margin && state.margin == 0 {
        RecursionState { margin: -1, ..next }
    } else {
        next
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Mismatch {
    pub w: String,
    /// 0 for the reach comparison.
    pub s: usize,
    pub recursion: i64,
    pub oracle: i64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OracleReport {
    pub strings: u64,
    pub comparisons: u64,
    pub mismatches: Vec<Mismatch>,
}

impl OracleReport {
    pub fn pass(&self) -> bool {
        self.mismatches.is_empty()
    }

    pub fn write_mismatches(&self, out: &mut (impl Write + ?Sized)) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for m in &self.mismatches {
            w.serialize(m)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Every string with at most `max_symbols` symbols from `{0, 1}` and at
/// most `max_padding` empty slots, in a fixed order.
pub fn strings(max_symbols: usize, max_padding: usize) -> Vec<TriString> {
    let mut out = Vec::new();
    for len in 0..=max_symbols + max_padding {
        let total = 3usize.pow(len as u32);
        for code in 0..total {
            let mut c = code;
            let syms: Vec<Symbol> = (0..len)
                .map(|_| {
                    let s = [Symbol::Empty, Symbol::Honest, Symbol::Adversarial][c % 3];
                    c /= 3;
                    s
                })
                .collect();
            let empties = syms.iter().filter(|s| s.is_empty()).count();
            if empties <= max_padding && len - empties <= max_symbols {
                out.push(TriString::from_symbols(syms));
            }
        }
    }
    out
}

fn compare(w: &TriString, step_fn: StepFn) -> (u64, Vec<Mismatch>) {
    let oracle = oracle_values(w);
    let text = w.to_string();
    let mut bad = Vec::new();
    let mut n = 0;
    for s in 1..=w.len().max(1) {
        let s_eff = Disjointness::AtOrAfter.normalise(s);
        let st = w.iter().fold(RecursionState::default(), |st, (i, sym)| step_fn(st, sym, i, s_eff));
        let expect = oracle.margin(s, Disjointness::AtOrAfter);
        n += 1;
        if st.margin != expect {
            bad.push(Mismatch { w: text.clone(), s, recursion: st.margin, oracle: expect });
        }
        if s == 1 {
            n += 1;
            if st.reach != oracle.reach {
                bad.push(Mismatch { w: text.clone(), s: 0, recursion: st.reach, oracle: oracle.reach });
            }
        }
    }
    (n, bad)
}

/// Compares `step_fn` with the oracle on every string of [`strings`] and
/// every `s` in `1..=|w|`.
pub fn run_oracle_suite_with(max_symbols: usize, max_padding: usize, step_fn: StepFn) -> OracleReport {
    assert!(max_symbols <= MAX_SYMBOLS, "max_symbols must be at most {MAX_SYMBOLS}");
    let all = strings(max_symbols, max_padding);
    let results: Vec<(u64, Vec<Mismatch>)> = all.par_iter().map(|w| compare(w, step_fn)).collect();
    let mut report = OracleReport { strings: all.len() as u64, ..Default::default() };
    for (n, bad) in results {
        report.comparisons += n;
        report.mismatches.extend(bad);
    }
    report
}

pub fn run_oracle_suite(max_symbols: usize, max_padding: usize) -> OracleReport {
    run_oracle_suite_with(max_symbols, max_padding, step)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_symbol() {
        let r = run_oracle_suite(1, 0);
        assert_eq!(r.strings, 3);
        assert!(r.pass());
    }

    #[test]
    fn string_count() {
        // sum over n <= 2, e <= 1 of C(n + e, e) 2^n
        assert_eq!(strings(2, 1).len(), 1 + 1 + 2 + 2 * 2 + 4 + 3 * 4);
    }

    #[test]
    fn mutant_is_caught() {
        let r = run_oracle_suite_with(3, 0, mutant_step);
        assert!(!r.pass());
    }
}
