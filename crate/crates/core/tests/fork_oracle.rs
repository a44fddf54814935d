use delaychain::fork::{
    balanced_fork_exists, brute_force_balanced, margin_prefixes, observer_transform, oracle_values, reach_prefixes,
    Disjointness,
};
use delaychain::tristring::{Symbol, TriString};

const ALPHABET: [Symbol; 3] = [Symbol::Empty, Symbol::Honest, Symbol::Adversarial];

fn all_strings(len: usize) -> Vec<TriString> {
    let mut out = vec![TriString::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|w| {
                ALPHABET.iter().map(move |&s| {
                    let mut x = w.clone();
                    x.push(s);
                    x
                })
            })
            .collect();
    }
    out
}

fn max_len() -> usize {
    std::env::var("DELAYCHAIN_ORACLE_LEN").ok().and_then(|v| v.parse().ok()).unwrap_or(7)
}

#[test]
fn recursions_match_enumeration() {
    let mut checked = 0;
    for n in 1..=max_len() {
        for w in all_strings(n) {
            let oracle = oracle_values(&w);
            assert_eq!(*reach_prefixes(&w).last().unwrap(), oracle.reach, "reach of {w}");
            for s in 1..=n + 1 {
                for rule in [Disjointness::AtOrAfter, Disjointness::StrictlyAfter] {
                    let fast = margin_prefixes(&w, s, rule).last().unwrap().margin;
                    assert_eq!(fast, oracle.margin(s, rule), "margin_{s} of {w} under {rule:?}");
                }
            }
            checked += 1;
        }
    }
    assert!(checked >= 363);
}

#[test]
fn balanced_forks_match_observer_margin() {
    for n in 1..=4 {
        for w in all_strings(n) {
            for s in 1..=n {
                for l in 0..=n {
                    assert_eq!(
                        balanced_fork_exists(&w, s, l),
                        brute_force_balanced(&w, s, l),
                        "w = {w}, s = {s}, l = {l}"
                    );
                }
            }
        }
    }
}

#[test]
fn observer_transform_keeps_length_and_ones() {
    for w in all_strings(4) {
        for l in 0..=4 {
            let o = observer_transform(&w, l);
            assert_eq!(o.len(), w.len());
            assert_eq!(o.ones(), w.ones());
            assert_eq!(o.prefix(l.min(w.len())), w.prefix(l.min(w.len())));
        }
    }
}
