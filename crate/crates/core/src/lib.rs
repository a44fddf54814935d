//! Longest-chain consensus with random message delays.
//!
//! The crate turns a leader-election law and a delay law into a
//! characteristic string over `{⊥, 0, 1}`, evaluates reach and margin on
//! it, simulates the protocol against pluggable adversaries, and evaluates
//! the closed-form failure bounds.
//!
//! ```
//! use delaychain::fork::{margin_trace, Disjointness};
//! use delaychain::tristring::w;
//!
//! assert_eq!(margin_trace(&w("0101"), 1, Disjointness::AtOrAfter), vec![-1, 0, 0, 1]);
//! ```

pub mod bounds;
pub mod charstring;
pub mod delay;
pub mod fork;
pub mod leader;
pub mod stream;
pub mod tristring;
pub mod sim;
pub mod unheard;

/// Chapters of the guide in `book/`, compiled so their snippets run as doctests.
#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/strings.md")]
    pub mod strings {}
    #[doc = include_str!("../../../book/src/delays.md")]
    pub mod delays {}
    #[doc = include_str!("../../../book/src/forks.md")]
    pub mod forks {}
    #[doc = include_str!("../../../book/src/unheard.md")]
    pub mod unheard {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    pub mod simulation {}
    #[doc = include_str!("../../../book/src/bounds.md")]
    pub mod bounds {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    pub mod experiments {}
}
