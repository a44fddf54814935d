//! Keyed uniform streams.
//!
//! Every random quantity of an execution is read from a stream addressed by
//! a key, never from a shared sequential generator. Two computations that
//! ask for the same key see the same uniforms, which is what lets the
//! characteristic string, the delivery log and the refreshed residuals agree
//! with each other without passing state around.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Which family of randomness a stream belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Domain {
    Delay = 1,
    Leader = 2,
    NegativeTime = 3,
    Adversary = 4,
    Trial = 5,
}

/// Address of a stream: trial seed, domain, sender slot, sender ordinal
/// within the slot, and recipient. Slots may be negative.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub domain: Domain,
    pub slot: i64,
    pub ordinal: u64,
    pub recipient: u64,
}

impl StreamKey {
    pub fn delay(seed: u64, slot: i64, ordinal: u64, recipient: u64) -> Self {
        StreamKey { seed, domain: Domain::Delay, slot, ordinal, recipient }
    }

    pub fn domain(seed: u64, domain: Domain) -> Self {
        StreamKey { seed, domain, slot: 0, ordinal: 0, recipient: 0 }
    }
}

/// Random access to a sequence `U[0], U[1], ...` of uniforms on `(0, 1]`.
pub trait Uniforms {
    fn uniform(&mut self, index: u64) -> f64;
}

/// Converts 64 random bits to a uniform on `(0, 1]`.
///
/// The interval is closed at 1 and open at 0 so that a failure rate of 0
/// is never selected and a rate of 1 always is.
#[inline]
pub fn bits_to_unit(x: u64) -> f64 {
    ((x >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// ChaCha8 stream for one key. `U[i]` is the `i`-th 64-bit output.
#[derive(Clone, Debug)]
pub struct KeyedUniforms {
    rng: ChaCha8Rng,
    next: u64,
}

impl KeyedUniforms {
    pub fn new(key: StreamKey) -> Self {
        let mut rng = ChaCha8Rng::from_seed(seed_bytes(key));
        rng.set_stream(key.recipient);
        KeyedUniforms { rng, next: 0 }
    }

    /// A sequential generator for the key, for draws that need no random
    /// access (leader schedules, negative-time sampling, policies).
    pub fn rng(key: StreamKey) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(seed_bytes(key));
        rng.set_stream(key.recipient);
        rng
    }
}

impl Uniforms for KeyedUniforms {
    fn uniform(&mut self, index: u64) -> f64 {
        if index != self.next {
            // Each output is two 32-bit words.
            self.rng.set_word_pos(2 * index as u128);
        }
        self.next = index + 1;
        bits_to_unit(self.rng.next_u64())
    }
}

/// A fixed, finite vector of uniforms. Reading past the end panics.
#[derive(Clone, Debug)]
pub struct FixedUniforms(pub Vec<f64>);

impl Uniforms for FixedUniforms {
    fn uniform(&mut self, index: u64) -> f64 {
        *self
            .0
            .get(index as usize)
            .unwrap_or_else(|| panic!("fixed uniform stream exhausted at index {index}"))
    }
}

impl<U: Uniforms + ?Sized> Uniforms for &mut U {
    fn uniform(&mut self, index: u64) -> f64 {
        (**self).uniform(index)
    }
}

fn seed_bytes(key: StreamKey) -> [u8; 32] {
    let mut out = [0u8; 32];
    out[..8].copy_from_slice(&key.seed.to_le_bytes());
    out[8..16].copy_from_slice(&(key.domain as u64).to_le_bytes());
    out[16..24].copy_from_slice(&key.slot.to_le_bytes());
    out[24..].copy_from_slice(&key.ordinal.to_le_bytes());
    out
}

/// Seed for trial `index` of an experiment with base seed `base`.
pub fn trial_seed(base: u64, index: u64) -> u64 {
    let mut rng = KeyedUniforms::rng(StreamKey {
        seed: base,
        domain: Domain::Trial,
        slot: 0,
        ordinal: 0,
        recipient: index,
    });
    rng.next_u64()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_access_matches_sequential() {
        let key = StreamKey::delay(7, -3, 1, 4);
        let mut a = KeyedUniforms::new(key);
        let seq: Vec<f64> = (0..10).map(|i| a.uniform(i)).collect();
        let mut b = KeyedUniforms::new(key);
        assert_eq!(b.uniform(7), seq[7]);
        assert_eq!(b.uniform(2), seq[2]);
        assert_eq!(b.uniform(3), seq[3]);
        assert!(seq.iter().all(|&u| u > 0.0 && u <= 1.0));
    }

    #[test]
    fn keys_are_separated() {
        let u = |k: StreamKey| KeyedUniforms::new(k).uniform(0);
        let base = StreamKey::delay(1, 5, 0, 0);
        assert_ne!(u(base), u(StreamKey { recipient: 1, ..base }));
        assert_ne!(u(base), u(StreamKey { slot: -5, ..base }));
        assert_ne!(u(base), u(StreamKey { ordinal: 1, ..base }));
        assert_ne!(u(base), u(StreamKey { domain: Domain::Leader, ..base }));
        assert_ne!(trial_seed(1, 0), trial_seed(1, 1));
    }

    #[test]
    fn unit_interval_endpoints() {
        assert_eq!(bits_to_unit(u64::MAX), 1.0);
        assert!(bits_to_unit(0) > 0.0);
    }
}
