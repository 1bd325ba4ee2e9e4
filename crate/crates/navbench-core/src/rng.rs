//! Deterministic randomness: one master seed fanned out into named substreams.
//!
//! Every source of randomness in a run (world resets, weight init, dropout
//! masks, replay sampling, action noise, map generation) draws from its own
//! stream derived from `(master_seed, name)`. Adding draws to one stream
//! never perturbs another, so component-level reproducibility survives
//! config edits elsewhere.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// Derive the substream seed for `(master, name)`.
///
/// FNV-1a over the name, mixed with the master seed through a splitmix64
/// finalizer. Stable across platforms and releases.
pub fn stream_seed(master: u64, name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(master ^ h)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Construct the substream RNG for `(master, name)`.
pub fn stream(master: u64, name: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(master, name))
}

/// A named collection of substreams with savable positions.
#[derive(Debug, Clone)]
pub struct RngManager {
    master_seed: u64,
    streams: BTreeMap<String, ChaCha8Rng>,
}

impl RngManager {
    pub fn new(master_seed: u64) -> Self {
        Self {
            master_seed,
            streams: BTreeMap::new(),
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// Get (creating on first use) the stream with the given name.
    pub fn stream(&mut self, name: &str) -> &mut ChaCha8Rng {
        self.streams
            .entry(name.to_string())
            .or_insert_with(|| stream(self.master_seed, name))
    }

    /// Snapshot current positions of all streams touched so far.
    pub fn positions(&self) -> Vec<(String, u128)> {
        self.streams
            .iter()
            .map(|(name, rng)| (name.clone(), rng.get_word_pos()))
            .collect()
    }

    /// Restore a snapshot taken by [`RngManager::positions`].
    pub fn restore(master_seed: u64, positions: &[(String, u128)]) -> Self {
        let mut mgr = Self::new(master_seed);
        for (name, pos) in positions {
            let rng = mgr.stream(name);
            rng.set_word_pos(*pos);
        }
        mgr
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_independent_and_reproducible() {
        let mut a = RngManager::new(7);
        let mut b = RngManager::new(7);
        // Interleave draws differently; each named stream still matches.
        let a1: f64 = a.stream("world").gen();
        let _burn: f64 = b.stream("policy-init").gen();
        let b1: f64 = b.stream("world").gen();
        assert_eq!(a1, b1);

        let c1: f64 = stream(7, "world").gen();
        assert_eq!(a1, c1);
        let d1: f64 = stream(8, "world").gen();
        assert_ne!(a1, d1);
    }

    #[test]
    fn positions_round_trip() {
        let mut mgr = RngManager::new(42);
        for _ in 0..13 {
            let _: u64 = mgr.stream("replay").gen();
        }
        let snap = mgr.positions();
        let mut restored = RngManager::restore(42, &snap);
        let x: u64 = mgr.stream("replay").gen();
        let y: u64 = restored.stream("replay").gen();
        assert_eq!(x, y);
    }
}
