//! Counter-based random substreams.
//!
//! Every random decision in a simulation is drawn from a ChaCha8 stream whose
//! key is the tuple `(seed, domain, id)`. Two draws that share a tuple are the
//! same draw; two draws that do not are independent. This is what lets the
//! oracle replay an edge, or share a tie coin with the reconstruction, without
//! any shared mutable generator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags that separate substreams drawn from one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Domain {
    Root = 1,
    Edge = 2,
    Tie = 3,
    StableTrim = 4,
    GatewayTrim = 5,
    Trial = 6,
    Fixture = 7,
}

/// A ChaCha8 generator keyed by `(seed, domain, id)`.
pub fn substream(seed: u64, domain: Domain, id: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(domain as u64).to_le_bytes());
    key[16..24].copy_from_slice(&id.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Like [`substream`] with a second identifier, e.g. `(site, node)`.
pub fn substream2(seed: u64, domain: Domain, a: u64, b: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(domain as u64).to_le_bytes());
    key[16..24].copy_from_slice(&a.to_le_bytes());
    key[24..32].copy_from_slice(&b.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Derives a child seed, e.g. the seed of trial `i` of an experiment cell.
pub fn derive_seed(seed: u64, domain: Domain, a: u64, b: u64) -> u64 {
    mix(mix(mix(seed ^ (domain as u64).wrapping_mul(0xA24B_AED4_963E_E407)) ^ a) ^ b.rotate_left(29))
}

fn mix(mut z: u64) -> u64 {
    // splitmix64 finalizer
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Unbiased tie-breaking coins keyed by `(node, site)`.
///
/// The reconstruction and the adversarial oracle hold the same `TieCoins`, so
/// a tie at a given node and site is broken identically by both.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TieCoins {
    seed: u64,
}

impl TieCoins {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn coin(&self, node: usize, site: usize) -> u8 {
        (derive_seed(self.seed, Domain::Tie, node as u64, site as u64) >> 63) as u8
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_key_same_stream() {
        let mut r1 = substream(7, Domain::Edge, 3);
        let mut r2 = substream(7, Domain::Edge, 3);
        let a: Vec<u64> = (0..8).map(|_| r1.random()).collect();
        let b: Vec<u64> = (0..8).map(|_| r2.random()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn keys_are_separated() {
        let x: u64 = substream(7, Domain::Edge, 3).random();
        assert_ne!(x, substream(7, Domain::Edge, 4).random::<u64>());
        assert_ne!(x, substream(8, Domain::Edge, 3).random::<u64>());
        assert_ne!(x, substream(7, Domain::Root, 3).random::<u64>());
        assert_ne!(x, substream2(7, Domain::Edge, 3, 1).random::<u64>());
    }

    #[test]
    fn tie_coins_are_balanced() {
        let coins = TieCoins::new(99);
        let heads: usize = (0..20_000).map(|s| coins.coin(s % 31, s) as usize).sum();
        // Binomial(20000, 1/2): sd ~ 70.7
        assert!((heads as f64 - 10_000.0).abs() < 4.0 * 70.8, "{heads}");
        assert_eq!(coins.coin(3, 17), TieCoins::new(99).coin(3, 17));
    }
}
