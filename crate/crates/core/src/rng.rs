//! Deterministic RNG stream derivation.
//!
//! Every stochastic feature of every link draws from its own stream, keyed by
//! `(master seed, link id, feature)`. Runs are bit-reproducible under a fixed
//! master seed, links can be processed in any order (or in parallel), and
//! enabling one feature never perturbs the draws of another.
//!
//! Link ids are unordered: the stream for (a, b) equals the stream for
//! (b, a), so exchanging tx/rx roles reproduces the same parameters.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// One independent random stream per feature of a link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feature {
    /// LOS/NLOS probability draw.
    LosDraw,
    /// Shadow-fading filter innovations.
    Shadowing,
    /// O2I penetration random term and indoor distance.
    O2i,
    /// Correlated large-scale parameter draw.
    Lsp,
    /// Steps 5-11 of the fading procedure (delays, powers, angles,
    /// coupling, phases) and the power-method start vector.
    Fading,
    /// Blocker region generation and motion.
    Blockage,
}

impl Feature {
    fn id(self) -> u64 {
        match self {
            Feature::LosDraw => 1,
            Feature::Shadowing => 2,
            Feature::O2i => 3,
            Feature::Lsp => 4,
            Feature::Fading => 5,
            Feature::Blockage => 6,
        }
    }
}

/// splitmix64 step; good avalanche, cheap, stable across platforms.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Derive the seed for a `(link, feature)` stream from the master seed.
pub fn stream_seed(master: u64, node_a: usize, node_b: usize, feature: Feature) -> u64 {
    let (lo, hi) = if node_a <= node_b {
        (node_a as u64, node_b as u64)
    } else {
        (node_b as u64, node_a as u64)
    };
    let mut s = splitmix64(master);
    s = splitmix64(s ^ lo);
    s = splitmix64(s ^ hi);
    splitmix64(s ^ feature.id())
}

/// RNG for one `(link, feature)` stream.
pub fn stream(master: u64, node_a: usize, node_b: usize, feature: Feature) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(stream_seed(master, node_a, node_b, feature))
}
