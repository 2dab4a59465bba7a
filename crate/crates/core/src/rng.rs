//! Deterministic per-node random streams.
//!
//! Every node owns an independent xoshiro256++ stream derived from
//! `(master_seed, node_id)`, so a chromatic sweep produces the same draws
//! no matter how many worker threads execute it.

use rand_xoshiro::rand_core::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type NodeRng = Xoshiro256PlusPlus;

/// splitmix64 finalizer; decorrelates nearby inputs.
fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derive a child seed from a master seed and a stream tag.
pub fn derive_seed(master_seed: u64, tag: u64) -> u64 {
    mix64(master_seed ^ mix64(tag.wrapping_add(1)))
}

/// The stream for one node. Two mixing rounds keep streams for adjacent
/// node ids far apart in seed space.
pub fn node_stream(master_seed: u64, node_id: u64) -> NodeRng {
    Xoshiro256PlusPlus::seed_from_u64(derive_seed(master_seed, node_id))
}

/// A single general-purpose stream (shuffles, initialization, tasks).
pub fn stream(seed: u64) -> NodeRng {
    Xoshiro256PlusPlus::seed_from_u64(mix64(seed))
}
