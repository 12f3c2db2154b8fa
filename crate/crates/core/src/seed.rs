//! Deterministic seed derivation for independent random substreams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of substream `stream` under `master`. Distinct streams give
/// unrelated seeds; the mapping never depends on evaluation order.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    splitmix64(master ^ splitmix64(stream))
}

/// Seed for a path of stream indices, e.g. `[outer_fold, family, grid_point]`.
pub fn derive_path(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(master, |s, &p| derive_seed(s, p))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
