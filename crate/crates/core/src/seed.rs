//! Labeled seed derivation.
//!
//! Every random stream in the engine is derived from one root seed plus a
//! label and a list of indices, so the stream a computation sees depends only
//! on *what* it is (e.g. `("episode", [run, iteration, task])`) and never on
//! scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable 64-bit hash of a byte string (FNV-1a).
pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Derives a child seed from `root`, a component label and indices.
pub fn derive_seed(root: u64, label: &str, indices: &[u64]) -> u64 {
    let mut state = splitmix64(root ^ fnv1a(label.as_bytes()));
    for &i in indices {
        state = splitmix64(state ^ splitmix64(i.wrapping_add(0x632b_e59b_d9b4_e019)));
    }
    state
}

pub fn rng_from(root: u64, label: &str, indices: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(root, label, indices))
}

pub fn rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}
