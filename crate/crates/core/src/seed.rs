//! Stable seed derivation.
//!
//! Every random object in the crate is a pure function of a 64-bit seed. Sub-seeds
//! for trials and sub-experiments are derived by mixing words through SplitMix64,
//! which is stable across platforms and releases (unlike `std::hash`).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random generator used for every seeded construction.
pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over the bytes of a tag, used to fold string identifiers into a seed.
pub fn tag_hash(tag: &str) -> u64 {
    tag.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Order-sensitive mix of a sequence of words.
pub fn stable_hash(words: &[u64]) -> u64 {
    words
        .iter()
        .fold(0x6A09_E667_F3BC_C908u64, |acc, &w| splitmix64(acc ^ splitmix64(w)))
}

/// First `k` entries of a seeded Fisher-Yates shuffle of `0..n`.
pub fn sample_without_replacement(rng: &mut SeededRng, n: usize, k: usize) -> Vec<usize> {
    use rand::Rng;
    assert!(k <= n, "cannot draw {k} of {n}");
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    idx.truncate(k);
    idx
}
