//! Deterministic RNG sub-streams.
//!
//! Every random draw in the simulator comes from a ChaCha8 stream whose seed
//! is `mix(master, label, index)`. Distinct labels give statistically
//! independent streams, so e.g. the estimation-noise stream can change
//! without perturbing the true gains drawn from the fading stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

pub const UPLINK: &str = "uplink";
pub const CROSS: &str = "cross";
pub const NOISE: &str = "noise";
pub const PRIORS: &str = "priors";
pub const TIES: &str = "ties";
pub const SAMPLE_PATH: &str = "sample-path";

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Child seed for `(master, label, index)`.
pub fn child_seed(master: u64, label: &str, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ fnv1a(label)) ^ splitmix64(index.wrapping_add(0x5851_f42d)))
}

pub fn stream(master: u64, label: &str, index: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(child_seed(master, label, index))
}

/// Inverse-CDF exponential draw: `-mean · ln(1 - u)` with `u ∈ [0, 1)`.
pub fn exponential(rng: &mut Stream, mean: f64) -> f64 {
    use rand::Rng;
    let u: f64 = rng.random();
    -mean * (-u).ln_1p()
}
