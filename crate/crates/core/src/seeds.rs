//! Seed derivation. Every random stream is a ChaCha8 generator keyed by a
//! master seed, a domain tag and an index, so parallel tasks stay reproducible
//! regardless of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Independent stream families derived from one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Trial = 1,
    Codebook = 2,
    Verification = 3,
    Derandomize = 4,
    Estimator = 5,
    State = 6,
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream `index` of `domain` under `master`.
pub fn derived_rng(master: u64, domain: Domain, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(master ^ splitmix(domain as u64)));
    rng.set_stream(index);
    rng
}

/// A derived 64-bit seed, for handing to code that takes plain seeds.
pub fn derived_seed(master: u64, domain: Domain, index: u64) -> u64 {
    splitmix(splitmix(master ^ splitmix(domain as u64)).wrapping_add(index))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
