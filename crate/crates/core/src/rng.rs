//! Reproducible random streams.
//!
//! Every random draw in a sweep comes from a stream keyed by
//! `(master_seed, grid_index, trial_index, role)`, so results never depend on
//! how trials are scheduled across worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamRole {
    Geometry,
    Signal,
    Dither,
    FixedChannel,
    VqTraining,
    VqEvaluation,
    Validation,
}

impl StreamRole {
    fn tag(self) -> u64 {
        match self {
            StreamRole::Geometry => 0x67656f,
            StreamRole::Signal => 0x736967,
            StreamRole::Dither => 0x646974,
            StreamRole::FixedChannel => 0x636868,
            StreamRole::VqTraining => 0x767174,
            StreamRole::VqEvaluation => 0x767165,
            StreamRole::Validation => 0x76616c,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hashes the stream key into a 64-bit seed.
pub fn derive_seed(master_seed: u64, grid_index: u64, trial_index: u64, role: StreamRole) -> u64 {
    [grid_index, trial_index, role.tag()]
        .into_iter()
        .fold(splitmix64(master_seed), |acc, word| splitmix64(acc ^ splitmix64(word)))
}

pub fn stream(master_seed: u64, grid_index: u64, trial_index: u64, role: StreamRole) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(master_seed, grid_index, trial_index, role))
}

pub fn seeded(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible() {
        let a: Vec<u64> = stream(7, 1, 2, StreamRole::Signal).random_iter().take(4).collect();
        let b: Vec<u64> = stream(7, 1, 2, StreamRole::Signal).random_iter().take(4).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn key_components_all_matter() {
        let base = derive_seed(7, 1, 2, StreamRole::Signal);
        assert_ne!(base, derive_seed(8, 1, 2, StreamRole::Signal));
        assert_ne!(base, derive_seed(7, 2, 2, StreamRole::Signal));
        assert_ne!(base, derive_seed(7, 1, 3, StreamRole::Signal));
        assert_ne!(base, derive_seed(7, 1, 2, StreamRole::Dither));
        // grid/trial must not commute
        assert_ne!(derive_seed(7, 1, 2, StreamRole::Signal), derive_seed(7, 2, 1, StreamRole::Signal));
    }
}
