//! Per-path random streams.
//!
//! Path `i` of a run with master seed `s` draws from ChaCha8 keyed by
//! `seed_from_u64(s)` on stream number `i`. Streams are independent and the
//! mapping does not depend on how paths are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type PathRng = ChaCha8Rng;

/// Stream reserved for draws that do not belong to a path.
pub const AUXILIARY_STREAM: u64 = u64::MAX;

pub fn path_rng(seed: u64, index: u64) -> PathRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
