//! Deterministic, splittable random streams.
//!
//! Every random draw in the harness comes from a ChaCha20 stream keyed by the
//! master seed and addressed by `(purpose, replication)`. Two different
//! purposes never share a stream, so the design of replication 3 is the same
//! regardless of how many noise draws replication 2 consumed, or which worker
//! thread ran it.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type Stream = ChaCha20Rng;

/// What a stream is used for. The discriminant is part of the stream address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Purpose {
    Signal = 1,
    Delta = 2,
    Design = 3,
    Noise = 4,
    Concentration = 5,
    Auxiliary = 6,
}

const REPLICATION_BITS: u32 = 56;

/// Opens the stream for `(master_seed, replication, purpose)`.
///
/// Panics if `replication` does not fit in 56 bits.
pub fn stream(master_seed: u64, replication: u64, purpose: Purpose) -> Stream {
    assert!(
        replication < (1 << REPLICATION_BITS),
        "replication index out of range"
    );
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream(((purpose as u64) << REPLICATION_BITS) | replication);
    rng
}
