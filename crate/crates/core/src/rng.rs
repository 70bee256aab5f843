//! Deterministic random substreams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator keyed by the
//! user seed, with the stream id built from the replicate index and a purpose
//! tag. Replicates therefore never share state and can run in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a substream is used for; distinct purposes never overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Loadings = 1,
    Factors = 2,
    Errors = 3,
    ErrorScales = 4,
    Bootstrap = 5,
    Other = 15,
}

/// Generator for (seed, replicate, purpose).
pub fn substream(seed: u64, replicate: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((replicate << 4) | purpose as u64);
    rng
}
