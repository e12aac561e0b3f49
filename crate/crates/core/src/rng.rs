//! Stateless keyed random streams.
//!
//! Every stochastic draw in the crate comes from a ChaCha stream whose key is
//! built from a user seed, a domain tag and a position (day, datum). Streams
//! never share state, so concurrent runs and reordered evaluation give
//! identical numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) const DOMAIN_FORECAST_SIGNS: u64 = 0x666f_7265_6361_7374;
pub(crate) const DOMAIN_BEHAVIOR: u64 = 0x6265_6861_7669_6f72;

pub(crate) fn keyed_stream(seed: u64, domain: u64, position: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&domain.to_le_bytes());
    key[16..24].copy_from_slice(&position.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}
