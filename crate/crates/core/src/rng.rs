//! Deterministic random-number streams.
//!
//! All randomness flows through ChaCha12, a counter-based stream-cipher RNG.
//! A 64-bit master seed is expanded to the 256-bit ChaCha key with SplitMix64;
//! independent streams (one per Monte-Carlo trial or worker) select distinct
//! ChaCha stream ids, so parallel workers never share state and results do
//! not depend on scheduling.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type Stream = ChaCha12Rng;

/// RNG stream `stream_id` of the generator family keyed by `master_seed`.
pub fn stream(master_seed: u64, stream_id: u64) -> Stream {
    let mut key = [0u8; 32];
    let mut state = master_seed;
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha12Rng::from_seed(key);
    rng.set_stream(stream_id);
    rng
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
