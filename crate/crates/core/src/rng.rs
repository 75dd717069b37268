//! Seeded, named random streams.
//!
//! Every consumer of randomness draws from its own substream so that adding
//! draws in one place never shifts the numbers seen elsewhere.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// FNV-1a, used only to turn stream names into stream ids.
fn stream_id(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

/// The generator for substream `name` under master seed `seed`.
pub fn substream(seed: u64, name: &str) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(name));
    rng
}

/// Substream `name`, chunk `index`: used to keep parallel sampling
/// independent of thread scheduling.
pub fn chunk_stream(seed: u64, name: &str, index: u64) -> ChaCha20Rng {
    let mut rng = substream(seed, name);
    rng.set_word_pos((index as u128) << 40);
    rng
}
