//! Deterministic random substreams.
//!
//! Every unit of stochastic work (one simulated dataset, one bootstrap
//! resample) draws from its own ChaCha8 stream keyed by the user seed and a
//! path of indices, so results do not depend on how work is scheduled across
//! threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a sequence of words into one well-mixed word.
pub fn mix(words: &[u64]) -> u64 {
    words.iter().fold(0x6A09_E667_F3BC_C909, |acc, &w| {
        splitmix64(acc ^ splitmix64(w))
    })
}

/// Generator for the unit of work addressed by `path` under `seed`.
///
/// All but the last path element select the key; the last selects the
/// ChaCha stream, so sibling units share a key and differ only in stream.
pub fn substream(seed: u64, path: &[u64]) -> ChaCha8Rng {
    let (prefix, stream) = match path.split_last() {
        Some((last, rest)) => (rest, *last),
        None => (&[][..], 0),
    };
    let mut state = splitmix64(seed);
    for &p in prefix {
        state = splitmix64(state ^ splitmix64(p));
    }
    let mut key = [0u8; 32];
    for (i, chunk) in key.chunks_exact_mut(8).enumerate() {
        state = splitmix64(state.wrapping_add(i as u64));
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}

/// Independent equiprobable ±1 weights, 64 per generator word.
pub fn rademacher_vector<R: RngCore + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let mut bits = rng.next_u64();
        for _ in 0..(n - out.len()).min(64) {
            out.push(if bits & 1 == 1 { 1.0 } else { -1.0 });
            bits >>= 1;
        }
    }
    out
}
