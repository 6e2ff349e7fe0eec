//! Named random streams.
//!
//! Every random decision in the lab flows through a [`Stream`]: a ChaCha8
//! counter-based generator whose 64-bit stream id is derived from a name
//! such as `"library"`, `"train"`, or `"eval.icl"`. Streams under the same
//! seed are independent, any stream can be consumed without disturbing the
//! others, and the (seed, name, word position) triple pins the generator
//! state exactly, which is what checkpoint resume relies on.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// FNV-1a, used only to turn stream names into ChaCha stream ids.
fn stream_id(name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Create the named stream for a seed, positioned at its start.
pub fn stream(seed: u64, name: &str) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(name));
    rng
}

/// Standard normal draw via the polar method.
///
/// Only `ln` and `sqrt` are involved, so the sequence is reproducible for a
/// given target. Consumes a data-dependent number of uniforms; callers that
/// checkpoint mid-stream record the word position, not a draw count.
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u = 2.0 * rng.gen::<f64>() - 1.0;
        let v = 2.0 * rng.gen::<f64>() - 1.0;
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            return u * (-2.0 * s.ln() / s).sqrt();
        }
    }
}
