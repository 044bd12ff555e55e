//! Seeded random streams.
//!
//! Every random draw in the toolkit comes from a single user seed split into
//! named sub-streams, further keyed by small integers (iteration, node id,
//! trial). Keyed streams make per-node draws independent of evaluation order,
//! which is what lets the samplers run in parallel and lets two adjacent
//! graphs share coins for every node they have in common.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The random generator used throughout the crate.
pub type StreamRng = ChaCha8Rng;

/// Named sub-streams derived from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    Split,
    Init,
    Sampler,
    Noise,
    Audit,
    Eval,
    Graph,
    Experiment,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Split => 0x5350_4c49,
            Stream::Init => 0x494e_4954,
            Stream::Sampler => 0x5341_4d50,
            Stream::Noise => 0x4e4f_4953,
            Stream::Audit => 0x4155_4449,
            Stream::Eval => 0x4556_414c,
            Stream::Graph => 0x4752_4150,
            Stream::Experiment => 0x4558_5052,
        }
    }
}

// splitmix64 finalizer
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream for `(seed, stream, key)`; `index` selects an independent ChaCha
/// stream under that key (typically a node id).
pub fn keyed(seed: u64, stream: Stream, key: u64, index: u64) -> StreamRng {
    let mut bytes = [0u8; 32];
    let words = [
        mix64(seed),
        mix64(seed ^ stream.tag()),
        mix64(key ^ stream.tag().rotate_left(17)),
        mix64(seed.wrapping_add(key).wrapping_mul(0x2545_f491_4f6c_dd1d) ^ stream.tag()),
    ];
    for (chunk, w) in bytes.chunks_exact_mut(8).zip(words) {
        chunk.copy_from_slice(&w.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(bytes);
    rng.set_stream(index);
    rng
}

/// Un-keyed stream, for sequential consumers.
pub fn stream(seed: u64, stream: Stream) -> StreamRng {
    keyed(seed, stream, 0, 0)
}
