//! Seeded random streams.
//!
//! Every random draw comes from ChaCha20 (a counter-based generator) seeded
//! with `ChaCha20Rng::seed_from_u64(seed)` and switched to an explicit
//! 64-bit stream with `set_stream`. Streams are assigned by work-item index,
//! never by scheduling order:
//!
//! | purpose                        | stream                                  |
//! |--------------------------------|-----------------------------------------|
//! | bootstrap replicate `b`        | `b`                                     |
//! | ensemble members, size `s`, rep `r` | `MEMBER_BASE + (s << 24) + r`      |
//! | synthetic test-point latents   | `SYNTH_BASE`                            |
//! | synthetic model `k`            | `SYNTH_BASE + 1 + k`                    |

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type StreamRng = ChaCha20Rng;

pub const MEMBER_BASE: u64 = 1 << 40;
pub const SYNTH_BASE: u64 = 1 << 48;

pub fn substream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn replicate_stream(seed: u64, replicate: usize) -> StreamRng {
    substream(seed, replicate as u64)
}

pub fn member_stream(seed: u64, size_index: usize, rep: usize) -> StreamRng {
    substream(seed, MEMBER_BASE + ((size_index as u64) << 24) + rep as u64)
}
