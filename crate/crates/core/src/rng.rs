//! Named, independent random streams.
//!
//! Every random process in a run (topology draws, failure masks, delays, cost
//! parameters) pulls from its own ChaCha stream keyed by `(seed, tag)`, so
//! enabling one adversity never shifts the draws of another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// FNV-1a over the tag bytes.
fn tag_id(tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream for one purpose within a run.
pub fn stream(seed: u64, tag: &str) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tag_id(tag));
    rng
}

/// Stream for the `index`-th member of a family (trials, topology slots).
pub fn substream(seed: u64, tag: &str, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(index.wrapping_add(1))));
    rng.set_stream(tag_id(tag));
    rng
}
