//! Named substream derivation so every randomized component draws from an
//! independent, reproducible stream rooted at the single run seed.

/// Derives a substream seed from the run seed and a stream tag.
///
/// The tag is hashed with FNV-1a, mixed with the seed, and finalized with
/// SplitMix64 so that related tags ("fold0", "fold1") land far apart.
pub fn substream(seed: u64, tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in tag.as_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(seed ^ h)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
