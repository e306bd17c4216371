//! Deterministic seed derivation for independent random streams.

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of stream `index` under `base`; distinct indices give unrelated streams.
pub fn child_seed(base: u64, index: u64) -> u64 {
    mix64(mix64(base) ^ index)
}

/// Seed derived from a base seed and a textual label (e.g. a cell id).
pub fn labelled_seed(base: u64, label: &str) -> u64 {
    // FNV-1a over the label, then mixed with the base.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    child_seed(base, h)
}
