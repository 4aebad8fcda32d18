//! Reflected binary Gray code on two bits: 00, 01, 11, 10 ↔ 0, 1, 2, 3.

/// Maps a 2-bit label (0..=3) to its phase index `k`.
pub fn gray_map(bits: u8) -> u8 {
    let b = bits & 0b11;
    b ^ (b >> 1)
}

/// Inverse of [`gray_map`].
pub fn gray_demap(k: u8) -> u8 {
    // On two bits Gray encoding and decoding are the same map.
    gray_map(k)
}
