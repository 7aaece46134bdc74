//! Bit-string helpers. Bits are packed little-endian within bytes: bit `i`
//! lives in byte `i / 8` at position `i % 8`.

pub fn pack_le(bits: &[bool]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (i, &bit) in bits.iter().enumerate() {
        if bit {
            out[i / 8] |= 1 << (i % 8);
        }
    }
    out
}

/// Unpacks the first `len` bits of `bytes`. Missing bytes read as zero.
pub fn unpack_le(bytes: &[u8], len: usize) -> Vec<bool> {
    (0..len)
        .map(|i| bytes.get(i / 8).is_some_and(|b| b & (1 << (i % 8)) != 0))
        .collect()
}

pub fn to_hex(bits: &[bool]) -> String {
    hex::encode(pack_le(bits))
}

/// Packs bits into 64-bit words, LSB first.
pub fn pack_words(bits: &[bool]) -> Vec<u64> {
    let mut out = vec![0u64; bits.len().div_ceil(64)];
    for (i, &bit) in bits.iter().enumerate() {
        if bit {
            out[i / 64] |= 1 << (i % 64);
        }
    }
    out
}

pub fn parity(bits: impl IntoIterator<Item = bool>) -> bool {
    bits.into_iter().fold(false, |acc, b| acc ^ b)
}

pub fn hamming_distance(a: &[bool], b: &[bool]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

pub fn xor(a: &[bool], b: &[bool]) -> Vec<bool> {
    a.iter().zip(b).map(|(x, y)| x ^ y).collect()
}
