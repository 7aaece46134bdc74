use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::pack_words;
use crate::{Error, Result};

/// Diagonal-constant matrix of shape ℓ×n over GF(2) with entry (i, j) = `bits[i − j + n − 1]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToeplitzSeed {
    pub bits: Vec<bool>,
}

impl ToeplitzSeed {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn random<R: Rng + ?Sized>(n: usize, out_len: usize, rng: &mut R) -> Self {
        let len = (n + out_len).saturating_sub(1);
        Self { bits: (0..len).map(|_| rng.random()).collect() }
    }

    pub fn required_len(n: usize, out_len: usize) -> usize {
        (n + out_len).saturating_sub(1)
    }
}

fn window(words: &[u64], offset: usize) -> u64 {
    let (w, s) = (offset / 64, offset % 64);
    let lo = words.get(w).copied().unwrap_or(0);
    if s == 0 {
        lo
    } else {
        (lo >> s) | (words.get(w + 1).copied().unwrap_or(0) << (64 - s))
    }
}

/// GF(2) matrix-vector product of the seed's Toeplitz matrix with `x`.
pub fn toeplitz_hash(x: &[bool], seed: &ToeplitzSeed, out_len: usize) -> Result<Vec<bool>> {
    let n = x.len();
    if out_len == 0 {
        return Ok(Vec::new());
    }
    if n == 0 {
        return Err(Error::param("Toeplitz input must be non-empty"));
    }
    let need = ToeplitzSeed::required_len(n, out_len);
    if seed.bits.len() != need {
        return Err(Error::LengthMismatch { expected: need, actual: seed.bits.len() });
    }
    // out_i = ⊕_k seed[i + k] · x[n − 1 − k]
    let reversed: Vec<bool> = x.iter().rev().copied().collect();
    let xr = pack_words(&reversed);
    let s = pack_words(&seed.bits);
    Ok((0..out_len)
        .map(|i| {
            let mut acc = 0u64;
            for (w, &xw) in xr.iter().enumerate() {
                acc ^= window(&s, i + 64 * w) & xw;
            }
            acc.count_ones() % 2 == 1
        })
        .collect())
}
