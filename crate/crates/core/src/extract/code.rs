use serde::{Deserialize, Serialize};

use super::gf2k::Gf2k;
use crate::{Error, Result};

/// Reed–Solomon over GF(2^k) concatenated with the Hadamard code.
///
/// The message is cut into k-bit symbols (LSB first) that form the
/// coefficients of a polynomial p of degree ≤ `degree`. Codeword index y has
/// 2k bits: α is the low k bits and z the high k bits, and the codeword bit
/// is ⟨p(α), z⟩ mod 2. The codeword has n̄ = 2^{2k} bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeParams {
    pub n: usize,
    pub k: u32,
    pub degree: usize,
}

impl CodeParams {
    pub fn new(n: usize, k: u32, degree: usize) -> Result<Self> {
        let p = Self { n, k, degree };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        Gf2k::new(self.k)?;
        if self.n == 0 {
            return Err(Error::param("code message length must be ≥ 1"));
        }
        if self.n > (self.degree + 1) * self.k as usize {
            return Err(Error::param(format!(
                "{} message bits exceed {} coefficients of {} bits",
                self.n,
                self.degree + 1,
                self.k
            )));
        }
        if (self.degree as f64) >= (self.k as f64).exp2() {
            return Err(Error::param(format!("degree {} ≥ field size 2^{}", self.degree, self.k)));
        }
        Ok(())
    }

    /// Smallest k whose minimal degree ⌈n/k⌉ − 1 satisfies degree ≤ δ·2^{k+1},
    /// so the relative distance is at least 1/2 − δ.
    pub fn for_distance(n: usize, delta: f64) -> Result<Self> {
        if n == 0 || !(delta > 0.0 && delta < 0.5) {
            return Err(Error::param(format!("for_distance(n={n}, δ={delta})")));
        }
        for k in 1..=127u32 {
            let degree = n.div_ceil(k as usize) - 1;
            if degree as f64 <= delta * ((k + 1) as f64).exp2() {
                return Self::new(n, k, degree);
            }
        }
        Err(Error::param(format!("no field up to 2^127 reaches δ = {delta} for n = {n}")))
    }

    /// log₂ n̄.
    pub fn index_bits(&self) -> u32 {
        2 * self.k
    }

    /// Guaranteed relative distance (1 − degree/2^k)/2.
    pub fn relative_distance(&self) -> f64 {
        (1.0 - self.degree as f64 / (self.k as f64).exp2()) / 2.0
    }

    fn field(&self) -> Gf2k {
        Gf2k::new(self.k).expect("validated field exponent")
    }

    /// Message symbols, padded with zeros to degree + 1 coefficients.
    pub fn coefficients(&self, x: &[bool]) -> Result<Vec<u128>> {
        if x.len() != self.n {
            return Err(Error::LengthMismatch { expected: self.n, actual: x.len() });
        }
        let k = self.k as usize;
        let mut coeffs = vec![0u128; self.degree + 1];
        for (i, &bit) in x.iter().enumerate() {
            if bit {
                coeffs[i / k] |= 1 << (i % k);
            }
        }
        Ok(coeffs)
    }

    pub(crate) fn bit_from_coefficients(&self, coeffs: &[u128], y: &[bool]) -> Result<bool> {
        let k = self.k as usize;
        if y.len() != 2 * k {
            return Err(Error::LengthMismatch { expected: 2 * k, actual: y.len() });
        }
        let word = |bits: &[bool]| bits.iter().enumerate().fold(0u128, |acc, (i, &b)| acc | (b as u128) << i);
        let (alpha, z) = (word(&y[..k]), word(&y[k..]));
        Ok((self.field().eval(coeffs, alpha) & z).count_ones() % 2 == 1)
    }
}

/// Codeword bit at index `y` (2k bits: α then z), without building the codeword.
pub fn code_bit(x: &[bool], y: &[bool], code: &CodeParams) -> Result<bool> {
    code.validate()?;
    code.bit_from_coefficients(&code.coefficients(x)?, y)
}

/// The full codeword, indexed by integers whose bit j is y_j. Limited to 2k ≤ 26.
pub fn rs_hadamard_encode(x: &[bool], code: &CodeParams) -> Result<Vec<bool>> {
    code.validate()?;
    if code.index_bits() > 26 {
        return Err(Error::param(format!("codeword of 2^{} bits is too large to materialise", code.index_bits())));
    }
    let coeffs = code.coefficients(x)?;
    let field = code.field();
    let k = code.k;
    let mask = (1u128 << k) - 1;
    let symbols: Vec<u128> = (0..1u128 << k).map(|alpha| field.eval(&coeffs, alpha)).collect();
    Ok((0..1u128 << (2 * k))
        .map(|idx| (symbols[(idx & mask) as usize] & (idx >> k)).count_ones() % 2 == 1)
        .collect())
}
