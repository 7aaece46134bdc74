use crate::{Error, Result};

/// Middle exponents of a lowest-weight irreducible polynomial of each degree
/// k = 1..=127; the modulus is x^k + Σ x^e + 1.
const TAPS: [&[u32]; 127] = [
    &[0], &[1], &[1], &[1], &[2], &[1], &[1], &[4, 3, 1],
    &[1], &[3], &[2], &[3], &[4, 3, 1], &[5], &[1], &[5, 3, 1],
    &[3], &[3], &[5, 2, 1], &[3], &[2], &[1], &[5], &[4, 3, 1],
    &[3], &[4, 3, 1], &[5, 2, 1], &[1], &[2], &[1], &[3], &[7, 3, 2],
    &[10], &[7], &[2], &[9], &[6, 4, 1], &[6, 5, 1], &[4], &[5, 4, 3],
    &[3], &[7], &[6, 4, 3], &[5], &[4, 3, 1], &[1], &[5], &[5, 3, 2],
    &[9], &[4, 3, 2], &[6, 3, 1], &[3], &[6, 2, 1], &[9], &[7], &[7, 4, 2],
    &[4], &[19], &[7, 4, 2], &[1], &[5, 2, 1], &[29], &[1], &[4, 3, 1],
    &[18], &[3], &[5, 2, 1], &[9], &[6, 5, 2], &[5, 3, 1], &[6], &[10, 9, 3],
    &[25], &[35], &[6, 3, 1], &[21], &[6, 5, 2], &[6, 5, 3], &[9], &[9, 4, 2],
    &[4], &[8, 3, 1], &[7, 4, 2], &[5], &[8, 2, 1], &[21], &[13], &[7, 6, 2],
    &[38], &[27], &[8, 5, 1], &[21], &[2], &[21], &[11], &[10, 9, 6],
    &[6], &[11], &[6, 3, 1], &[15], &[7, 6, 1], &[29], &[9], &[4, 3, 1],
    &[4], &[15], &[9, 7, 4], &[17], &[5, 4, 2], &[33], &[10], &[5, 4, 3],
    &[9], &[5, 3, 2], &[8, 7, 5], &[4, 2, 1], &[5, 2, 1], &[33], &[8], &[4, 3, 1],
    &[18], &[6, 2, 1], &[2], &[19], &[7, 6, 5], &[21], &[1],];

/// Arithmetic in GF(2^k) for k ≤ 127, elements as polynomials in the low k bits of a u128.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Gf2k {
    k: u32,
    /// Modulus without its leading x^k term.
    low: u128,
}

impl Gf2k {
    pub fn new(k: u32) -> Result<Self> {
        if !(1..=127).contains(&k) {
            return Err(Error::param(format!("field exponent {k} outside 1..=127")));
        }
        let low = TAPS[k as usize - 1].iter().fold(1u128, |acc, &e| acc | 1 << e);
        Ok(Self { k, low })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    /// The full modulus polynomial, including x^k.
    pub fn modulus(&self) -> u128 {
        1 << self.k | self.low
    }

    fn mask(&self) -> u128 {
        (1u128 << self.k) - 1
    }

    fn times_x(&self, a: u128) -> u128 {
        let shifted = a << 1;
        if shifted >> self.k & 1 == 1 {
            (shifted ^ self.low) & self.mask()
        } else {
            shifted
        }
    }

    pub fn mul(&self, a: u128, b: u128) -> u128 {
        let mut acc = 0u128;
        for i in (0..self.k).rev() {
            acc = self.times_x(acc);
            if b >> i & 1 == 1 {
                acc ^= a;
            }
        }
        acc
    }

    /// Horner evaluation of Σ coeffs[i]·α^i.
    pub fn eval(&self, coeffs: &[u128], alpha: u128) -> u128 {
        coeffs.iter().rev().fold(0, |acc, &c| self.mul(acc, alpha) ^ c)
    }
}

fn degree(p: u128) -> i32 {
    127 - p.leading_zeros() as i32
}

fn poly_rem(mut a: u128, m: u128) -> u128 {
    let dm = degree(m);
    while a != 0 && degree(a) >= dm {
        a ^= m << (degree(a) - dm);
    }
    a
}

fn poly_gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, poly_rem(a, b));
    }
    a
}

fn prime_factors(mut n: u32) -> Vec<u32> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            out.push(d);
            while n.is_multiple_of(d) {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// Rabin's test: x^(2^k) ≡ x and gcd(x^(2^(k/p)) − x, f) = 1 for every prime p | k.
pub fn is_irreducible(field: &Gf2k) -> bool {
    let k = field.k;
    if k == 1 {
        return true;
    }
    let x = 2u128;
    let frobenius = |j: u32| (0..j).fold(x, |acc, _| field.mul(acc, acc));
    if frobenius(k) != x {
        return false;
    }
    prime_factors(k).into_iter().all(|p| poly_gcd(field.modulus(), frobenius(k / p) ^ x) == 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn every_table_entry_is_irreducible() {
        for k in 1..=127 {
            assert!(is_irreducible(&Gf2k::new(k).unwrap()), "k={k}");
        }
    }

    #[test]
    fn rabin_rejects_reducible() {
        // x^4 + x^2 + 1 = (x^2 + x + 1)^2 and x^8 + 1 = (x + 1)^8.
        assert!(!is_irreducible(&Gf2k { k: 4, low: 0b101 }));
        assert!(!is_irreducible(&Gf2k { k: 8, low: 1 }));
        assert!(Gf2k::new(0).is_err());
        assert!(Gf2k::new(128).is_err());
    }

    #[test]
    fn aes_field_products() {
        // GF(2^8) with x^8 + x^4 + x^3 + x + 1.
        let f = Gf2k::new(8).unwrap();
        assert_eq!(f.modulus(), 0x11b);
        assert_eq!(f.mul(0x57, 0x83), 0xc1);
        assert_eq!(f.mul(0x57, 0x13), 0xfe);
    }

    #[test]
    fn multiplicative_group_order() {
        // a^(2^k − 1) = 1 for every non-zero a.
        for k in [3u32, 5, 7, 13] {
            let f = Gf2k::new(k).unwrap();
            for a in 1..(1u128 << k).min(200) {
                let mut p = 1u128;
                for _ in 0..(1u64 << k) - 1 {
                    p = f.mul(p, a);
                }
                assert_eq!(p, 1, "k={k} a={a}");
            }
        }
    }

    proptest! {
        #[test]
        fn field_axioms(k in 1u32..=127, a in any::<u128>(), b in any::<u128>(), c in any::<u128>()) {
            let f = Gf2k::new(k).unwrap();
            let m = f.mask();
            let (a, b, c) = (a & m, b & m, c & m);
            prop_assert_eq!(f.mul(a, b), f.mul(b, a));
            prop_assert_eq!(f.mul(a, b ^ c), f.mul(a, b) ^ f.mul(a, c));
            prop_assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
            prop_assert_eq!(f.mul(a, 1), a);
            prop_assert!(f.mul(a, b) <= m);
        }
    }
}
