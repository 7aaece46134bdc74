use serde::{Deserialize, Serialize};

use super::code::CodeParams;
use super::design::{build_weak_design, WeakDesign};
use crate::{Error, Result};

/// A Trevisan extractor instance: output bit i is the codeword bit indexed by the seed restricted to S_i.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractorConfig {
    pub code: CodeParams,
    pub design: WeakDesign,
}

impl ExtractorConfig {
    pub fn new(code: CodeParams, design: WeakDesign) -> Result<Self> {
        let c = Self { code, design };
        c.validate()?;
        Ok(c)
    }

    /// Code chosen for distance 1/2 − ε²/(32·out_len²) and a design with r = 2.
    pub fn for_source(n: usize, out_len: usize, eps: f64) -> Result<Self> {
        if out_len == 0 {
            return Err(Error::param("extractor output length must be ≥ 1"));
        }
        let delta = eps * eps / (32.0 * (out_len as f64).powi(2));
        let code = CodeParams::for_distance(n, delta)?;
        let design = build_weak_design(code.index_bits() as usize, out_len, 2.0)?;
        Self::new(code, design)
    }

    pub fn validate(&self) -> Result<()> {
        self.code.validate()?;
        if self.design.t != self.code.index_bits() as usize {
            return Err(Error::param(format!(
                "design set size {} differs from codeword index length {}",
                self.design.t,
                self.code.index_bits()
            )));
        }
        Ok(())
    }

    pub fn out_len(&self) -> usize {
        self.design.m()
    }

    pub fn seed_len(&self) -> usize {
        self.design.d
    }
}

pub fn trevisan_extract(x: &[bool], seed: &[bool], config: &ExtractorConfig) -> Result<Vec<bool>> {
    config.validate()?;
    if seed.len() != config.seed_len() {
        return Err(Error::LengthMismatch { expected: config.seed_len(), actual: seed.len() });
    }
    let coeffs = config.code.coefficients(x)?;
    let mut y = vec![false; config.design.t];
    config
        .design
        .sets
        .iter()
        .map(|set| {
            if set.len() != y.len() || set.iter().any(|&e| e as usize >= seed.len()) {
                return Err(Error::param("design set does not fit the seed"));
            }
            for (yj, &e) in y.iter_mut().zip(set) {
                *yj = seed[e as usize];
            }
            config.code.bit_from_coefficients(&coeffs, &y)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::{code_bit, rs_hadamard_encode};
    use crate::rng::stream;
    use rand::Rng;

    fn random_bits(rng: &mut impl Rng, n: usize) -> Vec<bool> {
        (0..n).map(|_| rng.random()).collect()
    }

    #[test]
    fn single_output_is_one_code_bit() {
        let code = CodeParams::new(40, 5, 7).unwrap();
        let config = ExtractorConfig::new(code, build_weak_design(10, 1, 1.0).unwrap()).unwrap();
        let mut rng = stream(8, 0);
        let x = random_bits(&mut rng, 40);
        let seed = random_bits(&mut rng, config.seed_len());
        let out = trevisan_extract(&x, &seed, &config).unwrap();
        assert_eq!(out, vec![code_bit(&x, &seed, &code).unwrap()]);
    }

    #[test]
    fn matches_full_encoding() {
        let code = CodeParams::new(60, 6, 9).unwrap();
        let config = ExtractorConfig::new(code, build_weak_design(12, 32, 2.0).unwrap()).unwrap();
        let mut rng = stream(9, 0);
        let x = random_bits(&mut rng, 60);
        let seed = random_bits(&mut rng, config.seed_len());
        let word = rs_hadamard_encode(&x, &code).unwrap();
        let via_word: Vec<bool> = config
            .design
            .sets
            .iter()
            .map(|s| word[s.iter().enumerate().fold(0usize, |acc, (j, &e)| acc | (seed[e as usize] as usize) << j)])
            .collect();
        let out = trevisan_extract(&x, &seed, &config).unwrap();
        assert_eq!(out, via_word);
        assert_eq!(out, trevisan_extract(&x, &seed, &config).unwrap());
    }

    #[test]
    fn dimension_checks() {
        let code = CodeParams::new(40, 5, 7).unwrap();
        assert!(ExtractorConfig::new(code, build_weak_design(8, 4, 2.0).unwrap()).is_err());
        let config = ExtractorConfig::new(code, build_weak_design(10, 4, 2.0).unwrap()).unwrap();
        assert!(trevisan_extract(&[false; 40], &[false; 3], &config).is_err());
        assert!(trevisan_extract(&[false; 39], &vec![false; config.seed_len()], &config).is_err());
        assert_eq!(trevisan_extract(&[false; 40], &vec![true; config.seed_len()], &config).unwrap(), vec![false; 4]);
    }

    #[test]
    fn config_json_roundtrip() {
        let config = ExtractorConfig::for_source(256, 16, 0.01).unwrap();
        let json = serde_json::to_string(&config).unwrap();
        assert_eq!(serde_json::from_str::<ExtractorConfig>(&json).unwrap(), config);
    }
}
