use std::f64::consts::{LN_2, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::recon::binary_entropy;
use crate::{Error, Result};

/// Per-bit reconciliation cost charged against the min-entropy rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReconCost {
    /// H(2η).
    TwiceEta,
    /// H(1.1η).
    ElevenTenthsEta,
    /// Measured leakage divided by the raw-key length.
    Empirical { leak_per_bit: f64 },
}

impl ReconCost {
    pub fn per_bit(&self, eta: f64) -> f64 {
        match *self {
            ReconCost::TwiceEta => binary_entropy((2.0 * eta).min(1.0)).unwrap_or(1.0),
            ReconCost::ElevenTenthsEta => binary_entropy((1.1 * eta).min(1.0)).unwrap_or(1.0),
            ReconCost::Empirical { leak_per_bit } => leak_per_bit,
        }
    }
}

/// Which round set the final key length is proportional to.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KeyBasis {
    /// All check rounds, |C| ≈ m/6.
    CheckRounds,
    /// Check rounds outside the Bell set, |C∖B| ≈ (1−γ)m/6.
    CheckMinusBell { bell_fraction: f64 },
}

impl KeyBasis {
    pub fn expected_fraction(&self) -> f64 {
        match *self {
            KeyBasis::CheckRounds => 1.0 / 6.0,
            KeyBasis::CheckMinusBell { bell_fraction } => (1.0 - bell_fraction) / 6.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateModel {
    pub recon_cost: ReconCost,
    pub o_term_constant: f64,
    pub basis: KeyBasis,
}

impl Default for RateModel {
    fn default() -> Self {
        Self {
            recon_cost: ReconCost::TwiceEta,
            o_term_constant: 4.0,
            basis: KeyBasis::CheckMinusBell { bell_fraction: 0.0 },
        }
    }
}

impl RateModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.o_term_constant >= 0.0) {
            return Err(Error::param(format!("o_term_constant {} must be ≥ 0", self.o_term_constant)));
        }
        if let ReconCost::Empirical { leak_per_bit } = self.recon_cost {
            if !(leak_per_bit >= 0.0) {
                return Err(Error::param(format!("leak_per_bit {leak_per_bit} must be ≥ 0")));
            }
        }
        if let KeyBasis::CheckMinusBell { bell_fraction } = self.basis {
            if !(0.0..=1.0).contains(&bell_fraction) {
                return Err(Error::param(format!("bell_fraction {bell_fraction} outside [0,1]")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeyRate {
    pub kappa_bound: f64,
    pub final_len_per_m: f64,
}

fn check_ranges(eta: f64, eps: f64, m: usize) -> Result<()> {
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::param(format!("η = {eta} must be ≥ 0")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::param(format!("ε = {eps} outside (0,1)")));
    }
    if m == 0 {
        return Err(Error::param("m must be ≥ 1"));
    }
    Ok(())
}

/// (√2−1)/(4 ln 2) − (4/ln 2)·η, clamped at zero.
pub fn kappa_bound(eta: f64) -> f64 {
    ((SQRT_2 - 1.0) / (4.0 * LN_2) - 4.0 / LN_2 * eta).max(0.0)
}

/// The η at which [`kappa_bound`] reaches zero: (√2−1)/16.
pub fn kappa_zero_crossing() -> f64 {
    (SQRT_2 - 1.0) / 16.0
}

/// κ − recon_cost(η) − o·log₂(1/ε)/m, before clamping and scaling by the basis.
pub fn rate_margin(eta: f64, eps: f64, m: usize, model: &RateModel) -> Result<f64> {
    margin_for_kappa(kappa_bound(eta), eta, eps, m, model)
}

fn margin_for_kappa(kappa: f64, eta: f64, eps: f64, m: usize, model: &RateModel) -> Result<f64> {
    check_ranges(eta, eps, m)?;
    model.validate()?;
    Ok(kappa - model.recon_cost.per_bit(eta) - model.o_term_constant * (1.0 / eps).log2() / m as f64)
}

pub fn key_rate(eta: f64, eps: f64, m: usize, model: &RateModel) -> Result<KeyRate> {
    let margin = rate_margin(eta, eps, m, model)?;
    Ok(KeyRate { kappa_bound: kappa_bound(eta), final_len_per_m: margin.max(0.0) * model.basis.expected_fraction() })
}

/// Final key length for a concrete raw-key basis of `basis_size` bits.
pub fn final_key_length(eta: f64, eps: f64, m: usize, basis_size: usize, model: &RateModel) -> Result<usize> {
    key_length_for_kappa(kappa_bound(eta), eta, eps, m, basis_size, model)
}

/// As [`final_key_length`] with an explicit min-entropy rate in place of the bound.
pub fn key_length_for_kappa(kappa: f64, eta: f64, eps: f64, m: usize, basis_size: usize, model: &RateModel) -> Result<usize> {
    let margin = margin_for_kappa(kappa, eta, eps, m, model)?;
    Ok((margin.max(0.0) * basis_size as f64).floor() as usize)
}

/// Smallest η at which `final_len_per_m` reaches zero, by bisection on the margin.
pub fn final_rate_zero_crossing(eps: f64, m: usize, model: &RateModel) -> Result<f64> {
    let mut lo = 0.0;
    let mut hi = kappa_zero_crossing();
    if rate_margin(lo, eps, m, model)? <= 0.0 {
        return Ok(0.0);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rate_margin(mid, eps, m, model)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
