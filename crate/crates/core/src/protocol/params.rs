use serde::{Deserialize, Serialize};

use super::messages::PaBackend;
use crate::analysis::{kappa_bound, RateModel};
use crate::recon::ReconConfig;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolParams {
    pub m: usize,
    pub eps: f64,
    /// Tolerated deficit of the Bell-round satisfaction below opt.
    pub eta: f64,
    pub c_gamma: f64,
    /// Min-entropy rate for the final key length; `None` uses the bound at `eta`.
    pub kappa: Option<f64>,
    pub rate_model: RateModel,
    pub recon: ReconConfig,
    /// Reconciliation assumes an error rate of `recon_q_factor · eta`.
    pub recon_q_factor: f64,
    pub pa: PaBackend,
    /// When false the Bell test is evaluated but never aborts.
    pub enforce_bell_test: bool,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self {
            m: 120_000,
            eps: 1e-6,
            eta: 0.005,
            c_gamma: 0.05,
            kappa: None,
            rate_model: RateModel::default(),
            recon: ReconConfig::default(),
            recon_q_factor: 1.1,
            pa: PaBackend::Toeplitz,
            enforce_bell_test: true,
        }
    }
}

impl ProtocolParams {
    /// (C_γ/η²)·ln(1/ε)/m.
    pub fn gamma(&self) -> f64 {
        self.c_gamma / (self.eta * self.eta) * (1.0 / self.eps).ln() / self.m as f64
    }

    /// round(γm), ties to even.
    pub fn bell_size(&self) -> usize {
        ((self.gamma() * self.m as f64).round_ties_even() as usize).min(self.m)
    }

    /// Chooses C_γ so that round(γm) = `size`.
    pub fn with_bell_size(mut self, size: usize) -> Self {
        self.c_gamma = size as f64 * self.eta * self.eta / (1.0 / self.eps).ln();
        self
    }

    pub fn kappa(&self) -> f64 {
        self.kappa.unwrap_or_else(|| kappa_bound(self.eta))
    }

    pub fn q_est(&self) -> f64 {
        (self.recon_q_factor * self.eta).min(0.25)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::param("m must be ≥ 1"));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::param(format!("ε = {} outside (0,1)", self.eps)));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::param(format!("η = {} outside (0,1)", self.eta)));
        }
        if !(self.c_gamma > 0.0) || !self.c_gamma.is_finite() {
            return Err(Error::param(format!("C_γ = {} must be positive", self.c_gamma)));
        }
        let gamma = self.gamma();
        if gamma > 1.0 + 1e-12 {
            return Err(Error::param(format!("γ = {gamma} exceeds 1; lower C_γ or raise m")));
        }
        if self.bell_size() < 1 {
            return Err(Error::param(format!("γm = {} rounds to zero Bell rounds", gamma * self.m as f64)));
        }
        if let Some(k) = self.kappa {
            if !(k >= 0.0) {
                return Err(Error::param(format!("κ = {k} must be ≥ 0")));
            }
        }
        if !(self.recon_q_factor >= 0.0) {
            return Err(Error::param("recon_q_factor must be ≥ 0"));
        }
        self.rate_model.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_sizes() {
        let p = ProtocolParams::default();
        p.validate().unwrap();
        assert!((p.gamma() - 0.230_26).abs() < 1e-4);
        assert_eq!(p.bell_size(), 27_631);
    }

    #[test]
    fn with_bell_size_hits_target() {
        for size in [1, 500, 4000, 20_000] {
            let p = ProtocolParams { m: 60_000, ..ProtocolParams::default() }.with_bell_size(size);
            assert_eq!(p.bell_size(), size);
        }
    }

    #[test]
    fn invalid_parameters() {
        let base = ProtocolParams::default();
        assert!(ProtocolParams { m: 0, ..base.clone() }.validate().is_err());
        assert!(ProtocolParams { eps: 1.0, ..base.clone() }.validate().is_err());
        assert!(ProtocolParams { eta: 0.0, ..base.clone() }.validate().is_err());
        assert!(ProtocolParams { c_gamma: 20.0, ..base.clone() }.validate().is_err());
        assert!(ProtocolParams { m: 10, c_gamma: 1e-9, ..base.clone() }.validate().is_err());
        assert!(ProtocolParams { kappa: Some(-1.0), ..base }.validate().is_err());
    }
}
