use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// e^{−t²/(2Σc_k²)} for a martingale with bounded differences `c`.
pub fn azuma_tail(c: &[f64], t: f64) -> Result<f64> {
    if c.is_empty() || c.iter().any(|&ck| !(ck > 0.0) || !ck.is_finite()) {
        return Err(Error::param("difference bounds must be positive and finite"));
    }
    if !(t >= 0.0) {
        return Err(Error::param(format!("deviation t = {t} must be ≥ 0")));
    }
    let s: f64 = c.iter().map(|ck| ck * ck).sum();
    Ok((-t * t / (2.0 * s)).exp())
}

/// e^{−2β²η²γm}: probability that a random γm-subset under-reports a planted
/// violation excess of (1+β)η by more than βη.
pub fn chernoff_subset(beta: f64, eta: f64, gamma: f64, m: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::param(format!("β = {beta} outside [0,1]")));
    }
    if !(0.0..=1.0).contains(&eta) || !(gamma > 0.0 && gamma <= 1.0) || m == 0 {
        return Err(Error::param(format!("η = {eta}, γ = {gamma}, m = {m} out of range")));
    }
    Ok((-2.0 * beta * beta * eta * eta * gamma * m as f64).exp())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Lemma6Outcome {
    NotApplicable { reason: String },
    Found,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma6Report {
    pub outcome: Lemma6Outcome,
    /// Pr(G) for the maximal good set G.
    pub good_mass: f64,
    /// Members of G, as integers whose bit i is x_{i+1}.
    pub witness: Vec<u32>,
}

/// Exhaustive check over {0,1}^m, m ≤ 14.
///
/// `dist[s]` is the probability of the string whose bit i (LSB first) is the
/// i-th coordinate. A string is good when it has positive mass and
/// Pr(X_i = 0 | X_{<i}) ≥ 1 − η − β holds on at least (1 − δ)m of its
/// coordinates. The claim is that the good strings carry mass at least ε/2
/// whenever e^{−2β²δm} < ε/2 and Pr(Σ X_i ≤ ηm) ≥ ε.
pub fn lemma6_exhaustive_check(dist: &[f64], m: usize, eta: f64, beta: f64, delta: f64, eps: f64) -> Result<Lemma6Report> {
    if m == 0 || m > 14 {
        return Err(Error::param(format!("m = {m} outside 1..=14")));
    }
    if dist.len() != 1 << m {
        return Err(Error::LengthMismatch { expected: 1 << m, actual: dist.len() });
    }
    let total: f64 = dist.iter().sum();
    if dist.iter().any(|&p| !(p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidDistribution(format!("mass {total} over {{0,1}}^{m}")));
    }
    let not_applicable = |reason: String| Lemma6Report {
        outcome: Lemma6Outcome::NotApplicable { reason },
        good_mass: 0.0,
        witness: Vec::new(),
    };
    let tail = (-2.0 * beta * beta * delta * m as f64).exp();
    if !(tail < eps / 2.0) {
        return Ok(not_applicable(format!("e^(-2β²δm) = {tail} ≥ ε/2")));
    }
    let low_weight: f64 = dist
        .iter()
        .enumerate()
        .filter(|(s, _)| (s.count_ones() as f64) <= eta * m as f64 + 1e-12)
        .map(|(_, p)| p)
        .sum();
    if low_weight < eps {
        return Ok(not_applicable(format!("Pr(ΣX ≤ ηm) = {low_weight} < ε")));
    }

    // prefix[i][p]: mass of strings whose low i bits equal p.
    let mut prefix: Vec<Vec<f64>> = vec![Vec::new(); m + 1];
    prefix[m] = dist.to_vec();
    for i in (0..m).rev() {
        let size = 1usize << i;
        let next = &prefix[i + 1];
        prefix[i] = (0..size).map(|p| next[p] + next[p | size]).collect();
    }

    let threshold = 1.0 - eta - beta;
    let required = ((1.0 - delta) * m as f64 - 1e-9).ceil().max(0.0) as usize;
    let mut good_mass = 0.0;
    let mut witness = Vec::new();
    for (s, &p) in dist.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        let mut ok = 0;
        for i in 0..m {
            let p_prefix = s & ((1 << i) - 1);
            // The prefix with bit i cleared has the same integer value.
            let cond = prefix[i + 1][p_prefix] / prefix[i][p_prefix];
            if cond >= threshold - 1e-12 {
                ok += 1;
            }
        }
        if ok >= required {
            good_mass += p;
            witness.push(s as u32);
        }
    }
    let outcome = if good_mass >= eps / 2.0 - 1e-12 { Lemma6Outcome::Found } else { Lemma6Outcome::Failed };
    Ok(Lemma6Report { outcome, good_mass, witness })
}
