use std::f64::consts::{FRAC_PI_8, SQRT_2};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::devices::AngleTable;
use crate::qsim::{outcome_distribution, TwoQubitState};
use crate::{Error, Result};

pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// The per-round output constraint: `a⊕b = x∧y` on {0,1}², `a = b` on (2,1), nothing on (2,0).
pub fn chsh_satisfied(x: u8, y: u8, a: bool, b: bool) -> bool {
    match (x, y) {
        (2, 0) => true,
        (2, 1) => a == b,
        _ => (a ^ b) == (x == 1 && y == 1),
    }
}

/// Best quantum satisfaction probability under uniform inputs: (2/3)cos²(π/8) + 1/3.
pub fn compute_opt() -> f64 {
    2.0 / 3.0 * FRAC_PI_8.cos().powi(2) + 1.0 / 3.0
}

fn deterministic_strategies() -> impl Iterator<Item = ([bool; 3], [bool; 2])> {
    (0u8..8).flat_map(|fa| {
        (0u8..4).map(move |fb| ([fa & 1 == 1, fa & 2 == 2, fa & 4 == 4], [fb & 1 == 1, fb & 2 == 2]))
    })
}

/// Maximum weighted satisfaction over deterministic strategies admitted by `filter`.
///
/// `weights[x][y]` is the (unnormalised) probability of input pair (x, y).
pub fn classical_value(
    weights: &[[u32; 2]; 3],
    filter: impl Fn(&[bool; 3], &[bool; 2]) -> bool,
) -> Ratio<u32> {
    let total: u32 = weights.iter().flatten().sum();
    assert!(total > 0, "input weights must not all be zero");
    let best = deterministic_strategies()
        .filter(|(fa, fb)| filter(fa, fb))
        .map(|(fa, fb)| {
            let mut score = 0;
            for x in 0..3 {
                for y in 0..2 {
                    if chsh_satisfied(x as u8, y as u8, fa[x], fb[y]) {
                        score += weights[x][y];
                    }
                }
            }
            score
        })
        .max()
        .unwrap_or(0);
    Ratio::new(best, total)
}

/// Maximum satisfaction over all 32 deterministic strategies with uniform inputs.
pub fn classical_opt_bruteforce() -> Ratio<u32> {
    classical_value(&[[1; 2]; 3], |_, _| true)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChshEstimate {
    pub fraction: f64,
    pub eta_prime: f64,
}

/// Fraction of rounds in `subset` satisfying the constraint, and its deficit from opt.
pub fn estimate_chsh(x: &[u8], y: &[u8], a: &[bool], b: &[bool], subset: &[usize]) -> Result<ChshEstimate> {
    if subset.is_empty() {
        return Err(Error::param("CHSH estimate over an empty subset"));
    }
    let n = x.len();
    if y.len() != n || a.len() != n || b.len() != n {
        return Err(Error::LengthMismatch { expected: n, actual: y.len().min(a.len()).min(b.len()) });
    }
    let mut satisfied = 0usize;
    for &i in subset {
        if i >= n {
            return Err(Error::param(format!("round {i} outside transcript of length {n}")));
        }
        satisfied += chsh_satisfied(x[i], y[i], a[i], b[i]) as usize;
    }
    let fraction = satisfied as f64 / subset.len() as f64;
    Ok(ChshEstimate { fraction, eta_prime: compute_opt() - fraction })
}

/// Conditional output probabilities `p(a,b|x,y)`, stored `[x][y][a][b]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BehaviorTable {
    pub p: [[[[f64; 2]; 2]; 2]; 3],
}

impl BehaviorTable {
    pub fn new(p: [[[[f64; 2]; 2]; 2]; 3]) -> Result<Self> {
        let t = Self { p };
        t.validate(DEFAULT_TOLERANCE)?;
        Ok(t)
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        for (x, row) in self.p.iter().enumerate() {
            for (y, cell) in row.iter().enumerate() {
                let flat = cell.iter().flatten();
                if flat.clone().any(|&v| v < -tol || !v.is_finite()) {
                    return Err(Error::InvalidDistribution(format!("negative entry at (x,y)=({x},{y})")));
                }
                let sum: f64 = flat.sum();
                if (sum - 1.0).abs() > tol {
                    return Err(Error::InvalidDistribution(format!("(x,y)=({x},{y}) sums to {sum}")));
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.p[x][y][a][b]
    }

    pub fn from_state(state: &TwoQubitState, angles: &AngleTable) -> Self {
        let mut p = [[[[0.0; 2]; 2]; 2]; 3];
        for (x, row) in p.iter_mut().enumerate() {
            for (y, cell) in row.iter_mut().enumerate() {
                *cell = outcome_distribution(state, angles.alice[x], angles.bob[y]);
            }
        }
        Self { p }
    }

    pub fn deterministic(alice: [bool; 3], bob: [bool; 2]) -> Self {
        let mut p = [[[[0.0; 2]; 2]; 2]; 3];
        for (x, row) in p.iter_mut().enumerate() {
            for (y, cell) in row.iter_mut().enumerate() {
                cell[alice[x] as usize][bob[y] as usize] = 1.0;
            }
        }
        Self { p }
    }

    /// Every deterministic behaviour, one per strategy.
    pub fn all_deterministic() -> Vec<Self> {
        deterministic_strategies().map(|(a, b)| Self::deterministic(a, b)).collect()
    }

    /// Satisfaction probability under uniform inputs.
    pub fn satisfaction(&self) -> f64 {
        let mut total = 0.0;
        for x in 0..3 {
            for y in 0..2 {
                for a in 0..2 {
                    for b in 0..2 {
                        if chsh_satisfied(x as u8, y as u8, a == 1, b == 1) {
                            total += self.p[x][y][a][b];
                        }
                    }
                }
            }
        }
        total / 6.0
    }

    /// ⟨A_x B_y⟩ with outcomes mapped to ±1.
    pub fn correlation(&self, x: usize, y: usize) -> f64 {
        let c = &self.p[x][y];
        c[0][0] + c[1][1] - c[0][1] - c[1][0]
    }

    /// (1/4)(⟨A₀B₀⟩ + ⟨A₀B₁⟩ + ⟨A₁B₀⟩ − ⟨A₁B₁⟩).
    pub fn chsh_correlator(&self) -> f64 {
        (self.correlation(0, 0) + self.correlation(0, 1) + self.correlation(1, 0) - self.correlation(1, 1)) / 4.0
    }

    fn alice_marginal(&self, x: usize, y: usize) -> [f64; 2] {
        let c = &self.p[x][y];
        [c[0][0] + c[0][1], c[1][0] + c[1][1]]
    }

    fn bob_marginal(&self, x: usize, y: usize) -> [f64; 2] {
        let c = &self.p[x][y];
        [c[0][0] + c[1][0], c[0][1] + c[1][1]]
    }

    /// Largest probability of a single outcome of B on input pair (2,1).
    pub fn check_round_bias(&self) -> f64 {
        let m = self.bob_marginal(2, 1);
        m[0].max(m[1])
    }
}

fn total_variation(p: [f64; 2], q: [f64; 2]) -> f64 {
    0.5 * ((p[0] - q[0]).abs() + (p[1] - q[1]).abs())
}

/// Largest total-variation shift of one party's marginal when only the other party's input changes.
pub fn no_signalling_deviation(t: &BehaviorTable) -> Result<f64> {
    t.validate(DEFAULT_TOLERANCE)?;
    let mut worst: f64 = 0.0;
    for x in 0..3 {
        worst = worst.max(total_variation(t.alice_marginal(x, 0), t.alice_marginal(x, 1)));
    }
    for y in 0..2 {
        for x in 0..3 {
            for x2 in (x + 1)..3 {
                worst = worst.max(total_variation(t.bob_marginal(x, y), t.bob_marginal(x2, y)));
            }
        }
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GuessingVerdict {
    Holds,
    Violated,
    HypothesisNotMet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuessingReport {
    pub correlator: f64,
    pub no_signalling_deviation: f64,
    pub check_round_bias: f64,
    /// Marginal-closeness hypothesis, proxied by `no_signalling_deviation ≤ ν`.
    pub marginals_close: bool,
    /// Correlator ≥ √2/2 − η.
    pub correlator_ok: bool,
    /// B's check-round outcome has probability ≥ 1 − δ.
    pub bias_ok: bool,
    /// ((√2 − 1)/2 − η) − 75ν.
    pub lower_bound: f64,
    pub verdict: GuessingVerdict,
}

/// Evaluates the guessing inequality `δ ≥ ((√2−1)/2 − η) − 75ν` on a behaviour table.
///
/// The verdict is `HypothesisNotMet` when the correlator or check-round bias
/// hypotheses fail. The marginal-closeness hypothesis cannot be observed on a
/// behaviour table; its no-signalling proxy is reported in `marginals_close`
/// but does not gate the verdict. A `Violated` table that also fails the proxy
/// is a signalling behaviour, which isolated devices cannot produce.
pub fn guessing_lemma_check(t: &BehaviorTable, delta: f64, eta: f64, nu: f64, tol: f64) -> Result<GuessingReport> {
    if !(0.0..=1.0).contains(&delta) || eta < 0.0 || nu < 0.0 {
        return Err(Error::param(format!("guessing check parameters δ={delta} η={eta} ν={nu}")));
    }
    let ns = no_signalling_deviation(t)?;
    let correlator = t.chsh_correlator();
    let bias = t.check_round_bias();
    let marginals_close = ns <= nu + tol;
    let correlator_ok = correlator >= SQRT_2 / 2.0 - eta - tol;
    let bias_ok = bias >= 1.0 - delta - tol;
    let lower_bound = ((SQRT_2 - 1.0) / 2.0 - eta) - 75.0 * nu;
    let verdict = if !(correlator_ok && bias_ok) {
        GuessingVerdict::HypothesisNotMet
    } else if delta >= lower_bound - tol {
        GuessingVerdict::Holds
    } else {
        GuessingVerdict::Violated
    };
    Ok(GuessingReport {
        correlator,
        no_signalling_deviation: ns,
        check_round_bias: bias,
        marginals_close,
        correlator_ok,
        bias_ok,
        lower_bound,
        verdict,
    })
}
