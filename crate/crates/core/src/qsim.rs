//! Exact dense simulation of two-qubit states and rotated-basis measurements.
//!
//! States are 4×4 density matrices in the basis |00⟩, |01⟩, |10⟩, |11⟩. A
//! measurement basis is a single rotation angle θ with basis vectors
//! `cos θ|0⟩ + sin θ|1⟩` (outcome 0) and `−sin θ|0⟩ + cos θ|1⟩` (outcome 1).

use std::f64::consts::PI;

use nalgebra::{Complex, Matrix4, SymmetricEigen};
use rand::Rng;

use crate::{Error, Result};

pub type C64 = Complex<f64>;

const TRACE_TOL: f64 = 1e-12;
const HERMITIAN_TOL: f64 = 1e-12;
const EIGEN_TOL: f64 = 1e-10;

/// Joint outcome probabilities, indexed `[a][b]`.
pub type OutcomeTable = [[f64; 2]; 2];

/// A validated two-qubit density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoQubitState {
    rho: Matrix4<C64>,
}

impl TwoQubitState {
    /// Validates unit trace, Hermiticity and positivity before accepting `rho`.
    pub fn new(rho: Matrix4<C64>) -> Result<Self> {
        let trace = rho.trace();
        if (trace.re - 1.0).abs() > TRACE_TOL || trace.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {trace} is not 1")));
        }
        let skew = (rho - rho.adjoint()).iter().map(|c| c.norm()).fold(0.0, f64::max);
        if skew > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {skew:e})")));
        }
        let min_eig = SymmetricEigen::new(rho)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -EIGEN_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min_eig:e}")));
        }
        Ok(Self { rho })
    }

    pub fn rho(&self) -> &Matrix4<C64> {
        &self.rho
    }

    pub fn trace(&self) -> C64 {
        self.rho.trace()
    }

    pub fn maximally_mixed() -> Self {
        Self {
            rho: Matrix4::identity().map(|c: C64| c * 0.25),
        }
    }
}

/// A measurement basis angle, normalised into (−π/2, π/2].
///
/// Rotating by π maps each basis vector to its negative, which is the same
/// projective measurement, so reduction mod π is exact.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BasisAngle(f64);

impl BasisAngle {
    pub fn new(theta: f64) -> Self {
        let mut t = theta - PI * (theta / PI).round();
        if t <= -PI / 2.0 {
            t += PI;
        }
        if t > PI / 2.0 {
            t -= PI;
        }
        Self(t)
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    /// Real amplitudes of the basis vector for `outcome`.
    pub fn vector(self, outcome: bool) -> [f64; 2] {
        let (s, c) = self.0.sin_cos();
        if outcome {
            [-s, c]
        } else {
            [c, s]
        }
    }
}

pub fn epr_pair() -> TwoQubitState {
    let half = C64::new(0.5, 0.0);
    let mut rho = Matrix4::zeros();
    rho[(0, 0)] = half;
    rho[(0, 3)] = half;
    rho[(3, 0)] = half;
    rho[(3, 3)] = half;
    TwoQubitState { rho }
}

/// Returns `(1−p)·ρ + p·I/4`.
pub fn apply_depolarizing(state: &TwoQubitState, p: f64) -> Result<TwoQubitState> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param(format!("depolarizing probability {p} outside [0,1]")));
    }
    let mixed = TwoQubitState::maximally_mixed();
    let rho = state.rho.map(|c| c * (1.0 - p)) + mixed.rho.map(|c| c * p);
    Ok(TwoQubitState { rho })
}

/// Probability of each outcome pair when side A measures in `theta_a` and side B in `theta_b`.
pub fn outcome_distribution(state: &TwoQubitState, theta_a: BasisAngle, theta_b: BasisAngle) -> OutcomeTable {
    let mut table = [[0.0; 2]; 2];
    for (a, row) in table.iter_mut().enumerate() {
        let va = theta_a.vector(a == 1);
        for (b, cell) in row.iter_mut().enumerate() {
            let vb = theta_b.vector(b == 1);
            let v = [va[0] * vb[0], va[0] * vb[1], va[1] * vb[0], va[1] * vb[1]];
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..4 {
                for j in 0..4 {
                    acc += state.rho[(i, j)] * (v[i] * v[j]);
                }
            }
            *cell = acc.re.max(0.0);
        }
    }
    table
}

/// Draws one joint outcome according to [`outcome_distribution`].
pub fn measure_joint<R: Rng + ?Sized>(
    state: &TwoQubitState,
    theta_a: BasisAngle,
    theta_b: BasisAngle,
    rng: &mut R,
) -> (bool, bool) {
    sample_table(&outcome_distribution(state, theta_a, theta_b), rng)
}

pub(crate) fn sample_table<R: Rng + ?Sized>(table: &OutcomeTable, rng: &mut R) -> (bool, bool) {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (a, row) in table.iter().enumerate() {
        for (b, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return (a == 1, b == 1);
            }
        }
    }
    // Rounding left u above the cumulative sum; return the last cell with mass.
    let last = (0..4).rev().find(|&i| table[i / 2][i % 2] > 0.0).unwrap_or(3);
    (last / 2 == 1, last % 2 == 1)
}

/// P(a = b) for a table.
pub fn agreement(table: &OutcomeTable) -> f64 {
    table[0][0] + table[1][1]
}
