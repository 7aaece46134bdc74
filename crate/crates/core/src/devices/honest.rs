use rand::Rng;

use super::{check_inputs, AngleTable, DevicePair};
use crate::qsim::{apply_depolarizing, epr_pair, outcome_distribution, OutcomeTable};
use crate::rng::{child, SimRng};
use crate::Result;

/// Devices measuring a fresh, depolarized EPR pair every round.
///
/// The per-round state never changes, so the six outcome tables are computed
/// once. Side A's bit is drawn from its marginal with A's generator; side B's
/// bit is drawn from the conditional given A's bit with B's generator.
pub struct HonestPair {
    tables: [[OutcomeTable; 2]; 3],
    alice_rng: SimRng,
    bob_rng: SimRng,
}

pub fn honest_pair<R: Rng + ?Sized>(noise: f64, rng: &mut R) -> Result<HonestPair> {
    HonestPair::with_angles(noise, AngleTable::canonical(), rng)
}

impl HonestPair {
    pub fn with_angles<R: Rng + ?Sized>(noise: f64, angles: AngleTable, rng: &mut R) -> Result<Self> {
        let state = apply_depolarizing(&epr_pair(), noise)?;
        let mut tables = [[[[0.0; 2]; 2]; 2]; 3];
        for (x, row) in tables.iter_mut().enumerate() {
            for (y, cell) in row.iter_mut().enumerate() {
                *cell = outcome_distribution(&state, angles.alice[x], angles.bob[y]);
            }
        }
        Ok(Self {
            tables,
            alice_rng: child(rng),
            bob_rng: child(rng),
        })
    }

    /// Outcome tables indexed `[x][y][a][b]`.
    pub fn tables(&self) -> &[[OutcomeTable; 2]; 3] {
        &self.tables
    }
}

impl DevicePair for HonestPair {
    fn round(&mut self, index: usize, x: u8, y: u8) -> Result<(bool, bool)> {
        check_inputs(index, x, y)?;
        // A's marginal does not depend on y; always read it from the y = 0 table.
        let marginal = &self.tables[x as usize][0];
        let p_a1 = marginal[1][0] + marginal[1][1];
        let a = self.alice_rng.random::<f64>() < p_a1;
        let row = self.tables[x as usize][y as usize][a as usize];
        let total = row[0] + row[1];
        let p_b1 = if total > 0.0 { row[1] / total } else { 0.5 };
        let b = self.bob_rng.random::<f64>() < p_b1;
        Ok((a, b))
    }
}
