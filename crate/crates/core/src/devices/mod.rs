//! Black-box device pairs.
//!
//! A [`DevicePair`] answers one round at a time: side A receives `x ∈ {0,1,2}`
//! and side B receives `y ∈ {0,1}`; each produces one output bit. Classical
//! adversaries are assembled from two [`SideDevice`]s inside an
//! [`IsolatedPair`], so neither side can observe the other's input by
//! construction. The quantum devices sample side A's output from its marginal
//! with A's own generator first, which keeps A's outputs independent of `y`
//! under replay.

mod classical;
mod covert;
mod honest;

use std::f64::consts::{FRAC_PI_4, FRAC_PI_8};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use classical::{
    deterministic_pair, memory_pair, optimal_deterministic_strategies, tape_synchronized_pair, FixedResponse,
    IsolatedPair, MemorySide, SideView, Strategy,
};
pub use covert::{covert_channel_pair, CovertChannelPair, FlipSchedule, RoundClass};
pub use honest::{honest_pair, HonestPair};

use crate::qsim::BasisAngle;
use crate::rng::SimRng;
use crate::{Error, Result};

/// A pair of untrusted devices used sequentially, one call per round.
pub trait DevicePair: Send {
    /// Runs round `index` with inputs `x` (side A) and `y` (side B).
    fn round(&mut self, index: usize, x: u8, y: u8) -> Result<(bool, bool)>;
}

impl<T: DevicePair + ?Sized> DevicePair for Box<T> {
    fn round(&mut self, index: usize, x: u8, y: u8) -> Result<(bool, bool)> {
        (**self).round(index, x, y)
    }
}

/// One side of a classical device pair. Sees only its own round index and input.
pub trait SideDevice: Send {
    fn respond(&mut self, round: usize, input: u8) -> bool;
}

pub(crate) fn check_inputs(index: usize, x: u8, y: u8) -> Result<()> {
    if x > 2 || y > 1 {
        return Err(Error::Device {
            round: index,
            reason: format!("input pair ({x},{y}) outside {{0,1,2}}×{{0,1}}"),
        });
    }
    Ok(())
}

/// Measurement angles used by quantum devices, per input.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AngleTable {
    pub alice: [BasisAngle; 3],
    pub bob: [BasisAngle; 2],
}

impl AngleTable {
    /// Angles attaining the optimal satisfaction probability on every constrained input pair.
    ///
    /// The −π/8 entries are the 3π/8-rotated basis with its outcomes relabelled.
    pub fn canonical() -> Self {
        Self {
            alice: [BasisAngle::new(0.0), BasisAngle::new(FRAC_PI_4), BasisAngle::new(-FRAC_PI_8)],
            bob: [BasisAngle::new(FRAC_PI_8), BasisAngle::new(-FRAC_PI_8)],
        }
    }

    /// Computational, Hadamard and 3π/8 for A; π/8 and 3π/8 for B, with no relabelling.
    pub fn literal() -> Self {
        Self {
            alice: [BasisAngle::new(0.0), BasisAngle::new(FRAC_PI_4), BasisAngle::new(3.0 * FRAC_PI_8)],
            bob: [BasisAngle::new(FRAC_PI_8), BasisAngle::new(3.0 * FRAC_PI_8)],
        }
    }
}

/// 32 pseudorandom bytes derived from a pre-shared tape, a domain label and a round index.
pub fn tape_word(tape: &[u8], label: &[u8], round: usize) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update((tape.len() as u64).to_be_bytes());
    h.update(tape);
    h.update(label);
    h.update((round as u64).to_be_bytes());
    h.finalize().into()
}

/// Serializable description of a device pair, used by batch runners and the CLI.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum DeviceKind {
    Honest { noise: f64 },
    Deterministic { alice: [bool; 3], bob: [bool; 2] },
    /// Shared-tape classical strategy, optimal among local strategies.
    Memory { tape: Vec<u8> },
    Covert { secret: Vec<bool>, flip_rate: f64, tape: Vec<u8> },
}

impl DeviceKind {
    /// The best deterministic strategy (all outputs 0).
    pub fn best_deterministic() -> Self {
        DeviceKind::Deterministic { alice: [false; 3], bob: [false; 2] }
    }

    pub fn label(&self) -> String {
        match self {
            DeviceKind::Honest { noise } => format!("honest({noise})"),
            DeviceKind::Deterministic { .. } => "deterministic".into(),
            DeviceKind::Memory { .. } => "memory".into(),
            DeviceKind::Covert { flip_rate, .. } => format!("covert({flip_rate})"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DeviceKind::Honest { noise } if !(0.0..=1.0).contains(noise) => {
                Err(Error::param(format!("noise {noise} outside [0,1]")))
            }
            DeviceKind::Covert { flip_rate, secret, .. } => {
                if !(0.0..=1.0).contains(flip_rate) {
                    return Err(Error::param(format!("flip rate {flip_rate} outside [0,1]")));
                }
                if secret.is_empty() {
                    return Err(Error::param("covert secret must be non-empty"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Builds a fresh device pair for one session. Device randomness comes from `rng`.
    pub fn build(&self, rng: &mut SimRng) -> Result<Box<dyn DevicePair>> {
        self.validate()?;
        Ok(match self {
            DeviceKind::Honest { noise } => Box::new(honest_pair(*noise, rng)?),
            DeviceKind::Deterministic { alice, bob } => Box::new(deterministic_pair(*alice, *bob)),
            DeviceKind::Memory { tape } => Box::new(tape_synchronized_pair(tape.clone())),
            DeviceKind::Covert { secret, flip_rate, tape } => {
                Box::new(covert_channel_pair(secret.clone(), *flip_rate, tape.clone(), rng)?)
            }
        })
    }
}
