use rand::Rng;

use super::{honest_pair, tape_word, DevicePair, HonestPair};
use crate::{Error, Result};

/// Public classification of a round under a tape-keyed flip schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RoundClass {
    /// Which secret bit this round carries.
    pub slot: usize,
    /// B's output is flipped here when the slot's secret bit is 0.
    pub low: bool,
    /// B's output is flipped here when the slot's secret bit is 1.
    pub high: bool,
}

/// Tape-keyed schedule deciding in which rounds B's output gets flipped.
///
/// Each round draws `u ∈ [0,1)` and a slot from the tape. The round is in the
/// low region when `u < f` and in the high region when `u ≥ 1 − f`; a round
/// flips when its region matches the slot's secret bit. Every round therefore
/// flips with probability exactly `f` whatever the secret is.
#[derive(Clone, Debug)]
pub struct FlipSchedule {
    tape: Vec<u8>,
    flip_rate: f64,
    slots: usize,
}

impl FlipSchedule {
    pub fn new(tape: Vec<u8>, flip_rate: f64, slots: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&flip_rate) {
            return Err(Error::param(format!("flip rate {flip_rate} outside [0,1]")));
        }
        if slots == 0 {
            return Err(Error::param("flip schedule needs at least one slot"));
        }
        Ok(Self { tape, flip_rate, slots })
    }

    pub fn flip_rate(&self) -> f64 {
        self.flip_rate
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn classify(&self, round: usize) -> RoundClass {
        let w = tape_word(&self.tape, b"covert", round);
        let u = (u64::from_be_bytes(w[..8].try_into().unwrap()) >> 11) as f64 / (1u64 << 53) as f64;
        let slot = (u64::from_be_bytes(w[8..16].try_into().unwrap()) % self.slots as u64) as usize;
        RoundClass {
            slot,
            low: u < self.flip_rate,
            high: u >= 1.0 - self.flip_rate,
        }
    }

    pub fn flips(&self, round: usize, secret: &[bool]) -> bool {
        let c = self.classify(round);
        let bit = secret[c.slot];
        (c.low && !bit) || (c.high && bit)
    }
}

/// Honest noiseless devices whose B side deliberately flips outputs on a secret-keyed schedule.
pub struct CovertChannelPair {
    honest: HonestPair,
    schedule: FlipSchedule,
    secret: Vec<bool>,
}

pub fn covert_channel_pair<R: Rng + ?Sized>(
    secret: Vec<bool>,
    flip_rate: f64,
    tape: Vec<u8>,
    rng: &mut R,
) -> Result<CovertChannelPair> {
    if secret.is_empty() {
        return Err(Error::param("covert secret must be non-empty"));
    }
    Ok(CovertChannelPair {
        honest: honest_pair(0.0, rng)?,
        schedule: FlipSchedule::new(tape, flip_rate, secret.len())?,
        secret,
    })
}

impl CovertChannelPair {
    pub fn schedule(&self) -> &FlipSchedule {
        &self.schedule
    }
}

impl DevicePair for CovertChannelPair {
    fn round(&mut self, index: usize, x: u8, y: u8) -> Result<(bool, bool)> {
        let (a, b) = self.honest.round(index, x, y)?;
        Ok((a, b ^ self.schedule.flips(index, &self.secret)))
    }
}
