//! Classical eavesdroppers that read the public log, and batch security evaluation.
//!
//! An [`EveStrategy`] receives messages only through [`Observer::observe`] and
//! is then asked for guesses. It never holds a reference to the devices or to
//! either party's private outputs.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::chsh_satisfied;
use crate::devices::{DeviceKind, FlipSchedule};
use crate::extract::{toeplitz_hash, trevisan_extract, ExtractorConfig, ToeplitzSeed};
use crate::protocol::{run_protocol_a, Message, Observer, PaBackend, Party, ProtocolParams, PublicMessage};
use crate::rng::{stream, SimRng};
use crate::Result;

pub trait EveStrategy: Observer + Send {
    /// Guess of Bob's raw-key bits at `positions` (indices into the round sequence).
    fn guess_raw_key(&mut self, positions: &[usize]) -> Vec<bool>;
    /// Guess of the final key of `len` bits.
    fn guess_final_key(&mut self, len: usize) -> Vec<bool>;
    /// Bits of a planted secret recovered from the log, if this strategy decodes one.
    fn decoded_secret(&mut self) -> Option<Vec<bool>> {
        None
    }
}

/// Public facts about one session, reassembled from its log.
#[derive(Clone, Debug, Default)]
struct PublicView {
    bell_set: Vec<usize>,
    bell_x: Vec<u8>,
    bell_a: Vec<bool>,
    bell_y: Vec<u8>,
    bell_b: Vec<bool>,
    x: Vec<u8>,
    y: Vec<u8>,
    pa: Option<(PaBackend, usize, Vec<bool>)>,
}

impl PublicView {
    fn absorb(&mut self, message: &Message) {
        let Ok(decoded) = message.decode() else { return };
        match (message.from, decoded) {
            (_, PublicMessage::BellSet(b)) => self.bell_set = b.into_iter().map(|i| i as usize).collect(),
            (Party::A, PublicMessage::BellAnnouncement { inputs, outputs }) => {
                self.bell_x = inputs;
                self.bell_a = outputs;
            }
            (Party::B, PublicMessage::BellAnnouncement { inputs, outputs }) => {
                self.bell_y = inputs;
                self.bell_b = outputs;
            }
            (Party::A, PublicMessage::InputReveal(x)) => self.x = x,
            (Party::B, PublicMessage::InputReveal(y)) => self.y = y,
            (_, PublicMessage::PaSeed { backend, out_len, seed }) => self.pa = Some((backend, out_len as usize, seed)),
            _ => {}
        }
    }

    /// (x, y, a, b) for every announced Bell round.
    fn bell_rounds(&self) -> impl Iterator<Item = (usize, u8, u8, bool, bool)> + '_ {
        let n = self.bell_set.len().min(self.bell_x.len()).min(self.bell_y.len());
        (0..n).map(move |k| (self.bell_set[k], self.bell_x[k], self.bell_y[k], self.bell_a[k], self.bell_b[k]))
    }

    fn raw_positions(&self) -> Vec<usize> {
        (0..self.x.len().min(self.y.len()))
            .filter(|&i| self.x[i] == 2 && self.y[i] == 1 && self.bell_set.binary_search(&i).is_err())
            .collect()
    }
}

/// Counts of B's output on y = 1, split by whether x = 2.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputStats {
    pub check_ones: u64,
    pub check_total: u64,
    pub other_ones: u64,
    pub other_total: u64,
}

impl OutputStats {
    fn add_view(&mut self, view: &PublicView) {
        for (_, x, y, _, b) in view.bell_rounds() {
            if y != 1 {
                continue;
            }
            if x == 2 {
                self.check_ones += b as u64;
                self.check_total += 1;
            } else {
                self.other_ones += b as u64;
                self.other_total += 1;
            }
        }
    }

    /// Empirical P(b = 1 | y = 1), preferring check-pair rounds.
    fn p_one(&self) -> Option<f64> {
        if self.check_total > 0 {
            Some(self.check_ones as f64 / self.check_total as f64)
        } else if self.other_total > 0 {
            Some(self.other_ones as f64 / self.other_total as f64)
        } else {
            None
        }
    }

    /// Accumulates statistics from the public logs of earlier sessions.
    pub fn train(logs: &[Vec<Message>]) -> Self {
        let mut stats = Self::default();
        for log in logs {
            let mut view = PublicView::default();
            log.iter().for_each(|m| view.absorb(m));
            stats.add_view(&view);
        }
        stats
    }
}

/// Maximum-likelihood guesser using only announced Bell-round data.
///
/// Every raw-key bit gets the majority value of B's announced outputs on
/// y = 1 (training sessions plus the current one); exact ties are broken
/// with Eve's own randomness. The final-key guess applies the published
/// privacy-amplification seed to the raw-key guess.
pub struct TranscriptEve {
    prior: OutputStats,
    view: PublicView,
    eps: f64,
    rng: SimRng,
}

impl TranscriptEve {
    pub fn new(prior: OutputStats, eps: f64, rng: SimRng) -> Self {
        Self { prior, view: PublicView::default(), eps, rng }
    }

    fn stats(&self) -> OutputStats {
        let mut s = self.prior;
        s.add_view(&self.view);
        s
    }
}

impl Observer for TranscriptEve {
    fn observe(&mut self, message: &Message) {
        self.view.absorb(message);
    }
}

impl EveStrategy for TranscriptEve {
    fn guess_raw_key(&mut self, positions: &[usize]) -> Vec<bool> {
        let p = self.stats().p_one();
        positions
            .iter()
            .map(|_| match p {
                Some(p) if p > 0.5 => true,
                Some(p) if p < 0.5 => false,
                _ => self.rng.random(),
            })
            .collect()
    }

    fn guess_final_key(&mut self, len: usize) -> Vec<bool> {
        let positions = self.view.raw_positions();
        let raw = self.guess_raw_key(&positions);
        let hashed = match self.view.pa.clone() {
            Some((_, out_len, _)) if out_len != len || raw.is_empty() => None,
            Some((PaBackend::Toeplitz, _, seed)) => toeplitz_hash(&raw, &ToeplitzSeed::new(seed), len).ok(),
            Some((PaBackend::Trevisan, _, seed)) => ExtractorConfig::for_source(raw.len(), len, self.eps)
                .and_then(|c| trevisan_extract(&raw, &seed, &c))
                .ok(),
            None => None,
        };
        hashed.unwrap_or_else(|| (0..len).map(|_| self.rng.random()).collect())
    }
}

/// Colluding eavesdropper holding the covert devices' tape.
///
/// For each secret slot it compares the CHSH violation rate of announced Bell
/// rounds in the schedule's low region with that in its high region; extra
/// violations in the low region mean the bit is 0. Rounds with inputs (2,0)
/// carry no constraint and are skipped.
pub struct CovertDecoderEve {
    schedule: FlipSchedule,
    view: PublicView,
    rng: SimRng,
}

impl CovertDecoderEve {
    pub fn new(tape: Vec<u8>, flip_rate: f64, secret_len: usize, rng: SimRng) -> Result<Self> {
        Ok(Self { schedule: FlipSchedule::new(tape, flip_rate, secret_len)?, view: PublicView::default(), rng })
    }
}

impl Observer for CovertDecoderEve {
    fn observe(&mut self, message: &Message) {
        self.view.absorb(message);
    }
}

impl EveStrategy for CovertDecoderEve {
    fn guess_raw_key(&mut self, positions: &[usize]) -> Vec<bool> {
        positions.iter().map(|_| self.rng.random()).collect()
    }

    fn guess_final_key(&mut self, len: usize) -> Vec<bool> {
        (0..len).map(|_| self.rng.random()).collect()
    }

    fn decoded_secret(&mut self) -> Option<Vec<bool>> {
        let slots = self.schedule.slots();
        // [slot][region] = (violations, rounds)
        let mut counts = vec![[(0u64, 0u64); 2]; slots];
        for (i, x, y, a, b) in self.view.bell_rounds() {
            if (x, y) == (2, 0) {
                continue;
            }
            let c = self.schedule.classify(i);
            let violated = !chsh_satisfied(x, y, a, b) as u64;
            if c.low {
                counts[c.slot][0].0 += violated;
                counts[c.slot][0].1 += 1;
            }
            if c.high {
                counts[c.slot][1].0 += violated;
                counts[c.slot][1].1 += 1;
            }
        }
        let rate = |(v, n): (u64, u64)| if n == 0 { None } else { Some(v as f64 / n as f64) };
        Some(
            counts
                .into_iter()
                .map(|[low, high]| match (rate(low), rate(high)) {
                    (Some(l), Some(h)) if l > h => false,
                    (Some(l), Some(h)) if h > l => true,
                    _ => self.rng.random(),
                })
                .collect(),
        )
    }
}

/// Which eavesdropper to run in a batch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum EveKind {
    None,
    /// Trains on the public logs of `training_sessions` extra sessions first.
    Transcript { training_sessions: usize },
    CovertDecoder { tape: Vec<u8>, flip_rate: f64, secret_len: usize },
}

/// p̂ with a 3σ normal-approximation interval clipped to [0,1]; [0,1] when n ≤ 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub n: u64,
    pub lo: f64,
    pub hi: f64,
}

impl Estimate {
    pub fn binomial(successes: u64, n: u64) -> Self {
        if n == 0 {
            return Self { value: 0.0, n, lo: 0.0, hi: 1.0 };
        }
        let p = successes as f64 / n as f64;
        if n == 1 {
            return Self { value: p, n, lo: 0.0, hi: 1.0 };
        }
        let half = 3.0 * (p * (1.0 - p) / n as f64).sqrt();
        Self { value: p, n, lo: (p - half).max(0.0), hi: (p + half).min(1.0) }
    }

    /// Whether `target` lies within three standard errors computed at `target`.
    pub fn within_3_sigma_of(&self, target: f64) -> bool {
        let sigma = (target * (1.0 - target) / self.n.max(1) as f64).sqrt();
        (self.value - target).abs() <= 3.0 * sigma
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecurityReport {
    pub sessions: u64,
    pub abort_rate: Estimate,
    pub bell_aborts: u64,
    pub check_aborts: u64,
    pub recon_aborts: u64,
    /// Mean final-key length over non-aborted sessions.
    pub mean_key_len: f64,
    /// Sessions where alice_key ≠ bob_key without an abort.
    pub key_mismatches: u64,
    /// Pooled over raw-key bits of non-aborted sessions.
    pub per_bit_guess_rate: Estimate,
    pub exact_final_guesses: u64,
    /// Pr[exact final-key guess] − mean 2^{−keylen}, over non-aborted sessions.
    pub final_key_guess_advantage: f64,
    /// Binomial standard error of the exact-guess frequency under the null.
    pub advantage_sigma: f64,
    /// Per-bit accuracy of the decoded covert secret over non-aborted sessions.
    pub decoded_accuracy: Option<Estimate>,
    /// Same, over all sessions including aborted ones.
    pub decoded_accuracy_all: Option<Estimate>,
    /// Mean number of Bell rounds whose B output the covert schedule flipped.
    pub mean_flipped_bell_rounds: Option<f64>,
}

struct TrialOutcome {
    abort: Option<crate::protocol::AbortReason>,
    key_len: usize,
    key_mismatch: bool,
    raw_hits: u64,
    raw_bits: u64,
    exact: bool,
    decoded: Option<(u64, u64)>,
    flipped_bell: Option<u64>,
}

const EVE_STREAM_OFFSET: u64 = 1 << 40;
const TRAINING_STREAM_OFFSET: u64 = 1 << 41;

fn build_eve(kind: &EveKind, prior: OutputStats, eps: f64, rng: SimRng) -> Result<Option<Box<dyn EveStrategy>>> {
    Ok(match kind {
        EveKind::None => None,
        EveKind::Transcript { .. } => Some(Box::new(TranscriptEve::new(prior, eps, rng))),
        EveKind::CovertDecoder { tape, flip_rate, secret_len } => {
            Some(Box::new(CovertDecoderEve::new(tape.clone(), *flip_rate, *secret_len, rng)?))
        }
    })
}

fn run_trial(device: &DeviceKind, eve: &EveKind, prior: OutputStats, params: &ProtocolParams, master: u64, index: u64) -> Result<TrialOutcome> {
    let mut rng = stream(master, index);
    let mut pair = device.build(&mut rng)?;
    let mut strategy = build_eve(eve, prior, params.eps, stream(master, EVE_STREAM_OFFSET + index))?;
    let observer = strategy.as_deref_mut().map(|s| s as &mut dyn Observer);
    let result = run_protocol_a(&mut pair, observer, params, &mut rng)?;

    let mut outcome = TrialOutcome {
        abort: result.abort,
        key_len: result.alice_key.len(),
        key_mismatch: !result.aborted() && result.alice_key != result.bob_key,
        raw_hits: 0,
        raw_bits: 0,
        exact: false,
        decoded: None,
        flipped_bell: None,
    };
    if let DeviceKind::Covert { secret, flip_rate, tape } = device {
        let schedule = FlipSchedule::new(tape.clone(), *flip_rate, secret.len())?;
        outcome.flipped_bell = Some(result.bell_set.iter().filter(|&&i| schedule.flips(i, secret)).count() as u64);
    }
    if let Some(s) = strategy.as_deref_mut() {
        if let (Some(decoded), DeviceKind::Covert { secret, .. }) = (s.decoded_secret(), device) {
            let hits = decoded.iter().zip(secret).filter(|(d, t)| d == t).count() as u64;
            outcome.decoded = Some((hits, secret.len() as u64));
        }
        if !result.aborted() {
            let positions = result.raw_key_positions();
            let guess = s.guess_raw_key(&positions);
            let truth = result.bob_raw_key();
            outcome.raw_hits = guess.iter().zip(&truth).filter(|(g, t)| g == t).count() as u64;
            outcome.raw_bits = truth.len() as u64;
            outcome.exact = s.guess_final_key(result.bob_key.len()) == result.bob_key;
        }
    }
    Ok(outcome)
}

/// Runs `trials` independent sessions in parallel and aggregates the report.
///
/// Session i draws everything from stream i of `master_seed`, so the report is
/// reproducible bit for bit and independent of thread scheduling.
pub fn evaluate_security(device: &DeviceKind, eve: &EveKind, params: &ProtocolParams, trials: usize, master_seed: u64) -> Result<SecurityReport> {
    if trials == 0 {
        return Err(crate::Error::param("trials must be ≥ 1"));
    }
    params.validate()?;
    device.validate()?;

    let prior = match eve {
        EveKind::Transcript { training_sessions } => {
            let logs = (0..*training_sessions as u64)
                .into_par_iter()
                .map(|j| {
                    let mut rng = stream(master_seed, TRAINING_STREAM_OFFSET + j);
                    let mut pair = device.build(&mut rng)?;
                    Ok(run_protocol_a(&mut pair, None, params, &mut rng)?.messages)
                })
                .collect::<Result<Vec<_>>>()?;
            OutputStats::train(&logs)
        }
        _ => OutputStats::default(),
    };

    let outcomes = (0..trials as u64)
        .into_par_iter()
        .map(|i| run_trial(device, eve, prior, params, master_seed, i))
        .collect::<Result<Vec<_>>>()?;

    let sessions = outcomes.len() as u64;
    let kept: Vec<&TrialOutcome> = outcomes.iter().filter(|o| o.abort.is_none()).collect();
    let count = |r| outcomes.iter().filter(|o| o.abort == Some(r)).count() as u64;
    use crate::protocol::AbortReason::*;
    let aborts = sessions - kept.len() as u64;

    let mean_key_len = if kept.is_empty() { 0.0 } else { kept.iter().map(|o| o.key_len as f64).sum::<f64>() / kept.len() as f64 };
    let raw_hits: u64 = kept.iter().map(|o| o.raw_hits).sum();
    let raw_bits: u64 = kept.iter().map(|o| o.raw_bits).sum();
    let exact = kept.iter().filter(|o| o.exact).count() as u64;
    let (advantage, sigma) = if kept.is_empty() {
        (0.0, 0.0)
    } else {
        let n = kept.len() as f64;
        let null = kept.iter().map(|o| (-(o.key_len as f64)).exp2()).sum::<f64>() / n;
        (exact as f64 / n - null, (null * (1.0 - null) / n).sqrt())
    };
    let decoded = |set: &[&TrialOutcome]| {
        let pairs: Vec<(u64, u64)> = set.iter().filter_map(|o| o.decoded).collect();
        (!pairs.is_empty()).then(|| Estimate::binomial(pairs.iter().map(|p| p.0).sum(), pairs.iter().map(|p| p.1).sum()))
    };
    let all: Vec<&TrialOutcome> = outcomes.iter().collect();
    let flipped: Vec<u64> = outcomes.iter().filter_map(|o| o.flipped_bell).collect();

    Ok(SecurityReport {
        sessions,
        abort_rate: Estimate::binomial(aborts, sessions),
        bell_aborts: count(BellTest),
        check_aborts: count(CheckCount),
        recon_aborts: count(ReconFail),
        mean_key_len,
        key_mismatches: kept.iter().filter(|o| o.key_mismatch).count() as u64,
        per_bit_guess_rate: Estimate::binomial(raw_hits, raw_bits),
        exact_final_guesses: exact,
        final_key_guess_advantage: advantage,
        advantage_sigma: sigma,
        decoded_accuracy: decoded(&kept),
        decoded_accuracy_all: decoded(&all),
        mean_flipped_bell_rounds: (!flipped.is_empty()).then(|| flipped.iter().sum::<u64>() as f64 / flipped.len() as f64),
    })
}
