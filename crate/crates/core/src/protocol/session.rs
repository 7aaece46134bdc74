use rand::Rng;
use serde::{Deserialize, Serialize};

use super::messages::{Channel, Message, Observer, PaBackend, Party, PublicMessage};
use super::params::ProtocolParams;
use crate::analysis::{estimate_chsh, key_length_for_kappa, KeyBasis, ReconCost, RateModel};
use crate::bits::{pack_le, unpack_le};
use crate::devices::DevicePair;
use crate::extract::{toeplitz_hash, trevisan_extract, ExtractorConfig, ToeplitzSeed};
use crate::recon::reconcile_with;
use crate::rng::child;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AbortReason {
    BellTest,
    CheckCount,
    ReconFail,
}

impl AbortReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            AbortReason::BellTest => "BELL_TEST",
            AbortReason::CheckCount => "CHECK_COUNT",
            AbortReason::ReconFail => "RECON_FAIL",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "BELL_TEST" => Ok(AbortReason::BellTest),
            "CHECK_COUNT" => Ok(AbortReason::CheckCount),
            "RECON_FAIL" => Ok(AbortReason::ReconFail),
            other => Err(Error::Message(format!("unknown abort reason {other}"))),
        }
    }
}

/// Everything one session produced, including the complete public log.
#[derive(Clone, Debug, PartialEq)]
pub struct SessionResult {
    pub m: usize,
    pub x: Vec<u8>,
    pub y: Vec<u8>,
    pub a: Vec<bool>,
    pub b: Vec<bool>,
    /// Sorted Bell-round indices.
    pub bell_set: Vec<usize>,
    /// Rounds with inputs (2,1); empty until inputs are revealed.
    pub check_set: Vec<usize>,
    pub eta_observed: f64,
    pub abort: Option<AbortReason>,
    pub messages: Vec<Message>,
    pub alice_key: Vec<bool>,
    pub bob_key: Vec<bool>,
    pub leakage_bits: usize,
}

impl SessionResult {
    pub fn aborted(&self) -> bool {
        self.abort.is_some()
    }

    /// C∖B, the positions of the raw key.
    pub fn raw_key_positions(&self) -> Vec<usize> {
        self.check_set.iter().copied().filter(|i| self.bell_set.binary_search(i).is_err()).collect()
    }

    pub fn bob_raw_key(&self) -> Vec<bool> {
        self.raw_key_positions().into_iter().map(|i| self.b[i]).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&TranscriptJson::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str::<TranscriptJson>(s)?.try_into()
    }
}

#[derive(Serialize, Deserialize)]
struct MessageJson {
    from: Party,
    seq: u32,
    payload: String,
}

/// On-disk transcript. Keys are LSB-first packed hex; `key_len` records the bit count.
#[derive(Serialize, Deserialize)]
struct TranscriptJson {
    m: usize,
    x: Vec<u8>,
    y: Vec<u8>,
    a: Vec<u8>,
    b: Vec<u8>,
    bell_set: Vec<usize>,
    check_set: Vec<usize>,
    eta_observed: f64,
    aborted: bool,
    abort_reason: Option<String>,
    leakage_bits: usize,
    key_len: usize,
    alice_key: String,
    bob_key: String,
    messages: Vec<MessageJson>,
}

fn to_ints(bits: &[bool]) -> Vec<u8> {
    bits.iter().map(|&b| b as u8).collect()
}

fn from_ints(v: &[u8], what: &str) -> Result<Vec<bool>> {
    v.iter()
        .map(|&b| match b {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(Error::Message(format!("{what} entry {b} is not a bit"))),
        })
        .collect()
}

impl From<&SessionResult> for TranscriptJson {
    fn from(s: &SessionResult) -> Self {
        TranscriptJson {
            m: s.m,
            x: s.x.clone(),
            y: s.y.clone(),
            a: to_ints(&s.a),
            b: to_ints(&s.b),
            bell_set: s.bell_set.clone(),
            check_set: s.check_set.clone(),
            eta_observed: s.eta_observed,
            aborted: s.aborted(),
            abort_reason: s.abort.map(|r| r.as_str().to_string()),
            leakage_bits: s.leakage_bits,
            key_len: s.alice_key.len(),
            alice_key: hex::encode(pack_le(&s.alice_key)),
            bob_key: hex::encode(pack_le(&s.bob_key)),
            messages: s
                .messages
                .iter()
                .map(|m| MessageJson { from: m.from, seq: m.seq, payload: hex::encode(&m.payload) })
                .collect(),
        }
    }
}

impl TryFrom<TranscriptJson> for SessionResult {
    type Error = Error;

    fn try_from(t: TranscriptJson) -> Result<Self> {
        let abort = t.abort_reason.as_deref().map(AbortReason::parse).transpose()?;
        if abort.is_some() != t.aborted {
            return Err(Error::Message("aborted flag disagrees with abort_reason".into()));
        }
        let key = |h: &str| -> Result<Vec<bool>> { Ok(unpack_le(&hex::decode(h)?, t.key_len)) };
        Ok(SessionResult {
            m: t.m,
            a: from_ints(&t.a, "a")?,
            b: from_ints(&t.b, "b")?,
            alice_key: key(&t.alice_key)?,
            bob_key: key(&t.bob_key)?,
            x: t.x,
            y: t.y,
            bell_set: t.bell_set,
            check_set: t.check_set,
            eta_observed: t.eta_observed,
            abort,
            leakage_bits: t.leakage_bits,
            messages: t
                .messages
                .into_iter()
                .map(|m| Ok(Message { from: m.from, seq: m.seq, payload: hex::decode(m.payload)? }))
                .collect::<Result<_>>()?,
        })
    }
}

/// A uniformly random `size`-subset of 0..m, sorted.
pub fn select_bell_rounds<R: Rng + ?Sized>(m: usize, size: usize, rng: &mut R) -> Result<Vec<usize>> {
    if size == 0 || size > m {
        return Err(Error::param(format!("Bell set size {size} outside 1..={m}")));
    }
    let mut idx = rand::seq::index::sample(rng, m, size).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

/// η′ from the two Bell announcements, exactly as either party computes it.
fn eta_from_announcements(x: &[u8], a: &[bool], y: &[u8], b: &[bool]) -> Result<f64> {
    let all: Vec<usize> = (0..x.len()).collect();
    Ok(estimate_chsh(x, y, a, b, &all)?.eta_prime)
}

/// Recomputes η′ from the public log alone.
pub fn recompute_eta_observed(messages: &[Message]) -> Result<f64> {
    let mut alice = None;
    let mut bob = None;
    for m in messages {
        if let PublicMessage::BellAnnouncement { inputs, outputs } = m.decode()? {
            match m.from {
                Party::A if alice.is_none() => alice = Some((inputs, outputs)),
                Party::B if bob.is_none() => bob = Some((inputs, outputs)),
                _ => {}
            }
        }
    }
    let ((x, a), (y, b)) = alice
        .zip(bob)
        .ok_or_else(|| Error::Message("log lacks Bell announcements from both parties".into()))?;
    eta_from_announcements(&x, &a, &y, &b)
}

struct Rounds {
    x: Vec<u8>,
    y: Vec<u8>,
    a: Vec<bool>,
    b: Vec<bool>,
}

fn play_rounds<R: Rng + ?Sized>(pair: &mut dyn DevicePair, m: usize, alice_rng: &mut R, bob_rng: &mut R) -> Result<Rounds> {
    let mut r = Rounds { x: Vec::with_capacity(m), y: Vec::with_capacity(m), a: Vec::with_capacity(m), b: Vec::with_capacity(m) };
    for i in 0..m {
        let x = alice_rng.random_range(0..3u8);
        let y = bob_rng.random_range(0..2u8);
        let (a, b) = pair.round(i, x, y)?;
        r.x.push(x);
        r.y.push(y);
        r.a.push(a);
        r.b.push(b);
    }
    Ok(r)
}

fn bell_phase<R: Rng + ?Sized>(
    params: &ProtocolParams,
    rounds: &Rounds,
    alice_rng: &mut R,
    channel: &mut Channel<'_>,
) -> Result<(Vec<usize>, f64)> {
    let bell = select_bell_rounds(params.m, params.bell_size(), alice_rng)?;
    let announced = channel.send(Party::A, &PublicMessage::BellSet(bell.iter().map(|&i| i as u32).collect()))?;
    let PublicMessage::BellSet(announced) = announced else { unreachable!("Bell set message") };
    let bell: Vec<usize> = announced.into_iter().map(|i| i as usize).collect();
    let pick_u8 = |v: &[u8]| bell.iter().map(|&i| v[i]).collect::<Vec<_>>();
    let pick = |v: &[bool]| bell.iter().map(|&i| v[i]).collect::<Vec<_>>();
    let from_a = PublicMessage::BellAnnouncement { inputs: pick_u8(&rounds.x), outputs: pick(&rounds.a) };
    let from_b = PublicMessage::BellAnnouncement { inputs: pick_u8(&rounds.y), outputs: pick(&rounds.b) };
    let PublicMessage::BellAnnouncement { inputs: x, outputs: a } = channel.send(Party::A, &from_a)? else {
        unreachable!("announcement")
    };
    let PublicMessage::BellAnnouncement { inputs: y, outputs: b } = channel.send(Party::B, &from_b)? else {
        unreachable!("announcement")
    };
    Ok((bell, eta_from_announcements(&x, &a, &y, &b)?))
}

fn empty_result(params: &ProtocolParams, rounds: Rounds, bell_set: Vec<usize>, eta_observed: f64) -> SessionResult {
    SessionResult {
        m: params.m,
        x: rounds.x,
        y: rounds.y,
        a: rounds.a,
        b: rounds.b,
        bell_set,
        check_set: Vec::new(),
        eta_observed,
        abort: None,
        messages: Vec::new(),
        alice_key: Vec::new(),
        bob_key: Vec::new(),
        leakage_bits: 0,
    }
}

/// Plays m rounds, picks the Bell set afterwards and aborts with `BellTest` when η′ > η.
pub fn run_protocol_b<R: Rng + ?Sized>(pair: &mut dyn DevicePair, params: &ProtocolParams, rng: &mut R) -> Result<SessionResult> {
    params.validate()?;
    let mut alice_rng = child(rng);
    let mut bob_rng = child(rng);
    let rounds = play_rounds(pair, params.m, &mut alice_rng, &mut bob_rng)?;
    let mut channel = Channel::new();
    let (bell, eta_observed) = bell_phase(params, &rounds, &mut alice_rng, &mut channel)?;
    let mut result = empty_result(params, rounds, bell, eta_observed);
    if params.enforce_bell_test && eta_observed > params.eta {
        result.abort = Some(AbortReason::BellTest);
    }
    result.messages = channel.into_log();
    Ok(result)
}

/// Protocol B followed by input reveal, the check-count test, reconciliation and privacy amplification.
///
/// `observer` sees every public message as it is sent.
pub fn run_protocol_a<R: Rng + ?Sized>(
    pair: &mut dyn DevicePair,
    observer: Option<&mut dyn Observer>,
    params: &ProtocolParams,
    rng: &mut R,
) -> Result<SessionResult> {
    params.validate()?;
    let mut alice_rng = child(rng);
    let mut bob_rng = child(rng);
    let rounds = play_rounds(pair, params.m, &mut alice_rng, &mut bob_rng)?;
    let mut channel = match observer {
        Some(obs) => Channel::with_observer(obs),
        None => Channel::new(),
    };
    let (bell, eta_observed) = bell_phase(params, &rounds, &mut alice_rng, &mut channel)?;
    let mut result = empty_result(params, rounds, bell, eta_observed);
    if params.enforce_bell_test && eta_observed > params.eta {
        result.abort = Some(AbortReason::BellTest);
        result.messages = channel.into_log();
        return Ok(result);
    }

    let PublicMessage::InputReveal(x) = channel.send(Party::A, &PublicMessage::InputReveal(result.x.clone()))? else {
        unreachable!("reveal")
    };
    let PublicMessage::InputReveal(y) = channel.send(Party::B, &PublicMessage::InputReveal(result.y.clone()))? else {
        unreachable!("reveal")
    };
    result.check_set = (0..params.m).filter(|&i| x[i] == 2 && y[i] == 1).collect();
    let m = params.m as f64;
    if (result.check_set.len() as f64 - m / 6.0).abs() > 10.0 * m.sqrt() {
        result.abort = Some(AbortReason::CheckCount);
        result.messages = channel.into_log();
        return Ok(result);
    }

    let positions = result.raw_key_positions();
    if positions.is_empty() {
        result.messages = channel.into_log();
        return Ok(result);
    }
    let alice_raw: Vec<bool> = positions.iter().map(|&i| result.a[i]).collect();
    let bob_raw: Vec<bool> = positions.iter().map(|&i| result.b[i]).collect();

    let recon = reconcile_with(&params.recon, &alice_raw, &bob_raw, params.q_est(), params.eps, &mut alice_rng, &mut channel)?;
    result.leakage_bits = recon.leakage_bits;
    if !recon.success {
        result.abort = Some(AbortReason::ReconFail);
        result.messages = channel.into_log();
        return Ok(result);
    }

    let n = positions.len();
    let basis_size = match params.rate_model.basis {
        KeyBasis::CheckRounds => result.check_set.len(),
        KeyBasis::CheckMinusBell { .. } => n,
    };
    let model = match params.rate_model.recon_cost {
        ReconCost::Empirical { .. } => RateModel {
            recon_cost: ReconCost::Empirical { leak_per_bit: recon.leakage_bits as f64 / n as f64 },
            ..params.rate_model
        },
        _ => params.rate_model,
    };
    let out_len = key_length_for_kappa(params.kappa(), params.eta, params.eps, params.m, basis_size, &model)?.min(n);

    let (alice_key, bob_key) = match params.pa {
        PaBackend::Toeplitz => {
            let seed = ToeplitzSeed::random(n, out_len, &mut alice_rng);
            let msg = PublicMessage::PaSeed { backend: PaBackend::Toeplitz, out_len: out_len as u32, seed: seed.bits };
            let PublicMessage::PaSeed { seed, .. } = channel.send(Party::A, &msg)? else { unreachable!("seed") };
            let seed = ToeplitzSeed::new(seed);
            (toeplitz_hash(&recon.corrected, &seed, out_len)?, toeplitz_hash(&bob_raw, &seed, out_len)?)
        }
        PaBackend::Trevisan if out_len == 0 => {
            let msg = PublicMessage::PaSeed { backend: PaBackend::Trevisan, out_len: 0, seed: Vec::new() };
            channel.send(Party::A, &msg)?;
            (Vec::new(), Vec::new())
        }
        PaBackend::Trevisan => {
            let config = ExtractorConfig::for_source(n, out_len, params.eps)?;
            let seed: Vec<bool> = (0..config.seed_len()).map(|_| alice_rng.random()).collect();
            let msg = PublicMessage::PaSeed { backend: PaBackend::Trevisan, out_len: out_len as u32, seed };
            let PublicMessage::PaSeed { seed, .. } = channel.send(Party::A, &msg)? else { unreachable!("seed") };
            (trevisan_extract(&recon.corrected, &seed, &config)?, trevisan_extract(&bob_raw, &seed, &config)?)
        }
    };
    result.alice_key = alice_key;
    result.bob_key = bob_key;
    result.messages = channel.into_log();
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::devices::{deterministic_pair, honest_pair};
    use crate::protocol::disclosed_bits;
    use crate::rng::stream;

    fn small(m: usize, bell: usize) -> ProtocolParams {
        ProtocolParams { m, ..ProtocolParams::default() }.with_bell_size(bell)
    }

    #[test]
    fn bell_selection() {
        let mut rng = stream(20, 0);
        assert_eq!(select_bell_rounds(7, 7, &mut rng).unwrap(), (0..7).collect::<Vec<_>>());
        assert!(select_bell_rounds(7, 0, &mut rng).is_err());
        assert!(select_bell_rounds(7, 8, &mut rng).is_err());
        let s1 = select_bell_rounds(1000, 50, &mut stream(21, 0)).unwrap();
        let s2 = select_bell_rounds(1000, 50, &mut stream(21, 0)).unwrap();
        assert_eq!(s1, s2);
        assert!(s1.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn bell_selection_uniform() {
        let mut rng = stream(22, 0);
        let mut counts = [0usize; 10];
        let draws = 100_000;
        for _ in 0..draws {
            for i in select_bell_rounds(10, 3, &mut rng).unwrap() {
                counts[i] += 1;
            }
        }
        for c in counts {
            assert!((c as f64 / draws as f64 - 0.3).abs() < 0.01);
        }
    }

    #[test]
    fn protocol_b_deterministic_aborts() {
        let params = small(6000, 1000);
        let r = run_protocol_b(&mut deterministic_pair([false; 3], [false; 2]), &params, &mut stream(23, 0)).unwrap();
        assert_eq!(r.abort, Some(AbortReason::BellTest));
        assert_eq!(r.bell_set.len(), 1000);
        assert!(r.alice_key.is_empty());
        assert_eq!(recompute_eta_observed(&r.messages).unwrap().to_bits(), r.eta_observed.to_bits());
    }

    #[test]
    fn protocol_b_single_round() {
        let params = small(1, 1);
        let r = run_protocol_b(&mut deterministic_pair([false; 3], [false; 2]), &params, &mut stream(24, 0)).unwrap();
        let opt = crate::analysis::compute_opt();
        assert!(r.eta_observed == opt - 1.0 || r.eta_observed == opt);
    }

    #[test]
    fn protocol_a_honest_end_to_end() {
        let params = small(30_000, 6000);
        let mut rng = stream(25, 0);
        let mut pair = honest_pair(0.002, &mut rng).unwrap();
        let r = run_protocol_a(&mut pair, None, &params, &mut rng).unwrap();
        assert!(r.abort.is_none(), "{:?} η′={}", r.abort, r.eta_observed);
        assert!(!r.alice_key.is_empty());
        assert_eq!(r.alice_key, r.bob_key);
        assert_eq!(r.leakage_bits, disclosed_bits(&r.messages, Party::B).unwrap());
        assert_eq!(recompute_eta_observed(&r.messages).unwrap().to_bits(), r.eta_observed.to_bits());
        for &i in &r.check_set {
            assert_eq!((r.x[i], r.y[i]), (2, 1));
        }
        let back = SessionResult::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn protocol_a_trevisan_backend() {
        let params = ProtocolParams { pa: PaBackend::Trevisan, ..small(30_000, 6000) };
        let mut rng = stream(26, 0);
        let mut pair = honest_pair(0.0, &mut rng).unwrap();
        let r = run_protocol_a(&mut pair, None, &params, &mut rng).unwrap();
        assert!(r.abort.is_none());
        assert!(!r.alice_key.is_empty());
        assert_eq!(r.alice_key, r.bob_key);
    }

    #[test]
    fn json_schema_fields() {
        let params = small(600, 100);
        let r = run_protocol_b(&mut deterministic_pair([false; 3], [false; 2]), &params, &mut stream(27, 0)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        for key in ["m", "x", "y", "a", "b", "bell_set", "check_set", "eta_observed", "aborted", "abort_reason", "leakage_bits", "alice_key", "bob_key", "messages"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["abort_reason"], "BELL_TEST");
        assert_eq!(v["messages"][0]["from"], "A");
        assert!(SessionResult::from_json("{\"m\": 1}").is_err());
    }
}
