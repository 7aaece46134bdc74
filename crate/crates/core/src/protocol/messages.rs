//! Public messages and their byte encoding.
//!
//! A payload is a tag byte followed by the body. Counts are 4-byte big-endian;
//! bit vectors are a count followed by the bits packed little-endian.

use serde::{Deserialize, Serialize};

use crate::bits::{pack_le, unpack_le};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Party {
    A,
    B,
}

/// One entry of the public log, exactly as transmitted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Message {
    pub from: Party,
    pub seq: u32,
    pub payload: Vec<u8>,
}

impl Message {
    pub fn decode(&self) -> Result<PublicMessage> {
        PublicMessage::decode(&self.payload)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PaBackend {
    Toeplitz,
    Trevisan,
}

/// A bisection request: parity of `len` positions starting at `start` in pass `pass`'s permuted order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParityRange {
    pub pass: u8,
    pub start: u32,
    pub len: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PublicMessage {
    /// Sorted Bell-round indices.
    BellSet(Vec<u32>),
    /// The sender's inputs and outputs on the Bell set, in Bell-set order.
    BellAnnouncement { inputs: Vec<u8>, outputs: Vec<bool> },
    /// The sender's inputs for every round.
    InputReveal(Vec<u8>),
    PermutationSeed { pass: u8, seed: u64 },
    BlockParities(Vec<bool>),
    ParityQuery(Vec<ParityRange>),
    ParityReply(Vec<bool>),
    TagSeed(Vec<bool>),
    Tag(Vec<bool>),
    ReconVerdict(bool),
    PaSeed { backend: PaBackend, out_len: u32, seed: Vec<bool> },
}

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_be_bytes());
    }

    fn len(&mut self, n: usize) {
        self.u32(u32::try_from(n).expect("message field longer than u32::MAX"));
    }

    fn bits(&mut self, bits: &[bool]) {
        self.len(bits.len());
        self.0.extend(pack_le(bits));
    }

    fn bytes(&mut self, bytes: &[u8]) {
        self.len(bytes.len());
        self.0.extend_from_slice(bytes);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Message(format!("truncated payload at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn bits(&mut self) -> Result<Vec<bool>> {
        let n = self.u32()? as usize;
        Ok(unpack_le(self.take(n.div_ceil(8))?, n))
    }

    fn bytes(&mut self) -> Result<Vec<u8>> {
        let n = self.u32()? as usize;
        Ok(self.take(n)?.to_vec())
    }

    fn finish(self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Message(format!("{} trailing bytes", self.buf.len() - self.pos)));
        }
        Ok(())
    }
}

impl PublicMessage {
    fn tag(&self) -> u8 {
        match self {
            PublicMessage::BellSet(_) => 1,
            PublicMessage::BellAnnouncement { .. } => 2,
            PublicMessage::InputReveal(_) => 3,
            PublicMessage::PermutationSeed { .. } => 4,
            PublicMessage::BlockParities(_) => 5,
            PublicMessage::ParityQuery(_) => 6,
            PublicMessage::ParityReply(_) => 7,
            PublicMessage::TagSeed(_) => 8,
            PublicMessage::Tag(_) => 9,
            PublicMessage::ReconVerdict(_) => 10,
            PublicMessage::PaSeed { .. } => 11,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer(vec![self.tag()]);
        match self {
            PublicMessage::BellSet(idx) => {
                w.len(idx.len());
                idx.iter().for_each(|&i| w.u32(i));
            }
            PublicMessage::BellAnnouncement { inputs, outputs } => {
                w.bytes(inputs);
                w.bits(outputs);
            }
            PublicMessage::InputReveal(inputs) => w.bytes(inputs),
            PublicMessage::PermutationSeed { pass, seed } => {
                w.0.push(*pass);
                w.0.extend_from_slice(&seed.to_be_bytes());
            }
            PublicMessage::ParityQuery(ranges) => {
                w.len(ranges.len());
                for r in ranges {
                    w.0.push(r.pass);
                    w.u32(r.start);
                    w.u32(r.len);
                }
            }
            PublicMessage::BlockParities(b) | PublicMessage::ParityReply(b) | PublicMessage::TagSeed(b) | PublicMessage::Tag(b) => {
                w.bits(b)
            }
            PublicMessage::ReconVerdict(ok) => w.0.push(*ok as u8),
            PublicMessage::PaSeed { backend, out_len, seed } => {
                w.0.push(match backend {
                    PaBackend::Toeplitz => 0,
                    PaBackend::Trevisan => 1,
                });
                w.u32(*out_len);
                w.bits(seed);
            }
        }
        w.0
    }

    pub fn decode(payload: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: payload, pos: 0 };
        let msg = match r.u8()? {
            1 => {
                let n = r.u32()? as usize;
                PublicMessage::BellSet((0..n).map(|_| r.u32()).collect::<Result<_>>()?)
            }
            2 => PublicMessage::BellAnnouncement { inputs: r.bytes()?, outputs: r.bits()? },
            3 => PublicMessage::InputReveal(r.bytes()?),
            4 => PublicMessage::PermutationSeed { pass: r.u8()?, seed: r.u64()? },
            5 => PublicMessage::BlockParities(r.bits()?),
            6 => {
                let n = r.u32()? as usize;
                let ranges = (0..n)
                    .map(|_| Ok(ParityRange { pass: r.u8()?, start: r.u32()?, len: r.u32()? }))
                    .collect::<Result<_>>()?;
                PublicMessage::ParityQuery(ranges)
            }
            7 => PublicMessage::ParityReply(r.bits()?),
            8 => PublicMessage::TagSeed(r.bits()?),
            9 => PublicMessage::Tag(r.bits()?),
            10 => PublicMessage::ReconVerdict(match r.u8()? {
                0 => false,
                1 => true,
                v => return Err(Error::Message(format!("verdict byte {v}"))),
            }),
            11 => {
                let backend = match r.u8()? {
                    0 => PaBackend::Toeplitz,
                    1 => PaBackend::Trevisan,
                    v => return Err(Error::Message(format!("unknown backend {v}"))),
                };
                PublicMessage::PaSeed { backend, out_len: r.u32()?, seed: r.bits()? }
            }
            t => return Err(Error::Message(format!("unknown message tag {t}"))),
        };
        r.finish()?;
        Ok(msg)
    }

    /// Data-dependent bits this message discloses about the sender's raw key.
    pub fn disclosed_bits(&self) -> usize {
        match self {
            PublicMessage::BlockParities(b) | PublicMessage::ParityReply(b) | PublicMessage::Tag(b) => b.len(),
            _ => 0,
        }
    }
}

/// Sees every message as it is sent.
pub trait Observer {
    fn observe(&mut self, message: &Message);
}

/// Authenticated in-memory channel with a complete ordered log.
#[derive(Default)]
pub struct Channel<'a> {
    log: Vec<Message>,
    observer: Option<&'a mut dyn Observer>,
}

impl<'a> Channel<'a> {
    pub fn new() -> Self {
        Self { log: Vec::new(), observer: None }
    }

    pub fn with_observer(observer: &'a mut dyn Observer) -> Self {
        Self { log: Vec::new(), observer: Some(observer) }
    }

    /// Encodes, logs and delivers `msg`. The receiver gets the decoded bytes.
    pub fn send(&mut self, from: Party, msg: &PublicMessage) -> Result<PublicMessage> {
        let message = Message { from, seq: self.log.len() as u32, payload: msg.encode() };
        if let Some(obs) = self.observer.as_deref_mut() {
            obs.observe(&message);
        }
        let delivered = message.decode()?;
        self.log.push(message);
        Ok(delivered)
    }

    pub fn log(&self) -> &[Message] {
        &self.log
    }

    pub fn into_log(self) -> Vec<Message> {
        self.log
    }
}

/// Total data-dependent bits `party` disclosed in `log`.
pub fn disclosed_bits(log: &[Message], party: Party) -> Result<usize> {
    log.iter()
        .filter(|m| m.from == party)
        .map(|m| m.decode().map(|d| d.disclosed_bits()))
        .sum()
}

/// Length-prefixed (4-byte big-endian) framing of payloads for byte streams.
pub fn frame(payloads: &[Vec<u8>]) -> Vec<u8> {
    let mut out = Vec::new();
    for p in payloads {
        out.extend_from_slice(&(p.len() as u32).to_be_bytes());
        out.extend_from_slice(p);
    }
    out
}

pub fn unframe(mut stream: &[u8]) -> Result<Vec<Vec<u8>>> {
    let mut out = Vec::new();
    while !stream.is_empty() {
        if stream.len() < 4 {
            return Err(Error::Message("truncated frame header".into()));
        }
        let n = u32::from_be_bytes(stream[..4].try_into().expect("4 bytes")) as usize;
        if stream.len() < 4 + n {
            return Err(Error::Message("truncated frame body".into()));
        }
        out.push(stream[4..4 + n].to_vec());
        stream = &stream[4 + n..];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples() -> Vec<PublicMessage> {
        vec![
            PublicMessage::BellSet(vec![0, 5, 70_000]),
            PublicMessage::BellAnnouncement { inputs: vec![0, 2, 1], outputs: vec![true, false, true] },
            PublicMessage::InputReveal(vec![2; 17]),
            PublicMessage::PermutationSeed { pass: 2, seed: u64::MAX - 3 },
            PublicMessage::BlockParities(vec![true; 9]),
            PublicMessage::ParityQuery(vec![ParityRange { pass: 1, start: 3, len: 40 }]),
            PublicMessage::ParityReply(vec![]),
            PublicMessage::TagSeed(vec![false, true]),
            PublicMessage::Tag(vec![true; 21]),
            PublicMessage::ReconVerdict(true),
            PublicMessage::PaSeed { backend: PaBackend::Trevisan, out_len: 12, seed: vec![true, true, false] },
        ]
    }

    #[test]
    fn roundtrip() {
        for m in samples() {
            assert_eq!(PublicMessage::decode(&m.encode()).unwrap(), m);
        }
    }

    #[test]
    fn layout() {
        assert_eq!(PublicMessage::Tag(vec![true, false, false, true]).encode(), vec![9, 0, 0, 0, 4, 0b1001]);
        assert_eq!(PublicMessage::ReconVerdict(false).encode(), vec![10, 0]);
    }

    #[test]
    fn rejects_garbage() {
        assert!(PublicMessage::decode(&[]).is_err());
        assert!(PublicMessage::decode(&[99]).is_err());
        assert!(PublicMessage::decode(&[9, 0, 0, 0, 40, 1]).is_err());
        assert!(PublicMessage::decode(&[10, 1, 0]).is_err());
    }

    #[test]
    fn channel_logs_and_notifies() {
        struct Count(usize);
        impl Observer for Count {
            fn observe(&mut self, _: &Message) {
                self.0 += 1;
            }
        }
        let mut count = Count(0);
        let mut ch = Channel::with_observer(&mut count);
        for (i, m) in samples().iter().enumerate() {
            let from = if i % 2 == 0 { Party::A } else { Party::B };
            assert_eq!(&ch.send(from, m).unwrap(), m);
        }
        let log = ch.into_log();
        assert_eq!(count.0, log.len());
        assert!(log.iter().enumerate().all(|(i, m)| m.seq == i as u32));
        assert_eq!(disclosed_bits(&log, Party::A).unwrap(), 9 + 21);
        assert_eq!(disclosed_bits(&log, Party::B).unwrap(), 0);
    }

    #[test]
    fn framing_roundtrip() {
        let payloads: Vec<Vec<u8>> = samples().iter().map(|m| m.encode()).collect();
        assert_eq!(unframe(&frame(&payloads)).unwrap(), payloads);
        assert!(unframe(&[0, 0, 0, 5, 1]).is_err());
    }
}
