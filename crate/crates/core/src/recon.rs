//! Interactive parity-bisection reconciliation (Cascade) with hash verification.
//!
//! Bob discloses parities and Alice corrects her copy toward Bob's string.
//! Each pass shuffles positions with a permutation derived from a public seed
//! Alice announces, then splits them into blocks. Bisection requests for all
//! mismatched blocks are batched into one query per step. A correction found
//! in one pass re-opens the blocks containing that position in earlier passes.
//! Only Bob's block parities, bisection replies and verification tag count as
//! leakage; seeds and requests are independent of the key.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::bits::parity;
use crate::extract::{toeplitz_hash, ToeplitzSeed};
use crate::protocol::{Channel, ParityRange, Party, PublicMessage};
use crate::rng::SimRng;
use crate::{Error, Result};

/// −q log₂ q − (1−q) log₂(1−q), with H(0) = H(1) = 0.
pub fn binary_entropy(q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::param(format!("probability {q} outside [0,1]")));
    }
    if q == 0.0 || q == 1.0 {
        return Ok(0.0);
    }
    Ok(-q * q.log2() - (1.0 - q) * (1.0 - q).log2())
}

/// ⌈log₂(2/ε)⌉.
pub fn tag_bits(eps: f64) -> usize {
    (2.0 / eps).log2().ceil() as usize
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconConfig {
    pub passes: usize,
    /// First-pass block size is ⌈first_block_factor / q_est⌉, doubling each pass.
    pub first_block_factor: f64,
}

impl Default for ReconConfig {
    fn default() -> Self {
        Self { passes: 4, first_block_factor: 0.73 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReconResult {
    /// Alice's reconciled copy of Bob's string.
    pub corrected: Vec<bool>,
    pub leakage_bits: usize,
    pub success: bool,
    pub passes: usize,
}

struct Pass {
    perm: Vec<u32>,
    pos_of: Vec<u32>,
    block: usize,
    bob_parity: Vec<bool>,
}

impl Pass {
    fn new(n: usize, block: usize, seed: u64) -> Self {
        let mut perm: Vec<u32> = (0..n as u32).collect();
        perm.shuffle(&mut SimRng::seed_from_u64(seed));
        let mut pos_of = vec![0u32; n];
        for (pos, &i) in perm.iter().enumerate() {
            pos_of[i as usize] = pos as u32;
        }
        Self { perm, pos_of, block, bob_parity: Vec::new() }
    }

    fn parity_of(&self, bits: &[bool], start: usize, len: usize) -> bool {
        parity(self.perm[start..start + len].iter().map(|&i| bits[i as usize]))
    }

    fn blocks(&self) -> usize {
        self.perm.len().div_ceil(self.block)
    }

    fn block_range(&self, b: usize) -> (usize, usize) {
        let start = b * self.block;
        (start, self.block.min(self.perm.len() - start))
    }
}

#[derive(Clone, Copy, Debug)]
struct Interval {
    pass: usize,
    start: usize,
    len: usize,
    bob_parity: bool,
}

pub fn reconcile<R: Rng + ?Sized>(
    alice: &[bool],
    bob: &[bool],
    q_est: f64,
    eps: f64,
    rng: &mut R,
    channel: &mut Channel<'_>,
) -> Result<ReconResult> {
    reconcile_with(&ReconConfig::default(), alice, bob, q_est, eps, rng, channel)
}

pub fn reconcile_with<R: Rng + ?Sized>(
    config: &ReconConfig,
    alice: &[bool],
    bob: &[bool],
    q_est: f64,
    eps: f64,
    rng: &mut R,
    channel: &mut Channel<'_>,
) -> Result<ReconResult> {
    let n = bob.len();
    if alice.len() != n {
        return Err(Error::LengthMismatch { expected: n, actual: alice.len() });
    }
    if n == 0 {
        return Err(Error::param("reconciliation needs at least one bit"));
    }
    if !(0.0..=0.25).contains(&q_est) {
        return Err(Error::param(format!("q_est = {q_est} outside [0, 0.25]")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::param(format!("ε = {eps} outside (0,1)")));
    }
    if !(config.first_block_factor > 0.0) {
        return Err(Error::param("first_block_factor must be positive"));
    }

    let mut corrected = alice.to_vec();
    let mut leakage = 0usize;
    let passes_run = if q_est == 0.0 { 0 } else { config.passes };
    let first_block = ((config.first_block_factor / q_est).ceil() as usize).clamp(1, n);
    let mut passes: Vec<Pass> = Vec::with_capacity(passes_run);

    for p in 0..passes_run {
        let announced = channel.send(Party::A, &PublicMessage::PermutationSeed { pass: p as u8, seed: rng.random() })?;
        let PublicMessage::PermutationSeed { seed, .. } = announced else { unreachable!("seed message") };
        let block = first_block.saturating_mul(1 << p.min(40)).min(n);
        let mut pass = Pass::new(n, block, seed);

        let bob_parities: Vec<bool> = (0..pass.blocks())
            .map(|b| {
                let (s, l) = pass.block_range(b);
                pass.parity_of(bob, s, l)
            })
            .collect();
        let PublicMessage::BlockParities(received) = channel.send(Party::B, &PublicMessage::BlockParities(bob_parities))? else {
            unreachable!("parity message")
        };
        leakage += received.len();
        pass.bob_parity = received;
        passes.push(pass);

        let current = &passes[p];
        let mut active: Vec<Interval> = (0..current.blocks())
            .filter_map(|b| {
                let (start, len) = current.block_range(b);
                let bob_parity = current.bob_parity[b];
                (current.parity_of(&corrected, start, len) != bob_parity).then_some(Interval { pass: p, start, len, bob_parity })
            })
            .collect();

        while !active.is_empty() {
            let mut flipped = Vec::new();
            let mut pending = Vec::new();
            for iv in active.drain(..) {
                if iv.len == 1 {
                    let i = passes[iv.pass].perm[iv.start] as usize;
                    corrected[i] = !corrected[i];
                    flipped.push(i);
                } else {
                    pending.push(iv);
                }
            }

            let mut narrowed = Vec::with_capacity(pending.len());
            if !pending.is_empty() {
                let ranges: Vec<ParityRange> = pending
                    .iter()
                    .map(|iv| ParityRange { pass: iv.pass as u8, start: iv.start as u32, len: (iv.len / 2) as u32 })
                    .collect();
                let PublicMessage::ParityQuery(query) = channel.send(Party::A, &PublicMessage::ParityQuery(ranges))? else {
                    unreachable!("query message")
                };
                let replies = query
                    .iter()
                    .map(|r| {
                        let pass = passes.get(r.pass as usize).ok_or_else(|| Error::Message("query for unknown pass".into()))?;
                        if (r.start + r.len) as usize > n {
                            return Err(Error::Message("query range outside key".into()));
                        }
                        Ok(pass.parity_of(bob, r.start as usize, r.len as usize))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let PublicMessage::ParityReply(replies) = channel.send(Party::B, &PublicMessage::ParityReply(replies))? else {
                    unreachable!("reply message")
                };
                if replies.len() != pending.len() {
                    return Err(Error::Message("reply count differs from query count".into()));
                }
                leakage += replies.len();
                for (iv, reply) in pending.into_iter().zip(replies) {
                    let half = iv.len / 2;
                    if passes[iv.pass].parity_of(&corrected, iv.start, half) != reply {
                        narrowed.push(Interval { len: half, bob_parity: reply, ..iv });
                    } else {
                        narrowed.push(Interval { start: iv.start + half, len: iv.len - half, bob_parity: iv.bob_parity ^ reply, ..iv });
                    }
                }
            }

            let mut open: BTreeSet<(usize, usize)> = BTreeSet::new();
            for iv in narrowed {
                if passes[iv.pass].parity_of(&corrected, iv.start, iv.len) != iv.bob_parity {
                    open.insert((iv.pass, iv.start / passes[iv.pass].block));
                    active.push(iv);
                }
            }
            let mut touched = BTreeSet::new();
            for &i in &flipped {
                for (q, pass) in passes.iter().enumerate() {
                    touched.insert((q, pass.pos_of[i] as usize / pass.block));
                }
            }
            for (q, b) in touched {
                if open.contains(&(q, b)) {
                    continue;
                }
                let pass = &passes[q];
                let (start, len) = pass.block_range(b);
                if pass.parity_of(&corrected, start, len) != pass.bob_parity[b] {
                    active.push(Interval { pass: q, start, len, bob_parity: pass.bob_parity[b] });
                }
            }
        }
    }

    let tag_len = tag_bits(eps);
    let PublicMessage::TagSeed(seed_bits) = channel.send(Party::A, &PublicMessage::TagSeed(ToeplitzSeed::random(n, tag_len, rng).bits))? else {
        unreachable!("tag seed message")
    };
    let seed = ToeplitzSeed::new(seed_bits);
    let PublicMessage::Tag(bob_tag) = channel.send(Party::B, &PublicMessage::Tag(toeplitz_hash(bob, &seed, tag_len)?))? else {
        unreachable!("tag message")
    };
    leakage += bob_tag.len();
    let success = toeplitz_hash(&corrected, &seed, tag_len)? == bob_tag;
    channel.send(Party::A, &PublicMessage::ReconVerdict(success))?;

    Ok(ReconResult { corrected, leakage_bits: leakage, success, passes: passes_run })
}
