use super::{check_inputs, tape_word, DevicePair, SideDevice};
use crate::analysis::chsh_satisfied;
use crate::Result;

/// Two side devices with no channel between them.
pub struct IsolatedPair<A, B> {
    alice: A,
    bob: B,
}

impl<A: SideDevice, B: SideDevice> IsolatedPair<A, B> {
    pub fn new(alice: A, bob: B) -> Self {
        Self { alice, bob }
    }
}

impl<A: SideDevice, B: SideDevice> DevicePair for IsolatedPair<A, B> {
    fn round(&mut self, index: usize, x: u8, y: u8) -> Result<(bool, bool)> {
        check_inputs(index, x, y)?;
        Ok((self.alice.respond(index, x), self.bob.respond(index, y)))
    }
}

/// Answers every round with a fixed function of the input.
#[derive(Clone, Debug)]
pub struct FixedResponse(pub Vec<bool>);

impl SideDevice for FixedResponse {
    fn respond(&mut self, _round: usize, input: u8) -> bool {
        self.0[input as usize]
    }
}

pub fn deterministic_pair(alice: [bool; 3], bob: [bool; 2]) -> IsolatedPair<FixedResponse, FixedResponse> {
    IsolatedPair::new(FixedResponse(alice.to_vec()), FixedResponse(bob.to_vec()))
}

/// What a memory device sees when answering a round: its own history and its copy of the tape.
pub struct SideView<'a> {
    pub round: usize,
    pub input: u8,
    pub history: &'a [(u8, bool)],
    pub tape: &'a [u8],
}

pub type Strategy = Box<dyn FnMut(&SideView<'_>) -> bool + Send>;

/// A side device whose output may depend on all of its own past inputs and outputs.
pub struct MemorySide {
    strategy: Strategy,
    history: Vec<(u8, bool)>,
    tape: Vec<u8>,
}

impl MemorySide {
    pub fn new(strategy: Strategy, tape: Vec<u8>) -> Self {
        Self { strategy, history: Vec::new(), tape }
    }

    pub fn history(&self) -> &[(u8, bool)] {
        &self.history
    }
}

impl SideDevice for MemorySide {
    fn respond(&mut self, round: usize, input: u8) -> bool {
        let out = (self.strategy)(&SideView {
            round,
            input,
            history: &self.history,
            tape: &self.tape,
        });
        self.history.push((input, out));
        out
    }
}

/// Each side receives its own copy of `tape`.
pub fn memory_pair(alice: Strategy, bob: Strategy, tape: Vec<u8>) -> IsolatedPair<MemorySide, MemorySide> {
    IsolatedPair::new(MemorySide::new(alice, tape.clone()), MemorySide::new(bob, tape))
}

/// All deterministic strategies satisfying five of the six input-pair constraints.
pub fn optimal_deterministic_strategies() -> Vec<([bool; 3], [bool; 2])> {
    let mut out = Vec::new();
    for fa in 0u8..8 {
        for fb in 0u8..4 {
            let alice = [fa & 1 == 1, fa & 2 == 2, fa & 4 == 4];
            let bob = [fb & 1 == 1, fb & 2 == 2];
            let satisfied = (0..3u8)
                .flat_map(|x| (0..2u8).map(move |y| (x, y)))
                .filter(|&(x, y)| chsh_satisfied(x, y, alice[x as usize], bob[y as usize]))
                .count();
            if satisfied == 5 {
                out.push((alice, bob));
            }
        }
    }
    out
}

/// Both sides read the same per-round choice of optimal deterministic strategy from the tape.
pub fn tape_synchronized_pair(tape: Vec<u8>) -> IsolatedPair<MemorySide, MemorySide> {
    fn choice(view: &SideView<'_>, count: usize) -> usize {
        let w = tape_word(view.tape, b"sync", view.round);
        (u64::from_be_bytes(w[..8].try_into().unwrap()) % count as u64) as usize
    }
    let table_a = optimal_deterministic_strategies();
    let table_b = table_a.clone();
    let alice: Strategy = Box::new(move |v| table_a[choice(v, table_a.len())].0[v.input as usize]);
    let bob: Strategy = Box::new(move |v| table_b[choice(v, table_b.len())].1[v.input as usize]);
    memory_pair(alice, bob, tape)
}
