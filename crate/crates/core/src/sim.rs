//! The four-operation interface shared by every per-automaton backend.

use thiserror::Error;

use crate::bitstring::BitString;
use crate::syntax::Symbol;
use crate::tnfa::{StateId, StateSet, Tnfa};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("state {state} outside the automaton's {count} states")]
    StateOutOfRange { state: usize, count: usize },
    #[error("automaton has {states} states; m(m+1) = {needed} exceeds word width {width}")]
    Capacity {
        states: usize,
        needed: usize,
        width: usize,
    },
    #[error("unsupported word width {0}; expected 8, 16, 32 or 64")]
    BadWidth(usize),
}

pub fn check_width(w: usize) -> Result<(), SimError> {
    if matches!(w, 8 | 16 | 32 | 64) {
        Ok(())
    } else {
        Err(SimError::BadWidth(w))
    }
}

/// `D_α` for every symbol, indexed directly by symbol value.
#[derive(Debug, Clone, Default)]
pub struct SymbolMasks {
    masks: Vec<Option<BitString>>,
}

impl SymbolMasks {
    pub fn new() -> Self {
        SymbolMasks::default()
    }

    /// Sets bit `pos` of `D_a`, creating it with length `len` if needed.
    pub fn add(&mut self, a: Symbol, pos: usize, len: usize) {
        let i = a.0 as usize;
        if self.masks.len() <= i {
            self.masks.resize(i + 1, None);
        }
        self.masks[i]
            .get_or_insert_with(|| BitString::zeros(len))
            .set(pos, true);
    }

    /// `D_a`, or `None` when no transition carries `a`.
    #[inline]
    pub fn get(&self, a: Symbol) -> Option<&BitString> {
        self.masks.get(a.0 as usize).and_then(Option::as_ref)
    }
}

/// A simulation data structure for one automaton: Move, Close, Member and
/// Insert on state-sets encoded as bitstrings in the backend's own layout.
///
/// Implementations are immutable once built; per-run temporaries live in
/// [`Simulation::Scratch`].
pub trait Simulation {
    type Scratch;

    fn automaton(&self) -> &Tnfa;

    /// Length of an encoded state-set.
    fn set_len(&self) -> usize;

    /// 1-based bit position of `s` in the encoding.
    fn position(&self, s: StateId) -> usize;

    fn scratch(&self) -> Self::Scratch;

    /// `out := Move(s, a)`.
    fn move_into(&self, s: &BitString, a: Symbol, out: &mut BitString);

    /// `s := Close(s)`.
    fn close_in_place(&self, s: &mut BitString, scratch: &mut Self::Scratch);

    fn empty(&self) -> BitString {
        BitString::zeros(self.set_len())
    }

    fn encode(&self, set: &StateSet) -> BitString {
        let mut out = self.empty();
        for s in set.iter() {
            out.set(self.position(s), true);
        }
        out
    }

    fn decode(&self, bits: &BitString) -> StateSet {
        let t = self.automaton();
        StateSet::from_states(
            t.state_count(),
            t.states().filter(|&s| bits.get(self.position(s))),
        )
    }

    fn move_set(&self, s: &BitString, a: Symbol) -> BitString {
        let mut out = self.empty();
        self.move_into(s, a, &mut out);
        out
    }

    fn close(&self, s: &BitString) -> BitString {
        let mut out = s.clone();
        self.close_in_place(&mut out, &mut self.scratch());
        out
    }

    fn member(&self, s: &BitString, state: StateId) -> Result<bool, SimError> {
        self.check_state(state)?;
        Ok(s.get(self.position(state)))
    }

    fn insert(&self, s: &BitString, state: StateId) -> Result<BitString, SimError> {
        self.check_state(state)?;
        let mut out = s.clone();
        out.set(self.position(state), true);
        Ok(out)
    }

    fn check_state(&self, state: StateId) -> Result<(), SimError> {
        let count = self.automaton().state_count();
        if state.index() < count {
            Ok(())
        } else {
            Err(SimError::StateOutOfRange {
                state: state.rank(),
                count,
            })
        }
    }

    /// Full-string membership: `S_0 = Close({θ})`,
    /// `S_j = Close(Move(S_{j-1}, q[j]))`, accept iff `φ ∈ S_n`.
    fn is_match(&self, q: &[u8]) -> bool {
        let t = self.automaton();
        let mut scratch = self.scratch();
        let mut cur = self.empty();
        let mut next = self.empty();
        cur.set(self.position(t.start()), true);
        self.close_in_place(&mut cur, &mut scratch);
        for &c in q {
            if cur.is_zero() {
                return false;
            }
            self.move_into(&cur, Symbol::byte(c), &mut next);
            self.close_in_place(&mut next, &mut scratch);
            std::mem::swap(&mut cur, &mut next);
        }
        cur.get(self.position(t.accept()))
    }
}

/// The transition-scanning reference simulation behind the common interface.
/// Encoding is the automaton's own rank order.
#[derive(Debug, Clone)]
pub struct NaiveSim {
    tnfa: Tnfa,
}

impl NaiveSim {
    pub fn new(tnfa: Tnfa) -> Self {
        NaiveSim { tnfa }
    }
}

impl Simulation for NaiveSim {
    type Scratch = ();

    fn automaton(&self) -> &Tnfa {
        &self.tnfa
    }

    fn set_len(&self) -> usize {
        self.tnfa.state_count()
    }

    #[inline]
    fn position(&self, s: StateId) -> usize {
        s.rank()
    }

    fn scratch(&self) {}

    fn move_into(&self, s: &BitString, a: Symbol, out: &mut BitString) {
        let moved = self.tnfa.naive_move(&StateSet::from_bits(s.clone()), a);
        out.copy_from(moved.bits());
    }

    fn close_in_place(&self, s: &mut BitString, _: &mut ()) {
        let closed = self.tnfa.naive_close(&StateSet::from_bits(s.clone()));
        s.copy_from(closed.bits());
    }

    fn is_match(&self, q: &[u8]) -> bool {
        self.tnfa.naive_match(q)
    }
}
