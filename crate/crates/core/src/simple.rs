//! Constant-time simulation for automata whose ε-reachability matrix fits in
//! one simulated word.
//!
//! With `m` states numbered topologically, a state-set is an `m`-bit string
//! and the structure keeps:
//!
//! * `D_a`, the `a`-states, for every symbol `a`;
//! * `E = 0 e(1,1..m) 0 e(2,1..m) ... 0 e(m,1..m)` where `e(i,j)` says state
//!   `i` is ε-reachable from state `j`; the zeros are test bits;
//! * `I = (10^m)^m`, `X = 1(0^m 1)^(m-1)`, `C = 1(0^(m-1) 1)^(m-1)`.
//!
//! Move is `(S >> 1) & D_a`. Close spreads `m` copies of `S` with a
//! multiplication, masks with `E`, collapses each block onto its test bit by
//! a subtraction, and gathers the test bits back into `m` bits with a second
//! multiplication and two shifts inside the `w`-bit word.

use crate::bitstring::BitString;
use crate::sim::{check_width, SimError, Simulation, SymbolMasks};
use crate::syntax::Symbol;
use crate::tnfa::{StateId, Tnfa};

#[derive(Debug, Clone)]
pub struct SimpleSim {
    tnfa: Tnfa,
    m: usize,
    w: usize,
    d: SymbolMasks,
    e: BitString,
    i: BitString,
    /// `I >> m`
    i_low: BitString,
    x: BitString,
    c: BitString,
}

/// Intermediate strings of one Close evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CloseTrace {
    pub y: BitString,
    pub y_or_i: BitString,
    pub i_low: BitString,
    pub difference: BitString,
    pub z: BitString,
    pub product: BitString,
    pub result: BitString,
}

pub struct Scratch {
    wide: BitString,
    word: BitString,
}

/// `m(m + 1)`, the bits the reachability matrix with test bits occupies.
pub fn required_bits(m: usize) -> usize {
    m * (m + 1)
}

impl SimpleSim {
    pub fn build(tnfa: &Tnfa, w: usize) -> Result<SimpleSim, SimError> {
        check_width(w)?;
        let m = tnfa.state_count();
        let len = required_bits(m);
        if len > w {
            return Err(SimError::Capacity {
                states: m,
                needed: len,
                width: w,
            });
        }
        let mut d = SymbolMasks::new();
        for s in tnfa.states() {
            if let Some(a) = tnfa.incoming_symbol(s) {
                d.add(a, s.rank(), m);
            }
        }
        // Block i starts at position (i-1)(m+1)+1 with its test bit.
        let block = |i: usize| (i - 1) * (m + 1) + 1;
        let mut e = BitString::zeros(len);
        for j in tnfa.states() {
            let closure = tnfa.naive_close(&crate::tnfa::StateSet::from_states(m, [j]));
            for i in closure.iter() {
                e.set(block(i.rank()) + j.rank(), true);
            }
        }
        let mut i = BitString::zeros(len);
        for k in 1..=m {
            i.set(block(k), true);
        }
        let i_low = i.shr(m).expect("m <= len");
        // X = 1(0^m 1)^(m-1), length m^2, a 1 every m+1 positions.
        let mut x = BitString::zeros(m * m);
        for k in 0..m {
            x.set(1 + k * (m + 1), true);
        }
        // C = 1(0^(m-1) 1)^(m-1), length m(m-1)+1, a 1 every m positions.
        let mut c = BitString::zeros(m * (m - 1) + 1);
        for k in 0..m {
            c.set(1 + k * m, true);
        }
        Ok(SimpleSim {
            tnfa: tnfa.clone(),
            m,
            w,
            d,
            e,
            i,
            i_low,
            x: x.with_len(len),
            c: c.with_len(len),
        })
    }

    #[inline]
    pub fn state_count(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn word_width(&self) -> usize {
        self.w
    }

    /// `D_a`, or `None` when no transition carries `a`.
    pub fn d(&self, a: Symbol) -> Option<&BitString> {
        self.d.get(a)
    }

    pub fn e(&self) -> &BitString {
        &self.e
    }

    pub fn i(&self) -> &BitString {
        &self.i
    }

    /// `X` at its nominal length `m^2`.
    pub fn x(&self) -> BitString {
        self.x.with_len(self.m * self.m)
    }

    /// `C` at its nominal length `m(m-1)+1`.
    pub fn c(&self) -> BitString {
        self.c.with_len(self.m * (self.m - 1) + 1)
    }

    /// Evaluates Close step by step with value operations, keeping every
    /// intermediate string.
    pub fn close_trace(&self, s: &BitString) -> CloseTrace {
        let len = required_bits(self.m);
        let spread = s.with_len(len).try_mul(&self.x).expect("fits a word");
        let y = &spread & &self.e;
        let y_or_i = &y | &self.i;
        let difference = y_or_i.try_sub(&self.i_low).expect("equal lengths");
        let z = &difference & &self.i;
        let product = z.try_mul(&self.c).expect("fits a word");
        let word = product.with_len(self.w);
        let gathered = word
            .shl(self.w - len)
            .and_then(|v| v.shr(self.w - self.m))
            .expect("shifts within the word");
        CloseTrace {
            y,
            y_or_i,
            i_low: self.i_low.clone(),
            difference,
            z,
            product,
            result: gathered.with_len(self.m),
        }
    }
}

impl Simulation for SimpleSim {
    type Scratch = Scratch;

    fn automaton(&self) -> &Tnfa {
        &self.tnfa
    }

    fn set_len(&self) -> usize {
        self.m
    }

    #[inline]
    fn position(&self, s: StateId) -> usize {
        s.rank()
    }

    fn scratch(&self) -> Scratch {
        Scratch {
            wide: BitString::zeros(required_bits(self.m)),
            word: BitString::zeros(self.w),
        }
    }

    fn move_into(&self, s: &BitString, a: Symbol, out: &mut BitString) {
        match self.d.get(a) {
            Some(d) => {
                out.assign_shr(s, 1);
                *out &= d;
            }
            None => out.clear(),
        }
    }

    fn close_in_place(&self, s: &mut BitString, scratch: &mut Scratch) {
        if s.is_zero() {
            return;
        }
        let len = required_bits(self.m);
        let wide = &mut scratch.wide;
        wide.assign_resized(s);
        wide.mul_assign(&self.x);
        *wide &= &self.e;
        *wide |= &self.i;
        wide.sub_assign(&self.i_low);
        *wide &= &self.i;
        wide.mul_assign(&self.c);
        let word = &mut scratch.word;
        word.assign_resized(wide);
        word.shl_assign(self.w - len);
        word.shr_assign(self.w - self.m);
        s.assign_resized(word);
    }
}
