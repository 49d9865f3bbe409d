//! Fixed-length bit sequences with word-RAM arithmetic.
//!
//! A [`BitString`] of length `L` has logical positions `1..=L` read left to
//! right. Position 1 is the most significant bit of the integer
//! interpretation, so the value is `sum(bit(p) * 2^(L - p))` and all arithmetic
//! wraps modulo `2^L`. Under this convention `s >> 1` moves the bit at
//! position `p` to position `p + 1`, which is what the state-set formulas
//! expect: state `i - 1` lands on state `i`.
//!
//! Storage is little-endian in 64-bit words: integer bit `b` lives in
//! `words[b / 64]` at bit `b % 64`. Bits above `L` in the top word are always
//! zero.

use std::fmt;
use std::ops::{BitAnd, BitAndAssign, BitOr, BitOrAssign, BitXor, Not};

use thiserror::Error;

/// Width of the backing machine word.
pub const WORD_BITS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BitError {
    #[error("shift by {shift} exceeds bitstring length {len}")]
    ShiftOutOfRange { shift: usize, len: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("multiplication needs length <= {max} bits, got {len}")]
    WidthExceeded { len: usize, max: usize },
    #[error("position {pos} outside 1..={len}")]
    PositionOutOfRange { pos: usize, len: usize },
    #[error("invalid bit character {0:?}")]
    InvalidDigit(char),
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitString {
    len: usize,
    words: Vec<u64>,
}

#[inline]
fn word_count(len: usize) -> usize {
    len.div_ceil(WORD_BITS)
}

impl BitString {
    pub fn zeros(len: usize) -> Self {
        BitString {
            len,
            words: vec![0; word_count(len)],
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut s = BitString {
            len,
            words: vec![u64::MAX; word_count(len)],
        };
        s.mask_top();
        s
    }

    /// Builds a string of length `len` holding `value mod 2^len`.
    pub fn from_u64(len: usize, value: u64) -> Self {
        let mut s = BitString::zeros(len);
        if let Some(w) = s.words.first_mut() {
            *w = value;
        }
        s.mask_top();
        s
    }

    /// Parses a string of `0`/`1` characters, leftmost is position 1.
    pub fn parse(bits: &str) -> Result<Self, BitError> {
        let len = bits.chars().count();
        let mut s = BitString::zeros(len);
        for (i, c) in bits.chars().enumerate() {
            match c {
                '0' => {}
                '1' => s.set(i + 1, true),
                other => return Err(BitError::InvalidDigit(other)),
            }
        }
        Ok(s)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Backing words, least significant first.
    #[inline]
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Mutable storage words. Bits above the length in the top word must be
    /// left zero.
    #[inline]
    pub(crate) fn words_mut(&mut self) -> &mut [u64] {
        &mut self.words
    }

    /// Integer value if it fits in a machine word.
    pub fn to_u64(&self) -> Option<u64> {
        if self.len <= WORD_BITS {
            Some(self.words.first().copied().unwrap_or(0))
        } else {
            None
        }
    }

    #[inline]
    fn index(&self, pos: usize) -> (usize, u32) {
        debug_assert!(pos >= 1 && pos <= self.len);
        let b = self.len - pos;
        (b / WORD_BITS, (b % WORD_BITS) as u32)
    }

    /// Bit at 1-based position `pos`. Panics when out of range.
    #[inline]
    pub fn get(&self, pos: usize) -> bool {
        assert!(
            pos >= 1 && pos <= self.len,
            "position {pos} outside 1..={}",
            self.len
        );
        let (w, b) = self.index(pos);
        self.words[w] >> b & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, pos: usize, value: bool) {
        assert!(
            pos >= 1 && pos <= self.len,
            "position {pos} outside 1..={}",
            self.len
        );
        let (w, b) = self.index(pos);
        if value {
            self.words[w] |= 1 << b;
        } else {
            self.words[w] &= !(1 << b);
        }
    }

    pub fn try_get(&self, pos: usize) -> Result<bool, BitError> {
        if pos == 0 || pos > self.len {
            return Err(BitError::PositionOutOfRange { pos, len: self.len });
        }
        Ok(self.get(pos))
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Positions holding a 1, in increasing position order.
    pub fn ones_positions(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.count_ones());
        for (wi, &word) in self.words.iter().enumerate().rev() {
            let mut word = word;
            while word != 0 {
                let top = 63 - word.leading_zeros() as usize;
                word &= !(1u64 << top);
                out.push(self.len - (wi * WORD_BITS + top));
            }
        }
        out
    }

    pub fn clear(&mut self) {
        self.words.iter_mut().for_each(|w| *w = 0);
    }

    /// Copies `other` into `self`. Lengths must match.
    #[inline]
    pub fn copy_from(&mut self, other: &BitString) {
        debug_assert_eq!(self.len, other.len);
        self.words.copy_from_slice(&other.words);
    }

    /// Reinterprets the integer value at a new length: zero-extends on the
    /// left when growing, drops high-order (leftmost) bits when shrinking.
    pub fn with_len(&self, len: usize) -> BitString {
        let mut out = BitString::zeros(len);
        let n = out.words.len().min(self.words.len());
        out.words[..n].copy_from_slice(&self.words[..n]);
        out.mask_top();
        out
    }

    #[inline]
    fn mask_top(&mut self) {
        let rem = self.len % WORD_BITS;
        if rem != 0 {
            if let Some(top) = self.words.last_mut() {
                *top &= (1u64 << rem) - 1;
            }
        }
    }

    fn check_len(&self, other: &BitString) -> Result<(), BitError> {
        if self.len != other.len {
            Err(BitError::LengthMismatch {
                left: self.len,
                right: other.len,
            })
        } else {
            Ok(())
        }
    }

    /// `self >> k`: bit at position `p` moves to `p + k`; zeros enter at
    /// position 1.
    pub fn shr(&self, k: usize) -> Result<BitString, BitError> {
        if k > self.len {
            return Err(BitError::ShiftOutOfRange {
                shift: k,
                len: self.len,
            });
        }
        let mut out = self.clone();
        out.shr_assign(k);
        Ok(out)
    }

    /// `self << k`: bit at position `p` moves to `p - k`; bits leaving
    /// position 1 are discarded.
    pub fn shl(&self, k: usize) -> Result<BitString, BitError> {
        if k > self.len {
            return Err(BitError::ShiftOutOfRange {
                shift: k,
                len: self.len,
            });
        }
        let mut out = self.clone();
        out.shl_assign(k);
        Ok(out)
    }

    /// Shift by a signed count: positive shifts right, negative left.
    pub fn shift(&self, k: isize) -> Result<BitString, BitError> {
        if k >= 0 {
            self.shr(k as usize)
        } else {
            self.shl(k.unsigned_abs())
        }
    }

    /// In-place right shift. `k` must not exceed the length.
    pub fn shr_assign(&mut self, k: usize) {
        debug_assert!(k <= self.len);
        shr_words(&mut self.words, k);
    }

    /// In-place left shift. `k` must not exceed the length.
    pub fn shl_assign(&mut self, k: usize) {
        debug_assert!(k <= self.len);
        shl_words(&mut self.words, k);
        self.mask_top();
    }

    /// Writes `src >> k` into `self` without allocating.
    pub fn assign_shr(&mut self, src: &BitString, k: usize) {
        debug_assert_eq!(self.len, src.len);
        debug_assert!(k <= self.len);
        let n = self.words.len();
        let ws = k / WORD_BITS;
        let bs = (k % WORD_BITS) as u32;
        for i in 0..n {
            let j = i + ws;
            let lo = if j < n { src.words[j] >> bs } else { 0 };
            let hi = if bs != 0 && j + 1 < n {
                src.words[j + 1] << (64 - bs)
            } else {
                0
            };
            self.words[i] = lo | hi;
        }
    }

    /// `self := src.with_len(self.len())` without allocating.
    pub fn assign_resized(&mut self, src: &BitString) {
        let n = self.words.len().min(src.words.len());
        self.words[..n].copy_from_slice(&src.words[..n]);
        self.words[n..].iter_mut().for_each(|w| *w = 0);
        self.mask_top();
    }

    /// `self := a & b`, returning whether the result is non-zero.
    #[inline]
    pub fn assign_and(&mut self, a: &BitString, b: &BitString) -> bool {
        debug_assert!(self.len == a.len && a.len == b.len);
        let mut any = 0;
        for ((o, &x), &y) in self.words.iter_mut().zip(&a.words).zip(&b.words) {
            *o = x & y;
            any |= *o;
        }
        any != 0
    }

    /// In-place product modulo `2^L`; both operands must fit one word.
    pub fn mul_assign(&mut self, other: &BitString) {
        debug_assert_eq!(self.len, other.len);
        assert!(self.len <= WORD_BITS, "multiplication needs a single word");
        if let (Some(a), Some(&b)) = (self.words.first_mut(), other.words.first()) {
            *a = a.wrapping_mul(b);
        }
        self.mask_top();
    }

    pub fn try_sub(&self, other: &BitString) -> Result<BitString, BitError> {
        self.check_len(other)?;
        let mut out = self.clone();
        out.sub_assign(other);
        Ok(out)
    }

    /// `self := (self - other) mod 2^L` with the borrow carried across words.
    pub fn sub_assign(&mut self, other: &BitString) {
        debug_assert_eq!(self.len, other.len);
        let mut borrow = false;
        for (a, &b) in self.words.iter_mut().zip(&other.words) {
            let (d1, o1) = a.overflowing_sub(b);
            let (d2, o2) = d1.overflowing_sub(borrow as u64);
            *a = d2;
            borrow = o1 || o2;
        }
        self.mask_top();
    }

    /// Integer product modulo `2^L`. Only defined for `L <= 64`.
    pub fn try_mul(&self, other: &BitString) -> Result<BitString, BitError> {
        self.check_len(other)?;
        if self.len > WORD_BITS {
            return Err(BitError::WidthExceeded {
                len: self.len,
                max: WORD_BITS,
            });
        }
        let a = self.to_u64().unwrap_or(0);
        let b = other.to_u64().unwrap_or(0);
        Ok(BitString::from_u64(self.len, a.wrapping_mul(b)))
    }

    pub fn try_and(&self, other: &BitString) -> Result<BitString, BitError> {
        self.check_len(other)?;
        Ok(self & other)
    }

    pub fn try_or(&self, other: &BitString) -> Result<BitString, BitError> {
        self.check_len(other)?;
        Ok(self | other)
    }

    /// True when every 1 of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BitString) -> bool {
        debug_assert_eq!(self.len, other.len);
        self.words
            .iter()
            .zip(&other.words)
            .all(|(&a, &b)| a & !b == 0)
    }

    pub fn intersects(&self, other: &BitString) -> bool {
        debug_assert_eq!(self.len, other.len);
        self.words
            .iter()
            .zip(&other.words)
            .any(|(&a, &b)| a & b != 0)
    }
}

fn shr_words(words: &mut [u64], k: usize) {
    let n = words.len();
    let ws = k / WORD_BITS;
    let bs = (k % WORD_BITS) as u32;
    for i in 0..n {
        let j = i + ws;
        let lo = if j < n { words[j] >> bs } else { 0 };
        let hi = if bs != 0 && j + 1 < n {
            words[j + 1] << (64 - bs)
        } else {
            0
        };
        words[i] = lo | hi;
    }
}

fn shl_words(words: &mut [u64], k: usize) {
    let n = words.len();
    let ws = k / WORD_BITS;
    let bs = (k % WORD_BITS) as u32;
    for i in (0..n).rev() {
        let lo = if i >= ws { words[i - ws] << bs } else { 0 };
        let hi = if bs != 0 && i > ws {
            words[i - ws - 1] >> (64 - bs)
        } else {
            0
        };
        words[i] = lo | hi;
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in 1..=self.len {
            f.write_str(if self.get(p) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

macro_rules! bitwise {
    ($tr:ident, $method:ident, $op:tt) => {
        impl $tr<&BitString> for &BitString {
            type Output = BitString;
            fn $method(self, rhs: &BitString) -> BitString {
                assert_eq!(self.len, rhs.len, "bitstring length mismatch");
                BitString {
                    len: self.len,
                    words: self
                        .words
                        .iter()
                        .zip(&rhs.words)
                        .map(|(a, b)| a $op b)
                        .collect(),
                }
            }
        }
    };
}

bitwise!(BitAnd, bitand, &);
bitwise!(BitOr, bitor, |);
bitwise!(BitXor, bitxor, ^);

impl BitAndAssign<&BitString> for BitString {
    #[inline]
    fn bitand_assign(&mut self, rhs: &BitString) {
        debug_assert_eq!(self.len, rhs.len);
        for (a, b) in self.words.iter_mut().zip(&rhs.words) {
            *a &= b;
        }
    }
}

impl BitOrAssign<&BitString> for BitString {
    #[inline]
    fn bitor_assign(&mut self, rhs: &BitString) {
        debug_assert_eq!(self.len, rhs.len);
        for (a, b) in self.words.iter_mut().zip(&rhs.words) {
            *a |= b;
        }
    }
}

impl Not for &BitString {
    type Output = BitString;
    fn not(self) -> BitString {
        let mut out = BitString {
            len: self.len,
            words: self.words.iter().map(|w| !w).collect(),
        };
        out.mask_top();
        out
    }
}
