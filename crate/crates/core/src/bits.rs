use std::fmt;

use crate::error::{Error, Result};

/// Fixed-length bit vector, one bit per capacitor unit, bit 0 = unit 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct SwitchBits {
    word: u64,
    len: u8,
}

impl SwitchBits {
    pub const MAX_LEN: usize = 64;

    pub fn zeros(len: usize) -> Self {
        assert!(len <= Self::MAX_LEN, "at most {} units", Self::MAX_LEN);
        Self { word: 0, len: len as u8 }
    }

    pub fn ones(len: usize) -> Self {
        let mut b = Self::zeros(len);
        b.word = Self::full_word(len);
        b
    }

    pub fn from_word(word: u64, len: usize) -> Self {
        let mut b = Self::zeros(len);
        b.word = word & Self::full_word(len);
        b
    }

    pub fn from_indices(len: usize, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut b = Self::zeros(len);
        for i in indices {
            if i >= len {
                return Err(Error::LengthMismatch { left: i + 1, right: len });
            }
            b.set(i, true);
        }
        Ok(b)
    }

    fn full_word(len: usize) -> u64 {
        if len == 64 {
            u64::MAX
        } else {
            (1u64 << len) - 1
        }
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn word(&self) -> u64 {
        self.word
    }

    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len());
        self.word >> i & 1 == 1
    }

    pub fn set(&mut self, i: usize, on: bool) {
        assert!(i < self.len(), "bit {i} out of range for {} units", self.len);
        if on {
            self.word |= 1 << i;
        } else {
            self.word &= !(1 << i);
        }
    }

    pub fn count_ones(&self) -> u32 {
        self.word.count_ones()
    }

    pub fn none(&self) -> bool {
        self.word == 0
    }

    pub fn ones_iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&i| self.get(i))
    }

    pub fn and(self, other: Self) -> Self {
        Self::from_word(self.word & other.word, self.len())
    }

    pub fn or(self, other: Self) -> Self {
        Self::from_word(self.word | other.word, self.len())
    }

    pub fn and_not(self, other: Self) -> Self {
        Self::from_word(self.word & !other.word, self.len())
    }

    pub fn xor(self, other: Self) -> Self {
        Self::from_word(self.word ^ other.word, self.len())
    }

    /// Sum of `weights` over set bits, in index order.
    pub fn weighted_sum(&self, weights: &[f64]) -> f64 {
        self.ones_iter().map(|i| weights[i]).sum()
    }

    /// Bits `start..start + len` as a new vector.
    pub fn slice(&self, start: usize, len: usize) -> Self {
        assert!(start + len <= self.len());
        Self::from_word(self.word >> start, len)
    }

    /// Overwrites bits `start..start + part.len()` with `part`.
    pub fn splice(&mut self, start: usize, part: Self) {
        for i in 0..part.len() {
            self.set(start + i, part.get(i));
        }
    }
}

/// Unit 0 first, e.g. `1010`.
impl fmt::Display for SwitchBits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len() {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basics() {
        let mut b = SwitchBits::zeros(4);
        b.set(1, true);
        b.set(3, true);
        assert_eq!(b.to_string(), "0101");
        assert_eq!(b.count_ones(), 2);
        assert_eq!(b.ones_iter().collect::<Vec<_>>(), vec![1, 3]);
        assert_eq!(b.weighted_sum(&[1.0, 2.0, 4.0, 8.0]), 10.0);
        assert_eq!(SwitchBits::ones(64).count_ones(), 64);
        assert_eq!(b.slice(2, 2).to_string(), "01");
        let mut c = SwitchBits::zeros(6);
        c.splice(3, b.slice(0, 3));
        assert_eq!(c.to_string(), "000010");
        assert!(SwitchBits::from_indices(3, [3]).is_err());
    }
}
