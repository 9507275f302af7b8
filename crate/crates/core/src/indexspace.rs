//! Base-3 coordinate indexing for the inner code.
//!
//! A node of the inner code stores `l = 3^m` symbols, `m = C(n, 2)`. Symbol
//! `b` is addressed by its ternary digits `(b_m, ..., b_1)` with
//! `b = b_1 + 3 b_2 + ... + 3^(m-1) b_m`, and digit position `g(i1, i2)` is
//! attached to the node pair `(i1, i2)`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Largest supported digit count; `3^62` fits comfortably in a `u128`.
pub const MAX_DIGITS: usize = 62;

/// Largest digit count for which coordinates may be enumerated densely.
pub const MAX_DENSE_DIGITS: usize = 12;

const fn pow3_table() -> [u128; MAX_DIGITS + 1] {
    let mut t = [1u128; MAX_DIGITS + 1];
    let mut i = 1;
    while i <= MAX_DIGITS {
        t[i] = t[i - 1] * 3;
        i += 1;
    }
    t
}

const POW3: [u128; MAX_DIGITS + 1] = pow3_table();

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IndexError {
    #[error("need 2 <= n with C(n,2) <= {MAX_DIGITS}, got n = {0}")]
    BadNodeCount(usize),
    #[error("invalid node pair ({0}, {1}) for n = {2}")]
    BadPair(usize, usize, usize),
    #[error("node {0} out of range 1..={1}")]
    BadNode(usize, usize),
    #[error("digit position {0} out of range 1..={1}")]
    BadPosition(usize, usize),
    #[error("digit value {0} is not a trit")]
    BadTrit(u8),
    #[error("index {0} out of range for m = {1}")]
    BadIndex(u128, usize),
}

/// A coordinate index `b` in `[0, 3^m)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct BIndex(pub u128);

impl BIndex {
    pub fn value(self) -> u128 {
        self.0
    }

    /// Digit `b_pos` (1-based), without range checks.
    #[inline]
    pub fn digit(self, pos: usize) -> u8 {
        ((self.0 / POW3[pos - 1]) % 3) as u8
    }

    /// Replaces digit `pos` with `u`, without range checks.
    #[inline]
    pub fn set_digit(self, pos: usize, u: u8) -> BIndex {
        let old = u128::from(self.digit(pos));
        BIndex(self.0 - old * POW3[pos - 1] + u128::from(u) * POW3[pos - 1])
    }

    /// Digits least-significant first, `b_1` at index 0.
    pub fn digits(self, m: usize) -> Vec<u8> {
        (1..=m).map(|p| self.digit(p)).collect()
    }

    /// Inverse of [`BIndex::digits`].
    pub fn from_digits(digits: &[u8]) -> Result<BIndex, IndexError> {
        if digits.len() > MAX_DIGITS {
            return Err(IndexError::BadPosition(digits.len(), MAX_DIGITS));
        }
        let mut v = 0u128;
        for (k, &d) in digits.iter().enumerate() {
            if d > 2 {
                return Err(IndexError::BadTrit(d));
            }
            v += u128::from(d) * POW3[k];
        }
        Ok(BIndex(v))
    }
}

/// `3^e` for `e <= MAX_DIGITS`.
pub fn pow3(e: usize) -> u128 {
    POW3[e]
}

/// The pair-index map `g` for an inner code of length `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairMap {
    n: usize,
    m: usize,
}

impl PairMap {
    pub fn new(n: usize) -> Result<Self, IndexError> {
        if n < 2 {
            return Err(IndexError::BadNodeCount(n));
        }
        let m = n * (n - 1) / 2;
        if m > MAX_DIGITS {
            return Err(IndexError::BadNodeCount(n));
        }
        Ok(PairMap { n, m })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// `l = 3^m`.
    pub fn l(&self) -> u128 {
        POW3[self.m]
    }

    /// `g(i1, i2) = C(i2 - 1, 2) + i1` for `1 <= i1 < i2 <= n`.
    pub fn pair_index(&self, i1: usize, i2: usize) -> Result<usize, IndexError> {
        if i1 == 0 || i1 >= i2 || i2 > self.n {
            return Err(IndexError::BadPair(i1, i2, self.n));
        }
        Ok(pair_index_unchecked(i1, i2))
    }

    /// `g(min, max)` for two distinct nodes in either order.
    pub fn pair_index_unordered(&self, a: usize, b: usize) -> Result<usize, IndexError> {
        self.pair_index(a.min(b), a.max(b))
    }

    pub fn check_index(&self, b: BIndex) -> Result<(), IndexError> {
        if b.0 >= self.l() {
            return Err(IndexError::BadIndex(b.0, self.m));
        }
        Ok(())
    }

    pub fn digit(&self, b: BIndex, pos: usize) -> Result<u8, IndexError> {
        self.check_position(pos)?;
        Ok(b.digit(pos))
    }

    /// `b(pos, u)`: `b` with digit `pos` replaced by `u`.
    pub fn with_digit(&self, b: BIndex, pos: usize, u: u8) -> Result<BIndex, IndexError> {
        self.check_position(pos)?;
        if u > 2 {
            return Err(IndexError::BadTrit(u));
        }
        self.check_index(b)?;
        Ok(b.set_digit(pos, u))
    }

    /// Parity of `|{j < i : b_g(j,i) = 2}| + |{j > i : b_g(i,j) = 1}|`.
    pub fn f_parity(&self, i: usize, b: BIndex) -> Result<u8, IndexError> {
        if i == 0 || i > self.n {
            return Err(IndexError::BadNode(i, self.n));
        }
        self.check_index(b)?;
        Ok(self.f(i, b))
    }

    /// Unchecked [`PairMap::f_parity`].
    #[inline]
    pub fn f(&self, i: usize, b: BIndex) -> u8 {
        let mut count = 0u32;
        for j in 1..i {
            if b.digit(pair_index_unchecked(j, i)) == 2 {
                count += 1;
            }
        }
        for j in i + 1..=self.n {
            if b.digit(pair_index_unchecked(i, j)) == 1 {
                count += 1;
            }
        }
        (count & 1) as u8
    }

    /// Up to `budget` distinct coordinates whose digit `g_pos` is 0, drawn
    /// deterministically from `seed`. When at most `budget` such coordinates
    /// exist, all of them are returned. The result is sorted.
    pub fn group_bases(&self, g_pos: usize, budget: usize, seed: u64) -> Result<Vec<BIndex>, IndexError> {
        self.check_position(g_pos)?;
        let available = POW3[self.m - 1];
        if available <= budget as u128 {
            let mut all: Vec<BIndex> = (0..available)
                .map(|k| insert_zero_digit(k, g_pos))
                .collect();
            all.sort();
            return Ok(all);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked = std::collections::BTreeSet::new();
        while picked.len() < budget {
            let k: u128 = rng.gen_range(0..available);
            picked.insert(insert_zero_digit(k, g_pos));
        }
        Ok(picked.into_iter().collect())
    }

    /// Every coordinate `b` in `[0, 3^m)`; only for `m <= MAX_DENSE_DIGITS`.
    pub fn all_indices(&self) -> Option<impl Iterator<Item = BIndex>> {
        (self.m <= MAX_DENSE_DIGITS).then(|| (0..self.l()).map(BIndex))
    }

    /// `count` coordinates sampled uniformly (with shuffling for dense spaces).
    pub fn sample_indices(&self, count: usize, seed: u64) -> Vec<BIndex> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if self.l() <= count as u128 {
            let mut all: Vec<BIndex> = (0..self.l()).map(BIndex).collect();
            all.shuffle(&mut rng);
            return all;
        }
        (0..count).map(|_| BIndex(rng.gen_range(0..self.l()))).collect()
    }

    fn check_position(&self, pos: usize) -> Result<(), IndexError> {
        if pos == 0 || pos > self.m {
            return Err(IndexError::BadPosition(pos, self.m));
        }
        Ok(())
    }
}

#[inline]
fn pair_index_unchecked(i1: usize, i2: usize) -> usize {
    (i2 - 1) * (i2 - 2) / 2 + i1
}

/// Spreads the `m - 1` digits of `k` around a zero digit at `pos`.
fn insert_zero_digit(k: u128, pos: usize) -> BIndex {
    let low = k % POW3[pos - 1];
    let high = k / POW3[pos - 1];
    BIndex(low + high * POW3[pos])
}
