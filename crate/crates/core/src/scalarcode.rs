//! The outer scalar code, instantiated as a Reed–Solomon code over `GF(q)`.
//!
//! Outer codewords only index the nodes of the concatenated code; symbol
//! value `v` of `GF(q)` names inner node `v + 1`.

use num_rational::Ratio;
use thiserror::Error;

use crate::field::{default_binary_poly, Fe, FieldError, FieldSpec};

/// Upper bound on `q^K`; every codeword is enumerated when building a code.
pub const MAX_CODEWORDS: u64 = 1 << 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScalarCodeError {
    #[error("length N = {n} exceeds field size q = {q}")]
    LengthExceedsField { n: usize, q: u64 },
    #[error("need 1 <= K <= N, got K = {k}, N = {n}")]
    BadDimension { k: usize, n: usize },
    #[error("q = {0} must be a prime or a power of two")]
    UnsupportedOrder(u64),
    #[error("q^K = {0} codewords is too many to index")]
    TooManyCodewords(u128),
    #[error("codeword index {0} out of range 1..={1}")]
    BadIndex(usize, usize),
    #[error("codeword has length {got}, expected {expected}")]
    BadLength { got: usize, expected: usize },
    #[error("companion needs two distinct codewords")]
    SameCodeword,
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// An outer codeword as a sequence of inner node ids in `1..=q`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OuterCodeword {
    pub symbols: Vec<usize>,
}

impl OuterCodeword {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Inner node id at block `j` (1-based).
    pub fn at(&self, j: usize) -> usize {
        self.symbols[j - 1]
    }

    /// Number of field-nonzero positions.
    pub fn weight(&self) -> usize {
        self.symbols.iter().filter(|&&s| s != 1).count()
    }

    pub fn distance(&self, other: &OuterCodeword) -> usize {
        self.symbols
            .iter()
            .zip(&other.symbols)
            .filter(|(a, b)| a != b)
            .count()
    }
}

/// A Reed–Solomon code of length `N`, dimension `K` over `GF(q)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScalarCodeSpec {
    pub q: u64,
    pub length: usize,
    pub dimension: usize,
    pub min_distance: usize,
    /// `q^K`.
    pub codeword_count: usize,
    pub field: FieldSpec,
    pub eval_points: Vec<Fe>,
}

impl ScalarCodeSpec {
    /// Evaluation points are the field elements `0, 1, ..., N - 1`.
    pub fn build_rs(q: u64, length: usize, dimension: usize) -> Result<Self, ScalarCodeError> {
        if length as u64 > q {
            return Err(ScalarCodeError::LengthExceedsField { n: length, q });
        }
        if dimension == 0 || dimension > length {
            return Err(ScalarCodeError::BadDimension {
                k: dimension,
                n: length,
            });
        }
        let field = outer_field(q)?;
        let count = u128::from(q).pow(dimension as u32);
        if count > u128::from(MAX_CODEWORDS) {
            return Err(ScalarCodeError::TooManyCodewords(count));
        }
        let eval_points = (0..length as u64).map(|v| Fe(v as u32)).collect();
        Ok(ScalarCodeSpec {
            q,
            length,
            dimension,
            min_distance: length - dimension + 1,
            codeword_count: count as usize,
            field,
            eval_points,
        })
    }

    /// `δ = D / N`.
    pub fn delta(&self) -> Ratio<i64> {
        Ratio::new(self.min_distance as i64, self.length as i64)
    }

    /// Message coefficients `(m_0, ..., m_{K-1})` of codeword `index`, with
    /// messages enumerated lexicographically (`m_0` most significant).
    pub fn message(&self, index: usize) -> Result<Vec<Fe>, ScalarCodeError> {
        if index == 0 || index > self.codeword_count {
            return Err(ScalarCodeError::BadIndex(index, self.codeword_count));
        }
        let mut rest = (index - 1) as u64;
        let mut msg = vec![Fe::ZERO; self.dimension];
        for slot in msg.iter_mut().rev() {
            *slot = Fe((rest % self.q) as u32);
            rest /= self.q;
        }
        Ok(msg)
    }

    pub fn index_of_message(&self, msg: &[Fe]) -> Result<usize, ScalarCodeError> {
        if msg.len() != self.dimension {
            return Err(ScalarCodeError::BadLength {
                got: msg.len(),
                expected: self.dimension,
            });
        }
        Ok(msg.iter().fold(0u64, |acc, c| acc * self.q + u64::from(c.0)) as usize + 1)
    }

    pub fn encode_message(&self, msg: &[Fe]) -> OuterCodeword {
        OuterCodeword {
            symbols: self
                .eval_points
                .iter()
                .map(|&x| self.field.eval_poly(msg, x).0 as usize + 1)
                .collect(),
        }
    }

    /// The `index`-th codeword, `index` in `1..=q^K`.
    pub fn codeword(&self, index: usize) -> Result<OuterCodeword, ScalarCodeError> {
        Ok(self.encode_message(&self.message(index)?))
    }

    pub fn codewords(&self) -> Vec<OuterCodeword> {
        (1..=self.codeword_count)
            .map(|i| self.codeword(i).expect("index in range"))
            .collect()
    }

    /// Evaluation of the constant polynomial 1: no zero symbol anywhere.
    pub fn full_weight_codeword(&self) -> OuterCodeword {
        let mut msg = vec![Fe::ZERO; self.dimension];
        msg[0] = Fe::ONE;
        self.encode_message(&msg)
    }

    /// `a1 + c·w` for the smallest nonzero scalar `c` whose result differs
    /// from `a2`, `w` being [`Self::full_weight_codeword`]. The result
    /// differs from `a1` in every position.
    pub fn companion(&self, a1: &OuterCodeword, a2: &OuterCodeword) -> Result<OuterCodeword, ScalarCodeError> {
        for a in [a1, a2] {
            if a.len() != self.length {
                return Err(ScalarCodeError::BadLength {
                    got: a.len(),
                    expected: self.length,
                });
            }
        }
        if a1 == a2 {
            return Err(ScalarCodeError::SameCodeword);
        }
        let w = self.full_weight_codeword();
        (1..self.q)
            .map(|c| {
                let c = Fe(c as u32);
                OuterCodeword {
                    symbols: a1
                        .symbols
                        .iter()
                        .zip(&w.symbols)
                        .map(|(&x, &y)| {
                            let scaled = self.field.mul(c, Fe((y - 1) as u32));
                            self.field.add(Fe((x - 1) as u32), scaled).0 as usize + 1
                        })
                        .collect(),
                }
            })
            .find(|cand| cand != a2)
            .ok_or(ScalarCodeError::SameCodeword)
    }
}

fn outer_field(q: u64) -> Result<FieldSpec, ScalarCodeError> {
    if q.is_power_of_two() && q >= 2 {
        let degree = q.trailing_zeros();
        let poly = default_binary_poly(degree).ok_or(ScalarCodeError::UnsupportedOrder(q))?;
        return Ok(FieldSpec::binary(poly)?);
    }
    FieldSpec::prime(q).map_err(|_| ScalarCodeError::UnsupportedOrder(q))
}
