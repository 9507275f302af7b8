//! The base `(n, k, d = k + 1, h = 2, l = 3^C(n,2))` MSCR code.
//!
//! The parity-check matrix is block-diagonal in the coordinate index `b`:
//! at coordinate `b` node `i` contributes the column
//! `(1, λ, λ^2, ..., λ^(r-1))` with `λ = λ_{i, f(i, b)}`. Every coordinate
//! is therefore an independent length-`n` Vandermonde-type code and is
//! handled on its own.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::field::{Fe, FieldSpec, Subgroup};
use crate::indexspace::{BIndex, IndexError, PairMap};
use crate::linalg::{LinalgError, Matrix};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MscrError {
    #[error("need n > k >= 1, got n = {n}, k = {k}")]
    BadDimensions { n: usize, k: usize },
    #[error("need r = n - k >= 2, got {0}")]
    TooFewParities(usize),
    #[error("subgroup of order {have} cannot hold {need} distinct lambdas")]
    SubgroupTooSmall { have: u64, need: usize },
    #[error("message has {got} symbols, expected {expected}")]
    MessageLength { got: usize, expected: usize },
    #[error("{erased} erasures exceed the {r} the code can correct")]
    TooManyErasures { erased: usize, r: usize },
    #[error("known and erased nodes must partition 1..={0}")]
    BadPartition(usize),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("internal solve failed, parameters are corrupt: {0}")]
    Solve(#[from] LinalgError),
}

/// Parameters of the inner MSCR code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MscrParams {
    pub n: usize,
    pub k: usize,
    pub r: usize,
    pub pairmap: PairMap,
    pub field: FieldSpec,
    pub subgroup: Subgroup,
    // lambda[2 * (i - 1) + u] = λ_{i,u}
    lambda: Vec<Fe>,
}

/// The `n` symbols stored at one coordinate, node 1 first.
pub type CoordVector = Vec<Fe>;

impl MscrParams {
    /// Assigns `λ_{i,u}` to the first `2n` subgroup elements, node-major.
    pub fn build(n: usize, k: usize, field: FieldSpec, subgroup: Subgroup) -> Result<Self, MscrError> {
        if k == 0 || n <= k {
            return Err(MscrError::BadDimensions { n, k });
        }
        let r = n - k;
        if r < 2 {
            return Err(MscrError::TooFewParities(r));
        }
        let pairmap = PairMap::new(n)?;
        if (subgroup.order as usize) < 2 * n {
            return Err(MscrError::SubgroupTooSmall {
                have: subgroup.order,
                need: 2 * n,
            });
        }
        let lambda = subgroup.elements[..2 * n].to_vec();
        Ok(MscrParams {
            n,
            k,
            r,
            pairmap,
            field,
            subgroup,
            lambda,
        })
    }

    /// `λ_{i,u}`, `i` 1-based.
    pub fn lambda(&self, i: usize, u: u8) -> Fe {
        self.lambda[2 * (i - 1) + usize::from(u)]
    }

    pub fn lambdas(&self) -> &[Fe] {
        &self.lambda
    }

    /// `λ_{i, f(i, b)}`: the diagonal entry of `H_i` at coordinate `b`.
    pub fn point(&self, i: usize, b: BIndex) -> Fe {
        self.lambda(i, self.pairmap.f(i, b))
    }

    /// `(λ^0, ..., λ^(r-1))` with `λ = λ_{i, f(i, b)}`.
    pub fn coord_column(&self, i: usize, b: BIndex) -> Result<Vec<Fe>, MscrError> {
        self.pairmap.f_parity(i, b)?;
        Ok(self.field.powers(self.point(i, b), self.r))
    }

    fn points(&self, b: BIndex) -> Vec<Fe> {
        (1..=self.n).map(|i| self.point(i, b)).collect()
    }

    /// `t`-th syndrome components, `t = 0..r`.
    pub fn syndrome(&self, b: BIndex, cv: &[Fe]) -> Vec<Fe> {
        let f = &self.field;
        let pts = self.points(b);
        (0..self.r)
            .map(|t| {
                pts.iter().zip(cv).fold(Fe::ZERO, |acc, (&p, &c)| {
                    f.add(acc, f.mul(f.pow(p, t as u64), c))
                })
            })
            .collect()
    }

    /// Systematic encoding: nodes `1..=k` carry the message, nodes
    /// `k+1..=n` are solved from the `r` parity equations.
    pub fn encode_coord(&self, b: BIndex, message: &[Fe]) -> Result<CoordVector, MscrError> {
        if message.len() != self.k {
            return Err(MscrError::MessageLength {
                got: message.len(),
                expected: self.k,
            });
        }
        self.pairmap.check_index(b)?;
        let known: BTreeMap<usize, Fe> = message.iter().enumerate().map(|(i, &v)| (i + 1, v)).collect();
        let erased: BTreeSet<usize> = (self.k + 1..=self.n).collect();
        let parity = self.erasure_decode_coord(b, &known, &erased)?;
        let mut cv = message.to_vec();
        cv.extend(erased.iter().map(|i| parity[i]));
        Ok(cv)
    }

    pub fn validate_coord(&self, b: BIndex, cv: &[Fe]) -> bool {
        cv.len() == self.n && self.syndrome(b, cv).iter().all(|s| s.is_zero())
    }

    /// Recovers the erased symbols of one coordinate.
    pub fn erasure_decode_coord(
        &self,
        b: BIndex,
        known: &BTreeMap<usize, Fe>,
        erased: &BTreeSet<usize>,
    ) -> Result<BTreeMap<usize, Fe>, MscrError> {
        if erased.len() > self.r {
            return Err(MscrError::TooManyErasures {
                erased: erased.len(),
                r: self.r,
            });
        }
        let all_listed = (1..=self.n).all(|i| known.contains_key(&i) != erased.contains(&i));
        if !all_listed || known.len() + erased.len() != self.n {
            return Err(MscrError::BadPartition(self.n));
        }
        if erased.is_empty() {
            return Ok(BTreeMap::new());
        }
        let pts = self.points(b);
        let nodes: Vec<usize> = erased.iter().copied().collect();
        let values = solve_erasures(&self.field, &pts, known, &nodes)?;
        Ok(nodes.into_iter().zip(values).collect())
    }
}

/// Solves `Σ_i p_i^t c_i = 0`, `t = 0..erased.len()`, for the erased `c_i`,
/// given the evaluation point `points[i - 1]` of every node.
pub(crate) fn solve_erasures(
    field: &FieldSpec,
    points: &[Fe],
    known: &BTreeMap<usize, Fe>,
    erased: &[usize],
) -> Result<Vec<Fe>, LinalgError> {
    let e = erased.len();
    let a = Matrix::vandermonde(field, &erased.iter().map(|&i| points[i - 1]).collect::<Vec<_>>(), e);
    let rhs: Vec<Fe> = (0..e)
        .map(|t| {
            let s = known.iter().fold(Fe::ZERO, |acc, (&i, &c)| {
                field.add(acc, field.mul(field.pow(points[i - 1], t as u64), c))
            });
            field.neg(s)
        })
        .collect();
    a.solve(field, &rhs)
}
