//! The concatenated ε-MSCR code.
//!
//! Node `i` of the code is indexed by outer codeword `a_i`; its block `j`
//! behaves like inner node `a_{i,j}` scaled by the coset multiplier `σ_i`.
//! At coordinate `(j, b)` node `i` therefore contributes the parity column
//! `(1, ρ, ..., ρ^(r-1))` with `ρ = σ_i · λ_{a_{i,j}, f(a_{i,j}, b)}`, and
//! every coordinate is an independent `[M, M - r]` MDS code.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::field::{Fe, FieldError};
use crate::indexspace::BIndex;
use crate::linalg::{LinalgError, Matrix};
use crate::mscr::{solve_erasures, MscrParams};
use crate::scalarcode::{OuterCodeword, ScalarCodeSpec};

/// Smallest number of parities the repair schedule supports.
pub const MIN_PARITIES: usize = 5;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EmscrError {
    #[error("r must be >= {MIN_PARITIES}, got {0}")]
    TooFewParities(usize),
    #[error("inner length n = {n} must equal outer field size q = {q}")]
    LengthMismatch { n: usize, q: u64 },
    #[error("insufficient cosets for the multipliers: {0}")]
    Cosets(FieldError),
    #[error("subgroup of order {have} cannot hold {need} distinct lambdas")]
    SubgroupTooSmall { have: u64, need: usize },
    #[error("node {0} out of range 1..={1}")]
    BadNode(usize, usize),
    #[error("block {0} out of range 1..={1}")]
    BadBlock(usize, usize),
    #[error("coordinate {0} out of range")]
    BadCoordinate(u128),
    #[error("message has {got} symbols, expected {expected}")]
    MessageLength { got: usize, expected: usize },
    #[error("{erased} erasures exceed the {r} the code can correct")]
    TooManyErasures { erased: usize, r: usize },
    #[error("known and erased nodes must partition 1..={0}")]
    BadPartition(usize),
    #[error("rank check needs exactly {expected} nodes, got {got}")]
    WrongSubsetSize { got: usize, expected: usize },
    #[error("internal solve failed, parameters are corrupt: {0}")]
    Solve(#[from] LinalgError),
}

/// Full parameter set of the concatenated code.
#[derive(Debug, Clone)]
pub struct EmscrParams {
    pub inner: MscrParams,
    pub outer: ScalarCodeSpec,
    sigma: Vec<Fe>,
    codewords: Vec<OuterCodeword>,
    node_of: HashMap<OuterCodeword, usize>,
}

impl PartialEq for EmscrParams {
    fn eq(&self, other: &Self) -> bool {
        self.inner == other.inner && self.outer == other.outer && self.sigma == other.sigma
    }
}

impl Eq for EmscrParams {}

impl EmscrParams {
    pub fn build(inner: MscrParams, outer: ScalarCodeSpec) -> Result<Self, EmscrError> {
        if inner.n as u64 != outer.q {
            return Err(EmscrError::LengthMismatch {
                n: inner.n,
                q: outer.q,
            });
        }
        if inner.r < MIN_PARITIES {
            return Err(EmscrError::TooFewParities(inner.r));
        }
        if (inner.subgroup.order as usize) < 2 * inner.n {
            return Err(EmscrError::SubgroupTooSmall {
                have: inner.subgroup.order,
                need: 2 * inner.n,
            });
        }
        let sigma = inner
            .field
            .coset_representatives(&inner.subgroup, outer.codeword_count)
            .map_err(EmscrError::Cosets)?;
        let codewords = outer.codewords();
        let node_of = codewords.iter().cloned().zip(1..).collect();
        Ok(EmscrParams {
            inner,
            outer,
            sigma,
            codewords,
            node_of,
        })
    }

    /// Number of nodes `M`.
    pub fn nodes(&self) -> usize {
        self.codewords.len()
    }

    /// Number of blocks `N`.
    pub fn blocks(&self) -> usize {
        self.outer.length
    }

    pub fn r(&self) -> usize {
        self.inner.r
    }

    /// Systematic nodes per coordinate, `M - r`.
    pub fn data_nodes(&self) -> usize {
        self.nodes() - self.r()
    }

    /// Digit count `m`; each node stores `L = N · 3^m` symbols.
    pub fn digits(&self) -> usize {
        self.inner.pairmap.m()
    }

    pub fn sigma(&self) -> &[Fe] {
        &self.sigma
    }

    pub fn codeword(&self, node: usize) -> &OuterCodeword {
        &self.codewords[node - 1]
    }

    pub fn node_of(&self, word: &OuterCodeword) -> Option<usize> {
        self.node_of.get(word).copied()
    }

    /// Inner node `a_{i,j}` that node `i` plays in block `j`.
    pub fn inner_node(&self, node: usize, block: usize) -> usize {
        self.codewords[node - 1].at(block)
    }

    /// `ρ = σ_i · λ_{a_{i,j}, f(a_{i,j}, b)}`, unchecked.
    pub fn point(&self, node: usize, block: usize, b: BIndex) -> Fe {
        let x = self.inner_node(node, block);
        self.inner.field.mul(self.sigma[node - 1], self.inner.point(x, b))
    }

    pub fn check_coord(&self, node: usize, block: usize, b: BIndex) -> Result<(), EmscrError> {
        if node == 0 || node > self.nodes() {
            return Err(EmscrError::BadNode(node, self.nodes()));
        }
        self.check_block_coord(block, b)
    }

    pub fn check_block_coord(&self, block: usize, b: BIndex) -> Result<(), EmscrError> {
        if block == 0 || block > self.blocks() {
            return Err(EmscrError::BadBlock(block, self.blocks()));
        }
        if b.0 >= self.inner.pairmap.l() {
            return Err(EmscrError::BadCoordinate(b.0));
        }
        Ok(())
    }

    /// `(1, ρ, ..., ρ^(r-1))`.
    pub fn node_column(&self, node: usize, block: usize, b: BIndex) -> Result<Vec<Fe>, EmscrError> {
        self.check_coord(node, block, b)?;
        Ok(self.inner.field.powers(self.point(node, block, b), self.r()))
    }

    fn points(&self, block: usize, b: BIndex) -> Vec<Fe> {
        (1..=self.nodes()).map(|i| self.point(i, block, b)).collect()
    }

    pub fn syndrome(&self, block: usize, b: BIndex, cv: &[Fe]) -> Vec<Fe> {
        let f = &self.inner.field;
        let pts = self.points(block, b);
        (0..self.r())
            .map(|t| {
                pts.iter()
                    .zip(cv)
                    .fold(Fe::ZERO, |acc, (&p, &c)| f.add(acc, f.mul(f.pow(p, t as u64), c)))
            })
            .collect()
    }

    pub fn validate_coord(&self, block: usize, b: BIndex, cv: &[Fe]) -> bool {
        cv.len() == self.nodes() && self.syndrome(block, b, cv).iter().all(|s| s.is_zero())
    }

    /// Systematic on nodes `1..=M-r`; parities land on the last `r` nodes.
    pub fn encode_coord(&self, block: usize, b: BIndex, message: &[Fe]) -> Result<Vec<Fe>, EmscrError> {
        if message.len() != self.data_nodes() {
            return Err(EmscrError::MessageLength {
                got: message.len(),
                expected: self.data_nodes(),
            });
        }
        self.check_block_coord(block, b)?;
        let known: BTreeMap<usize, Fe> = message.iter().copied().zip(1..).map(|(v, i)| (i, v)).collect();
        let erased: Vec<usize> = (self.data_nodes() + 1..=self.nodes()).collect();
        let parity = solve_erasures(&self.inner.field, &self.points(block, b), &known, &erased)?;
        let mut cv = message.to_vec();
        cv.extend(parity);
        Ok(cv)
    }

    pub fn erasure_decode_coord(
        &self,
        block: usize,
        b: BIndex,
        known: &BTreeMap<usize, Fe>,
        erased: &BTreeSet<usize>,
    ) -> Result<BTreeMap<usize, Fe>, EmscrError> {
        if erased.len() > self.r() {
            return Err(EmscrError::TooManyErasures {
                erased: erased.len(),
                r: self.r(),
            });
        }
        self.check_block_coord(block, b)?;
        let m = self.nodes();
        let partitioned = (1..=m).all(|i| known.contains_key(&i) != erased.contains(&i));
        if !partitioned || known.len() + erased.len() != m {
            return Err(EmscrError::BadPartition(m));
        }
        if erased.is_empty() {
            return Ok(BTreeMap::new());
        }
        let nodes: Vec<usize> = erased.iter().copied().collect();
        let values = solve_erasures(&self.inner.field, &self.points(block, b), known, &nodes)?;
        Ok(nodes.into_iter().zip(values).collect())
    }

    /// Whether the `r x r` matrix `[ρ_a^t]` over the nodes in `subset` is
    /// invertible at coordinate `(block, b)`.
    pub fn mds_rank_check(&self, subset: &BTreeSet<usize>, block: usize, b: BIndex) -> Result<bool, EmscrError> {
        if subset.len() != self.r() {
            return Err(EmscrError::WrongSubsetSize {
                got: subset.len(),
                expected: self.r(),
            });
        }
        for &a in subset {
            self.check_coord(a, block, b)?;
        }
        let pts: Vec<Fe> = subset.iter().map(|&a| self.point(a, block, b)).collect();
        Ok(Matrix::vandermonde(&self.inner.field, &pts, self.r()).is_invertible(&self.inner.field))
    }

    /// Deterministic message symbols for coordinate `(block, b)`.
    pub fn seeded_message(&self, seed: u64, block: usize, b: BIndex) -> Vec<Fe> {
        let mut h = Sha256::new();
        h.update(b"emscr-message");
        h.update(seed.to_be_bytes());
        h.update((block as u64).to_be_bytes());
        h.update(b.0.to_be_bytes());
        let mut key = [0u8; 32];
        key.copy_from_slice(&h.finalize());
        let mut rng = ChaCha8Rng::from_seed(key);
        let order = self.inner.field.order();
        (0..self.data_nodes())
            .map(|_| Fe(rng.gen_range(0..order) as u32))
            .collect()
    }

    /// Full coordinate vector encoded from [`Self::seeded_message`].
    pub fn seeded_coord(&self, seed: u64, block: usize, b: BIndex) -> Result<Vec<Fe>, EmscrError> {
        self.encode_coord(block, b, &self.seeded_message(seed, block, b))
    }

    #[cfg(test)]
    pub(crate) fn sigma_mut(&mut self) -> &mut Vec<Fe> {
        &mut self.sigma
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldSpec;
    use crate::scalarcode::ScalarCodeSpec;
    use rand::seq::index::sample;

    const POLY_4096: u64 = (1 << 12) | (1 << 3) | 1;

    pub(crate) fn acceptance_params() -> EmscrParams {
        let f = FieldSpec::binary(POLY_4096).unwrap();
        let sub = f.subgroup_of_order(63).unwrap();
        let inner = MscrParams::build(7, 2, f, sub).unwrap();
        let outer = ScalarCodeSpec::build_rs(7, 7, 2).unwrap();
        EmscrParams::build(inner, outer).unwrap()
    }

    #[test]
    fn build_checks() {
        let p = acceptance_params();
        assert_eq!(p.nodes(), 49);
        assert_eq!(p.data_nodes(), 44);
        assert_eq!(p.digits(), 21);

        let f = FieldSpec::binary(POLY_4096).unwrap();
        let sub = f.subgroup_of_order(63).unwrap();
        let inner = MscrParams::build(7, 3, f, sub).unwrap();
        let outer = ScalarCodeSpec::build_rs(7, 7, 2).unwrap();
        assert_eq!(EmscrParams::build(inner, outer.clone()), Err(EmscrError::TooFewParities(4)));

        let f = FieldSpec::binary(0b100_0000_1001).unwrap(); // x^10 + x^3 + 1
        let sub = f.subgroup_of_order(33).unwrap();
        let inner = MscrParams::build(7, 2, f, sub).unwrap();
        assert_eq!(
            EmscrParams::build(inner, outer),
            Err(EmscrError::Cosets(FieldError::TooFewCosets {
                wanted: 49,
                available: 31
            }))
        );
    }

    #[test]
    fn columns_and_point_distinctness() {
        let p = acceptance_params();
        let f = &p.inner.field;
        for b in p.inner.pairmap.sample_indices(30, 4) {
            for j in 1..=7 {
                let pts: BTreeSet<Fe> = (1..=49).map(|i| p.point(i, j, b)).collect();
                assert_eq!(pts.len(), 49);
                let col = p.node_column(3, j, b).unwrap();
                assert_eq!(col[0], Fe::ONE);
                for t in 1..col.len() {
                    assert_eq!(col[t], f.mul(col[t - 1], col[1]));
                }
            }
        }
        // σ_1 = 1 reduces to the inner column
        assert_eq!(p.sigma()[0], Fe::ONE);
        let b = BIndex(92);
        let x = p.inner_node(1, 2);
        assert_eq!(p.node_column(1, 2, b).unwrap(), p.inner.coord_column(x, b).unwrap());
        assert!(p.node_column(50, 1, b).is_err());
    }

    #[test]
    fn encode_and_decode() {
        let p = acceptance_params();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let b = BIndex(12345);
        assert_eq!(p.encode_coord(1, b, &[Fe::ZERO; 44]).unwrap(), vec![Fe::ZERO; 49]);
        let m1 = p.seeded_message(1, 3, b);
        let m2 = p.seeded_message(2, 3, b);
        let c1 = p.encode_coord(3, b, &m1).unwrap();
        let c2 = p.encode_coord(3, b, &m2).unwrap();
        assert!(p.validate_coord(3, b, &c1));
        assert_eq!(&c1[..44], &m1[..]);
        let f = &p.inner.field;
        let msum: Vec<Fe> = m1.iter().zip(&m2).map(|(&a, &b)| f.add(a, b)).collect();
        let csum: Vec<Fe> = c1.iter().zip(&c2).map(|(&a, &b)| f.add(a, b)).collect();
        assert_eq!(p.encode_coord(3, b, &msum).unwrap(), csum);

        for trial in 0..50 {
            let e = rng.gen_range(0..=5);
            let erased: BTreeSet<usize> = sample(&mut rng, 49, e).into_iter().map(|i| i + 1).collect();
            let known = (1..=49).filter(|i| !erased.contains(i)).map(|i| (i, c1[i - 1])).collect();
            let rec = p.erasure_decode_coord(3, b, &known, &erased).unwrap();
            assert_eq!(rec.len(), e, "trial {trial}");
            for (i, v) in rec {
                assert_eq!(v, c1[i - 1]);
            }
        }
        let erased: BTreeSet<usize> = (1..=6).collect();
        let known = (7..=49).map(|i| (i, c1[i - 1])).collect();
        assert_eq!(
            p.erasure_decode_coord(3, b, &known, &erased),
            Err(EmscrError::TooManyErasures { erased: 6, r: 5 })
        );
    }

    #[test]
    fn rank_check_detects_duplicate_sigma() {
        let mut p = acceptance_params();
        let subset: BTreeSet<usize> = [1, 2, 3, 4, 5].into();
        assert!(p.mds_rank_check(&subset, 1, BIndex(0)).unwrap());
        assert!(matches!(
            p.mds_rank_check(&[1].into(), 1, BIndex(0)),
            Err(EmscrError::WrongSubsetSize { got: 1, expected: 5 })
        ));
        // nodes 1 and 2 both play inner node 1 in block 1
        assert_eq!(p.inner_node(1, 1), p.inner_node(2, 1));
        let s0 = p.sigma()[0];
        p.sigma_mut()[1] = s0;
        assert!(!p.mds_rank_check(&subset, 1, BIndex(0)).unwrap());
    }
}
