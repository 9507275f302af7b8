//! Per-block classification of helper nodes.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::emscr::EmscrParams;

use super::RepairError;

/// How the completion subsets of Γ or Z are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum HelperSelection {
    #[default]
    Smallest,
    /// Shuffled by `(seed, block)`; smaller subsets are prefixes of larger.
    Seeded(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RepairCase {
    /// `a_{1,j} ≠ a_{2,j}`.
    Distinct,
    /// `a_{1,j} = a_{2,j}`.
    Equal,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PartitionSets {
    Distinct {
        /// Nodes sharing the first failed node's inner id.
        q: Vec<usize>,
        /// Nodes sharing the second failed node's inner id.
        v: Vec<usize>,
        gamma: Vec<usize>,
        /// `k′` nodes of Γ, read by both replacements.
        gamma_download: Vec<usize>,
    },
    Equal {
        companion: usize,
        /// Nodes sharing the failed pair's inner id.
        w: Vec<usize>,
        /// Nodes other than the companion sharing its inner id.
        y: Vec<usize>,
        z: Vec<usize>,
        /// `k″` nodes of `Z ∪ {a₃}` read by the first replacement.
        pool_first: Vec<usize>,
        /// `k‴` nodes of `Z ∪ {a₃}` read by the second replacement.
        pool_second: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HelperPartition {
    pub block: usize,
    pub failed: (usize, usize),
    pub sets: PartitionSets,
}

/// Set sizes entering the closed-form bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PartitionSizes {
    Distinct { q: usize, v: usize, k1: usize },
    Equal { w: usize, y: usize, k2: usize, k3: usize },
}

impl HelperPartition {
    pub fn case(&self) -> RepairCase {
        match self.sets {
            PartitionSets::Distinct { .. } => RepairCase::Distinct,
            PartitionSets::Equal { .. } => RepairCase::Equal,
        }
    }

    pub fn sizes(&self) -> PartitionSizes {
        match &self.sets {
            PartitionSets::Distinct { q, v, gamma_download, .. } => PartitionSizes::Distinct {
                q: q.len(),
                v: v.len(),
                k1: gamma_download.len(),
            },
            PartitionSets::Equal {
                w,
                y,
                pool_first,
                pool_second,
                ..
            } => PartitionSizes::Equal {
                w: w.len(),
                y: y.len(),
                k2: pool_first.len(),
                k3: pool_second.len(),
            },
        }
    }

    /// The pool whose nodes are partly read: Γ, or `Z ∪ {a₃}` sorted.
    pub fn pool(&self) -> Vec<usize> {
        match &self.sets {
            PartitionSets::Distinct { gamma, .. } => gamma.clone(),
            PartitionSets::Equal { companion, z, .. } => {
                let mut p = z.clone();
                p.push(*companion);
                p.sort_unstable();
                p
            }
        }
    }
}

/// The companion node `a₃`, shared by every block.
pub fn companion_node(params: &EmscrParams, f1: usize, f2: usize) -> Result<usize, RepairError> {
    let a3 = params
        .outer
        .companion(params.codeword(f1), params.codeword(f2))
        .map_err(|_| RepairError::SameNode(f1))?;
    Ok(params.node_of(&a3).expect("companion is a codeword"))
}

pub(crate) fn check_pair(params: &EmscrParams, f1: usize, f2: usize) -> Result<(), RepairError> {
    let m = params.nodes();
    for f in [f1, f2] {
        if f == 0 || f > m {
            return Err(RepairError::BadNode(f, m));
        }
    }
    if f1 == f2 {
        return Err(RepairError::SameNode(f1));
    }
    Ok(())
}

fn choose(pool: &[usize], k: usize, selection: HelperSelection, block: usize) -> Vec<usize> {
    let mut order = pool.to_vec();
    if let HelperSelection::Seeded(seed) = selection {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (block as u64).rotate_left(32));
        order.shuffle(&mut rng);
    }
    let mut picked = order[..k].to_vec();
    picked.sort_unstable();
    picked
}

fn completion_size(pool: usize, unknowns: usize, block: usize) -> Result<usize, RepairError> {
    pool.checked_sub(unknowns)
        .filter(|&k| k > 0)
        .ok_or(RepairError::PoolTooSmall { block, pool, unknowns })
}

/// Splits the surviving nodes of block `j` for the failed pair.
pub fn partition_helpers(
    params: &EmscrParams,
    block: usize,
    f1: usize,
    f2: usize,
    selection: HelperSelection,
) -> Result<HelperPartition, RepairError> {
    check_pair(params, f1, f2)?;
    if block == 0 || block > params.blocks() {
        return Err(RepairError::BadBlock(block, params.blocks()));
    }
    let r = params.r();
    let x1 = params.inner_node(f1, block);
    let x2 = params.inner_node(f2, block);
    let survivors = (1..=params.nodes()).filter(|&i| i != f1 && i != f2);
    let sets = if x1 != x2 {
        let (mut q, mut v, mut gamma) = (Vec::new(), Vec::new(), Vec::new());
        for i in survivors {
            match params.inner_node(i, block) {
                x if x == x1 => q.push(i),
                x if x == x2 => v.push(i),
                _ => gamma.push(i),
            }
        }
        let k1 = completion_size(gamma.len(), r - 3, block)?;
        let gamma_download = choose(&gamma, k1, selection, block);
        PartitionSets::Distinct {
            q,
            v,
            gamma,
            gamma_download,
        }
    } else {
        let companion = companion_node(params, f1, f2)?;
        let x3 = params.inner_node(companion, block);
        let (mut w, mut y, mut z) = (Vec::new(), Vec::new(), Vec::new());
        for i in survivors.filter(|&i| i != companion) {
            match params.inner_node(i, block) {
                x if x == x1 => w.push(i),
                x if x == x3 => y.push(i),
                _ => z.push(i),
            }
        }
        let mut pool = z.clone();
        pool.push(companion);
        pool.sort_unstable();
        // unknowns left after the downloads: r - 4 and r - 2 rows, minus one
        // column the companion contributes to the pool
        let k2 = completion_size(pool.len(), r - 4, block)?;
        let k3 = completion_size(pool.len(), r - 2, block)?;
        let pool_first = choose(&pool, k2, selection, block);
        let pool_second = choose(&pool, k3, selection, block);
        PartitionSets::Equal {
            companion,
            w,
            y,
            z,
            pool_first,
            pool_second,
        }
    };
    Ok(HelperPartition {
        block,
        failed: (f1, f2),
        sets,
    })
}
