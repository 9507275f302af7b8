//! Two-round repair of one coordinate group and of whole slices.
//!
//! Every round-1 stage works on a digit set `S` at the pair position of the
//! block. A node's symbols over `S` fall into columns, one per distinct
//! evaluation point; a helper returns one raw symbol per single-digit
//! column and one sum per merged column. The failed nodes' columns are
//! annihilated, the unread pool nodes are solved for, and the failed
//! columns are then read off the remaining parity rows.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::emscr::EmscrParams;
use crate::field::{Fe, FieldSpec};
use crate::indexspace::BIndex;
use crate::linalg::Matrix;
use crate::shardstore::{ParamsDigest, Shard, SliceDescriptor, SymbolMap};

use super::annihilator::annihilator;
use super::partition::{check_pair, partition_helpers, HelperPartition, HelperSelection, PartitionSets, RepairCase};
use super::RepairError;

/// What a downloader asks for: one symbol, or the sum of two symbols of
/// the same node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Request {
    Raw { block: usize, b: BIndex },
    Sum { block: usize, b0: BIndex, b1: BIndex },
}

impl Request {
    pub fn block(&self) -> usize {
        match *self {
            Request::Raw { block, .. } | Request::Sum { block, .. } => block,
        }
    }
}

/// Read access to surviving helpers.
pub trait HelperAccess: Sync {
    fn fetch(&self, node: usize, request: &Request) -> Result<Fe, RepairError>;
}

impl<F> HelperAccess for F
where
    F: Fn(usize, &Request) -> Result<Fe, RepairError> + Sync,
{
    fn fetch(&self, node: usize, request: &Request) -> Result<Fe, RepairError> {
        self(node, request)
    }
}

/// Helpers backed by in-memory shards.
pub struct ShardAccess<'a> {
    pub field: &'a FieldSpec,
    pub shards: BTreeMap<usize, &'a Shard>,
}

impl ShardAccess<'_> {
    fn symbol(&self, node: usize, block: usize, b: BIndex) -> Result<Fe, RepairError> {
        self.shards
            .get(&node)
            .ok_or(RepairError::HelperUnavailable(node))?
            .get(block, b)
            .ok_or(RepairError::MissingSymbol { node, block, b: b.0 })
    }
}

impl HelperAccess for ShardAccess<'_> {
    fn fetch(&self, node: usize, request: &Request) -> Result<Fe, RepairError> {
        match *request {
            Request::Raw { block, b } => self.symbol(node, block, b),
            Request::Sum { block, b0, b1 } => {
                Ok(self.field.add(self.symbol(node, block, b0)?, self.symbol(node, block, b1)?))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Source {
    Helper(usize),
    /// The other replacement, named by the failed node it rebuilds.
    Replacement(usize),
}

/// One transferred symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Download {
    pub block: usize,
    pub group: BIndex,
    /// Failed node rebuilt by the downloading replacement.
    pub replacement: usize,
    pub round: u8,
    pub source: Source,
    /// Node whose symbols the request addresses.
    pub node: usize,
    pub request: Request,
}

/// Recovered symbols and downloads of one coordinate group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupOutcome {
    pub block: usize,
    pub base: BIndex,
    /// `(node, b, value)`, three per failed node.
    pub recovered: Vec<(usize, BIndex, Fe)>,
    pub downloads: Vec<Download>,
}

#[derive(Debug, Clone)]
struct Column {
    node: usize,
    digits: Vec<u8>,
    point: Fe,
}

/// Node columns over `digits`, merging digits with equal points.
fn node_columns(params: &EmscrParams, node: usize, block: usize, base: BIndex, pos: usize, digits: &[u8]) -> Vec<Column> {
    let mut cols: Vec<Column> = Vec::with_capacity(digits.len());
    for &d in digits {
        let point = params.point(node, block, base.set_digit(pos, d));
        match cols.iter_mut().find(|c| c.point == point) {
            Some(c) => c.digits.push(d),
            None => cols.push(Column {
                node,
                digits: vec![d],
                point,
            }),
        }
    }
    cols
}

/// Digit position of the inner-id pair that drives block `block`: the two
/// failed ids, or the shared id and the companion's id.
pub fn repair_position(params: &EmscrParams, partition: &HelperPartition) -> usize {
    let (f1, f2) = partition.failed;
    let block = partition.block;
    let x1 = params.inner_node(f1, block);
    let other = match partition.sets {
        PartitionSets::Distinct { .. } => params.inner_node(f2, block),
        PartitionSets::Equal { companion, .. } => params.inner_node(companion, block),
    };
    params
        .inner
        .pairmap
        .pair_index_unordered(x1, other)
        .expect("inner ids are distinct and in range")
}

struct Stage<'a> {
    params: &'a EmscrParams,
    block: usize,
    base: BIndex,
    pos: usize,
    digits: &'a [u8],
    failed: (usize, usize),
    /// Pool nodes left unread; solved as unknowns.
    unread: &'a BTreeSet<usize>,
    replacement: usize,
}

impl Stage<'_> {
    fn coord(&self, d: u8) -> BIndex {
        self.base.set_digit(self.pos, d)
    }

    fn request(&self, col: &Column) -> Request {
        match col.digits[..] {
            [d] => Request::Raw {
                block: self.block,
                b: self.coord(d),
            },
            [d0, d1] => Request::Sum {
                block: self.block,
                b0: self.coord(d0),
                b1: self.coord(d1),
            },
            _ => unreachable!("digit sets have at most two entries"),
        }
    }

    /// Solved failed-node columns, in (node, column) order.
    fn run(&self, access: &dyn HelperAccess, log: &mut Vec<Download>) -> Result<Vec<(Column, Fe)>, RepairError> {
        let params = self.params;
        let field = &params.inner.field;
        let r = params.r();
        let mut acc = vec![Fe::ZERO; r];
        let mut failed_cols = Vec::new();
        let mut unknown_cols = Vec::new();
        for node in 1..=params.nodes() {
            let cols = node_columns(params, node, self.block, self.base, self.pos, self.digits);
            if node == self.failed.0 || node == self.failed.1 {
                failed_cols.extend(cols);
            } else if self.unread.contains(&node) {
                if cols.len() != 1 {
                    return Err(self.mismatch("unread pool node splits into several columns"));
                }
                unknown_cols.extend(cols);
            } else {
                for col in cols {
                    let request = self.request(&col);
                    let value = access.fetch(node, &request)?;
                    log.push(Download {
                        block: self.block,
                        group: self.base,
                        replacement: self.replacement,
                        round: 1,
                        source: Source::Helper(node),
                        node,
                        request,
                    });
                    let mut power = Fe::ONE;
                    for slot in acc.iter_mut() {
                        *slot = field.add(*slot, field.mul(value, power));
                        power = field.mul(power, col.point);
                    }
                }
            }
        }

        let roots: Vec<Fe> = failed_cols.iter().map(|c| c.point).collect();
        let rows = r - roots.len().min(r);
        if unknown_cols.len() != rows {
            return Err(self.mismatch("unread pool size does not match the annihilator rows"));
        }
        let p = annihilator(field, &roots, rows, r)?;
        if !p.annihilates_roots(field) {
            return Err(self.mismatch("annihilator leaves a failed column"));
        }
        let unknown_points: Vec<Fe> = unknown_cols.iter().map(|c| c.point).collect();
        let vu = Matrix::vandermonde(field, &unknown_points, r);
        let system = p.coeffs.mul(field, &vu)?;
        let rhs: Vec<Fe> = p.coeffs.mul_vec(field, &acc)?.into_iter().map(|v| field.neg(v)).collect();
        let completion = system.solve(field, &rhs).map_err(|_| self.singular("completion"))?;
        let total: Vec<Fe> = vu
            .mul_vec(field, &completion)?
            .into_iter()
            .zip(&acc)
            .map(|(a, &b)| field.add(a, b))
            .collect();

        let vf = Matrix::vandermonde(field, &roots, r);
        let head: Vec<Fe> = total[..roots.len()].iter().map(|&v| field.neg(v)).collect();
        let values = vf
            .top_rows(roots.len())
            .solve(field, &head)
            .map_err(|_| self.singular("failed columns"))?;
        let check = vf.mul_vec(field, &values)?;
        if check.iter().zip(&total).any(|(&a, &b)| !field.add(a, b).is_zero()) {
            return Err(RepairError::Integrity {
                block: self.block,
                base: self.base.0,
            });
        }
        Ok(failed_cols.into_iter().zip(values).collect())
    }

    fn mismatch(&self, what: &'static str) -> RepairError {
        RepairError::ScheduleMismatch {
            block: self.block,
            base: self.base.0,
            what,
        }
    }

    fn singular(&self, stage: &'static str) -> RepairError {
        RepairError::Singular {
            block: self.block,
            base: self.base.0,
            stage,
        }
    }
}

/// Value of the column of `node` covering exactly `digits`.
fn column_value(solved: &[(Column, Fe)], node: usize, digits: &[u8], block: usize, base: BIndex) -> Result<Fe, RepairError> {
    solved
        .iter()
        .find(|(c, _)| c.node == node && c.digits == digits)
        .map(|&(_, v)| v)
        .ok_or(RepairError::ColumnMismatch {
            block,
            base: base.0,
            node,
        })
}

fn check_base(params: &EmscrParams, partition: &HelperPartition, base: BIndex, pos: usize) -> Result<(), RepairError> {
    params.check_block_coord(partition.block, base)?;
    if base.digit(pos) != 0 {
        return Err(RepairError::BadGroupBase { base: base.0, pos });
    }
    Ok(())
}

fn unread(pool: Vec<usize>, read: &[usize]) -> BTreeSet<usize> {
    pool.into_iter().filter(|n| !read.contains(n)).collect()
}

/// Repairs a group of a block whose failed inner ids differ.
pub fn repair_group_case1(
    params: &EmscrParams,
    partition: &HelperPartition,
    base: BIndex,
    access: &dyn HelperAccess,
) -> Result<GroupOutcome, RepairError> {
    let PartitionSets::Distinct { gamma_download, .. } = &partition.sets else {
        return Err(RepairError::WrongCase(partition.block));
    };
    let block = partition.block;
    let pos = repair_position(params, partition);
    check_base(params, partition, base, pos)?;
    let (f1, f2) = partition.failed;
    // `lo` maps to the smaller inner id, whose f flips at digit 1
    let (lo, hi) = if params.inner_node(f1, block) < params.inner_node(f2, block) {
        (f1, f2)
    } else {
        (f2, f1)
    };
    let unread = unread(partition.pool(), gamma_download);
    let mut downloads = Vec::new();
    let stage = |digits: &'static [u8], replacement| Stage {
        params,
        block,
        base,
        pos,
        digits,
        failed: (f1, f2),
        unread: &unread,
        replacement,
    };
    let solved_lo = stage(&[0, 1], lo).run(access, &mut downloads)?;
    let solved_hi = stage(&[0, 2], hi).run(access, &mut downloads)?;

    let lo0 = column_value(&solved_lo, lo, &[0], block, base)?;
    let lo1 = column_value(&solved_lo, lo, &[1], block, base)?;
    let mu_hi = column_value(&solved_lo, hi, &[0, 1], block, base)?;
    let hi0 = column_value(&solved_hi, hi, &[0], block, base)?;
    let hi2 = column_value(&solved_hi, hi, &[2], block, base)?;
    let mu_lo = column_value(&solved_hi, lo, &[0, 2], block, base)?;

    let b = |d| base.set_digit(pos, d);
    let exchange = |replacement, source, b0, b1| Download {
        block,
        group: base,
        replacement,
        round: 2,
        source: Source::Replacement(source),
        node: replacement,
        request: Request::Sum { block, b0, b1 },
    };
    downloads.push(exchange(lo, hi, b(0), b(2)));
    downloads.push(exchange(hi, lo, b(0), b(1)));

    let field = &params.inner.field;
    Ok(GroupOutcome {
        block,
        base,
        recovered: vec![
            (lo, b(0), lo0),
            (lo, b(1), lo1),
            (lo, b(2), field.sub(mu_lo, lo0)),
            (hi, b(0), hi0),
            (hi, b(1), field.sub(mu_hi, hi0)),
            (hi, b(2), hi2),
        ],
        downloads,
    })
}

/// Repairs a group of a block whose failed inner ids coincide.
pub fn repair_group_case2(
    params: &EmscrParams,
    partition: &HelperPartition,
    base: BIndex,
    access: &dyn HelperAccess,
) -> Result<GroupOutcome, RepairError> {
    let PartitionSets::Equal {
        companion,
        pool_first,
        pool_second,
        ..
    } = &partition.sets
    else {
        return Err(RepairError::WrongCase(partition.block));
    };
    let block = partition.block;
    let pos = repair_position(params, partition);
    check_base(params, partition, base, pos)?;
    let (f1, f2) = partition.failed;
    // digit d flips the failed pair's f, digit e flips the companion's
    let (d, e): (&'static [u8], &'static [u8]) =
        if params.inner_node(f1, block) < params.inner_node(*companion, block) {
            (&[1], &[2])
        } else {
            (&[2], &[1])
        };
    let first_digits: &'static [u8] = if d == [1] { &[0, 1] } else { &[0, 2] };
    let unread_first = unread(partition.pool(), pool_first);
    let unread_second = unread(partition.pool(), pool_second);
    let mut downloads = Vec::new();
    let stage = |digits, unread, replacement| Stage {
        params,
        block,
        base,
        pos,
        digits,
        failed: (f1, f2),
        unread,
        replacement,
    };
    let solved_first = stage(first_digits, &unread_first, f1).run(access, &mut downloads)?;
    let solved_second = stage(e, &unread_second, f2).run(access, &mut downloads)?;

    let mut values = BTreeMap::new();
    for node in [f1, f2] {
        values.insert((node, 0), column_value(&solved_first, node, &[0], block, base)?);
        values.insert((node, d[0]), column_value(&solved_first, node, d, block, base)?);
        values.insert((node, e[0]), column_value(&solved_second, node, e, block, base)?);
    }

    let b = |digit| base.set_digit(pos, digit);
    let pull = |replacement, source, digit| Download {
        block,
        group: base,
        replacement,
        round: 2,
        source: Source::Replacement(source),
        node: replacement,
        request: Request::Raw { block, b: b(digit) },
    };
    downloads.push(pull(f1, f2, e[0]));
    downloads.push(pull(f2, f1, 0));
    downloads.push(pull(f2, f1, d[0]));

    Ok(GroupOutcome {
        block,
        base,
        recovered: values.into_iter().map(|((node, digit), v)| (node, b(digit), v)).collect(),
        downloads,
    })
}

pub fn repair_group(
    params: &EmscrParams,
    partition: &HelperPartition,
    base: BIndex,
    access: &dyn HelperAccess,
) -> Result<GroupOutcome, RepairError> {
    match partition.case() {
        RepairCase::Distinct => repair_group_case1(params, partition, base, access),
        RepairCase::Equal => repair_group_case2(params, partition, base, access),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RepairOptions {
    pub selection: HelperSelection,
    pub parallel: bool,
}

/// Per-block schedule facts kept alongside the downloads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockRecord {
    pub partition: HelperPartition,
    pub position: usize,
    pub groups: usize,
}

/// Everything transferred during a repair, ordered by block then group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepairTranscript {
    pub failed: (usize, usize),
    pub blocks: Vec<BlockRecord>,
    pub downloads: Vec<Download>,
}

impl RepairTranscript {
    /// Download count of each `(block, group)`.
    pub fn group_counts(&self) -> BTreeMap<(usize, BIndex), usize> {
        let mut counts = BTreeMap::new();
        for d in &self.downloads {
            *counts.entry((d.block, d.group)).or_insert(0) += 1;
        }
        counts
    }

    /// Distinct surviving helpers read in round 1.
    pub fn helpers_contacted(&self) -> BTreeSet<usize> {
        self.downloads
            .iter()
            .filter_map(|d| match d.source {
                Source::Helper(n) => Some(n),
                Source::Replacement(_) => None,
            })
            .collect()
    }
}

/// Result of [`cooperative_repair`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepairOutcome {
    /// Recovered symbols of the two failed nodes, in the order given.
    pub recovered: [(usize, SymbolMap); 2],
    pub transcript: RepairTranscript,
}

impl RepairOutcome {
    pub fn into_shards(self, slice: &SliceDescriptor, digest: ParamsDigest) -> [Shard; 2] {
        self.recovered.map(|(node, symbols)| Shard {
            node,
            digest,
            slice: slice.clone(),
            symbols,
        })
    }
}

/// Group bases of a block slice for a repair at `pos`.
fn slice_groups(slice: &crate::shardstore::BlockSlice, pos: usize) -> Vec<BIndex> {
    let mut bases: Vec<BIndex> = slice.coords().filter(|b| b.digit(pos) == 0).collect();
    bases.sort_unstable();
    bases
}

/// Repairs two failed nodes on every coordinate of `slice`.
pub fn cooperative_repair(
    params: &EmscrParams,
    failed: (usize, usize),
    slice: &SliceDescriptor,
    access: &dyn HelperAccess,
    options: RepairOptions,
) -> Result<RepairOutcome, RepairError> {
    let (f1, f2) = failed;
    check_pair(params, f1, f2)?;
    slice.validate(params.blocks(), params.digits())?;

    let mut records = Vec::with_capacity(slice.blocks.len());
    let mut jobs = Vec::new();
    for (idx, bs) in slice.blocks.iter().enumerate() {
        let partition = partition_helpers(params, bs.block, f1, f2, options.selection)?;
        let position = repair_position(params, &partition);
        if !bs.is_closed_at(position) {
            return Err(RepairError::SliceNotClosed {
                block: bs.block,
                position,
            });
        }
        let groups = slice_groups(bs, position);
        jobs.extend(groups.iter().map(|&b| (idx, b)));
        records.push(BlockRecord {
            partition,
            position,
            groups: groups.len(),
        });
    }

    let run = |&(idx, base): &(usize, BIndex)| repair_group(params, &records[idx].partition, base, access);
    let outcomes: Vec<GroupOutcome> = if options.parallel {
        jobs.par_iter().map(run).collect::<Result<_, _>>()?
    } else {
        jobs.iter().map(run).collect::<Result<_, _>>()?
    };

    let mut recovered = [(f1, BTreeMap::new()), (f2, BTreeMap::new())];
    let mut downloads = Vec::new();
    for outcome in outcomes {
        for (node, b, v) in outcome.recovered {
            let slot = if node == f1 { &mut recovered[0].1 } else { &mut recovered[1].1 };
            if slot.insert((outcome.block, b), v).is_some() {
                return Err(RepairError::DuplicateRecovery {
                    node,
                    block: outcome.block,
                    b: b.0,
                });
            }
        }
        downloads.extend(outcome.downloads);
    }
    Ok(RepairOutcome {
        recovered,
        transcript: RepairTranscript {
            failed,
            blocks: records,
            downloads,
        },
    })
}

/// A slice closed at the pair position of every block: `groups` sampled
/// group bases per block, each expanded over its pair position.
pub fn repair_slice(
    params: &EmscrParams,
    failed: (usize, usize),
    groups: usize,
    seed: u64,
) -> Result<SliceDescriptor, RepairError> {
    let mut blocks = Vec::with_capacity(params.blocks());
    for block in 1..=params.blocks() {
        let partition = partition_helpers(params, block, failed.0, failed.1, HelperSelection::Smallest)?;
        let position = repair_position(params, &partition);
        let bases = params
            .inner
            .pairmap
            .group_bases(position, groups, seed.wrapping_add(block as u64))?;
        blocks.push(crate::shardstore::BlockSlice {
            block,
            free: [position].into(),
            bases: bases.into_iter().collect(),
        });
    }
    Ok(SliceDescriptor { blocks })
}
