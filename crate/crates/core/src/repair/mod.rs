//! Two-round cooperative repair of two failed nodes, with download
//! accounting and the bandwidth bounds it is measured against.

mod annihilator;
mod bounds;
mod engine;
mod partition;


use thiserror::Error;

use crate::emscr::EmscrError;
use crate::indexspace::IndexError;
use crate::linalg::LinalgError;
use crate::shardstore::ShardError;

pub use annihilator::{annihilator, AnnihilatorMatrix};
pub use bounds::{
    bandwidth_closed_form, cutset_bounds, epsilon_bound, epsilon_bound_r5, epsilon_measured, scaling_report,
    BandwidthReport, BlockBandwidth, BlockSummary, CutSetBounds, LinkCounts, Rational, ScalingReport,
    TranscriptSummary,
};
pub use engine::{
    cooperative_repair, repair_group, repair_group_case1, repair_group_case2, repair_position, repair_slice,
    BlockRecord, Download, GroupOutcome, HelperAccess, RepairOptions, RepairOutcome, RepairTranscript, Request,
    ShardAccess, Source,
};
pub use partition::{
    companion_node, partition_helpers, HelperPartition, HelperSelection, PartitionSets, PartitionSizes, RepairCase,
};

#[derive(Debug, Error)]
pub enum RepairError {
    #[error("node {0} out of range 1..={1}")]
    BadNode(usize, usize),
    #[error("block {0} out of range 1..={1}")]
    BadBlock(usize, usize),
    #[error("failed nodes must be distinct, got {0} twice")]
    SameNode(usize),
    #[error("block {block}: pool of {pool} helpers cannot cover {unknowns} unknowns")]
    PoolTooSmall { block: usize, pool: usize, unknowns: usize },
    #[error("{roots} roots and {rows} rows exceed r = {r}")]
    DegreeOverflow { roots: usize, rows: usize, r: usize },
    #[error("repeated annihilator root {0}")]
    DuplicateRoot(u32),
    #[error("group base {base} has a nonzero digit at position {pos}")]
    BadGroupBase { base: u128, pos: usize },
    #[error("block {0} uses the other repair case")]
    WrongCase(usize),
    #[error("slice is not closed at position {position} of block {block}")]
    SliceNotClosed { block: usize, position: usize },
    #[error("block {block} group {base}: {what}")]
    ScheduleMismatch { block: usize, base: u128, what: &'static str },
    #[error("block {block} group {base}: node {node} columns contradict the pair structure")]
    ColumnMismatch { block: usize, base: u128, node: usize },
    #[error("block {block} group {base}: singular {stage} system")]
    Singular { block: usize, base: u128, stage: &'static str },
    #[error("block {block} group {base}: helper data inconsistent with the parity checks")]
    Integrity { block: usize, base: u128 },
    #[error("node {node} recovered twice at block {block}, b = {b}")]
    DuplicateRecovery { node: usize, block: usize, b: u128 },
    #[error("helper {0} unavailable")]
    HelperUnavailable(usize),
    #[error("helper {node} has no symbol at block {block}, b = {b}")]
    MissingSymbol { node: usize, block: usize, b: u128 },
    #[error("groups of block {0} have different download counts")]
    UnevenGroups(usize),
    #[error("bad transcript line: {0}")]
    BadTranscript(String),
    #[error("cut-set bounds need h >= 1 and positive denominators, got h={h}, d={d}, k={k}")]
    BadBoundArguments { h: i64, d: i64, k: i64 },
    #[error("epsilon bound needs P >= 1 and 0 < delta <= 1, got P={p}, delta={delta}")]
    BadEpsilonArguments { p: i64, delta: Rational },
    #[error("scaling parameters are inconsistent")]
    InconsistentScaling,
    #[error(transparent)]
    Code(#[from] EmscrError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Shard(#[from] ShardError),
}
