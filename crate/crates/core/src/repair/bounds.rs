//! Closed-form bandwidth, cut-set bounds, the ε bound and size scaling.
//!
//! Bandwidth figures are exact rationals in units of the inner
//! sub-packetization `l`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use num_rational::Ratio;

use crate::indexspace::pow3;

use super::engine::{RepairTranscript, Source};
use super::partition::{PartitionSizes, RepairCase};
use super::RepairError;

pub type Rational = Ratio<i64>;

/// Per-block bandwidth over both rounds and both replacements.
pub fn bandwidth_closed_form(sizes: PartitionSizes) -> Rational {
    let third = Rational::new(1, 3);
    match sizes {
        PartitionSizes::Distinct { q, v, k1 } => {
            let (q, v, k1) = (q as i64, v as i64, k1 as i64);
            third * (2 * k1 + 2) + Rational::from(q + v)
        }
        PartitionSizes::Equal { w, y, k2, k3 } => {
            let (w, y, k2, k3) = (w as i64, y as i64, k2 as i64, k3 as i64);
            third * (k2 + k3 + 2 * y) + Rational::from(w + 1)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CutSetBounds {
    pub single: Rational,
    pub cooperative: Rational,
    pub centralized: Rational,
}

/// Single, cooperative and centralized cut-set bounds for `h` failures,
/// `d` helpers and dimension `k`, per node storage `l`.
pub fn cutset_bounds(h: i64, d: i64, k: i64, l: Rational) -> Result<CutSetBounds, RepairError> {
    let single_den = d - k + 1;
    let joint_den = h + d - k;
    if h < 1 || single_den <= 0 || joint_den <= 0 {
        return Err(RepairError::BadBoundArguments { h, d, k });
    }
    Ok(CutSetBounds {
        single: l / single_den,
        cooperative: l * (h * (h + d - 1)) / joint_den,
        centralized: l * (h * d) / joint_den,
    })
}

/// `(r / (P + 1)) · (1/2 + (2 - δ) P / 3) - 1`.
pub fn epsilon_bound(r: i64, p: i64, delta: Rational) -> Result<Rational, RepairError> {
    if p < 1 || delta <= Rational::from(0) || delta > Rational::from(1) {
        return Err(RepairError::BadEpsilonArguments { p, delta });
    }
    let inner = Rational::new(1, 2) + (Rational::from(2) - delta) * p / 3;
    Ok(Rational::new(r, p + 1) * inner - 1)
}

/// `(5/6)(3 + 2(2 - δ)P) / (P + 1) - 1`, the `r = 5` specialization.
pub fn epsilon_bound_r5(p: i64, delta: Rational) -> Rational {
    Rational::new(5, 6) * (Rational::from(3) + (Rational::from(2) - delta) * (2 * p)) / (p + 1) - 1
}

/// Schedule facts of one block, as stored in a transcript file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockSummary {
    pub block: usize,
    pub position: usize,
    pub groups: usize,
    pub sizes: PartitionSizes,
    /// Downloads per group, identical for every group of the block.
    pub per_group: usize,
}

impl BlockSummary {
    pub fn case(&self) -> RepairCase {
        match self.sizes {
            PartitionSizes::Distinct { .. } => RepairCase::Distinct,
            PartitionSizes::Equal { .. } => RepairCase::Equal,
        }
    }
}

/// Download counts keyed by `(block, replacement, round, source)`.
pub type LinkCounts = BTreeMap<(usize, usize, u8, Source), usize>;

/// The data a bandwidth report needs, with a line-oriented text form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranscriptSummary {
    pub failed: (usize, usize),
    pub nodes: usize,
    pub data_nodes: usize,
    pub r: usize,
    pub delta: Rational,
    pub blocks: Vec<BlockSummary>,
    pub links: LinkCounts,
}

const HEADER: &str = "# emscr repair transcript v1";

fn source_text(s: Source) -> String {
    match s {
        Source::Helper(n) => format!("helper:{n}"),
        Source::Replacement(n) => format!("replacement:{n}"),
    }
}

impl TranscriptSummary {
    pub fn from_transcript(
        t: &RepairTranscript,
        nodes: usize,
        r: usize,
        delta: Rational,
    ) -> Result<Self, RepairError> {
        let counts = t.group_counts();
        let mut blocks = Vec::with_capacity(t.blocks.len());
        for rec in &t.blocks {
            let block = rec.partition.block;
            let per: BTreeSet<usize> = counts.range((block, Default::default())..).take_while(|((b, _), _)| *b == block).map(|(_, &c)| c).collect();
            let per_group = match per.len() {
                0 => 0,
                1 => *per.first().expect("one entry"),
                _ => return Err(RepairError::UnevenGroups(block)),
            };
            blocks.push(BlockSummary {
                block,
                position: rec.position,
                groups: rec.groups,
                sizes: rec.partition.sizes(),
                per_group,
            });
        }
        let mut links = LinkCounts::new();
        for d in &t.downloads {
            *links.entry((d.block, d.replacement, d.round, d.source)).or_insert(0) += 1;
        }
        Ok(TranscriptSummary {
            failed: t.failed,
            nodes,
            data_nodes: nodes - r,
            r,
            delta,
            blocks,
            links,
        })
    }

    pub fn helpers_contacted(&self) -> BTreeSet<usize> {
        self.links
            .keys()
            .filter_map(|&(_, _, _, s)| match s {
                Source::Helper(n) => Some(n),
                Source::Replacement(_) => None,
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{HEADER}");
        let _ = writeln!(out, "failed = {},{}", self.failed.0, self.failed.1);
        let _ = writeln!(out, "nodes = {}", self.nodes);
        let _ = writeln!(out, "r = {}", self.r);
        let _ = writeln!(out, "delta = {}", self.delta);
        for b in &self.blocks {
            let sizes = match b.sizes {
                PartitionSizes::Distinct { q, v, k1 } => format!("case=distinct q={q} v={v} k1={k1}"),
                PartitionSizes::Equal { w, y, k2, k3 } => format!("case=equal w={w} y={y} k2={k2} k3={k3}"),
            };
            let _ = writeln!(
                out,
                "block {} position={} groups={} per_group={} {}",
                b.block, b.position, b.groups, b.per_group, sizes
            );
        }
        for (&(block, replacement, round, source), &count) in &self.links {
            let _ = writeln!(
                out,
                "download block={block} replacement={replacement} round={round} source={} count={count}",
                source_text(source)
            );
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, RepairError> {
        let bad = |line: &str| RepairError::BadTranscript(line.to_string());
        let mut lines = text.lines();
        if lines.next() != Some(HEADER) {
            return Err(bad("missing header"));
        }
        let mut head = BTreeMap::new();
        let mut blocks = Vec::new();
        let mut links = LinkCounts::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let mut words = line.split_whitespace();
            match words.next() {
                Some("block") => {
                    let block = words.next().and_then(|w| w.parse().ok()).ok_or_else(|| bad(line))?;
                    let kv = fields(words).ok_or_else(|| bad(line))?;
                    let get = |k: &str| kv.get(k).and_then(|v| v.parse::<usize>().ok()).ok_or_else(|| bad(line));
                    let sizes = match kv.get("case").map(String::as_str) {
                        Some("distinct") => PartitionSizes::Distinct {
                            q: get("q")?,
                            v: get("v")?,
                            k1: get("k1")?,
                        },
                        Some("equal") => PartitionSizes::Equal {
                            w: get("w")?,
                            y: get("y")?,
                            k2: get("k2")?,
                            k3: get("k3")?,
                        },
                        _ => return Err(bad(line)),
                    };
                    blocks.push(BlockSummary {
                        block,
                        position: get("position")?,
                        groups: get("groups")?,
                        per_group: get("per_group")?,
                        sizes,
                    });
                }
                Some("download") => {
                    let kv = fields(words).ok_or_else(|| bad(line))?;
                    let get = |k: &str| kv.get(k).and_then(|v| v.parse::<usize>().ok()).ok_or_else(|| bad(line));
                    let source = match kv.get("source").and_then(|s| s.split_once(':')) {
                        Some(("helper", n)) => Source::Helper(n.parse().map_err(|_| bad(line))?),
                        Some(("replacement", n)) => Source::Replacement(n.parse().map_err(|_| bad(line))?),
                        _ => return Err(bad(line)),
                    };
                    let round = u8::try_from(get("round")?).map_err(|_| bad(line))?;
                    links.insert((get("block")?, get("replacement")?, round, source), get("count")?);
                }
                _ => {
                    let (k, v) = line.split_once('=').ok_or_else(|| bad(line))?;
                    head.insert(k.trim().to_string(), v.trim().to_string());
                }
            }
        }
        let num = |k: &str| {
            head.get(k)
                .and_then(|v| v.parse::<usize>().ok())
                .ok_or_else(|| bad(k))
        };
        let failed = head
            .get("failed")
            .and_then(|v| v.split_once(','))
            .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)))
            .ok_or_else(|| bad("failed"))?;
        let delta = head
            .get("delta")
            .and_then(|v| v.parse::<Rational>().ok())
            .ok_or_else(|| bad("delta"))?;
        let nodes = num("nodes")?;
        let r = num("r")?;
        Ok(TranscriptSummary {
            failed,
            nodes,
            data_nodes: nodes.checked_sub(r).ok_or_else(|| bad("r"))?,
            r,
            delta,
            blocks,
            links,
        })
    }
}

fn fields<'a>(words: impl Iterator<Item = &'a str>) -> Option<BTreeMap<String, String>> {
    words
        .map(|w| w.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())))
        .collect()
}

/// Measured against predicted bandwidth of one block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockBandwidth {
    pub block: usize,
    pub case: RepairCase,
    pub per_group: usize,
    /// `per_group · (l/3)`, in units of `l`.
    pub measured: Rational,
    pub closed_form: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BandwidthReport {
    pub blocks: Vec<BlockBandwidth>,
    pub rb_total: Rational,
    pub rb_closed_form: Rational,
    /// Cooperative cut-set optimum with `d = P`, `k = M - r`, node storage
    /// `N l`.
    pub rb_optimal: Rational,
    pub eps_measured: Rational,
    pub eps_bound: Rational,
    pub helpers_p: usize,
    pub delta: Rational,
    pub data_nodes: usize,
}

impl BandwidthReport {
    pub fn from_summary(s: &TranscriptSummary) -> Result<Self, RepairError> {
        let blocks: Vec<BlockBandwidth> = s
            .blocks
            .iter()
            .map(|b| BlockBandwidth {
                block: b.block,
                case: b.case(),
                per_group: b.per_group,
                measured: Rational::new(b.per_group as i64, 3),
                closed_form: bandwidth_closed_form(b.sizes),
            })
            .collect();
        let rb_total = blocks.iter().map(|b| b.measured).sum();
        let rb_closed_form = blocks.iter().map(|b| b.closed_form).sum();
        let p = s.helpers_contacted().len() as i64;
        let storage = Rational::from(blocks.len() as i64);
        let rb_optimal = cutset_bounds(2, p, s.data_nodes as i64, storage)?.cooperative;
        let eps_bound = epsilon_bound(s.r as i64, p, s.delta)?;
        let mut report = BandwidthReport {
            blocks,
            rb_total,
            rb_closed_form,
            rb_optimal,
            eps_measured: Rational::from(0),
            eps_bound,
            helpers_p: p as usize,
            delta: s.delta,
            data_nodes: s.data_nodes,
        };
        report.eps_measured = epsilon_measured(&report);
        Ok(report)
    }

    pub fn case_blocks(&self, case: RepairCase) -> usize {
        self.blocks.iter().filter(|b| b.case == case).count()
    }

    /// Helper floor `P ≥ M - r`.
    pub fn helper_floor_holds(&self) -> bool {
        self.helpers_p >= self.data_nodes
    }

    /// `RB ≤ (1 + ε_bound) · RB_opt`.
    pub fn bound_chain_holds(&self) -> bool {
        self.rb_total <= (self.eps_bound + 1) * self.rb_optimal
    }

    /// Fixed-key `key=value` lines.
    pub fn to_kv(&self) -> String {
        format!(
            "rb_total={}\nrb_closed_form={}\nrb_optimal={}\neps_measured={}\neps_bound={}\nhelpers_P={}\ncase_blocks_distinct={}\ncase_blocks_equal={}\n",
            self.rb_total,
            self.rb_closed_form,
            self.rb_optimal,
            self.eps_measured,
            self.eps_bound,
            self.helpers_p,
            self.case_blocks(RepairCase::Distinct),
            self.case_blocks(RepairCase::Equal),
        )
    }
}

/// `RB / RB_opt - 1`.
pub fn epsilon_measured(report: &BandwidthReport) -> Rational {
    report.rb_total / report.rb_optimal - 1
}

/// Sub-packetization and field-size figures of a parameter choice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScalingReport {
    pub q: u64,
    pub u: u64,
    pub outer_g: u64,
    /// `K = u · g`.
    pub outer_dimension: u64,
    pub blocks: u64,
    /// `m = C(q, 2)`; `l = 3^m` and `L = N · 3^m`.
    pub digit_count: u64,
    /// `log M / log q = u · g`.
    pub log_q_m: u64,
    pub min_field_order: u128,
    pub configured_field_order: u64,
    /// `u N` and `u L / 3^m`, the coefficients of `log q / (√q - 1)` in the
    /// two forms of `log M`.
    pub ratio_lhs: Ratio<i128>,
    pub ratio_rhs: Ratio<i128>,
}

impl ScalingReport {
    pub fn field_ok(&self) -> bool {
        u128::from(self.configured_field_order) >= self.min_field_order
    }

    pub fn ratio_identity_holds(&self) -> bool {
        self.ratio_lhs == self.ratio_rhs
    }
}

pub fn scaling_report(
    q: u64,
    u: u64,
    outer_g: u64,
    blocks: u64,
    nodes: u64,
    configured_field_order: u64,
) -> Result<ScalingReport, RepairError> {
        let k = u.checked_mul(outer_g).ok_or(RepairError::InconsistentScaling)?;
    let m = q * q.saturating_sub(1) / 2;
    let qk = u128::from(q).checked_pow(k as u32).ok_or(RepairError::InconsistentScaling)?;
    if qk != u128::from(nodes) || m as usize > crate::indexspace::MAX_DIGITS {
        return Err(RepairError::InconsistentScaling);
    }
    let l = pow3(m as usize) as i128;
    let big_l = i128::from(blocks) * l;
    Ok(ScalingReport {
        q,
        u,
        outer_g,
        outer_dimension: k,
        blocks,
        digit_count: m,
        log_q_m: k,
        min_field_order: 2 * qk * u128::from(q) + 1,
        configured_field_order,
        ratio_lhs: Ratio::from(i128::from(u) * i128::from(blocks)),
        ratio_rhs: Ratio::new(i128::from(u) * big_l, l),
    })
}
