//! `emscr`: generate parameters, encode shards, inject failures, repair
//! two failed nodes and report bandwidth against the bounds.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use emscr_core::config::{parse_pair, ExperimentConfig, ParamsFile};
use emscr_core::repair::{
    cooperative_repair, repair_slice, scaling_report, BandwidthReport, RepairCase, RepairOptions, ShardAccess,
    TranscriptSummary,
};
use emscr_core::shardstore::{read_shard_file, write_shard_file, Shard};

#[derive(Parser)]
#[command(name = "emscr", version, about = "Epsilon-MSCR two-node cooperative repair simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a config and write DIR/params.bin.
    GenParams {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config's message seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config's coordinate groups per block.
        #[arg(long)]
        groups: Option<usize>,
        /// Overrides the config's failure pair, as `i1,i2`.
        #[arg(long)]
        fail: Option<String>,
    },
    /// Encode the seeded message and write one shard per node.
    Encode {
        #[arg(long)]
        out: PathBuf,
    },
    /// Delete the shards of the listed nodes and record them as failed.
    Fail {
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated node ids.
        #[arg(long, value_delimiter = ',', required = true)]
        fail: Vec<usize>,
    },
    /// Rebuild the two failed shards and write DIR/transcript.txt.
    Repair {
        #[arg(long)]
        out: PathBuf,
        /// Run coordinate groups one at a time.
        #[arg(long)]
        serial: bool,
    },
    /// Summarize a transcript and write its key=value report.
    Report {
        #[arg(long)]
        transcript: PathBuf,
        /// Defaults to `report.kv` next to the transcript.
        #[arg(long)]
        kv: Option<PathBuf>,
    },
}

/// Errors in how the tool was invoked; exit status 2.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn params_path(dir: &Path) -> PathBuf {
    dir.join("params.bin")
}

fn shard_path(dir: &Path, node: usize) -> PathBuf {
    dir.join("shards").join(format!("node_{node:03}.shard"))
}

fn failed_path(dir: &Path) -> PathBuf {
    dir.join("failed.txt")
}

fn load_params(dir: &Path) -> Result<ParamsFile> {
    let path = params_path(dir);
    let bytes = fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
    ParamsFile::from_bytes(&bytes).with_context(|| format!("loading {}", path.display()))
}

fn read_failed(dir: &Path) -> Result<BTreeSet<usize>> {
    let path = failed_path(dir);
    if !path.exists() {
        return Ok(BTreeSet::new());
    }
    fs::read_to_string(&path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.trim().parse().with_context(|| format!("bad line in {}", path.display())))
        .collect()
}

fn gen_params(
    config: &Path,
    out: &Path,
    seed: Option<u64>,
    groups: Option<usize>,
    fail: Option<String>,
) -> Result<()> {
    let text = fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let mut cfg = ExperimentConfig::parse(&text).map_err(|e| usage(e.to_string()))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(g) = groups {
        cfg.groups = g;
    }
    if let Some(f) = fail {
        cfg.fail = parse_pair("fail", &f).map_err(|e| usage(e.to_string()))?;
    }
    let file = ParamsFile::from_config(cfg).map_err(|e| usage(e.to_string()))?;
    fs::create_dir_all(out)?;
    fs::write(params_path(out), file.to_bytes())?;
    let p = &file.params;
    println!(
        "params: M={} N={} r={} l=3^{} field={} digest={}",
        p.nodes(),
        p.blocks(),
        p.r(),
        p.digits(),
        p.inner.field.order(),
        hex(&file.digest())
    );
    // a Reed-Solomon outer code is the u = 1, g = K instance
    let s = scaling_report(
        p.outer.q,
        1,
        p.outer.dimension as u64,
        p.blocks() as u64,
        p.nodes() as u64,
        p.inner.field.order(),
    )?;
    println!(
        "scaling: L = {} * 3^{}, log_q M = {}, minimum field {} vs configured {} ({}), ratio identity {}",
        s.blocks,
        s.digit_count,
        s.log_q_m,
        s.min_field_order,
        s.configured_field_order,
        if s.field_ok() { "ok" } else { "too small" },
        if s.ratio_identity_holds() { "holds" } else { "fails" }
    );
    Ok(())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn encode(out: &Path) -> Result<()> {
    let file = load_params(out)?;
    let p = &file.params;
    let cfg = &file.config;
    let slice = repair_slice(p, cfg.fail, cfg.groups, cfg.seed)?;
    let digest = file.digest();
    let mut shards: Vec<Shard> = (1..=p.nodes())
        .map(|node| Shard {
            node,
            digest,
            slice: slice.clone(),
            symbols: BTreeMap::new(),
        })
        .collect();
    for (block, b) in slice.coords() {
        let cv = p.seeded_coord(cfg.seed, block, b)?;
        for (shard, v) in shards.iter_mut().zip(cv) {
            shard.symbols.insert((block, b), v);
        }
    }
    fs::create_dir_all(out.join("shards"))?;
    for shard in &shards {
        write_shard_file(&shard_path(out, shard.node), shard)?;
    }
    println!("encoded {} shards of {} symbols", shards.len(), slice.len());
    Ok(())
}

fn fail(out: &Path, nodes: &[usize]) -> Result<()> {
    let file = load_params(out)?;
    let m = file.params.nodes();
    let mut failed = read_failed(out)?;
    for &node in nodes {
        if node == 0 || node > m {
            return Err(usage(format!("node {node} out of range 1..={m}")));
        }
        let path = shard_path(out, node);
        if path.exists() {
            fs::remove_file(&path)?;
        } else if !failed.contains(&node) {
            return Err(usage(format!("no shard for node {node}")));
        }
        failed.insert(node);
    }
    let text: String = failed.iter().map(|n| format!("{n}\n")).collect();
    fs::write(failed_path(out), text)?;
    println!("failed nodes: {failed:?}");
    Ok(())
}

fn repair(out: &Path, serial: bool) -> Result<()> {
    let file = load_params(out)?;
    let p = &file.params;
    let failed: Vec<usize> = read_failed(out)?.into_iter().collect();
    let &[f1, f2] = failed.as_slice() else {
        return Err(usage(format!(
            "repair handles exactly two failed nodes, {} recorded",
            failed.len()
        )));
    };
    let digest = file.digest();
    let mut shards = BTreeMap::new();
    for node in (1..=p.nodes()).filter(|&n| n != f1 && n != f2) {
        let path = shard_path(out, node);
        let shard = read_shard_file(&path, &digest).with_context(|| format!("reading {}", path.display()))?;
        shards.insert(node, shard);
    }
    let slice = shards.values().next().context("no surviving shards")?.slice.clone();
    if let Some(s) = shards.values().find(|s| s.slice != slice) {
        bail!("shard of node {} has a different slice", s.node);
    }
    let access = ShardAccess {
        field: &p.inner.field,
        shards: shards.iter().map(|(&n, s)| (n, s)).collect(),
    };
    let options = RepairOptions {
        parallel: !serial,
        ..Default::default()
    };
    let outcome = cooperative_repair(p, (f1, f2), &slice, &access, options)?;
    let summary = TranscriptSummary::from_transcript(&outcome.transcript, p.nodes(), p.r(), p.outer.delta())?;
    for shard in outcome.into_shards(&slice, digest) {
        write_shard_file(&shard_path(out, shard.node), &shard)?;
    }
    fs::write(out.join("transcript.txt"), summary.to_text())?;
    println!("repaired nodes {f1} and {f2} on {} coordinates", slice.len());
    Ok(())
}

fn report(transcript: &Path, kv: Option<PathBuf>) -> Result<()> {
    let text = fs::read_to_string(transcript).with_context(|| format!("reading {}", transcript.display()))?;
    let summary = TranscriptSummary::parse(&text)?;
    let report = BandwidthReport::from_summary(&summary)?;
    let kv_path = kv.unwrap_or_else(|| transcript.with_file_name("report.kv"));
    fs::write(&kv_path, report.to_kv())?;

    let approx = |x: emscr_core::repair::Rational| *x.numer() as f64 / *x.denom() as f64;
    println!("failed nodes        {} and {}", summary.failed.0, summary.failed.1);
    for b in &report.blocks {
        let case = match b.case {
            RepairCase::Distinct => "distinct",
            RepairCase::Equal => "equal",
        };
        println!(
            "block {:<3} {:<9} {} symbols per group, {} l (closed form {} l)",
            b.block, case, b.per_group, b.measured, b.closed_form
        );
    }
    println!("repair bandwidth    {} l ({:.4})", report.rb_total, approx(report.rb_total));
    println!("closed form         {} l", report.rb_closed_form);
    println!("cut-set optimum     {} l ({:.4})", report.rb_optimal, approx(report.rb_optimal));
    println!("epsilon measured    {} ({:.6})", report.eps_measured, approx(report.eps_measured));
    println!("epsilon bound       {} ({:.6})", report.eps_bound, approx(report.eps_bound));
    println!(
        "helpers P           {} (floor M - r = {}: {})",
        report.helpers_p,
        report.data_nodes,
        if report.helper_floor_holds() { "ok" } else { "VIOLATED" }
    );
    println!(
        "bound chain         {}",
        if report.bound_chain_holds() { "ok" } else { "VIOLATED" }
    );
    println!(
        "measured = closed   {}",
        if report.rb_total == report.rb_closed_form { "ok" } else { "MISMATCH" }
    );
    println!("wrote {}", kv_path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenParams {
            config,
            out,
            seed,
            groups,
            fail: f,
        } => gen_params(&config, &out, seed, groups, f),
        Command::Encode { out } => encode(&out),
        Command::Fail { out, fail: nodes } => fail(&out, &nodes),
        Command::Repair { out, serial } => repair(&out, serial),
        Command::Report { transcript, kv } => report(&transcript, kv),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("usage error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
