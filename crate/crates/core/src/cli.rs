//! Command-line front end. Flags override the config file; the output
//! directory resolves flag, then `QTRUST_OUTPUT_DIR`, then the file.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{ConfigError, ScenarioConfig, Spacing, OUTPUT_DIR_ENV};
use crate::metrics::sweep::{run_sweep, summary_table, write_atomic, MeshRow, SweepOptions, MESH_HEADER};
use crate::metrics::fmt_kpi;
use crate::ralgebra::{best_path, enumerate_paths_oracle, NodeId, QuantumTopology};
use crate::sim::{run_scenario, RunOptions};
use crate::trustnet::OperationMode;
use crate::verify::{all_passed, render, run_checks, Perturbation};

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_RUN: u8 = 3;
pub const EXIT_VERIFY: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "qtrust", version, about = "Trustworthy Antarctic telemetry simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One deterministic run; prints the KPIs.
    Run(RunArgs),
    /// Sweep the grid in the config's sweep section.
    Sweep(SweepArgs),
    /// Analytic self-checks of the quantum math and routing.
    Verify(VerifyArgs),
    /// Best quantum route between two nodes of a topology file.
    Paths(PathsArgs),
    /// Print the default configuration.
    DefaultConfig,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Scenario file (JSON). Defaults apply when omitted.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub days: Option<f64>,
    /// Output directory (overrides the file).
    #[arg(short, long, env = OUTPUT_DIR_ENV)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub spots: Option<usize>,
    #[arg(long)]
    pub redundancy: Option<usize>,
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<OperationMode>,
    #[arg(long)]
    pub p_b0: Option<f64>,
    /// NDJSON event trace.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// CSV of every member's reputation after each transaction.
    #[arg(long)]
    pub trust_csv: Option<PathBuf>,
    /// Also print run diagnostics as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_delimiter = ',')]
    pub spots: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub redundancy: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',', value_parser = parse_mode)]
    pub modes: Option<Vec<OperationMode>>,
    #[arg(long)]
    pub seeds: Option<u64>,
    #[arg(long)]
    pub p_b0_points: Option<usize>,
    #[arg(long)]
    pub p_b0_min: Option<f64>,
    #[arg(long)]
    pub p_b0_max: Option<f64>,
    #[arg(long, value_parser = parse_spacing)]
    pub spacing: Option<Spacing>,
    /// Worker threads; defaults to the available cores.
    #[arg(short, long)]
    pub jobs: Option<usize>,
    /// Discard results of a different earlier sweep in the output directory.
    #[arg(long)]
    pub fresh: bool,
    /// Stop after this many new cells (the rest stay pending).
    #[arg(long)]
    pub max_cells: Option<usize>,
    #[arg(short, long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub json: bool,
    /// Mutation hook: shift every purification output.
    #[arg(long, hide = true, default_value_t = 0.0)]
    pub perturb_purify: f64,
}

#[derive(Debug, Args)]
pub struct PathsArgs {
    /// Topology file: {"nodes": [...], "links": [{"from","to","bell_pairs_per_s","overhead"}]}.
    #[arg(short, long)]
    pub topology: PathBuf,
    #[arg(long)]
    pub from: u32,
    #[arg(long)]
    pub to: u32,
    /// List every simple path with its signature.
    #[arg(long)]
    pub all: bool,
}

fn parse_mode(s: &str) -> Result<OperationMode, String> {
    s.parse().map_err(|e: crate::trustnet::TrustnetError| e.to_string())
}

fn parse_spacing(s: &str) -> Result<Spacing, String> {
    match s.to_ascii_lowercase().as_str() {
        "log" => Ok(Spacing::Log),
        "linear" => Ok(Spacing::Linear),
        _ => Err(format!("unknown spacing '{s}' (log or linear)")),
    }
}

fn base_config(common: &CommonArgs) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = match &common.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(d) = common.days {
        cfg.workload.days = d;
    }
    Ok(cfg)
}

fn config_failure(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("config error: {e}");
    ExitCode::from(EXIT_CONFIG)
}

fn run_failure(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("run failed: {e}");
    ExitCode::from(EXIT_RUN)
}

fn create(path: &Path) -> std::io::Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn cmd_run(a: RunArgs) -> ExitCode {
    let mut cfg = match base_config(&a.common) {
        Ok(c) => c,
        Err(e) => return config_failure(e),
    };
    if let Some(v) = a.spots {
        cfg.scenario.spots = v;
    }
    if let Some(v) = a.redundancy {
        cfg.scenario.redundancy = v;
    }
    if let Some(v) = a.mode {
        cfg.scenario.mode = v;
    }
    if let Some(v) = a.p_b0 {
        cfg.scenario.p_b0 = v;
    }
    if let Err(e) = cfg.validate() {
        return config_failure(e);
    }
    let out_dir = cfg.resolve_output_dir(a.common.output_dir.as_deref());
    let trace = match &a.trace {
        Some(p) => match create(p) {
            Ok(w) => Some(Box::new(w) as Box<dyn Write + Send>),
            Err(e) => return run_failure(format!("{}: {e}", p.display())),
        },
        None => None,
    };
    let out = match run_scenario(
        &cfg,
        RunOptions {
            trace,
            record_trust: a.trust_csv.is_some(),
        },
    ) {
        Ok(o) => o,
        Err(e) => return run_failure(e),
    };
    let m = &out.metrics;
    println!(
        "mode={} spots={} redundancy={} p_b0={} seed={} fsr={} pdr={} str={} bnt={:.6} transactions={}",
        cfg.scenario.mode,
        cfg.scenario.spots,
        cfg.scenario.redundancy,
        cfg.scenario.p_b0,
        cfg.seed,
        fmt_kpi(m.fsr),
        fmt_kpi(m.pdr),
        fmt_kpi(m.str_),
        m.bnt,
        m.counters.transactions
    );
    if a.json {
        let doc = serde_json::json!({"metrics": m, "diagnostics": out.diagnostics});
        println!("{}", serde_json::to_string_pretty(&doc).expect("serializable"));
    }
    let row = MeshRow {
        spots: cfg.scenario.spots,
        redundancy: cfg.scenario.redundancy,
        p_b0: cfg.scenario.p_b0,
        mode: cfg.scenario.mode,
        seed: cfg.seed,
        fsr: m.fsr,
        pdr: m.pdr,
        str_: m.str_,
        bnt: m.bnt,
    };
    let csv = format!("{MESH_HEADER}\n{}\n", row.to_csv());
    if let Err(e) = write_atomic(&out_dir.join("run.csv"), csv.as_bytes()) {
        return run_failure(e);
    }
    if let Some(p) = &a.trust_csv {
        let mut body = String::from("t_days,spot,member,reputation,ostracized\n");
        for s in &out.trust_series {
            body.push_str(&format!(
                "{:.6},{},{},{:.6},{}\n",
                s.t_days, s.spot, s.member, s.reputation, s.ostracized
            ));
        }
        if let Err(e) = write_atomic(p, body.as_bytes()) {
            return run_failure(e);
        }
    }
    ExitCode::SUCCESS
}

fn cmd_sweep(a: SweepArgs) -> ExitCode {
    let mut cfg = match base_config(&a.common) {
        Ok(c) => c,
        Err(e) => return config_failure(e),
    };
    let s = &mut cfg.sweep;
    if let Some(v) = a.spots {
        s.spots = v;
    }
    if let Some(v) = a.redundancy {
        s.redundancy = v;
    }
    if let Some(v) = a.modes {
        s.modes = v;
    }
    if let Some(v) = a.seeds {
        s.seeds = v;
    }
    if let Some(v) = a.p_b0_points {
        s.p_b0_points = v;
    }
    if let Some(v) = a.p_b0_min {
        s.p_b0_min = v;
    }
    if let Some(v) = a.p_b0_max {
        s.p_b0_max = v;
    }
    if let Some(v) = a.spacing {
        s.spacing = v;
    }
    // the scenario fields are replaced per cell; check the rest
    let mut probe = cfg.clone();
    probe.scenario.redundancy = 4;
    probe.scenario.persistent_faults.clear();
    probe.trust.exclude_pairs.clear();
    if let Err(e) = probe.validate() {
        return config_failure(e);
    }
    let out_dir = cfg.resolve_output_dir(a.common.output_dir.as_deref());
    let opts = SweepOptions {
        jobs: a.jobs,
        max_new_cells: a.max_cells,
        fresh: a.fresh,
        progress: !a.quiet,
    };
    match run_sweep(&cfg, &out_dir, &opts) {
        Ok(out) => {
            print!("{}", summary_table(&out.summary));
            let m = &out.manifest;
            println!(
                "cells: {} completed, {} skipped, {} failed, {} pending -> {}",
                m.completed.len(),
                m.skipped.len(),
                m.failed.len(),
                m.pending.len(),
                out_dir.display()
            );
            for f in &m.failed {
                eprintln!("failed cell {}: {}", f.key, f.error);
            }
            if m.failed.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_RUN)
            }
        }
        Err(crate::metrics::sweep::SweepError::Grid(e)) => config_failure(e),
        Err(e) => run_failure(e),
    }
}

fn cmd_verify(a: VerifyArgs) -> ExitCode {
    let checks = run_checks(&Perturbation {
        purify_offset: a.perturb_purify,
    });
    if a.json {
        println!("{}", serde_json::to_string_pretty(&checks).expect("serializable"));
    } else {
        print!("{}", render(&checks));
    }
    if all_passed(&checks) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_VERIFY)
    }
}

fn cmd_paths(a: PathsArgs) -> ExitCode {
    let topo = match QuantumTopology::load(&a.topology) {
        Ok(t) => t,
        Err(e) => return config_failure(e),
    };
    let (src, dst) = (NodeId(a.from), NodeId(a.to));
    if a.all {
        match enumerate_paths_oracle(&topo, src, dst) {
            Ok(routes) => {
                for r in routes {
                    println!("{}  {}", r.signature, fmt_path(&r.path));
                }
            }
            Err(e) => return run_failure(e),
        }
    }
    match best_path(&topo, src, dst) {
        Ok(r) => {
            println!("best {}  {}", r.signature, fmt_path(&r.path));
            ExitCode::SUCCESS
        }
        Err(e) => run_failure(e),
    }
}

fn fmt_path(p: &[NodeId]) -> String {
    p.iter().map(|n| n.0.to_string()).collect::<Vec<_>>().join(" -> ")
}

pub fn main_with(cli: Cli) -> ExitCode {
    match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Paths(a) => cmd_paths(a),
        Command::DefaultConfig => {
            println!("{}", ScenarioConfig::default().to_json_pretty());
            ExitCode::SUCCESS
        }
    }
}
