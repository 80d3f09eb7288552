//! Command-line front end: runs experiments, generates synthetic traces and
//! re-derives metrics or audits timing from saved command logs.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use dramchar::audit::audit_log;
use dramchar::dram::{load_spec_file, peak_bandwidth, DramKind, DramTypeSpec, InterleaveMode};
use dramchar::energy::{energy_from_log, EnergyParams, EnergyReport};
use dramchar::eventlog::read_event_log;
use dramchar::harness::{
    resolve_spec, run_experiment, ExperimentConfig, HarnessError, Mode, RunOptions, ThreadSet, TraceSource,
    SPEC_DIR_ENV,
};
use dramchar::metrics::offline::{summarize_log, LogSummary};
use dramchar::trace::{generate_synthetic, BinaryTraceWriter, SyntheticPattern};

const EXIT_CONFIG: u8 = 2;
const EXIT_TRACE: u8 = 3;
/// `audit` found timing violations.
const EXIT_VIOLATIONS: u8 = 1;

#[derive(Parser)]
#[command(name = "dramchar", version, about = "Cycle-level DRAM timing and energy simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and emit its report.
    Simulate(Box<SimulateArgs>),
    /// Write a synthetic trace to a file.
    GenTrace(GenTraceArgs),
    /// Recompute metrics (and optionally energy) from a command log.
    Metrics(MetricsArgs),
    /// Check every command in a log against the timing rules.
    Audit(AuditArgs),
    /// List the builtin DRAM types.
    Specs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(clap::Args)]
struct SimulateArgs {
    /// Experiment file; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Builtin type or a name from the spec directory or --dram-file.
    #[arg(long)]
    dram: Option<String>,
    /// Spec override file searched before the spec directory.
    #[arg(long)]
    dram_file: Option<PathBuf>,
    #[arg(long, env = SPEC_DIR_ENV)]
    spec_dir: Option<PathBuf>,
    /// single, bundle, network or multithreaded.
    #[arg(long)]
    mode: Option<Mode>,
    /// Trace file, one per core or injector.
    #[arg(long, num_args = 1..)]
    trace: Vec<PathBuf>,
    /// Synthetic pattern such as `random:footprint=256MiB,rpki=20,seed=1`.
    #[arg(long)]
    synthetic: Vec<String>,
    /// Instructions per synthetic trace.
    #[arg(long, default_value_t = 10_000_000)]
    instructions: u64,
    /// Comma-separated trace files forming one thread set (multithreaded).
    #[arg(long)]
    thread_set: Vec<String>,
    /// cacheline_interleave, hmc_default or hmc_alt.
    #[arg(long)]
    interleave: Option<InterleaveMode>,
    /// Outstanding requests per injector (network).
    #[arg(long)]
    max_inflight: Option<usize>,
    /// Consecutive lines fetched per injected request (network).
    #[arg(long)]
    packet_lines: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// Instructions per core before statistics start.
    #[arg(long)]
    warmup: Option<u64>,
    #[arg(long)]
    core_mhz: Option<u64>,
    /// Energy parameter file replacing the builtin one.
    #[arg(long)]
    energy_params: Option<PathBuf>,
    /// Report destination; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write one line per DRAM command and request event.
    #[arg(long)]
    command_log: Option<PathBuf>,
}

#[derive(clap::Args)]
struct GenTraceArgs {
    /// Synthetic pattern, same syntax as `simulate --synthetic`.
    pattern: String,
    #[arg(long)]
    instructions: u64,
    #[arg(long)]
    out: PathBuf,
    /// Use the compact binary encoding instead of text.
    #[arg(long)]
    binary: bool,
}

#[derive(clap::Args)]
struct MetricsArgs {
    log: PathBuf,
    #[arg(long)]
    energy_params: Option<PathBuf>,
}

#[derive(clap::Args)]
struct AuditArgs {
    log: PathBuf,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl ToString) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.to_string(),
        }
    }

    fn trace(message: impl ToString) -> Self {
        Self {
            code: EXIT_TRACE,
            message: message.to_string(),
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        Self {
            code: e.exit_code() as u8,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(*a),
        Command::GenTrace(a) => gen_trace(a),
        Command::Metrics(a) => metrics(a),
        Command::Audit(a) => audit(a),
        Command::Specs => specs(),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("dramchar: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn lookup_spec(name: &str, dram_file: Option<&Path>, spec_dir: Option<&Path>) -> Result<DramTypeSpec, Failure> {
    if let Some(f) = dram_file {
        let specs = load_spec_file(f).map_err(Failure::config)?;
        if let Some((_, s)) = specs.into_iter().find(|(k, _)| k.eq_ignore_ascii_case(name)) {
            return Ok(s);
        }
    }
    Ok(resolve_spec(name, spec_dir)?)
}

fn build_config(a: &SimulateArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match (&a.config, &a.dram) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(name)) => ExperimentConfig::new(
            lookup_spec(name, a.dram_file.as_deref(), a.spec_dir.as_deref())?,
            Mode::Single,
            Vec::new(),
        ),
        (None, None) => return Err(Failure::config("either --config or --dram is required")),
    };
    if a.config.is_some() {
        if let Some(name) = &a.dram {
            cfg.dram = lookup_spec(name, a.dram_file.as_deref(), a.spec_dir.as_deref())?;
        }
    }
    if let Some(m) = a.mode {
        cfg.mode = m;
    }
    let mut traces: Vec<TraceSource> = a.trace.iter().map(TraceSource::file).collect();
    for s in &a.synthetic {
        let p: SyntheticPattern = s.parse().map_err(Failure::config)?;
        traces.push(TraceSource::synthetic(p, a.instructions));
    }
    if !traces.is_empty() {
        cfg.traces = traces;
    }
    if !a.thread_set.is_empty() {
        cfg.thread_sets = a
            .thread_set
            .iter()
            .map(|set| ThreadSet {
                traces: set.split(',').filter(|t| !t.is_empty()).map(TraceSource::file).collect(),
            })
            .collect();
    }
    if let Some(i) = a.interleave {
        cfg.memory.interleave = Some(i);
    }
    if let Some(n) = a.max_inflight {
        cfg.network.max_inflight = n;
    }
    if let Some(n) = a.packet_lines {
        cfg.network.packet_lines = n;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(w) = a.warmup {
        cfg.warmup_instructions = w;
    }
    if let Some(mhz) = a.core_mhz {
        cfg.cpu.core_mhz = Some(mhz);
    }
    if let Some(p) = &a.energy_params {
        cfg.energy = Some(EnergyParams::load(p).map_err(Failure::config)?);
    }
    Ok(cfg)
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::config(format!("{}: {e}", path.display())))
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    let io_err = |e: io::Error| Failure::config(format!("writing output: {e}"));
    match out {
        Some(p) => {
            let mut w = create(p)?;
            w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(io_err)
        }
        None => io::stdout().lock().write_all(text.as_bytes()).map_err(io_err),
    }
}

fn simulate(a: SimulateArgs) -> Result<u8, Failure> {
    let cfg = build_config(&a)?;
    let command_log = match &a.command_log {
        Some(p) => Some(Box::new(create(p)?) as Box<dyn Write + Send>),
        None => None,
    };
    let report = run_experiment(&cfg, RunOptions { command_log })?;
    let text = match a.format {
        Format::Json => report.to_json(),
        Format::Csv => report.to_csv(),
    };
    emit(&text, a.out.as_deref())?;
    Ok(0)
}

fn gen_trace(a: GenTraceArgs) -> Result<u8, Failure> {
    let pattern: SyntheticPattern = a.pattern.parse().map_err(Failure::config)?;
    let records = generate_synthetic(&pattern, a.instructions).map_err(Failure::config)?;
    let mut out = create(&a.out)?;
    let written = if a.binary {
        BinaryTraceWriter::new(&mut out).and_then(|mut w| {
            for r in records {
                w.write_record(&r)?;
            }
            w.finish().map(|_| ())
        })
    } else {
        records.into_iter().try_for_each(|r| writeln!(out, "{r}"))
    };
    written
        .and_then(|_| out.flush())
        .map_err(|e| Failure::trace(format!("{}: {e}", a.out.display())))?;
    Ok(0)
}

fn load_log(path: &Path) -> Result<dramchar::eventlog::EventLog, Failure> {
    let f = File::open(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    read_event_log(BufReader::new(f)).map_err(Failure::config)
}

#[derive(Serialize)]
struct MetricsOutput {
    spec: String,
    bpu: f64,
    bpu_per_channel: f64,
    hit_fraction: f64,
    miss_fraction: f64,
    conflict_fraction: f64,
    summary: LogSummary,
    energy: Option<EnergyReport>,
}

fn metrics(a: MetricsArgs) -> Result<u8, Failure> {
    let log = load_log(&a.log)?;
    let params = match &a.energy_params {
        Some(p) => Some(EnergyParams::load(p).map_err(Failure::config)?),
        None => log.header.spec.parse::<DramKind>().ok().and_then(EnergyParams::builtin),
    };
    let summary = summarize_log(&log);
    let out = MetricsOutput {
        spec: log.header.spec.clone(),
        bpu: summary.bpu.bpu(),
        bpu_per_channel: summary.bpu.bpu_per_channel(),
        hit_fraction: summary.locality.hit_fraction(),
        miss_fraction: summary.locality.miss_fraction(),
        conflict_fraction: summary.locality.conflict_fraction(),
        energy: params.map(|p| energy_from_log(&log, &p)),
        summary,
    };
    let mut text = serde_json::to_string_pretty(&out).map_err(Failure::config)?;
    text.push('\n');
    emit(&text, None)?;
    Ok(0)
}

fn audit(a: AuditArgs) -> Result<u8, Failure> {
    let log = load_log(&a.log)?;
    let report = audit_log(&log);
    for v in &report.violations {
        println!("{v}");
    }
    println!(
        "{} commands checked, {} violations",
        report.commands_checked,
        report.violations.len()
    );
    Ok(if report.is_clean() { 0 } else { EXIT_VIOLATIONS })
}

fn specs() -> Result<u8, Failure> {
    println!(
        "{:<8} {:>6} {:>9} {:>6} {:>6} {:>6} {:>7} {:>7} {:>9}",
        "type", "MT/s", "GB/s", "units", "banks", "hit", "miss", "conf", "peak"
    );
    for kind in DramKind::ALL {
        let s = dramchar::dram::builtin_spec(kind);
        println!(
            "{:<8} {:>6} {:>9.1} {:>6} {:>6} {:>6.1} {:>7.1} {:>7.1} {:>9.1}",
            s.name,
            s.data_rate_mtps,
            s.max_bandwidth_gbps,
            s.units(),
            s.total_banks(),
            s.hit_ns,
            s.miss_ns,
            s.conflict_min_ns,
            peak_bandwidth(&s)
        );
    }
    Ok(0)
}
