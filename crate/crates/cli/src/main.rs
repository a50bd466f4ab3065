use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mlcsim_core::config::{PolicyMode, SimConfig};
use mlcsim_core::hierarchy::records_csv;
use mlcsim_core::report::{
    Baseline, SweepGrid, compare, histogram_csv, run_simulation, sweep, sweep_csv,
};
use mlcsim_core::workload::{
    AccessEvent, SynthSpec, classify_blocks, generate, parse, read_binary, write_binary, write_trace,
};
use mlcsim_core::{SimError, TraceError};

/// Trace-driven simulator for stripped MLC STT-RAM last-level caches.
#[derive(Debug, Parser)]
#[command(name = "mlcsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one simulation and print its report.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Also write the per-access log as CSV.
        #[arg(long, value_name = "PATH")]
        access_log: Option<PathBuf>,
    },
    /// Run the baselines on one trace, normalized to the iso-area SLC row.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated baselines: slc, stacked_mlc, stripped_static,
        /// stripped_dynamic, slc_double.
        #[arg(long, value_delimiter = ',', value_parser = parse_baseline)]
        baseline: Vec<Baseline>,
    },
    /// Per-set access, miss and policy-event counts as CSV.
    Histogram {
        #[command(flatten)]
        common: Common,
    },
    /// Run a grid over n_assoc, n_swap and epoch_len.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        grid_n_assoc: Vec<u32>,
        #[arg(long, value_delimiter = ',')]
        grid_n_swap: Vec<u32>,
        #[arg(long, value_delimiter = ',')]
        grid_epoch_len: Vec<u64>,
    },
    /// Write a synthetic trace shaped for the configured LLC.
    Generate(GenerateArgs),
    /// Read/write dominance of every block in a trace.
    Classify {
        #[arg(long, value_name = "PATH")]
        trace: PathBuf,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 64)]
        line_bytes: u32,
        /// Emit one row per block instead of the summary.
        #[arg(long)]
        blocks: bool,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyArg {
    Off,
    Static,
    Dynamic,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML config; a `preset` key selects the base (desk, llc_only, eight_core).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Base preset when no config file is given.
    #[arg(long)]
    preset: Option<String>,
    /// Text trace, or binary when the name ends in `.bin`.
    #[arg(long, value_name = "PATH")]
    trace: PathBuf,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Seed for per-cell endurance variation.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epoch_len: Option<u64>,
    #[arg(long)]
    n_assoc: Option<u32>,
    #[arg(long)]
    n_swap: Option<u32>,
    #[arg(long, value_enum)]
    policy: Option<PolicyArg>,
    /// Include wall-clock time in JSON output.
    #[arg(long)]
    timing: bool,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Write the length-prefixed binary form.
    #[arg(long)]
    binary: bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 100_000)]
    events: u64,
    /// Zipf exponent over sets; 0 is uniform.
    #[arg(long, default_value_t = 1.0)]
    skew: f64,
    #[arg(long, default_value_t = 0.1)]
    hot_fraction: f64,
    #[arg(long, default_value_t = 12)]
    hot_lines: u32,
    #[arg(long, default_value_t = 4)]
    cold_lines: u32,
    #[arg(long, default_value_t = 0.5)]
    write_ratio: f64,
    #[arg(long, default_value_t = 0.33)]
    dominance: f64,
    #[arg(long, default_value_t = 8)]
    access_bytes: u32,
}

fn parse_baseline(s: &str) -> Result<Baseline, String> {
    Baseline::parse(s).ok_or_else(|| format!("unknown baseline `{s}`"))
}

fn load_config(path: Option<&Path>, preset: Option<&str>) -> Result<SimConfig, SimError> {
    let cfg = match (path, preset) {
        (Some(p), _) => SimConfig::from_file(p)?,
        (None, Some(name)) => SimConfig::preset(name)?,
        (None, None) => SimConfig::default(),
    };
    Ok(cfg)
}

impl Common {
    fn config(&self) -> Result<SimConfig, SimError> {
        let mut cfg = load_config(self.config.as_deref(), self.preset.as_deref())?;
        if let Some(s) = self.seed {
            cfg.endurance_seed = s;
        }
        if let Some(e) = self.epoch_len {
            cfg.epoch_len = e;
        }
        if let Some(n) = self.n_assoc {
            cfg.n_assoc = n;
        }
        if let Some(n) = self.n_swap {
            cfg.n_swap = n;
        }
        if let Some(p) = self.policy {
            cfg.policy = match p {
                PolicyArg::Off => PolicyMode::Off,
                PolicyArg::Static => PolicyMode::Static,
                PolicyArg::Dynamic => PolicyMode::Dynamic,
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn read_trace(path: &Path, line_bytes: u32) -> Result<Vec<AccessEvent>, SimError> {
    let file = File::open(path).map_err(TraceError::Io)?;
    let reader = BufReader::new(file);
    let events = if path.extension().is_some_and(|e| e == "bin") {
        read_binary(reader, line_bytes)?
    } else {
        parse(reader, line_bytes)?
    };
    if events.is_empty() {
        return Err(TraceError::Empty.into());
    }
    Ok(events)
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), SimError> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn with_newline(mut s: String) -> String {
    if !s.ends_with('\n') {
        s.push('\n');
    }
    s
}

fn run(cli: Cli) -> Result<(), SimError> {
    match cli.command {
        Command::Simulate { common, access_log } => {
            let cfg = common.config()?;
            let events = read_trace(&common.trace, cfg.line_bytes)?;
            let run = run_simulation(&cfg, &events)?;
            if let Some(p) = access_log {
                std::fs::write(p, records_csv(&run.records))?;
            }
            let text = match common.format {
                Format::Json => with_newline(run.report.to_json(common.timing)),
                Format::Csv => run.report.summary_csv(),
                Format::Table => run.report.table(),
            };
            emit(common.out.as_deref(), &text)
        }
        Command::Compare { common, baseline } => {
            let cfg = common.config()?;
            let events = read_trace(&common.trace, cfg.line_bytes)?;
            let baselines = if baseline.is_empty() { Baseline::STANDARD.to_vec() } else { baseline };
            let cmp = compare(&cfg, &events, &baselines)?;
            let text = match common.format {
                Format::Json => to_json(&cmp),
                Format::Csv => cmp.csv(),
                Format::Table => cmp.table(),
            };
            emit(common.out.as_deref(), &text)
        }
        Command::Histogram { common } => {
            let cfg = common.config()?;
            let events = read_trace(&common.trace, cfg.line_bytes)?;
            let run = run_simulation(&cfg, &events)?;
            let text = match common.format {
                Format::Json => to_json(&run.report.results.sets),
                Format::Csv | Format::Table => histogram_csv(&run.report.results),
            };
            emit(common.out.as_deref(), &text)
        }
        Command::Sweep { common, grid_n_assoc, grid_n_swap, grid_epoch_len } => {
            let cfg = common.config()?;
            let events = read_trace(&common.trace, cfg.line_bytes)?;
            let or = |v: Vec<_>, d| if v.is_empty() { vec![d] } else { v };
            let grid = SweepGrid {
                n_assoc: or(grid_n_assoc, cfg.n_assoc),
                n_swap: or(grid_n_swap, cfg.n_swap),
                epoch_len: if grid_epoch_len.is_empty() { vec![cfg.epoch_len] } else { grid_epoch_len },
            };
            let points = sweep(&cfg, &events, &grid)?;
            let text = match common.format {
                Format::Json => to_json(&points),
                Format::Csv | Format::Table => sweep_csv(&points),
            };
            emit(common.out.as_deref(), &text)
        }
        Command::Generate(g) => {
            let cfg = load_config(g.config.as_deref(), g.preset.as_deref())?;
            cfg.validate()?;
            let spec = SynthSpec {
                n_events: g.events,
                set_skew: g.skew,
                hot_set_fraction: g.hot_fraction,
                working_lines_per_hot_set: g.hot_lines,
                cold_lines_per_set: g.cold_lines,
                write_ratio: g.write_ratio,
                dominance_fraction: g.dominance,
                seed: g.seed,
                total_sets: cfg.geometry().total_sets() as u32,
                line_bytes: cfg.line_bytes,
                access_bytes: g.access_bytes,
                cores: cfg.cores,
            };
            let events = generate(&spec)?;
            let sink: Box<dyn Write> = match &g.out {
                Some(p) => Box::new(File::create(p)?),
                None => Box::new(io::stdout().lock()),
            };
            let mut sink = BufWriter::new(sink);
            if g.binary {
                write_binary(&events, &mut sink)?;
            } else {
                write_trace(&events, &mut sink)?;
            }
            sink.flush()?;
            Ok(())
        }
        Command::Classify { trace, out, line_bytes, blocks, format } => {
            let events = read_trace(&trace, line_bytes)?;
            let report = classify_blocks(&events, line_bytes);
            let text = match (format, blocks) {
                (Format::Json, _) => to_json(&report),
                (_, true) => report.blocks_csv(),
                (_, false) => report.summary_csv(),
            };
            emit(out.as_deref(), &text)
        }
    }
}

fn exit_code(e: &SimError) -> u8 {
    match e {
        SimError::Invariant(_) => 3,
        SimError::Config(_) | SimError::Trace(_) | SimError::Io(_) => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mlcsim: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
