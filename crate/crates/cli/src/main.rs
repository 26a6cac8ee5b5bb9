//! Command-line front end of the simulator.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use rowclone_core::config::{SimConfig, WorkloadKind};
use rowclone_core::report::{self, Report, RunError, SweepEntry};
use rowclone_core::workloads::{gen_bulkzero, gen_forkbench, serialize_trace};

#[derive(Parser)]
#[command(
    name = "rowclone-sim",
    version,
    about = "DRAM simulator with in-DRAM bulk copy and initialization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration.
    Simulate(RunArgs),
    /// Run baseline, RowClone and RowClone-ZI variants and tabulate reductions.
    Compare {
        #[command(flatten)]
        run: RunArgs,
        /// Config for the RowClone run (default: --config with RowClone on).
        #[arg(long)]
        rowclone_config: Option<PathBuf>,
        /// Config for the RowClone-ZI run (default: --config with ZI on).
        #[arg(long)]
        zi_config: Option<PathBuf>,
    },
    /// Write the trace of a synthetic workload.
    GenTrace {
        #[command(flatten)]
        common: CommonArgs,
        /// Generator to use (default: the config's workload kind).
        #[arg(long, value_enum)]
        workload: Option<Generator>,
        #[arg(long)]
        pages: Option<u64>,
        #[arg(long)]
        write_fraction: Option<f64>,
        #[arg(long)]
        reads: Option<u64>,
        #[arg(long)]
        stride: Option<u64>,
    },
    /// Check a configuration file and exit.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run every point of the config's sweep section.
    Sweep(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Generator {
    Forkbench,
    Bulkzero,
}

#[derive(Clone, Copy, Default, ValueEnum)]
enum Format {
    #[default]
    Json,
    Csv,
    Table,
}

#[derive(Args)]
struct CommonArgs {
    /// Configuration file (default: built-in DDR3-1066).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Trace file to run instead of the config's workload.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long, overrides_with = "no_rowclone")]
    rowclone: bool,
    #[arg(long)]
    no_rowclone: bool,
    #[arg(long, overrides_with = "no_zi")]
    zi: bool,
    #[arg(long)]
    no_zi: bool,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        Failure {
            code: e.exit_code() as u8,
            message: e.to_string(),
        }
    }
}

fn config_error(message: String) -> Failure {
    Failure { code: 1, message }
}

fn toggle(on: bool, off: bool) -> Option<bool> {
    if on {
        Some(true)
    } else if off {
        Some(false)
    } else {
        None
    }
}

fn load_config(path: Option<&Path>) -> Result<SimConfig, Failure> {
    match path {
        Some(p) => SimConfig::load(p).map_err(|e| config_error(format!("{}: {e}", p.display()))),
        None => Ok(SimConfig::default()),
    }
}

fn apply_common(cfg: &mut SimConfig, c: &CommonArgs) {
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
}

/// Seed and trace overrides, which apply to every compared configuration.
fn apply_workload(cfg: &mut SimConfig, a: &RunArgs) {
    apply_common(cfg, &a.common);
    if let Some(t) = &a.trace {
        cfg.workload.kind = WorkloadKind::Trace;
        cfg.workload.trace = Some(t.clone());
    }
}

fn apply_run(cfg: &mut SimConfig, a: &RunArgs) -> Result<(), Failure> {
    apply_workload(cfg, a);
    if let Some(v) = toggle(a.rowclone, a.no_rowclone) {
        cfg.features.rowclone = v;
    }
    if let Some(v) = toggle(a.zi, a.no_zi) {
        cfg.features.zi = v;
    }
    cfg.validate().map_err(|e| config_error(e.to_string()))
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| config_error(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn render(report: &Report, format: Format) -> String {
    match format {
        Format::Json => report::to_json(report),
        Format::Csv => report::latencies_csv(report),
        Format::Table => report::render_table(report),
    }
}

/// Writes the requested format, plus any outputs named in the config.
fn emit(
    cfg: &SimConfig,
    report: &Report,
    format: Format,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let o = &cfg.output;
    for (path, f) in [
        (&o.json, Format::Json),
        (&o.csv, Format::Csv),
        (&o.table, Format::Table),
    ] {
        if let Some(p) = path {
            write_output(Some(p), &render(report, f))?;
        }
    }
    write_output(out, &render(report, format))
}

fn simulate(a: RunArgs) -> Result<(), Failure> {
    let mut cfg = load_config(a.common.config.as_deref())?;
    apply_run(&mut cfg, &a)?;
    let run = report::run(&cfg)?;
    emit(
        &cfg,
        &Report {
            runs: vec![run],
            ratios: vec![],
        },
        a.format,
        a.common.out.as_deref(),
    )
}

fn compare(a: RunArgs, rowclone: Option<PathBuf>, zi: Option<PathBuf>) -> Result<(), Failure> {
    let mut base = load_config(a.common.config.as_deref())?;
    apply_run(&mut base, &a)?;
    let mut configs = report::standard_variants(&base);
    for (i, path) in [(1, rowclone), (2, zi)] {
        if let Some(p) = path {
            let mut c = load_config(Some(&p))?;
            apply_workload(&mut c, &a);
            c.validate().map_err(|e| config_error(e.to_string()))?;
            if i < configs.len() {
                configs[i] = c;
            } else {
                configs.push(c);
            }
        }
    }
    let rep = report::compare(&configs)?;
    emit(&base, &rep, a.format, a.common.out.as_deref())
}

fn sweep(a: RunArgs) -> Result<(), Failure> {
    let mut cfg = load_config(a.common.config.as_deref())?;
    apply_run(&mut cfg, &a)?;
    let points = cfg
        .sweep_points()
        .map_err(|e| config_error(e.to_string()))?;
    let results: Vec<Result<SweepEntry, RunError>> = points
        .into_par_iter()
        .map(|point| {
            let run = report::run(&point.config)?;
            Ok(SweepEntry {
                point,
                report: Report {
                    runs: vec![run],
                    ratios: vec![],
                },
            })
        })
        .collect();
    let entries = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let text = match a.format {
        Format::Json => report::to_json(&entries),
        Format::Csv => report::sweep_csv(&entries),
        Format::Table => report::render_sweep_table(&entries),
    };
    write_output(a.common.out.as_deref(), &text)
}

fn gen_trace(
    common: CommonArgs,
    workload: Option<Generator>,
    pages: Option<u64>,
    write_fraction: Option<f64>,
    reads: Option<u64>,
    stride: Option<u64>,
) -> Result<(), Failure> {
    let mut cfg = load_config(common.config.as_deref())?;
    apply_common(&mut cfg, &common);
    let generator = match (workload, cfg.workload.kind) {
        (Some(g), _) => g,
        (None, WorkloadKind::Bulkzero) => Generator::Bulkzero,
        (None, _) => Generator::Forkbench,
    };
    let map = cfg.address_map();
    let records = match generator {
        Generator::Forkbench => {
            let mut p = cfg.workload.forkbench;
            p.num_pages = pages.unwrap_or(p.num_pages);
            p.write_fraction = write_fraction.unwrap_or(p.write_fraction);
            p.interleaved_reads = reads.unwrap_or(p.interleaved_reads);
            p.validate().map_err(|e| config_error(e.to_string()))?;
            gen_forkbench(&p, cfg.seed, &map)
        }
        Generator::Bulkzero => {
            let b = cfg.workload.bulkzero;
            gen_bulkzero(pages.unwrap_or(b.pages), stride.unwrap_or(b.stride), &map)
                .map_err(|e| config_error(e.to_string()))?
        }
    };
    write_output(common.out.as_deref(), &serialize_trace(&records))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Compare {
            run,
            rowclone_config,
            zi_config,
        } => compare(run, rowclone_config, zi_config),
        Command::GenTrace {
            common,
            workload,
            pages,
            write_fraction,
            reads,
            stride,
        } => gen_trace(common, workload, pages, write_fraction, reads, stride),
        Command::ValidateConfig { config } => {
            load_config(Some(&config)).map(|_| println!("{}: ok", config.display()))
        }
        Command::Sweep(a) => sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("rowclone-sim: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
