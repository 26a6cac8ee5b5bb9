//! Running configurations and rendering their results.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::config::{SimConfig, SweepPoint, WorkloadKind};
use crate::controller::{Features, OpClass, SimStats};
use crate::dram::{check_commands, ConfigError};
use crate::energy::{account, EnergyLedger};
use crate::system::{System, SystemError, SystemStats};
use crate::time::Time;
use crate::workloads::{assign_times, gen_bulkzero, gen_forkbench, parse_trace, TraceRecord};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("incompatible_configs: configurations differ in {}", .0.join(", "))]
    IncompatibleConfigs(Vec<&'static str>),
    #[error("trace error: {0}")]
    Trace(String),
    #[error("internal invariant failure: {0}")]
    Internal(String),
}

impl RunError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::IncompatibleConfigs(_) => 1,
            RunError::Trace(_) => 2,
            RunError::Internal(_) => 3,
        }
    }
}

/// Results of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub label: String,
    pub features: Features,
    pub seed: u64,
    pub energy: EnergyLedger,
    /// Dynamic energy of each class's commands.
    pub class_energy: BTreeMap<OpClass, EnergyLedger>,
    pub system: SystemStats,
    /// Commands re-checked by the independent timing checker.
    pub commands_checked: usize,
    pub stats: SimStats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioRow {
    pub class: OpClass,
    pub baseline_latency_ns: Option<f64>,
    pub other_latency_ns: Option<f64>,
    pub latency_reduction: Option<f64>,
    pub baseline_energy_nj: Option<f64>,
    pub other_energy_nj: Option<f64>,
    pub energy_reduction: Option<f64>,
}

/// Per-class reductions of `other` relative to `baseline`, as quotients of
/// total latency and total dynamic energy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioTable {
    pub baseline: String,
    pub other: String,
    pub rows: Vec<RatioRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub runs: Vec<RunReport>,
    pub ratios: Vec<RatioTable>,
}

/// Workload records of a configuration.
pub fn load_workload(cfg: &SimConfig) -> Result<Vec<TraceRecord>, RunError> {
    let map = cfg.address_map();
    match cfg.workload.kind {
        WorkloadKind::Trace => {
            let path = cfg
                .workload
                .trace
                .as_ref()
                .expect("validated configuration");
            let text = std::fs::read_to_string(path)
                .map_err(|e| RunError::Trace(format!("cannot read {}: {e}", path.display())))?;
            parse_trace(&text, cfg.geometry.cacheline_bytes)
                .map_err(|e| RunError::Trace(format!("{}: {e}", path.display())))
        }
        WorkloadKind::Forkbench => Ok(gen_forkbench(&cfg.workload.forkbench, cfg.seed, &map)),
        WorkloadKind::Bulkzero => Ok(gen_bulkzero(
            cfg.workload.bulkzero.pages,
            cfg.workload.bulkzero.stride,
            &map,
        )?),
    }
}

/// Builds the system for `cfg` and feeds it `records`.
pub fn simulate_records(cfg: &SimConfig, records: &[TraceRecord]) -> Result<System, RunError> {
    let mut sys = System::new(
        cfg.address_map(),
        cfg.timing,
        cfg.features,
        cfg.scheduling_policy,
        cfg.cache,
    );
    for (i, (t, op)) in assign_times(records, cfg.workload.inter_arrival_ns)
        .into_iter()
        .enumerate()
    {
        sys.execute(t, &op).map_err(|e| match e {
            SystemError::Internal(m) => RunError::Internal(m),
            e => RunError::Trace(format!("record {} ({}): {e}", i + 1, records[i])),
        })?;
    }
    sys.finish()
        .map_err(|e| RunError::Internal(e.to_string()))?;
    sys.check_invariants().map_err(RunError::Internal)?;
    Ok(sys)
}

/// Re-checks the timeline, accounts energy and assembles the report.
pub fn report_system(cfg: &SimConfig, sys: System) -> Result<RunReport, RunError> {
    let dram_cfg = *sys.controller().dram_config();
    let (timeline, stats, _, system) = sys.into_parts();
    let commands = timeline.commands();
    if let Some(v) = check_commands(&dram_cfg, &commands).first() {
        return Err(RunError::Internal(format!(
            "timing checker rejected command {} ({}): {:?}",
            v.index, v.command.kind, v.kind
        )));
    }
    let mut class_energy: BTreeMap<OpClass, EnergyLedger> = BTreeMap::new();
    for r in &stats.requests {
        let e = EnergyLedger::from_counts(&r.commands, Time::ZERO, &cfg.power);
        let slot = class_energy.entry(r.class).or_default();
        *slot = *slot + e;
    }
    Ok(RunReport {
        label: cfg.label(),
        features: cfg.features,
        seed: cfg.seed,
        energy: account(&timeline, &cfg.power),
        class_energy,
        system,
        commands_checked: commands.len(),
        stats,
    })
}

pub fn run(cfg: &SimConfig) -> Result<RunReport, RunError> {
    let records = load_workload(cfg)?;
    report_system(cfg, simulate_records(cfg, &records)?)
}

fn quotient(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(a), Some(b)) if a > 0.0 && b > 0.0 => Some(a / b),
        _ => None,
    }
}

pub fn ratio_table(baseline: &RunReport, other: &RunReport) -> RatioTable {
    let classes: BTreeSet<OpClass> = baseline
        .stats
        .per_class
        .keys()
        .chain(other.stats.per_class.keys())
        .copied()
        .collect();
    let latency = |r: &RunReport, c| r.stats.per_class.get(&c).map(|s| s.total_latency.as_ns());
    let energy = |r: &RunReport, c| r.class_energy.get(&c).map(|e| e.total);
    let rows = classes
        .into_iter()
        .map(|c| {
            let (bl, ol) = (latency(baseline, c), latency(other, c));
            let (be, oe) = (energy(baseline, c), energy(other, c));
            RatioRow {
                class: c,
                baseline_latency_ns: bl,
                other_latency_ns: ol,
                latency_reduction: quotient(bl, ol),
                baseline_energy_nj: be,
                other_energy_nj: oe,
                energy_reduction: quotient(be, oe),
            }
        })
        .collect();
    RatioTable {
        baseline: baseline.label.clone(),
        other: other.label.clone(),
        rows,
    }
}

/// Runs every configuration and tabulates each against the first.
pub fn compare(configs: &[SimConfig]) -> Result<Report, RunError> {
    let base = configs
        .first()
        .ok_or_else(|| RunError::Config(ConfigError::new("config", "nothing to compare")))?;
    for c in &configs[1..] {
        let d = base.differences(c);
        if !d.is_empty() {
            return Err(RunError::IncompatibleConfigs(d));
        }
    }
    let records = load_workload(base)?;
    let runs = configs
        .iter()
        .map(|c| report_system(c, simulate_records(c, &records)?))
        .collect::<Result<Vec<_>, _>>()?;
    let ratios = runs[1..].iter().map(|r| ratio_table(&runs[0], r)).collect();
    Ok(Report { runs, ratios })
}

/// Baseline, RowClone and (with a cache) RowClone-ZI variants of `cfg`.
pub fn standard_variants(cfg: &SimConfig) -> Vec<SimConfig> {
    let mut v = vec![
        cfg.with_features(Features::BASELINE),
        cfg.with_features(Features::ROWCLONE),
    ];
    if cfg.cache.enabled {
        v.push(cfg.with_features(Features::ROWCLONE_ZI));
    }
    v
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepEntry {
    #[serde(flatten)]
    pub point: SweepPoint,
    pub report: Report,
}

pub fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

/// One CSV row per request of every run.
pub fn latencies_csv(report: &Report) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "config",
        "id",
        "kind",
        "class",
        "mechanism",
        "arrival_ns",
        "start_ns",
        "end_ns",
        "latency_ns",
        "channel_bytes",
    ])
    .expect("in-memory write");
    for run in &report.runs {
        for r in &run.stats.requests {
            w.write_record([
                run.label.clone(),
                r.id.to_string(),
                r.kind.to_string(),
                r.class.to_string(),
                r.mechanism.map_or(String::new(), |m| m.to_string()),
                r.arrival.as_ns().to_string(),
                r.start.as_ns().to_string(),
                r.end.as_ns().to_string(),
                r.latency.as_ns().to_string(),
                r.channel_bytes.to_string(),
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV is UTF-8")
}

/// Left-aligned first column, right-aligned others.
fn aligned(headers: &[String], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let line = |cells: &[String], out: &mut String| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&width)
            .enumerate()
            .map(|(i, (c, w))| {
                if i == 0 {
                    format!("{c:<w$}")
                } else {
                    format!("{c:>w$}")
                }
            })
            .collect();
        out.push_str(parts.join("  ").trim_end());
        out.push('\n');
    };
    line(headers, &mut out);
    let rule: Vec<String> = width.iter().map(|w| "-".repeat(*w)).collect();
    line(&rule, &mut out);
    for r in rows {
        line(r, &mut out);
    }
    out
}

fn num(v: Option<f64>, suffix: &str) -> String {
    v.map_or("-".to_string(), |x| format!("{x:.3}{suffix}"))
}

/// Human-readable tables: a per-class summary of each run, then the ratio tables.
pub fn render_table(report: &Report) -> String {
    let mut out = String::new();
    for run in &report.runs {
        writeln!(
            out,
            "{}: {} requests, {} channel bytes, {:.3} nJ, makespan {:.3} ns",
            run.label,
            run.stats.requests.len(),
            run.stats.channel_bytes,
            run.energy.total,
            run.stats.makespan.as_ns()
        )
        .expect("writing to a String");
        let headers: Vec<String> = [
            "class",
            "count",
            "total latency (ns)",
            "mean latency (ns)",
            "channel bytes",
            "energy (nJ)",
        ]
        .map(String::from)
        .to_vec();
        let rows: Vec<Vec<String>> = run
            .stats
            .per_class
            .iter()
            .map(|(c, s)| {
                vec![
                    c.to_string(),
                    s.count.to_string(),
                    num(Some(s.total_latency.as_ns()), ""),
                    num(Some(s.mean_latency_ns), ""),
                    s.channel_bytes.to_string(),
                    num(run.class_energy.get(c).map(|e| e.total), ""),
                ]
            })
            .collect();
        out.push_str(&aligned(&headers, &rows));
        out.push('\n');
    }
    for t in &report.ratios {
        writeln!(out, "{} vs {}", t.baseline, t.other).expect("writing to a String");
        let headers: Vec<String> = vec![
            "class".into(),
            format!("{} latency (ns)", t.baseline),
            format!("{} latency (ns)", t.other),
            "latency reduction".into(),
            format!("{} energy (nJ)", t.baseline),
            format!("{} energy (nJ)", t.other),
            "energy reduction".into(),
        ];
        let rows: Vec<Vec<String>> = t
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.class.to_string(),
                    num(r.baseline_latency_ns, ""),
                    num(r.other_latency_ns, ""),
                    num(r.latency_reduction, "x"),
                    num(r.baseline_energy_nj, ""),
                    num(r.other_energy_nj, ""),
                    num(r.energy_reduction, "x"),
                ]
            })
            .collect();
        out.push_str(&aligned(&headers, &rows));
        out.push('\n');
    }
    out
}

fn assignment_text(e: &SweepEntry) -> String {
    e.point
        .assignments
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn sweep_summary(entries: &[SweepEntry]) -> (Vec<String>, Vec<Vec<String>>) {
    let headers = [
        "point",
        "parameters",
        "config",
        "requests",
        "makespan (ns)",
        "channel bytes",
        "energy (nJ)",
    ]
    .map(String::from)
    .to_vec();
    let rows = entries
        .iter()
        .flat_map(|e| {
            e.report.runs.iter().map(move |r| {
                vec![
                    e.point.index.to_string(),
                    assignment_text(e),
                    r.label.clone(),
                    r.stats.requests.len().to_string(),
                    num(Some(r.stats.makespan.as_ns()), ""),
                    r.stats.channel_bytes.to_string(),
                    num(Some(r.energy.total), ""),
                ]
            })
        })
        .collect();
    (headers, rows)
}

/// One summary row per sweep point.
pub fn sweep_csv(entries: &[SweepEntry]) -> String {
    let (headers, rows) = sweep_summary(entries);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&headers).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV is UTF-8")
}

pub fn render_sweep_table(entries: &[SweepEntry]) -> String {
    let (headers, rows) = sweep_summary(entries);
    aligned(&headers, &rows)
}
