//! Result files and their manifest.
//!
//! | file | rows |
//! |---|---|
//! | `sessions.csv` | one per session: status, profits, CI, price extremes and strategies per firm |
//! | `per_signal.csv` | one per (session, reference-firm signal) |
//! | `per_state.csv` | one per (session, state), with per-firm shares |
//! | `welfare.csv` | one per session |
//! | `correlations.csv` | `k x k` Pearson block of per-signal CIs, `NA` where undefined |
//! | `summary.json` | benchmarks and aggregates |
//! | `trace_<session>.csv` | sampled learning dynamics |
//! | `events_<session>.csv` | detected events (single-state markets) |
//! | `manifest.json` | config, seed, version, timestamp and a SHA-256 per file |
//!
//! Strategies are written as `;`-separated grid indices, one per signal.
//! Numbers use the shortest decimal that round-trips. `NA` marks an
//! undefined per-state CI or correlation; no other cell is ever empty.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{resolve, to_document, ConfigDocument, ConfigError};
use crate::harness::sweep::Scale;
use crate::harness::{ExperimentConfig, ExperimentSummary, HarnessError, SessionSeed, Trace};
use crate::metrics::{aggregate, score_session, MetricsError, SessionRecord};
use crate::note::{DiagnosticsTrace, EventSettings, NoteError};

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.json";
pub const NA: &str = "NA";

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Note(#[from] NoteError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunManifest {
    pub schema_version: u32,
    pub engine_version: String,
    pub config: ConfigDocument,
    pub master_seed: u64,
    #[serde(default)]
    pub preset: Option<String>,
    pub coordinates: Vec<(String, f64)>,
    pub created: String,
    pub files: Vec<FileEntry>,
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| NA.to_string(), num)
}

fn strategy(actions: &[usize]) -> String {
    actions.iter().map(usize::to_string).collect::<Vec<_>>().join(";")
}

struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    fn new(header: &[String]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).expect("in-memory write");
        Self { writer }
    }

    fn row(&mut self, cells: &[String]) {
        self.writer.write_record(cells).expect("in-memory write");
    }

    fn finish(self) -> Vec<u8> {
        self.writer.into_inner().expect("in-memory flush")
    }
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn sessions_table(records: &[SessionRecord]) -> Vec<u8> {
    let firms = records.first().map_or(0, |r| r.firm_profits.len());
    let mut header = strings(&["session", "converged", "periods", "industryProfit", "ci", "weightedCi"]);
    for i in 0..firms {
        for col in ["profit", "maxPrice", "minPrice", "strategy"] {
            header.push(format!("{col}{i}"));
        }
    }
    let mut t = Table::new(&header);
    for r in records {
        let mut row = vec![
            r.session.to_string(),
            r.converged.to_string(),
            r.periods.to_string(),
            num(r.industry_profit),
            num(r.ci),
            opt(r.weighted_ci),
        ];
        for i in 0..firms {
            row.push(num(r.firm_profits[i]));
            row.push(num(r.extremes[i].max));
            row.push(num(r.extremes[i].min));
            row.push(strategy(&r.strategies[i]));
        }
        t.row(&row);
    }
    t.finish()
}

fn per_signal_table(summary: &ExperimentSummary) -> Vec<u8> {
    let b = &summary.benchmarks;
    let mut t = Table::new(&strings(&["session", "signal", "probability", "profit", "nashProfit", "monopolyProfit", "ci"]));
    for r in &summary.records {
        for s in 0..r.signal_ci.len() {
            t.row(&[
                r.session.to_string(),
                s.to_string(),
                num(b.signal_probability[s]),
                num(r.signal_profit[s]),
                num(b.signal_nash[s]),
                num(b.signal_monopoly[s]),
                num(r.signal_ci[s]),
            ]);
        }
    }
    t.finish()
}

fn per_state_table(summary: &ExperimentSummary, wtp: &[f64]) -> Vec<u8> {
    let firms = summary.records.first().map_or(0, |r| r.firm_profits.len());
    let mut header = strings(&["session", "state", "wtp", "profit", "nashProfit", "monopolyProfit", "ci"]);
    header.extend((0..firms).map(|i| format!("share{i}")));
    let b = &summary.benchmarks;
    let mut t = Table::new(&header);
    for r in &summary.records {
        for (i, &v) in wtp.iter().enumerate() {
            let mut row = vec![
                r.session.to_string(),
                i.to_string(),
                num(v),
                num(r.state_profit[i]),
                num(b.state_nash[i]),
                num(b.state_monopoly[i]),
                opt(r.state_ci[i]),
            ];
            row.extend(r.division[i].iter().map(|&q| num(q)));
            t.row(&row);
        }
    }
    t.finish()
}

fn welfare_table(records: &[SessionRecord]) -> Vec<u8> {
    let mut t = Table::new(&strings(&["session", "industryProfit", "consumerSurplus", "socialWelfare"]));
    for r in records {
        t.row(&[
            r.session.to_string(),
            num(r.welfare.industry_profit),
            num(r.welfare.consumer_surplus),
            num(r.welfare.social_welfare),
        ]);
    }
    t.finish()
}

fn correlations_table(summary: &ExperimentSummary) -> Vec<u8> {
    let k = summary.benchmarks.signal_probability.len();
    let mut header = vec!["signal".to_string()];
    header.extend((0..k).map(|s| format!("s{s}")));
    let mut t = Table::new(&header);
    for i in 0..k {
        let mut row = vec![format!("s{i}")];
        row.extend((0..k).map(|j| opt(summary.aggregates.correlations.as_ref().and_then(|m| m.get(i, j)))));
        t.row(&row);
    }
    t.finish()
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct SummaryFile<'a> {
    schema_version: u32,
    benchmarks: &'a crate::market::Benchmarks,
    aggregates: &'a crate::metrics::Aggregates,
}

/// The deterministic metric files of a summary, in manifest order.
pub fn render_metrics(summary: &ExperimentSummary) -> Result<Vec<(String, Vec<u8>)>, OutputError> {
    let market = summary.config.session.market.build()?;
    let wtp = market.info().states().values().to_vec();
    let mut summary_json = serde_json::to_vec_pretty(&SummaryFile {
        schema_version: SCHEMA_VERSION,
        benchmarks: &summary.benchmarks,
        aggregates: &summary.aggregates,
    })
    .map_err(|e| OutputError::Format { path: "summary.json".into(), message: e.to_string() })?;
    summary_json.push(b'\n');
    Ok(vec![
        ("sessions.csv".into(), sessions_table(&summary.records)),
        ("per_signal.csv".into(), per_signal_table(summary)),
        ("per_state.csv".into(), per_state_table(summary, &wtp)),
        ("welfare.csv".into(), welfare_table(&summary.records)),
        ("correlations.csv".into(), correlations_table(summary)),
        ("summary.json".into(), summary_json),
    ])
}

pub fn trace_table(diag: &DiagnosticsTrace) -> Vec<u8> {
    let mut t = Table::new(&strings(&[
        "period",
        "firm",
        "chosenPrice",
        "greedyPrice",
        "maxQ",
        "sustainableLine",
        "stationaryLine",
    ]));
    for s in &diag.samples {
        for i in 0..s.chosen.len() {
            t.row(&[
                s.period.to_string(),
                i.to_string(),
                num(s.chosen[i]),
                num(s.greedy[i]),
                num(s.max_q[i]),
                num(s.sustainable[i]),
                num(s.stationary[i]),
            ]);
        }
    }
    t.finish()
}

pub fn events_table(diag: &DiagnosticsTrace) -> Vec<u8> {
    let mut t = Table::new(&strings(&["period", "eventType", "firm", "detail"]));
    for e in &diag.events {
        t.row(&[
            e.period.to_string(),
            e.kind.as_str().to_string(),
            e.firm.map_or_else(|| NA.to_string(), |f| f.to_string()),
            e.detail.clone(),
        ]);
    }
    t.finish()
}

fn trace_files(summary: &ExperimentSummary) -> Result<Vec<(String, Vec<u8>)>, OutputError> {
    let market = summary.config.session.market.build()?;
    let single_state = market.info().worlds().len() == 1;
    let lowest = market.grid(0, 0).price(0);
    let mut files = Vec::new();
    for (session, trace) in &summary.traces {
        let diag = diagnostics(trace, summary.config.session.delta, lowest, single_state)?;
        files.push((format!("trace_{session}.csv"), trace_table(&diag)));
        if single_state {
            files.push((format!("events_{session}.csv"), events_table(&diag)));
        }
    }
    Ok(files)
}

fn diagnostics(trace: &Trace, delta: f64, lowest: f64, events: bool) -> Result<DiagnosticsTrace, OutputError> {
    let diag = DiagnosticsTrace::from_trace(trace, delta, lowest);
    if events && diag.samples.len() >= 2 {
        return Ok(diag.with_events(&EventSettings::default())?);
    }
    Ok(diag)
}

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes every result file of `summary` into `dir` plus `manifest.json`.
pub fn emit_results(
    summary: &ExperimentSummary,
    dir: &Path,
    preset: Option<&str>,
    coordinates: &[(String, f64)],
) -> Result<RunManifest, OutputError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut files = render_metrics(summary)?;
    files.extend(trace_files(summary)?);
    let mut entries = Vec::with_capacity(files.len());
    for (name, bytes) in &files {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(io_err(&path))?;
        entries.push(FileEntry { name: name.clone(), bytes: bytes.len() as u64, sha256: digest(bytes) });
    }
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        engine_version: env!("CARGO_PKG_VERSION").to_string(),
        config: to_document(&summary.config),
        master_seed: summary.config.master_seed,
        preset: preset.map(str::to_string),
        coordinates: coordinates.to_vec(),
        created: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        files: entries,
    };
    let path = dir.join(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| OutputError::Format { path: path.clone(), message: e.to_string() })?;
    fs::write(&path, text + "\n").map_err(io_err(&path))?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest, OutputError> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|e| OutputError::Format { path, message: e.to_string() })
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: usize, name: &str, value: &str) -> Result<T, OutputError> {
    value.parse().map_err(|_| OutputError::Format {
        path: path.to_path_buf(),
        message: format!("row {line}: cannot parse {name} `{value}`"),
    })
}

/// Session index, status and strategies from a `sessions.csv`.
pub fn read_sessions(path: &Path) -> Result<Vec<(u64, bool, u64, Vec<Vec<usize>>)>, OutputError> {
    let fail = |message: String| OutputError::Format { path: path.to_path_buf(), message };
    let mut reader = csv::Reader::from_path(path).map_err(|e| fail(e.to_string()))?;
    let header = reader.headers().map_err(|e| fail(e.to_string()))?.clone();
    let col = |name: &str| header.iter().position(|h| h == name).ok_or_else(|| fail(format!("missing column {name}")));
    let (c_session, c_conv, c_periods) = (col("session")?, col("converged")?, col("periods")?);
    let strategy_cols: Vec<usize> = (0..)
        .map(|i| header.iter().position(|h| h == format!("strategy{i}")))
        .take_while(Option::is_some)
        .flatten()
        .collect();
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| fail(e.to_string()))?;
        let strategies = strategy_cols
            .iter()
            .map(|&c| {
                record[c]
                    .split(';')
                    .map(|a| parse_field(path, line + 2, "strategy", a))
                    .collect::<Result<Vec<usize>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push((
            parse_field(path, line + 2, "session", &record[c_session])?,
            parse_field(path, line + 2, "converged", &record[c_conv])?,
            parse_field(path, line + 2, "periods", &record[c_periods])?,
            strategies,
        ));
    }
    Ok(rows)
}

/// Recomputed metric file compared with the stored one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileCheck {
    pub name: String,
    pub identical: bool,
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub config: ExperimentConfig,
    pub summary: ExperimentSummary,
    pub checks: Vec<FileCheck>,
}

impl Analysis {
    pub fn all_identical(&self) -> bool {
        self.checks.iter().all(|c| c.identical)
    }
}

/// Re-scores the strategies stored in `dir` and compares every metric
/// file with its recomputation.
pub fn analyze(dir: &Path) -> Result<Analysis, OutputError> {
    let manifest = read_manifest(dir)?;
    let config = resolve(&manifest.config, Scale::Full)?;
    let market = config.session.market.build()?;
    let records = read_sessions(&dir.join("sessions.csv"))?
        .into_iter()
        .map(|(session, converged, periods, strategies)| {
            score_session(
                &market,
                SessionSeed::new(config.master_seed, session),
                converged,
                periods,
                strategies,
                config.ci_weight,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let aggregates = aggregate(&records, config.include_unconverged);
    let summary = ExperimentSummary {
        config: config.clone(),
        benchmarks: market.benchmarks().clone(),
        records,
        aggregates,
        traces: Vec::new(),
    };
    let mut checks = Vec::new();
    for (name, bytes) in render_metrics(&summary)? {
        let path = dir.join(&name);
        let stored = fs::read(&path).map_err(io_err(&path))?;
        checks.push(FileCheck { identical: stored == bytes, name });
    }
    Ok(Analysis { config, summary, checks })
}

/// Checks every manifest digest against the files on disk; returns the
/// names that differ.
pub fn verify_digests(dir: &Path) -> Result<Vec<String>, OutputError> {
    let manifest = read_manifest(dir)?;
    let mut bad = Vec::new();
    for entry in &manifest.files {
        let path = dir.join(&entry.name);
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        if digest(&bytes) != entry.sha256 {
            bad.push(entry.name.clone());
        }
    }
    Ok(bad)
}
