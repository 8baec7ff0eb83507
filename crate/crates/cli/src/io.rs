//! On-disk artifacts: counts CSV with an embedded config echo, and JSON files.

use std::fmt::Write as _;
use std::path::Path;

use hyperent::counts::CountRecord;
use hyperent::state::Dof;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

pub const COUNTS_FILE: &str = "counts.csv";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const RECONSTRUCTION_FILE: &str = "reconstruction.json";
pub const METRICS_FILE: &str = "metrics.json";
pub const VISIBILITY_FILE: &str = "visibility.json";

const ECHO_PREFIX: &str = "#| ";

fn echo_lines(config: &ExperimentConfig, title: &str) -> String {
    let mut out = format!("# {title}\n# config echo (TOML):\n");
    for line in config.to_toml().lines() {
        out.push_str(ECHO_PREFIX);
        out.push_str(line);
        out.push('\n');
    }
    out
}

fn record_fields(r: &CountRecord) -> [String; 6] {
    [
        r.setting_label.clone(),
        r.outcome_label.clone(),
        r.integration_time_s.to_string(),
        r.expected_rate.to_string(),
        r.coincidences.to_string(),
        r.accidentals.to_string(),
    ]
}

const COUNT_COLUMNS: [&str; 6] = [
    "setting_label",
    "outcome_label",
    "t_s",
    "expected_rate_hz",
    "counts",
    "accidentals",
];

fn csv_text(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

pub fn counts_csv(config: &ExperimentConfig, records: &[CountRecord]) -> String {
    let mut out = echo_lines(config, "hyperent coincidence counts");
    out.push_str(&csv_text(
        &COUNT_COLUMNS,
        records.iter().map(|r| record_fields(r).to_vec()),
    ));
    out
}

/// One point of a phase sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub dof: Dof,
    pub phase_rad: f64,
    pub record: CountRecord,
}

pub fn sweep_csv(config: &ExperimentConfig, rows: &[SweepRow]) -> String {
    let mut out = echo_lines(config, "hyperent phase sweep");
    let mut header = vec!["dof", "phase_rad"];
    header.extend(COUNT_COLUMNS);
    out.push_str(&csv_text(
        &header,
        rows.iter().map(|r| {
            let mut v = vec![r.dof.tag().to_string(), r.phase_rad.to_string()];
            v.extend(record_fields(&r.record));
            v
        }),
    ));
    out
}

/// Config echo embedded in a CSV artifact.
pub fn echoed_config(text: &str) -> Result<ExperimentConfig> {
    let mut toml = String::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix(ECHO_PREFIX) {
            let _ = writeln!(toml, "{rest}");
        } else if line.trim_end() == ECHO_PREFIX.trim_end() {
            toml.push('\n');
        }
    }
    if toml.is_empty() {
        return Err(CliError::Incomplete("file carries no config echo".into()));
    }
    ExperimentConfig::from_toml(&toml)
}

fn parse_rows<T: DeserializeOwned>(text: &str) -> Result<Vec<T>> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    r.deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| CliError::Incomplete(format!("malformed CSV row: {e}")))
}

pub fn parse_counts(text: &str) -> Result<Vec<CountRecord>> {
    parse_rows(text)
}

pub fn parse_sweep(text: &str) -> Result<Vec<SweepRow>> {
    #[derive(Deserialize)]
    struct Flat {
        dof: Dof,
        phase_rad: f64,
        setting_label: String,
        outcome_label: String,
        t_s: f64,
        expected_rate_hz: f64,
        counts: f64,
        accidentals: f64,
    }
    let flat: Vec<Flat> = parse_rows(text)?;
    Ok(flat
        .into_iter()
        .map(|f| SweepRow {
            dof: f.dof,
            phase_rad: f.phase_rad,
            record: CountRecord {
                setting_label: f.setting_label,
                outcome_label: f.outcome_label,
                integration_time_s: f.t_s,
                expected_rate: f.expected_rate_hz,
                coincidences: f.counts,
                accidentals: f.accidentals,
            },
        })
        .collect())
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn json_text<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable artifact");
    s.push('\n');
    s
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Incomplete(format!("{}: {e}", path.display())))
}

/// Plain matrix CSV, one row per line.
pub fn matrix_csv(rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}
