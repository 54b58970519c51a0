//! Plottable tables written as CSV or JSON.
//!
//! | file | columns |
//! |---|---|
//! | `summary` | dataset, language, n, mean_time_s, std_time_s, mean_steps, std_steps |
//! | `frequency` | step, then one count column per action kind |
//! | `cumulative` | step, then one running-total column per category |
//! | `transitions` | from, to, count, ratio (only pairs that occurred) |
//!
//! Undefined standard deviations (groups of one) are empty cells.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::analytics::{
    action_frequency_by_step, cumulative_by_category, summarize_by, transition_counts, CategoryMap, CumulativeTable,
    FrequencyTable, SummaryStats, TransitionMatrix,
};
use super::RunRecord;
use crate::llm::ActionKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub dataset: String,
    pub language: String,
    pub stats: SummaryStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub summary: Vec<SummaryRow>,
    pub frequency: FrequencyTable,
    pub cumulative: CumulativeTable,
    pub transitions: TransitionMatrix,
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("report I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed report table {file}: {message}")]
    Malformed { file: String, message: String },
}

pub fn build_report(records: &[RunRecord], categories: &CategoryMap) -> Report {
    let summary = summarize_by(records, |r| (r.dataset_name.clone(), r.language.clone()))
        .into_iter()
        .map(|((dataset, language), stats)| SummaryRow {
            dataset,
            language,
            stats,
        })
        .collect();
    Report {
        summary,
        frequency: action_frequency_by_step(records),
        cumulative: cumulative_by_category(records, categories),
        transitions: transition_counts(records),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the four tables into `dir` and returns their paths.
pub fn emit_report(
    records: &[RunRecord],
    categories: &CategoryMap,
    dir: &Path,
    format: ReportFormat,
) -> Result<Vec<PathBuf>, ReportError> {
    fs::create_dir_all(dir)?;
    let report = build_report(records, categories);
    let path = |name: &str| dir.join(format!("{name}.{}", format.extension()));
    let paths = ["summary", "frequency", "cumulative", "transitions"].map(path).to_vec();
    match format {
        ReportFormat::Json => {
            fs::write(&paths[0], serde_json::to_vec_pretty(&report.summary)?)?;
            fs::write(&paths[1], serde_json::to_vec_pretty(&report.frequency)?)?;
            fs::write(&paths[2], serde_json::to_vec_pretty(&report.cumulative)?)?;
            fs::write(&paths[3], serde_json::to_vec_pretty(&report.transitions)?)?;
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_path(&paths[0])?;
            w.write_record(["dataset", "language", "n", "mean_time_s", "std_time_s", "mean_steps", "std_steps"])?;
            for row in &report.summary {
                let s = &row.stats;
                w.write_record([
                    row.dataset.clone(),
                    row.language.clone(),
                    s.n.to_string(),
                    s.mean_time.to_string(),
                    opt(s.std_time),
                    s.mean_steps.to_string(),
                    opt(s.std_steps),
                ])?;
            }
            w.flush()?;

            let mut w = csv::Writer::from_path(&paths[1])?;
            w.write_record(std::iter::once("step").chain(ActionKind::ALL.iter().map(|k| k.as_str())))?;
            for (i, row) in report.frequency.counts.iter().enumerate() {
                w.write_record(std::iter::once(i + 1).chain(row.iter().map(|&c| c as usize)).map(|v| v.to_string()))?;
            }
            w.flush()?;

            let mut w = csv::Writer::from_path(&paths[2])?;
            w.write_record(std::iter::once("step").chain(report.cumulative.categories.iter().map(String::as_str)))?;
            for (i, row) in report.cumulative.values.iter().enumerate() {
                w.write_record(std::iter::once((i + 1) as u64).chain(row.iter().copied()).map(|v| v.to_string()))?;
            }
            w.flush()?;

            let mut w = csv::Writer::from_path(&paths[3])?;
            w.write_record(["from", "to", "count", "ratio"])?;
            for prev in ActionKind::ALL {
                for next in ActionKind::ALL {
                    let count = report.transitions.count(prev, next);
                    if count > 0 {
                        w.write_record([
                            prev.as_str().to_string(),
                            next.as_str().to_string(),
                            count.to_string(),
                            opt(report.transitions.ratio(prev, next)),
                        ])?;
                    }
                }
            }
            w.flush()?;
        }
    }
    Ok(paths)
}

fn malformed(file: &Path, message: impl Into<String>) -> ReportError {
    ReportError::Malformed {
        file: file.display().to_string(),
        message: message.into(),
    }
}

fn parse<T: std::str::FromStr>(file: &Path, cell: Option<&str>) -> Result<T, ReportError> {
    let cell = cell.ok_or_else(|| malformed(file, "missing column"))?;
    cell.parse().map_err(|_| malformed(file, format!("bad cell {cell:?}")))
}

fn parse_opt(file: &Path, cell: Option<&str>) -> Result<Option<f64>, ReportError> {
    match cell {
        Some("") => Ok(None),
        other => parse(file, other).map(Some),
    }
}

/// Reads tables written by [`emit_report`].
pub fn load_report(dir: &Path, format: ReportFormat) -> Result<Report, ReportError> {
    let path = |name: &str| dir.join(format!("{name}.{}", format.extension()));
    if format == ReportFormat::Json {
        return Ok(Report {
            summary: serde_json::from_slice(&fs::read(path("summary"))?)?,
            frequency: serde_json::from_slice(&fs::read(path("frequency"))?)?,
            cumulative: serde_json::from_slice(&fs::read(path("cumulative"))?)?,
            transitions: serde_json::from_slice(&fs::read(path("transitions"))?)?,
        });
    }

    let file = path("summary");
    let mut summary = Vec::new();
    for rec in csv::Reader::from_path(&file)?.records() {
        let rec = rec?;
        summary.push(SummaryRow {
            dataset: parse(&file, rec.get(0))?,
            language: parse(&file, rec.get(1))?,
            stats: SummaryStats {
                n: parse(&file, rec.get(2))?,
                mean_time: parse(&file, rec.get(3))?,
                std_time: parse_opt(&file, rec.get(4))?,
                mean_steps: parse(&file, rec.get(5))?,
                std_steps: parse_opt(&file, rec.get(6))?,
            },
        });
    }

    let file = path("frequency");
    let mut frequency = FrequencyTable::default();
    for rec in csv::Reader::from_path(&file)?.records() {
        let rec = rec?;
        let mut row = [0u64; ActionKind::ALL.len()];
        for (k, slot) in row.iter_mut().enumerate() {
            *slot = parse(&file, rec.get(k + 1))?;
        }
        frequency.counts.push(row);
    }

    let file = path("cumulative");
    let mut reader = csv::Reader::from_path(&file)?;
    let categories: Vec<String> = reader.headers()?.iter().skip(1).map(str::to_string).collect();
    let mut values = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        values.push(
            (1..=categories.len())
                .map(|c| parse(&file, rec.get(c)))
                .collect::<Result<Vec<u64>, _>>()?,
        );
    }

    let file = path("transitions");
    let mut transitions = TransitionMatrix::default();
    for rec in csv::Reader::from_path(&file)?.records() {
        let rec = rec?;
        let kind = |i: usize| -> Result<ActionKind, ReportError> { parse(&file, rec.get(i)) };
        let (prev, next) = (kind(0)?, kind(1)?);
        let p = ActionKind::ALL.iter().position(|k| *k == prev).expect("listed");
        let n = ActionKind::ALL.iter().position(|k| *k == next).expect("listed");
        transitions.counts[p][n] = parse(&file, rec.get(2))?;
    }

    Ok(Report {
        summary,
        frequency,
        cumulative: CumulativeTable { categories, values },
        transitions,
    })
}
