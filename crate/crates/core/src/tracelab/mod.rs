//! Run logging and the statistics computed over agent traces.

mod analytics;
mod report;
mod stats;

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::llm::ActionKind;

pub use analytics::{
    action_frequency_by_step, cumulative_by_category, summarize, summarize_by, summarize_by_dataset_language,
    transition_counts, CategoryMap, CategoryMapError, CumulativeTable, FrequencyTable, SummaryStats,
    TransitionMatrix,
};
pub use report::{build_report, emit_report, load_report, Report, ReportError, ReportFormat, SummaryRow};
pub use stats::{
    ln_gamma, mean, regularized_incomplete_beta, sample_std, student_t_two_tailed_p, welch_t_test, DegenerateInput,
    GroupStats, TestResult,
};

pub const RUN_RECORD_SCHEMA_VERSION: u32 = 1;

/// How a run's final query was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Origin {
    Stop,
    FallbackExtraction,
}

/// One finished agent run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunRecord {
    pub schema_version: u32,
    pub run_id: String,
    pub dataset_name: String,
    pub question: String,
    pub language: String,
    pub actions: Vec<ActionKind>,
    pub duration_seconds: f64,
    pub step_count: usize,
    pub origin: Origin,
    /// Empty when no query could be produced.
    pub final_query: String,
}

impl RunRecord {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        run_id: impl Into<String>,
        dataset_name: impl Into<String>,
        question: impl Into<String>,
        language: impl Into<String>,
        actions: Vec<ActionKind>,
        duration_seconds: f64,
        origin: Origin,
        final_query: impl Into<String>,
    ) -> Self {
        Self {
            schema_version: RUN_RECORD_SCHEMA_VERSION,
            run_id: run_id.into(),
            dataset_name: dataset_name.into(),
            question: question.into(),
            language: language.into(),
            step_count: actions.len(),
            actions,
            duration_seconds,
            origin,
            final_query: final_query.into(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.step_count != self.actions.len() {
            return Err(format!(
                "stepCount {} does not match {} actions",
                self.step_count,
                self.actions.len()
            ));
        }
        if !(self.duration_seconds.is_finite() && self.duration_seconds > 0.0) {
            return Err(format!("durationSeconds must be positive, got {}", self.duration_seconds));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("run log I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("invalid run record: {0}")]
    Invalid(String),
}

/// Append-only JSON-lines run log. Appends from many threads are
/// serialized; each record is written with a single `write` call.
#[derive(Debug)]
pub struct RunLog {
    path: PathBuf,
    lock: Mutex<()>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LoadedLog {
    pub records: Vec<RunRecord>,
    pub warnings: Vec<String>,
}

impl RunLog {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            lock: Mutex::new(()),
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, record: &RunRecord) -> Result<(), LogError> {
        record.validate().map_err(LogError::Invalid)?;
        let mut line = serde_json::to_vec(record).map_err(|e| LogError::Invalid(e.to_string()))?;
        line.push(b'\n');
        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(parent) = self.path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        let mut file = OpenOptions::new().create(true).append(true).open(&self.path)?;
        file.write_all(&line)?;
        file.flush()?;
        Ok(())
    }

    /// Reads every record. Lines that do not parse (typically a final line
    /// cut short by a crash) are skipped and reported as warnings.
    pub fn load(path: &Path) -> Result<LoadedLog, LogError> {
        let mut out = LoadedLog::default();
        let reader = BufReader::new(File::open(path)?);
        for (i, line) in reader.split(b'\n').enumerate() {
            let line = line?;
            if line.iter().all(u8::is_ascii_whitespace) {
                continue;
            }
            match serde_json::from_slice::<RunRecord>(&line) {
                Ok(r) if r.schema_version != RUN_RECORD_SCHEMA_VERSION => out.warnings.push(format!(
                    "line {}: unsupported schema version {}, skipped",
                    i + 1,
                    r.schema_version
                )),
                Ok(r) => out.records.push(r),
                Err(e) => out.warnings.push(format!("line {}: unreadable record skipped ({e})", i + 1)),
            }
        }
        for w in &out.warnings {
            tracing::warn!(path = %path.display(), "{w}");
        }
        Ok(out)
    }
}
