use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::stats::{mean, sample_std};
use super::RunRecord;
use crate::llm::ActionKind;

const KINDS: usize = ActionKind::ALL.len();

fn kind_index(kind: ActionKind) -> usize {
    ActionKind::ALL.iter().position(|k| *k == kind).expect("kind is listed")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SummaryStats {
    pub n: usize,
    pub mean_time: f64,
    /// Sample standard deviation; `None` when `n < 2`.
    pub std_time: Option<f64>,
    pub mean_steps: f64,
    pub std_steps: Option<f64>,
}

impl SummaryStats {
    fn of(records: &[&RunRecord]) -> Self {
        let times: Vec<f64> = records.iter().map(|r| r.duration_seconds).collect();
        let steps: Vec<f64> = records.iter().map(|r| r.step_count as f64).collect();
        Self {
            n: records.len(),
            mean_time: mean(&times).unwrap_or(f64::NAN),
            std_time: sample_std(&times),
            mean_steps: mean(&steps).unwrap_or(f64::NAN),
            std_steps: sample_std(&steps),
        }
    }
}

pub fn summarize_by<K: Ord>(records: &[RunRecord], key: impl Fn(&RunRecord) -> K) -> BTreeMap<K, SummaryStats> {
    let mut groups: BTreeMap<K, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(key(r)).or_default().push(r);
    }
    groups.into_iter().map(|(k, g)| (k, SummaryStats::of(&g))).collect()
}

/// Per-dataset time and step statistics.
pub fn summarize(records: &[RunRecord]) -> BTreeMap<String, SummaryStats> {
    summarize_by(records, |r| r.dataset_name.clone())
}

/// Groups named `dataset-language`, e.g. `DBpedia-es`.
pub fn summarize_by_dataset_language(records: &[RunRecord]) -> BTreeMap<String, SummaryStats> {
    summarize_by(records, |r| format!("{}-{}", r.dataset_name, r.language))
}

/// `counts[i][k]`: runs whose action at step `i + 1` was `ActionKind::ALL[k]`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyTable {
    pub counts: Vec<[u64; KINDS]>,
}

impl FrequencyTable {
    /// `step` is 1-based.
    pub fn get(&self, step: usize, kind: ActionKind) -> u64 {
        step.checked_sub(1)
            .and_then(|i| self.counts.get(i))
            .map_or(0, |row| row[kind_index(kind)])
    }

    pub fn steps(&self) -> usize {
        self.counts.len()
    }
}

pub fn action_frequency_by_step(records: &[RunRecord]) -> FrequencyTable {
    let mut table = FrequencyTable::default();
    for r in records {
        for (i, kind) in r.actions.iter().enumerate() {
            if table.counts.len() <= i {
                table.counts.resize(i + 1, [0; KINDS]);
            }
            table.counts[i][kind_index(*kind)] += 1;
        }
    }
    table
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("category map does not cover action {0}")]
pub struct CategoryMapError(pub ActionKind);

/// Assigns every action kind to a named category.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryMap {
    categories: Vec<String>,
    of_kind: [usize; KINDS],
}

impl CategoryMap {
    /// Categories are ordered by their first kind in [`ActionKind::ALL`].
    pub fn new(map: &BTreeMap<ActionKind, String>) -> Result<Self, CategoryMapError> {
        let mut categories: Vec<String> = Vec::new();
        let mut of_kind = [0; KINDS];
        for (i, kind) in ActionKind::ALL.into_iter().enumerate() {
            let name = map.get(&kind).ok_or(CategoryMapError(kind))?;
            of_kind[i] = match categories.iter().position(|c| c == name) {
                Some(p) => p,
                None => {
                    categories.push(name.clone());
                    categories.len() - 1
                }
            };
        }
        Ok(Self { categories, of_kind })
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn category_of(&self, kind: ActionKind) -> &str {
        &self.categories[self.of_kind[kind_index(kind)]]
    }
}

impl Default for CategoryMap {
    /// search, inspect, execute and stop.
    fn default() -> Self {
        use ActionKind::*;
        let map = [
            (SearchEntityByLabel, "search"),
            (SearchPropertyByLabel, "search"),
            (SearchClassByLabel, "search"),
            (GetKnowledgegraphEntry, "inspect"),
            (GetPropertyExamples, "inspect"),
            (ExecuteSparql, "execute"),
            (Stop, "stop"),
        ]
        .into_iter()
        .map(|(k, c)| (k, c.to_string()))
        .collect();
        let mut m = Self::new(&map).expect("default map is total");
        // Fixed presentation order independent of the enum order.
        let order = ["search", "inspect", "execute", "stop"];
        let remap: Vec<usize> = m
            .categories
            .iter()
            .map(|c| order.iter().position(|o| o == c).expect("known category"))
            .collect();
        for slot in &mut m.of_kind {
            *slot = remap[*slot];
        }
        m.categories = order.iter().map(|s| s.to_string()).collect();
        m
    }
}

/// `values[i][c]`: actions of category `categories[c]` taken at step
/// indices `1..=i + 1`, summed over all runs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CumulativeTable {
    pub categories: Vec<String>,
    pub values: Vec<Vec<u64>>,
}

impl CumulativeTable {
    pub fn get(&self, step: usize, category: &str) -> u64 {
        let Some(c) = self.categories.iter().position(|x| x == category) else {
            return 0;
        };
        match step {
            0 => 0,
            s => self
                .values
                .get(s - 1)
                .or(self.values.last())
                .map_or(0, |row| row[c]),
        }
    }
}

pub fn cumulative_by_category(records: &[RunRecord], categories: &CategoryMap) -> CumulativeTable {
    let freq = action_frequency_by_step(records);
    let width = categories.categories.len();
    let mut running = vec![0u64; width];
    let mut values = Vec::with_capacity(freq.steps());
    for row in &freq.counts {
        for (k, count) in row.iter().enumerate() {
            running[categories.of_kind[k]] += count;
        }
        values.push(running.clone());
    }
    CumulativeTable {
        categories: categories.categories.clone(),
        values,
    }
}

/// Counts of adjacent action pairs within runs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    pub counts: [[u64; KINDS]; KINDS],
}

impl TransitionMatrix {
    pub fn count(&self, prev: ActionKind, next: ActionKind) -> u64 {
        self.counts[kind_index(prev)][kind_index(next)]
    }

    pub fn row_total(&self, prev: ActionKind) -> u64 {
        self.counts[kind_index(prev)].iter().sum()
    }

    /// Share of `prev`'s successors that were `next`; `None` when `prev`
    /// was never followed by anything.
    pub fn ratio(&self, prev: ActionKind, next: ActionKind) -> Option<f64> {
        match self.row_total(prev) {
            0 => None,
            total => Some(self.count(prev, next) as f64 / total as f64),
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

pub fn transition_counts(records: &[RunRecord]) -> TransitionMatrix {
    let mut m = TransitionMatrix::default();
    for r in records {
        for pair in r.actions.windows(2) {
            m.counts[kind_index(pair[0])][kind_index(pair[1])] += 1;
        }
    }
    m
}
