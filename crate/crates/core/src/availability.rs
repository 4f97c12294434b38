//! The core measurement pipeline: build the retrieval query for an item,
//! fetch the top-k passages, assign each retrieved passage to its most
//! similar option, and report per-option counts.
//!
//! Queries come in two flavours. An out-of-context query joins the options
//! in stored order with single spaces and contains no stem text; an
//! in-context query prepends the stem. The assignment step never sees the
//! query: each passage goes to the option with the highest cosine, ties to
//! the lowest option index.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::McqItem;
use crate::embedding::{cosine, EmbeddingError, EmbeddingProvider, EmbeddingVector};
use crate::jsonl;
use crate::vecindex::{IndexError, VectorIndex};

/// Whether the retrieval query includes the question stem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryMode {
    OutOfContext,
    InContext,
}

impl QueryMode {
    /// Stable lowercase name, used in file names and CLI output.
    pub fn slug(&self) -> &'static str {
        match self {
            QueryMode::OutOfContext => "out_of_context",
            QueryMode::InContext => "in_context",
        }
    }
}

impl std::fmt::Display for QueryMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.slug())
    }
}

/// How many passages to retrieve per item, and under which query mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AvailabilityConfig {
    pub k: usize,
    pub mode: QueryMode,
}

impl AvailabilityConfig {
    pub fn new(k: usize, mode: QueryMode) -> Result<Self, AvailabilityError> {
        if k == 0 {
            return Err(AvailabilityError::ZeroK);
        }
        Ok(Self { k, mode })
    }
}

/// Per-option retrieved-passage counts for one item under one (mode, k).
/// `sum(counts) == k_effective == min(k, corpus size)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AvailabilityProfile {
    pub item_id: String,
    pub counts: Vec<u32>,
    pub k_effective: u32,
}

impl AvailabilityProfile {
    /// Counts as proportions of k_effective.
    pub fn proportions(&self) -> Vec<f64> {
        self.counts
            .iter()
            .map(|c| *c as f64 / self.k_effective as f64)
            .collect()
    }
}

/// The line-delimited record format for profile files: item id, query mode,
/// requested k, and the per-option counts. `k_effective` is recovered as
/// the count sum on load.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileRecord {
    pub item_id: String,
    pub mode: QueryMode,
    pub k: usize,
    pub counts: Vec<u32>,
}

impl ProfileRecord {
    pub fn new(profile: &AvailabilityProfile, config: AvailabilityConfig) -> Self {
        Self {
            item_id: profile.item_id.clone(),
            mode: config.mode,
            k: config.k,
            counts: profile.counts.clone(),
        }
    }

    pub fn into_profile(self) -> AvailabilityProfile {
        let k_effective = self.counts.iter().sum();
        AvailabilityProfile {
            item_id: self.item_id,
            counts: self.counts,
            k_effective,
        }
    }
}

/// A per-item failure from a dataset run; successes are never dropped
/// because of a sibling's failure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ItemFailure {
    pub item_id: String,
    pub message: String,
}

/// The outcome of measuring a whole dataset: profiles for every item that
/// succeeded (in input order) plus the collected failures.
#[derive(Debug, Default)]
pub struct DatasetMeasurement {
    pub profiles: Vec<AvailabilityProfile>,
    pub failures: Vec<ItemFailure>,
}

#[derive(Debug, Error)]
pub enum AvailabilityError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("item {item_id:?}: {source}")]
    Embedding {
        item_id: String,
        source: EmbeddingError,
    },
    #[error("item {item_id:?}: {source}")]
    Index { item_id: String, source: IndexError },
    #[error("no option vectors to assign against")]
    NoOptions,
    #[error("passage vector dimension {passage} does not match option dimension {options}")]
    DimensionMismatch { passage: usize, options: usize },
    #[error("retrieved passage {0:?} missing from index")]
    MissingPassage(String),
}

/// Builds the retrieval query text for an item under the given mode.
pub fn build_query(item: &McqItem, mode: QueryMode) -> String {
    let joined = item.options.join(" ");
    match mode {
        QueryMode::OutOfContext => joined,
        QueryMode::InContext => format!("{} {}", item.stem, joined),
    }
}

/// Index of the option most similar to the passage vector; exact ties go
/// to the lowest index so the measurement never involves RNG.
pub fn assign_passage(
    passage_vec: &EmbeddingVector,
    option_vecs: &[EmbeddingVector],
) -> Result<usize, AvailabilityError> {
    if option_vecs.is_empty() {
        return Err(AvailabilityError::NoOptions);
    }
    let mut best_index = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (index, option_vec) in option_vecs.iter().enumerate() {
        let score =
            cosine(passage_vec, option_vec).map_err(|e| AvailabilityError::DimensionMismatch {
                passage: passage_vec.dimension(),
                options: match e {
                    EmbeddingError::DimensionMismatch { right, .. } => right,
                    _ => option_vec.dimension(),
                },
            })?;
        if score > best_score {
            best_score = score;
            best_index = index;
        }
    }
    Ok(best_index)
}

/// Runs the full pipeline for one item: embed the query, retrieve top-k,
/// embed each option separately, assign every retrieved passage, count.
pub fn measure_item(
    item: &McqItem,
    index: &VectorIndex,
    provider: &EmbeddingProvider,
    config: AvailabilityConfig,
) -> Result<AvailabilityProfile, AvailabilityError> {
    let attach_embed = |source| AvailabilityError::Embedding {
        item_id: item.id.clone(),
        source,
    };
    let attach_index = |source| AvailabilityError::Index {
        item_id: item.id.clone(),
        source,
    };

    let query_text = build_query(item, config.mode);
    let query_vec = provider.embed_one(&query_text).map_err(attach_embed)?;
    let hits = index.top_k(&query_vec, config.k).map_err(attach_index)?;

    let option_vecs = provider.embed_batch(&item.options).map_err(attach_embed)?;

    let mut counts = vec![0u32; item.options.len()];
    for hit in &hits {
        let passage_vec = index
            .vector(&hit.passage_id)
            .ok_or_else(|| AvailabilityError::MissingPassage(hit.passage_id.clone()))?;
        let assigned = assign_passage(passage_vec, &option_vecs)?;
        counts[assigned] += 1;
    }

    Ok(AvailabilityProfile {
        item_id: item.id.clone(),
        counts,
        k_effective: hits.len() as u32,
    })
}

/// Measures every item in parallel. Output profiles keep input order;
/// per-item failures are collected, never silently dropped.
pub fn measure_dataset(
    items: &[McqItem],
    index: &VectorIndex,
    provider: &EmbeddingProvider,
    config: AvailabilityConfig,
) -> DatasetMeasurement {
    let results: Vec<Result<AvailabilityProfile, AvailabilityError>> = items
        .par_iter()
        .map(|item| measure_item(item, index, provider, config))
        .collect();

    let mut measurement = DatasetMeasurement::default();
    for (item, result) in items.iter().zip(results) {
        match result {
            Ok(profile) => measurement.profiles.push(profile),
            Err(err) => measurement.failures.push(ItemFailure {
                item_id: item.id.clone(),
                message: err.to_string(),
            }),
        }
    }
    measurement
}

/// Writes profiles as line-delimited records tagged with (mode, k).
pub fn save_profiles(
    path: &Path,
    profiles: &[AvailabilityProfile],
    config: AvailabilityConfig,
) -> Result<(), jsonl::ReadError> {
    let records: Vec<ProfileRecord> = profiles
        .iter()
        .map(|p| ProfileRecord::new(p, config))
        .collect();
    jsonl::write_records(path, &records)
}

/// Reads a profile file back into records (mode and k preserved).
pub fn load_profiles(path: &Path) -> Result<Vec<ProfileRecord>, jsonl::ReadError> {
    jsonl::read_records(path)
}
