//! Passage corpora and MCQ datasets: line-delimited file formats plus
//! the validation rules every loaded record must satisfy.
//!
//! Both file formats are one JSON object per line, UTF-8, LF-terminated.
//! Passage records carry `id` and `text`; MCQ records carry `id`, `stem`,
//! `options`, `correct_index` and an optional `selection_rates` list.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jsonl;

/// One corpus text unit with a stable id. The retrieval substrate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub id: String,
    pub text: String,
}

/// A multiple-choice question: stem, ordered options, 0-based correct index,
/// and optional per-option student selection rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McqItem {
    pub id: String,
    pub stem: String,
    pub options: Vec<String>,
    pub correct_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection_rates: Option<Vec<f64>>,
}

/// Summary statistics over a loaded corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub passage_count: usize,
    pub mean_text_length: f64,
}

pub const MIN_OPTIONS: usize = 2;
pub const MAX_OPTIONS: usize = 8;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error(transparent)]
    File(#[from] jsonl::ReadError),
    #[error("duplicate passage id {id:?} (record {record})")]
    DuplicatePassageId { id: String, record: usize },
    #[error("passage {id:?}: text is empty")]
    EmptyText { id: String },
    #[error("duplicate item id {id:?} (record {record})")]
    DuplicateItemId { id: String, record: usize },
    #[error("item {id:?}: {message}")]
    InvalidItem { id: String, message: String },
}

impl McqItem {
    /// Checks every structural invariant: option count in range, non-empty
    /// stem and options, in-range correct index, options pairwise distinct
    /// after trimming and case-folding, and selection rates (when present)
    /// aligned with the options and inside [0, 1].
    pub fn validate(&self) -> Result<(), CorpusError> {
        let fail = |message: String| CorpusError::InvalidItem {
            id: self.id.clone(),
            message,
        };
        if self.id.trim().is_empty() {
            return Err(fail("id is empty".into()));
        }
        if self.stem.trim().is_empty() {
            return Err(fail("stem is empty".into()));
        }
        if self.options.len() < MIN_OPTIONS || self.options.len() > MAX_OPTIONS {
            return Err(fail(format!(
                "option count {} outside {}..={}",
                self.options.len(),
                MIN_OPTIONS,
                MAX_OPTIONS
            )));
        }
        if self.correct_index >= self.options.len() {
            return Err(fail(format!(
                "correct_index {} out of range for {} options",
                self.correct_index,
                self.options.len()
            )));
        }
        let mut seen = HashSet::new();
        for option in &self.options {
            if option.trim().is_empty() {
                return Err(fail("option text is empty".into()));
            }
            if !seen.insert(fold_option(option)) {
                return Err(fail(format!("duplicate option {option:?}")));
            }
        }
        if let Some(rates) = &self.selection_rates {
            if rates.len() != self.options.len() {
                return Err(fail(format!(
                    "selection_rates length {} does not match {} options",
                    rates.len(),
                    self.options.len()
                )));
            }
            if let Some(rate) = rates.iter().find(|r| !(0.0..=1.0).contains(*r)) {
                return Err(fail(format!("selection rate {rate} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Trim + case-fold, the equality used for duplicate-option detection.
/// "Paris" and "paris" name the same concept for availability purposes.
pub fn fold_option(text: &str) -> String {
    text.trim().to_lowercase()
}

/// Loads a passage corpus, preserving file order. Duplicate ids and empty
/// texts are rejected.
pub fn load_corpus(path: &Path) -> Result<Vec<Passage>, CorpusError> {
    let passages: Vec<Passage> = jsonl::read_records(path)?;
    let mut seen = HashSet::new();
    for (idx, passage) in passages.iter().enumerate() {
        if passage.text.trim().is_empty() {
            return Err(CorpusError::EmptyText {
                id: passage.id.clone(),
            });
        }
        if !seen.insert(passage.id.clone()) {
            return Err(CorpusError::DuplicatePassageId {
                id: passage.id.clone(),
                record: idx + 1,
            });
        }
    }
    Ok(passages)
}

/// Writes a passage corpus in the same line-delimited format `load_corpus` reads.
pub fn save_corpus(path: &Path, passages: &[Passage]) -> Result<(), CorpusError> {
    jsonl::write_records(path, passages)?;
    Ok(())
}

/// Loads an MCQ dataset, validating every item. The first invalid item
/// aborts the load with its id in the error.
pub fn load_mcq_dataset(path: &Path) -> Result<Vec<McqItem>, CorpusError> {
    let items: Vec<McqItem> = jsonl::read_records(path)?;
    let mut seen = HashSet::new();
    for (idx, item) in items.iter().enumerate() {
        item.validate()?;
        if !seen.insert(item.id.clone()) {
            return Err(CorpusError::DuplicateItemId {
                id: item.id.clone(),
                record: idx + 1,
            });
        }
    }
    Ok(items)
}

/// Writes an MCQ dataset re-loadable by `load_mcq_dataset`.
pub fn save_mcq_dataset(path: &Path, items: &[McqItem]) -> Result<(), CorpusError> {
    jsonl::write_records(path, items)?;
    Ok(())
}

/// Computes corpus summary statistics (count and mean text length in chars).
pub fn corpus_stats(passages: &[Passage]) -> CorpusStats {
    let total_chars: usize = passages.iter().map(|p| p.text.chars().count()).sum();
    let mean = if passages.is_empty() {
        0.0
    } else {
        total_chars as f64 / passages.len() as f64
    };
    CorpusStats {
        passage_count: passages.len(),
        mean_text_length: mean,
    }
}
