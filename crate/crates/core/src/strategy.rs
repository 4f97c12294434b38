//! Scores the "always select the most available option" guessing strategy
//! against the random-guess baseline.
//!
//! Ties at the maximum count earn fractional credit 1/t, the expected
//! accuracy of a uniform random tie-break — deterministic and unbiased,
//! so fully uniform profiles score exactly the baseline.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::availability::{AvailabilityProfile, QueryMode};
use crate::corpus::McqItem;

/// Dataset-level accuracy of the most-available guessing strategy under
/// one (mode, k), with its random baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyReport {
    pub dataset_id: String,
    pub mode: QueryMode,
    pub k: usize,
    pub accuracy: f64,
    /// Mean over items of 1/option_count.
    pub baseline: f64,
    pub delta: f64,
    pub item_count: usize,
}

#[derive(Debug, Error)]
pub enum StrategyError {
    #[error("profile {item_id:?} has all-zero counts")]
    AllZeroCounts { item_id: String },
    #[error("profile count {profiles} does not match item count {items}")]
    CountMismatch { profiles: usize, items: usize },
    #[error("profile {item_id:?} has no matching item")]
    UnknownItem { item_id: String },
    #[error("profile {item_id:?} has {counts} counts but the item has {options} options")]
    OptionMismatch {
        item_id: String,
        counts: usize,
        options: usize,
    },
    #[error("cannot score an empty dataset")]
    Empty,
}

/// Per-option credit for the most-available pick: 1 for a strict maximum,
/// 1/t shared across t options tied at the maximum, 0 elsewhere.
pub fn pick_most_available(profile: &AvailabilityProfile) -> Result<Vec<f64>, StrategyError> {
    let max = profile.counts.iter().copied().max().unwrap_or(0);
    if max == 0 {
        return Err(StrategyError::AllZeroCounts {
            item_id: profile.item_id.clone(),
        });
    }
    let tied = profile.counts.iter().filter(|c| **c == max).count();
    let share = 1.0 / tied as f64;
    Ok(profile
        .counts
        .iter()
        .map(|c| if *c == max { share } else { 0.0 })
        .collect())
}

/// Scores the strategy over a dataset: accuracy is the mean item credit of
/// the correct option, the baseline is the mean of 1/option_count.
pub fn score_strategy(
    dataset_id: &str,
    mode: QueryMode,
    k: usize,
    profiles: &[AvailabilityProfile],
    items: &[McqItem],
) -> Result<StrategyReport, StrategyError> {
    if profiles.is_empty() || items.is_empty() {
        return Err(StrategyError::Empty);
    }
    if profiles.len() != items.len() {
        return Err(StrategyError::CountMismatch {
            profiles: profiles.len(),
            items: items.len(),
        });
    }
    let by_id: std::collections::HashMap<&str, &McqItem> =
        items.iter().map(|item| (item.id.as_str(), item)).collect();

    let mut credit_sum = 0.0;
    let mut baseline_sum = 0.0;
    for profile in profiles {
        let item = by_id
            .get(profile.item_id.as_str())
            .ok_or_else(|| StrategyError::UnknownItem {
                item_id: profile.item_id.clone(),
            })?;
        if profile.counts.len() != item.options.len() {
            return Err(StrategyError::OptionMismatch {
                item_id: profile.item_id.clone(),
                counts: profile.counts.len(),
                options: item.options.len(),
            });
        }
        let credits = pick_most_available(profile)?;
        credit_sum += credits[item.correct_index];
        baseline_sum += 1.0 / item.options.len() as f64;
    }

    let n = profiles.len() as f64;
    let accuracy = credit_sum / n;
    let baseline = baseline_sum / n;
    Ok(StrategyReport {
        dataset_id: dataset_id.to_string(),
        mode,
        k,
        accuracy,
        baseline,
        delta: accuracy - baseline,
        item_count: profiles.len(),
    })
}
