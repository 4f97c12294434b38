//! Dataset-level analysis: turns measured availability profiles into an
//! [`AnalysisReport`] — per-(mode, k) mean availabilities, the Friedman +
//! Wilcoxon/Holm battery, the Dirichlet-Multinomial posterior, and the
//! guessing-strategy score — plus CSV plot data.
//!
//! All per-option statistics run in *role space*: each item's counts are
//! reordered as (correct answer, distractor slots in stored order) before
//! columns are compared, so column 0 always means "the correct answer"
//! regardless of where the key sits in each item. Items with different
//! option counts are analysed as separate groups; the strategy score spans
//! the whole dataset.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::availability::{AvailabilityProfile, QueryMode};
use crate::corpus::McqItem;
use crate::stats::{
    dirichlet_correct_vs_distractors, friedman_test, pairwise_wilcoxon, BayesResult,
    FriedmanResult, PairwiseResult, StatsError,
};
use crate::strategy::{score_strategy, StrategyError, StrategyReport};

/// Tuning for the statistical battery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisParams {
    /// Family-wise error rate for Holm-Bonferroni.
    pub alpha: f64,
    /// Dirichlet prior concentration (uniform prior at 1).
    pub alpha_prior: f64,
    pub bayes_samples: usize,
    pub bayes_seed: u64,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            alpha_prior: 1.0,
            bayes_samples: 20_000,
            bayes_seed: 42,
        }
    }
}

/// One measured profile file: every profile shares the same (mode, k).
#[derive(Debug, Clone)]
pub struct ProfileSet {
    pub mode: QueryMode,
    pub k: usize,
    pub profiles: Vec<AvailabilityProfile>,
}

/// The battery results for one (mode, k, option count) group.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupAnalysis {
    pub mode: QueryMode,
    pub k: usize,
    pub option_count: usize,
    pub item_count: usize,
    /// Mean availability proportion per role: index 0 is the correct
    /// answer, the rest are distractor slots in stored option order.
    pub mean_role_proportions: Vec<f64>,
    pub friedman: FriedmanResult,
    /// Pairwise role comparisons, Holm-adjusted as one family per group.
    pub pairwise: Vec<PairwiseResult>,
    pub bayes: BayesResult,
}

/// Where every number in a report came from.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub mcq_path: String,
    pub mcq_sha256: String,
    pub profile_files: Vec<ProfileFileProvenance>,
    /// SHA-256 of the vector index the profiles were measured against,
    /// when the measuring manifest is available.
    pub index_sha256: Option<String>,
    /// Embedding provider configuration recorded by the measuring run,
    /// when its manifest is available.
    pub measure_provider: Option<serde_json::Value>,
    pub params: Option<AnalysisParams>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileFileProvenance {
    pub path: String,
    pub sha256: String,
    pub mode: QueryMode,
    pub k: usize,
}

/// The full downstream analysis for one dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub dataset_id: String,
    pub groups: Vec<GroupAnalysis>,
    pub strategy: Vec<StrategyReport>,
    pub provenance: Provenance,
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("profile {item_id:?} has no matching item in the dataset")]
    UnknownItem { item_id: String },
    #[error("profile {item_id:?} has {counts} counts but the item has {options} options")]
    OptionMismatch {
        item_id: String,
        counts: usize,
        options: usize,
    },
    #[error("profile {item_id:?} has zero retrieved passages")]
    EmptyProfile { item_id: String },
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error("{path}: {source}")]
    Csv {
        path: String,
        source: csv::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Significance marker on an adjusted p-value:
/// `***` p < 0.001, `**` p < 0.005, `*` p < 0.01, blank otherwise.
pub fn significance_marker(p_adjusted: f64) -> &'static str {
    if p_adjusted < 0.001 {
        "***"
    } else if p_adjusted < 0.005 {
        "**"
    } else if p_adjusted < 0.01 {
        "*"
    } else {
        ""
    }
}

/// Human-readable role label for a role index.
pub fn role_label(role: usize) -> String {
    if role == 0 {
        "correct".to_string()
    } else {
        format!("distractor_{role}")
    }
}

fn role_ordered_counts(profile: &AvailabilityProfile, correct: usize) -> Vec<u32> {
    let mut roles = Vec::with_capacity(profile.counts.len());
    roles.push(profile.counts[correct]);
    for (j, count) in profile.counts.iter().enumerate() {
        if j != correct {
            roles.push(*count);
        }
    }
    roles
}

/// Runs the whole battery over one dataset. Each profile set is scored as
/// a strategy row; per-option statistics run per (mode, k, option count)
/// group with at least two items (smaller groups are skipped with a log
/// line, there is nothing to rank).
pub fn analyze(
    dataset_id: &str,
    items: &[McqItem],
    sets: &[ProfileSet],
    params: &AnalysisParams,
    provenance: Provenance,
) -> Result<AnalysisReport, ReportError> {
    let by_id: BTreeMap<&str, &McqItem> =
        items.iter().map(|item| (item.id.as_str(), item)).collect();

    let mut groups = Vec::new();
    let mut strategy = Vec::new();

    for set in sets {
        // Validate alignment once per set.
        for profile in &set.profiles {
            let item =
                by_id
                    .get(profile.item_id.as_str())
                    .ok_or_else(|| ReportError::UnknownItem {
                        item_id: profile.item_id.clone(),
                    })?;
            if profile.counts.len() != item.options.len() {
                return Err(ReportError::OptionMismatch {
                    item_id: profile.item_id.clone(),
                    counts: profile.counts.len(),
                    options: item.options.len(),
                });
            }
            if profile.k_effective == 0 {
                return Err(ReportError::EmptyProfile {
                    item_id: profile.item_id.clone(),
                });
            }
        }

        let matched_items: Vec<McqItem> = set
            .profiles
            .iter()
            .map(|p| (*by_id.get(p.item_id.as_str()).expect("validated")).clone())
            .collect();
        strategy.push(score_strategy(
            dataset_id,
            set.mode,
            set.k,
            &set.profiles,
            &matched_items,
        )?);

        // Partition by option count; each partition is one analysis group.
        let mut partitions: BTreeMap<usize, Vec<(&AvailabilityProfile, &McqItem)>> =
            BTreeMap::new();
        for (profile, item) in set.profiles.iter().zip(&matched_items) {
            partitions
                .entry(item.options.len())
                .or_default()
                .push((profile, item));
        }

        for (option_count, members) in partitions {
            if members.len() < 2 {
                log::warn!(
                    "skipping stats for {} items with {option_count} options under mode={} k={}",
                    members.len(),
                    set.mode,
                    set.k
                );
                continue;
            }
            let role_matrix: Vec<Vec<f64>> = members
                .iter()
                .map(|(profile, item)| {
                    role_ordered_counts(profile, item.correct_index)
                        .into_iter()
                        .map(f64::from)
                        .collect()
                })
                .collect();
            let role_proportions: Vec<Vec<f64>> = members
                .iter()
                .map(|(profile, item)| {
                    let k_eff = f64::from(profile.k_effective);
                    role_ordered_counts(profile, item.correct_index)
                        .into_iter()
                        .map(|c| f64::from(c) / k_eff)
                        .collect()
                })
                .collect();
            let mean_role_proportions: Vec<f64> = (0..option_count)
                .map(|role| {
                    role_proportions.iter().map(|row| row[role]).sum::<f64>()
                        / members.len() as f64
                })
                .collect();

            let friedman = friedman_test(&role_matrix)?;
            let pairwise = pairwise_wilcoxon(&role_matrix, params.alpha)?;

            let group_profiles: Vec<AvailabilityProfile> =
                members.iter().map(|(p, _)| (*p).clone()).collect();
            let correct_indices: Vec<usize> =
                members.iter().map(|(_, item)| item.correct_index).collect();
            let bayes = dirichlet_correct_vs_distractors(
                &group_profiles,
                &correct_indices,
                params.alpha_prior,
                params.bayes_samples,
                params.bayes_seed,
            )?;

            groups.push(GroupAnalysis {
                mode: set.mode,
                k: set.k,
                option_count,
                item_count: members.len(),
                mean_role_proportions,
                friedman,
                pairwise,
                bayes,
            });
        }
    }

    Ok(AnalysisReport {
        dataset_id: dataset_id.to_string(),
        groups,
        strategy,
        provenance,
    })
}

/// Per-role mean availability rows (plot data for the availability figure).
pub fn write_means_csv(path: &Path, report: &AnalysisReport) -> Result<(), ReportError> {
    let mut writer = csv_writer(path)?;
    let wrap = |source| ReportError::Csv {
        path: path.display().to_string(),
        source,
    };
    writer
        .write_record([
            "dataset_id",
            "mode",
            "k",
            "option_count",
            "role",
            "mean_proportion",
        ])
        .map_err(wrap)?;
    for group in &report.groups {
        for (role, mean) in group.mean_role_proportions.iter().enumerate() {
            writer
                .write_record([
                    report.dataset_id.as_str(),
                    group.mode.slug(),
                    &group.k.to_string(),
                    &group.option_count.to_string(),
                    &role_label(role),
                    &format!("{mean:.6}"),
                ])
                .map_err(wrap)?;
        }
    }
    writer.flush().map_err(|e| ReportError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    Ok(())
}

/// Pairwise significance rows: one per role pair per group, with the Holm
/// adjusted p, rank-biserial effect size, and an asterisk marker.
pub fn write_pairwise_csv(path: &Path, report: &AnalysisReport) -> Result<(), ReportError> {
    let mut writer = csv_writer(path)?;
    let wrap = |source| ReportError::Csv {
        path: path.display().to_string(),
        source,
    };
    writer
        .write_record([
            "dataset_id",
            "mode",
            "k",
            "option_count",
            "role_a",
            "role_b",
            "w_plus",
            "w_minus",
            "p_raw",
            "p_adjusted",
            "effect_size",
            "significant",
            "marker",
        ])
        .map_err(wrap)?;
    for group in &report.groups {
        for pair in &group.pairwise {
            writer
                .write_record([
                    report.dataset_id.as_str(),
                    group.mode.slug(),
                    &group.k.to_string(),
                    &group.option_count.to_string(),
                    &role_label(pair.option_pair.0),
                    &role_label(pair.option_pair.1),
                    &format!("{:.6}", pair.w_plus),
                    &format!("{:.6}", pair.w_minus),
                    &format!("{:.6e}", pair.p_raw),
                    &format!("{:.6e}", pair.p_adjusted),
                    &format!("{:.6}", pair.effect_size),
                    &pair.significant.to_string(),
                    significance_marker(pair.p_adjusted),
                ])
                .map_err(wrap)?;
        }
    }
    writer.flush().map_err(|e| ReportError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    Ok(())
}

/// Strategy accuracy rows, one per (mode, k).
pub fn write_strategy_csv(path: &Path, report: &AnalysisReport) -> Result<(), ReportError> {
    let mut writer = csv_writer(path)?;
    let wrap = |source| ReportError::Csv {
        path: path.display().to_string(),
        source,
    };
    writer
        .write_record([
            "dataset_id",
            "mode",
            "k",
            "item_count",
            "accuracy",
            "baseline",
            "delta",
        ])
        .map_err(wrap)?;
    for row in &report.strategy {
        writer
            .write_record([
                row.dataset_id.as_str(),
                row.mode.slug(),
                &row.k.to_string(),
                &row.item_count.to_string(),
                &format!("{:.6}", row.accuracy),
                &format!("{:.6}", row.baseline),
                &format!("{:.6}", row.delta),
            ])
            .map_err(wrap)?;
    }
    writer.flush().map_err(|e| ReportError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    Ok(())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>, ReportError> {
    csv::Writer::from_path(path).map_err(|source| ReportError::Csv {
        path: path.display().to_string(),
        source,
    })
}
