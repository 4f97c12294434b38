//! The statistical battery applied to availability profiles: a Friedman
//! omnibus over the per-option counts, Wilcoxon signed-rank post-hocs with
//! matched-pairs rank-biserial effect sizes, Holm-Bonferroni adjustment,
//! and a Bayesian Dirichlet-Multinomial comparison of the correct answer
//! against the pooled distractors (probability of direction + 95% HDI).
//!
//! Every Monte Carlo output is a pure function of (inputs, seed, samples)
//! and reproduces bit-for-bit.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use thiserror::Error;

use crate::availability::AvailabilityProfile;

/// Above this many nonzero differences the Wilcoxon p-value switches from
/// exact sign-pattern enumeration to the tie-corrected normal approximation.
pub const WILCOXON_EXACT_LIMIT: usize = 20;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("need at least 2 options, got {0}")]
    TooFewOptions(usize),
    #[error("need at least 2 items, got {0}")]
    TooFewItems(usize),
    #[error("row {row} has {got} entries, expected {expected}")]
    RaggedMatrix {
        row: usize,
        expected: usize,
        got: usize,
    },
    #[error("paired samples differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("p-value {0} outside [0, 1]")]
    InvalidPValue(f64),
    #[error("no profiles to analyse")]
    EmptyProfiles,
    #[error("profile {item_id:?} has {got} options, expected {expected}")]
    InconsistentOptionCount {
        item_id: String,
        expected: usize,
        got: usize,
    },
    #[error("correct index {index} out of range for {options} options")]
    CorrectIndexOutOfRange { index: usize, options: usize },
    #[error("profiles and correct indices differ in length: {0} vs {1}")]
    IndexLengthMismatch(usize, usize),
    #[error("pooled counts are all zero")]
    ZeroTotalCounts,
    #[error("alpha prior must be positive, got {0}")]
    NonPositiveAlpha(f64),
    #[error("sample count must be positive")]
    ZeroSamples,
}

/// Friedman omnibus test over an items x options matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriedmanResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Wilcoxon signed-rank outcome for one paired comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    pub w_plus: f64,
    pub w_minus: f64,
    pub p_value: f64,
    /// Number of nonzero differences actually ranked.
    pub n_nonzero: usize,
    /// True when the p-value came from exact enumeration.
    pub exact: bool,
}

/// Matched-pairs rank-biserial correlation. `defined` is false when both
/// rank sums were zero, in which case the value is reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankBiserial {
    pub value: f64,
    pub defined: bool,
}

/// Holm-Bonferroni adjustment of a family of p-values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolmResult {
    pub adjusted: Vec<f64>,
    pub reject: Vec<bool>,
}

/// One post-hoc pairwise comparison between two option columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseResult {
    pub option_pair: (usize, usize),
    pub w_plus: f64,
    pub w_minus: f64,
    pub p_raw: f64,
    pub p_adjusted: f64,
    pub effect_size: f64,
    pub significant: bool,
}

/// Dirichlet-Multinomial posterior comparison of the correct answer's
/// availability against the mean distractor availability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesResult {
    /// Probability of direction: the posterior probability that the correct
    /// answer is more available than the average distractor.
    pub pd: f64,
    pub mean_diff: f64,
    pub hdi_low: f64,
    pub hdi_high: f64,
    pub alpha_prior: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Average ranks (1-based), tied values sharing the mean of their ranks.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| values[*a].partial_cmp(&values[*b]).expect("finite values"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let shared = (i + j) as f64 / 2.0 + 1.0;
        for slot in &order[i..=j] {
            ranks[*slot] = shared;
        }
        i = j + 1;
    }
    ranks
}

fn chi_squared_sf(x: f64, df: usize) -> f64 {
    let dist = ChiSquared::new(df as f64).expect("df >= 1");
    dist.sf(x).clamp(0.0, 1.0)
}

fn standard_normal_sf(z: f64) -> f64 {
    let dist = Normal::new(0.0, 1.0).expect("valid normal");
    dist.sf(z)
}

/// Friedman test with within-row average ranks and the standard tie
/// correction. Fully tied input (every row constant) is degenerate and
/// reported as statistic 0, p 1.
pub fn friedman_test(matrix: &[Vec<f64>]) -> Result<FriedmanResult, StatsError> {
    let n = matrix.len();
    if n < 2 {
        return Err(StatsError::TooFewItems(n));
    }
    let k = matrix[0].len();
    if k < 2 {
        return Err(StatsError::TooFewOptions(k));
    }
    for (row, values) in matrix.iter().enumerate() {
        if values.len() != k {
            return Err(StatsError::RaggedMatrix {
                row,
                expected: k,
                got: values.len(),
            });
        }
    }

    let mut rank_sums = vec![0.0f64; k];
    let mut tie_term = 0.0f64; // sum over rows of sum(t^3 - t)
    for row in matrix {
        let ranks = average_ranks(row);
        for (sum, rank) in rank_sums.iter_mut().zip(&ranks) {
            *sum += rank;
        }
        let mut sorted = row.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
        let mut i = 0;
        while i < k {
            let mut j = i;
            while j + 1 < k && sorted[j + 1] == sorted[i] {
                j += 1;
            }
            let t = (j - i + 1) as f64;
            tie_term += t * t * t - t;
            i = j + 1;
        }
    }

    let nf = n as f64;
    let kf = k as f64;
    let ssbn: f64 = rank_sums.iter().map(|r| r * r).sum();
    let uncorrected = 12.0 / (nf * kf * (kf + 1.0)) * ssbn - 3.0 * nf * (kf + 1.0);
    let correction = 1.0 - tie_term / (nf * kf * (kf * kf - 1.0));

    let statistic = if correction <= 0.0 {
        0.0
    } else {
        (uncorrected / correction).max(0.0)
    };
    let df = k - 1;
    let p_value = if statistic == 0.0 {
        1.0
    } else {
        chi_squared_sf(statistic, df)
    };
    Ok(FriedmanResult {
        statistic,
        df,
        p_value,
    })
}

/// Two-sided Wilcoxon signed-rank test on paired samples. Zero differences
/// are dropped; tied absolute differences share average ranks. The p-value
/// is exact (all 2^n sign patterns) up to [`WILCOXON_EXACT_LIMIT`] nonzero
/// differences, then a tie-corrected normal approximation with continuity
/// correction. All differences zero yields p = 1.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<WilcoxonResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.is_empty() {
        return Err(StatsError::TooFewItems(0));
    }
    let diffs: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(a, b)| a - b)
        .filter(|d| *d != 0.0)
        .collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            w_plus: 0.0,
            w_minus: 0.0,
            p_value: 1.0,
            n_nonzero: 0,
            exact: true,
        });
    }

    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&abs);
    let mut w_plus = 0.0;
    let mut w_minus = 0.0;
    for (diff, rank) in diffs.iter().zip(&ranks) {
        if *diff > 0.0 {
            w_plus += rank;
        } else {
            w_minus += rank;
        }
    }

    let (p_value, exact) = if n <= WILCOXON_EXACT_LIMIT {
        (exact_two_sided_p(&ranks, w_plus), true)
    } else {
        (normal_two_sided_p(&abs, &ranks, w_plus), false)
    };

    Ok(WilcoxonResult {
        w_plus,
        w_minus,
        p_value,
        n_nonzero: n,
        exact,
    })
}

/// Exact two-sided p: the fraction of all 2^n sign assignments whose rank
/// sum deviates from the null centre at least as far as the observed one.
fn exact_two_sided_p(ranks: &[f64], w_plus: f64) -> f64 {
    let n = ranks.len();
    let total: f64 = ranks.iter().sum();
    let centre = total / 2.0;
    let observed = (w_plus - centre).abs();
    let patterns: u64 = 1 << n;
    let mut extreme = 0u64;
    for mask in 0..patterns {
        let mut w = 0.0;
        for (bit, rank) in ranks.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                w += rank;
            }
        }
        if (w - centre).abs() >= observed - 1e-9 {
            extreme += 1;
        }
    }
    extreme as f64 / patterns as f64
}

/// Normal approximation with tie-corrected variance and a 0.5 continuity
/// correction toward the null mean.
fn normal_two_sided_p(abs_diffs: &[f64], ranks: &[f64], w_plus: f64) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;

    let mut sorted = abs_diffs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let variance = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if variance <= 0.0 {
        return 1.0;
    }

    let deviation = w_plus - mean;
    let corrected = if deviation == 0.0 {
        0.0
    } else {
        deviation - 0.5 * deviation.signum()
    };
    let z = corrected / variance.sqrt();
    (2.0 * standard_normal_sf(z.abs())).clamp(0.0, 1.0)
}

/// Matched-pairs rank-biserial correlation (w+ - w-)/(w+ + w-).
pub fn rank_biserial(w_plus: f64, w_minus: f64) -> RankBiserial {
    let total = w_plus + w_minus;
    if total <= 0.0 {
        return RankBiserial {
            value: 0.0,
            defined: false,
        };
    }
    RankBiserial {
        value: (w_plus - w_minus) / total,
        defined: true,
    }
}

/// Holm-Bonferroni step-down adjustment: sort p ascending, take the running
/// maximum of (m - i + 1) * p_(i) capped at 1, map back to input order, and
/// reject where the adjusted value is at most alpha.
pub fn holm_bonferroni(p_values: &[f64], alpha: f64) -> Result<HolmResult, StatsError> {
    for p in p_values {
        if !(0.0..=1.0).contains(p) {
            return Err(StatsError::InvalidPValue(*p));
        }
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|a, b| {
        p_values[*a]
            .partial_cmp(&p_values[*b])
            .expect("validated p-values")
            .then(a.cmp(b))
    });

    let mut adjusted = vec![0.0; m];
    let mut running_max = 0.0f64;
    for (i, original) in order.iter().enumerate() {
        let scaled = (m - i) as f64 * p_values[*original];
        running_max = running_max.max(scaled).min(1.0);
        adjusted[*original] = running_max;
    }
    let reject = adjusted.iter().map(|p| *p <= alpha).collect();
    Ok(HolmResult { adjusted, reject })
}

/// All C(k, 2) post-hoc Wilcoxon comparisons between option columns of an
/// items x options matrix, Holm-adjusted as one family.
pub fn pairwise_wilcoxon(
    matrix: &[Vec<f64>],
    alpha: f64,
) -> Result<Vec<PairwiseResult>, StatsError> {
    let n = matrix.len();
    if n < 1 {
        return Err(StatsError::TooFewItems(n));
    }
    let k = matrix[0].len();
    if k < 2 {
        return Err(StatsError::TooFewOptions(k));
    }
    for (row, values) in matrix.iter().enumerate() {
        if values.len() != k {
            return Err(StatsError::RaggedMatrix {
                row,
                expected: k,
                got: values.len(),
            });
        }
    }

    let column = |j: usize| -> Vec<f64> { matrix.iter().map(|row| row[j]).collect() };
    let mut partial = Vec::new();
    for i in 0..k {
        for j in (i + 1)..k {
            let result = wilcoxon_signed_rank(&column(i), &column(j))?;
            let effect = rank_biserial(result.w_plus, result.w_minus);
            partial.push(((i, j), result, effect));
        }
    }
    let p_raws: Vec<f64> = partial.iter().map(|(_, r, _)| r.p_value).collect();
    let holm = holm_bonferroni(&p_raws, alpha)?;

    Ok(partial
        .into_iter()
        .zip(holm.adjusted.iter().zip(&holm.reject))
        .map(|((pair, result, effect), (adjusted, reject))| PairwiseResult {
            option_pair: pair,
            w_plus: result.w_plus,
            w_minus: result.w_minus,
            p_raw: result.p_value,
            p_adjusted: *adjusted,
            effect_size: effect.value,
            significant: *reject,
        })
        .collect())
}

/// Narrowest contiguous interval containing at least `mass` of the samples.
/// Samples need not be sorted.
pub fn hdi(samples: &[f64], mass: f64) -> (f64, f64) {
    assert!(!samples.is_empty(), "hdi of an empty sample set");
    assert!(mass > 0.0 && mass <= 1.0, "mass must be in (0, 1]");
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let n = sorted.len();
    let window = ((mass * n as f64).ceil() as usize).clamp(1, n);
    let mut best = (sorted[0], sorted[window - 1]);
    let mut best_width = best.1 - best.0;
    for start in 1..=(n - window) {
        let width = sorted[start + window - 1] - sorted[start];
        if width < best_width {
            best_width = width;
            best = (sorted[start], sorted[start + window - 1]);
        }
    }
    best
}

/// Posterior comparison from pooled per-role counts. `pooled[0]` is the
/// correct-answer role; the rest are distractor roles. Draws a
/// Dirichlet(alpha + pooled) posterior via Gamma sampling with a seeded
/// ChaCha12 generator and summarises d = theta_correct - mean(theta_rest).
pub fn dirichlet_compare_pooled(
    pooled: &[u64],
    alpha_prior: f64,
    samples: usize,
    seed: u64,
) -> Result<BayesResult, StatsError> {
    if pooled.len() < 2 {
        return Err(StatsError::TooFewOptions(pooled.len()));
    }
    if alpha_prior <= 0.0 {
        return Err(StatsError::NonPositiveAlpha(alpha_prior));
    }
    if samples == 0 {
        return Err(StatsError::ZeroSamples);
    }
    if pooled.iter().all(|c| *c == 0) {
        return Err(StatsError::ZeroTotalCounts);
    }

    let gammas: Vec<Gamma<f64>> = pooled
        .iter()
        .map(|count| {
            Gamma::new(alpha_prior + *count as f64, 1.0).expect("positive shape parameter")
        })
        .collect();

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let roles = pooled.len();
    let distractors = (roles - 1) as f64;
    let mut draws = Vec::with_capacity(samples);
    let mut positive = 0usize;
    let mut sum = 0.0f64;
    let mut theta = vec![0.0f64; roles];
    for _ in 0..samples {
        let mut total = 0.0;
        for (slot, gamma) in theta.iter_mut().zip(&gammas) {
            *slot = gamma.sample(&mut rng);
            total += *slot;
        }
        let correct = theta[0] / total;
        let rest: f64 = theta[1..].iter().map(|v| v / total).sum();
        let d = correct - rest / distractors;
        if d > 0.0 {
            positive += 1;
        }
        sum += d;
        draws.push(d);
    }

    let (hdi_low, hdi_high) = hdi(&draws, 0.95);
    Ok(BayesResult {
        pd: positive as f64 / samples as f64,
        mean_diff: sum / samples as f64,
        hdi_low,
        hdi_high,
        alpha_prior,
        samples,
        seed,
    })
}

/// Pools counts per option role across items (role 0 = the correct option,
/// the remaining roles = distractor slots in stored option order) and runs
/// the posterior comparison on the pooled table.
pub fn dirichlet_correct_vs_distractors(
    profiles: &[AvailabilityProfile],
    correct_indices: &[usize],
    alpha_prior: f64,
    samples: usize,
    seed: u64,
) -> Result<BayesResult, StatsError> {
    let pooled = pool_by_role(profiles, correct_indices)?;
    dirichlet_compare_pooled(&pooled, alpha_prior, samples, seed)
}

/// Per-item posterior comparisons, an optional diagnostic alongside the
/// pooled dataset-level result. Item i uses seed + i.
pub fn dirichlet_per_item(
    profiles: &[AvailabilityProfile],
    correct_indices: &[usize],
    alpha_prior: f64,
    samples: usize,
    seed: u64,
) -> Result<Vec<BayesResult>, StatsError> {
    if profiles.len() != correct_indices.len() {
        return Err(StatsError::IndexLengthMismatch(
            profiles.len(),
            correct_indices.len(),
        ));
    }
    profiles
        .iter()
        .zip(correct_indices)
        .enumerate()
        .map(|(i, (profile, correct))| {
            let roles = roles_for(profile, *correct)?;
            dirichlet_compare_pooled(&roles, alpha_prior, samples, seed.wrapping_add(i as u64))
        })
        .collect()
}

fn roles_for(profile: &AvailabilityProfile, correct: usize) -> Result<Vec<u64>, StatsError> {
    let m = profile.counts.len();
    if correct >= m {
        return Err(StatsError::CorrectIndexOutOfRange {
            index: correct,
            options: m,
        });
    }
    let mut roles = Vec::with_capacity(m);
    roles.push(u64::from(profile.counts[correct]));
    for (j, count) in profile.counts.iter().enumerate() {
        if j != correct {
            roles.push(u64::from(*count));
        }
    }
    Ok(roles)
}

fn pool_by_role(
    profiles: &[AvailabilityProfile],
    correct_indices: &[usize],
) -> Result<Vec<u64>, StatsError> {
    if profiles.is_empty() {
        return Err(StatsError::EmptyProfiles);
    }
    if profiles.len() != correct_indices.len() {
        return Err(StatsError::IndexLengthMismatch(
            profiles.len(),
            correct_indices.len(),
        ));
    }
    let m = profiles[0].counts.len();
    if m < 2 {
        return Err(StatsError::TooFewOptions(m));
    }
    let mut pooled = vec![0u64; m];
    for (profile, correct) in profiles.iter().zip(correct_indices) {
        if profile.counts.len() != m {
            return Err(StatsError::InconsistentOptionCount {
                item_id: profile.item_id.clone(),
                expected: m,
                got: profile.counts.len(),
            });
        }
        let roles = roles_for(profile, *correct)?;
        for (slot, count) in pooled.iter_mut().zip(roles) {
            *slot += count;
        }
    }
    Ok(pooled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    // ------------------------------------------------------------------
    // Test-side oracles, independent of the implementations above.
    // ------------------------------------------------------------------

    /// Recursive sign-pattern enumeration for the exact Wilcoxon p.
    fn wilcoxon_enumeration_oracle(diffs: &[f64]) -> f64 {
        fn ranks_of(abs: &[f64]) -> Vec<f64> {
            let n = abs.len();
            let mut out = vec![0.0; n];
            for i in 0..n {
                let mut less = 0usize;
                let mut equal = 0usize;
                for j in 0..n {
                    if abs[j] < abs[i] {
                        less += 1;
                    } else if abs[j] == abs[i] {
                        equal += 1;
                    }
                }
                // average of ranks less+1 ..= less+equal
                out[i] = less as f64 + (equal as f64 + 1.0) / 2.0;
            }
            out
        }
        fn walk(ranks: &[f64], idx: usize, w: f64, centre: f64, observed: f64, hits: &mut u64) {
            if idx == ranks.len() {
                if (w - centre).abs() >= observed - 1e-9 {
                    *hits += 1;
                }
                return;
            }
            walk(ranks, idx + 1, w, centre, observed, hits);
            walk(ranks, idx + 1, w + ranks[idx], centre, observed, hits);
        }

        let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
        let ranks = ranks_of(&abs);
        let total: f64 = ranks.iter().sum();
        let centre = total / 2.0;
        let w_obs: f64 = diffs
            .iter()
            .zip(&ranks)
            .filter(|(d, _)| **d > 0.0)
            .map(|(_, r)| r)
            .sum();
        let mut hits = 0u64;
        walk(&ranks, 0, 0.0, centre, (w_obs - centre).abs(), &mut hits);
        hits as f64 / (1u64 << ranks.len()) as f64
    }

    /// Friedman statistic computed in the textbook uncorrected form,
    /// valid for matrices without within-row ties.
    fn friedman_statistic_oracle(matrix: &[Vec<f64>]) -> f64 {
        let n = matrix.len() as f64;
        let k = matrix[0].len() as f64;
        let mut rank_sums = vec![0.0; matrix[0].len()];
        for row in matrix {
            for (j, value) in row.iter().enumerate() {
                let rank = 1.0 + row.iter().filter(|v| *v < value).count() as f64;
                rank_sums[j] += rank;
            }
        }
        12.0 / (n * k * (k + 1.0)) * rank_sums.iter().map(|r| r * r).sum::<f64>()
            - 3.0 * n * (k + 1.0)
    }

    // ------------------------------------------------------------------
    // Friedman
    // ------------------------------------------------------------------

    #[test]
    fn friedman_hand_value_on_identical_rank_rows() {
        // Three rows of (1,2,3): rank sums (3,6,9), statistic
        // 12/(3*3*4)*(9+36+81) - 3*3*4 = 6.0 exactly; p = sf(6, df=2).
        let matrix = vec![
            vec![1.0, 2.0, 3.0],
            vec![1.0, 2.0, 3.0],
            vec![1.0, 2.0, 3.0],
        ];
        let result = friedman_test(&matrix).unwrap();
        assert_abs_diff_eq!(result.statistic, 6.0, epsilon = 1e-9);
        assert_eq!(result.df, 2);
        assert_abs_diff_eq!(result.p_value, (-3.0f64).exp(), epsilon = 1e-9);
        assert_abs_diff_eq!(result.p_value, 0.0498, epsilon = 1e-4);
    }

    #[test]
    fn friedman_constant_rows_degenerate() {
        let matrix = vec![vec![5.0, 5.0, 5.0], vec![7.0, 7.0, 7.0]];
        let result = friedman_test(&matrix).unwrap();
        assert_eq!(result.statistic, 0.0);
        assert_eq!(result.p_value, 1.0);
    }

    #[test]
    fn friedman_matches_permutation_oracle() {
        // Exhaustive within-row permutation test: all 6^5 arrangements of a
        // 5x3 matrix. The chi-square approximation should land within 0.02.
        let matrix = vec![
            vec![1.2, 2.7, 3.9],
            vec![10.0, 20.0, 30.0],
            vec![0.1, 0.5, 0.9],
            vec![5.0, 9.0, 7.0],
            vec![2.2, 1.1, 3.3],
        ];
        let observed = friedman_test(&matrix).unwrap();
        assert_abs_diff_eq!(observed.statistic, 6.4, epsilon = 1e-9);

        let perms: [[usize; 3]; 6] = [
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ];
        let mut extreme = 0usize;
        let mut total = 0usize;
        let mut choice = [0usize; 5];
        'outer: loop {
            let permuted: Vec<Vec<f64>> = matrix
                .iter()
                .enumerate()
                .map(|(row, values)| perms[choice[row]].iter().map(|p| values[*p]).collect())
                .collect();
            let statistic = friedman_statistic_oracle(&permuted);
            if statistic >= observed.statistic - 1e-9 {
                extreme += 1;
            }
            total += 1;
            // odometer over 6^5 choices
            let mut pos = 0;
            loop {
                choice[pos] += 1;
                if choice[pos] < 6 {
                    break;
                }
                choice[pos] = 0;
                pos += 1;
                if pos == 5 {
                    break 'outer;
                }
            }
        }
        assert_eq!(total, 7776);
        let p_exact = extreme as f64 / total as f64;
        assert!(
            (observed.p_value - p_exact).abs() <= 0.02,
            "chi-square p {} vs permutation p {}",
            observed.p_value,
            p_exact
        );
    }

    #[test]
    fn friedman_invariant_under_row_shift() {
        let base = vec![
            vec![3.0, 1.0, 2.0],
            vec![2.0, 3.0, 1.0],
            vec![1.0, 2.0, 3.0],
            vec![3.0, 2.0, 1.0],
        ];
        let shifted: Vec<Vec<f64>> = base
            .iter()
            .enumerate()
            .map(|(i, row)| row.iter().map(|v| v + 10.0 * i as f64).collect())
            .collect();
        let a = friedman_test(&base).unwrap();
        let b = friedman_test(&shifted).unwrap();
        assert_abs_diff_eq!(a.statistic, b.statistic, epsilon = 1e-12);
    }

    #[test]
    fn friedman_rejects_bad_shapes() {
        assert!(friedman_test(&[vec![1.0, 2.0]]).is_err());
        assert!(friedman_test(&[vec![1.0], vec![2.0]]).is_err());
        assert!(friedman_test(&[vec![1.0, 2.0], vec![1.0]]).is_err());
    }

    // ------------------------------------------------------------------
    // Wilcoxon
    // ------------------------------------------------------------------

    #[test]
    fn wilcoxon_all_positive_small_sample() {
        // diffs (+1,+2,+3): W+ = 6, W- = 0; of the 8 sign patterns only
        // W in {0, 6} are as extreme, so p = 2/8 = 0.25.
        let x = [2.0, 4.0, 6.0];
        let y = [1.0, 2.0, 3.0];
        let result = wilcoxon_signed_rank(&x, &y).unwrap();
        assert_abs_diff_eq!(result.w_plus, 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(result.w_minus, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(result.p_value, 0.25, epsilon = 1e-12);
        assert!(result.exact);
    }

    #[test]
    fn wilcoxon_identical_samples() {
        let x = [1.0, 2.0, 3.0];
        let result = wilcoxon_signed_rank(&x, &x).unwrap();
        assert_eq!(result.p_value, 1.0);
        assert_eq!(result.n_nonzero, 0);
    }

    #[test]
    fn wilcoxon_matches_enumeration_oracle_on_random_instances() {
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        for trial in 0..20 {
            let n = rng.random_range(3..=12);
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let diffs: Vec<f64> = x
                .iter()
                .zip(&y)
                .map(|(a, b)| a - b)
                .filter(|d| *d != 0.0)
                .collect();
            if diffs.is_empty() {
                continue;
            }
            let expected = wilcoxon_enumeration_oracle(&diffs);
            let result = wilcoxon_signed_rank(&x, &y).unwrap();
            assert!(result.exact, "trial {trial} should use the exact path");
            assert_abs_diff_eq!(result.p_value, expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn wilcoxon_with_tied_ranks_matches_oracle() {
        let x = [3.0, 5.0, 9.0, 4.0, 4.5];
        let y = [1.0, 3.0, 5.0, 2.0, 6.5];
        // diffs: +2, +2, +4, +2, -2 (four-way tie in |d|)
        let diffs: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        let expected = wilcoxon_enumeration_oracle(&diffs);
        let result = wilcoxon_signed_rank(&x, &y).unwrap();
        assert_abs_diff_eq!(result.p_value, expected, epsilon = 1e-12);
        // tied |d| values share average ranks, so W+ + W- = n(n+1)/2
        assert_abs_diff_eq!(result.w_plus + result.w_minus, 15.0, epsilon = 1e-12);
    }

    #[test]
    fn wilcoxon_normal_approximation_near_exact_at_boundary() {
        // n' = 25 forces the approximation; a rank-sum convolution gives
        // the exact reference.
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let x: Vec<f64> = (0..25).map(|_| rng.random_range(-1.0..1.5)).collect();
        let y: Vec<f64> = (0..25).map(|_| rng.random_range(-1.0..1.0)).collect();
        let result = wilcoxon_signed_rank(&x, &y).unwrap();
        assert!(!result.exact);
        assert_eq!(result.n_nonzero, 25);

        // Exact distribution of W+ over integer ranks 1..=25 by dynamic
        // programming: continuous draws make ties measure-zero.
        let n = 25usize;
        let max_sum = n * (n + 1) / 2;
        let mut ways = vec![0u64; max_sum + 1];
        ways[0] = 1;
        for rank in 1..=n {
            for w in (rank..=max_sum).rev() {
                ways[w] += ways[w - rank];
            }
        }
        let centre = max_sum as f64 / 2.0;
        let observed = (result.w_plus - centre).abs();
        let extreme: u64 = ways
            .iter()
            .enumerate()
            .filter(|(w, _)| (*w as f64 - centre).abs() >= observed - 1e-9)
            .map(|(_, count)| *count)
            .sum();
        let p_exact = extreme as f64 / (1u64 << n) as f64;
        assert!(
            (result.p_value - p_exact).abs() <= 0.01,
            "approx {} vs exact {}",
            result.p_value,
            p_exact
        );
    }

    #[test]
    fn wilcoxon_two_sided_symmetry() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..10 {
            let n = rng.random_range(2..=15);
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let forward = wilcoxon_signed_rank(&x, &y).unwrap();
            let backward = wilcoxon_signed_rank(&y, &x).unwrap();
            assert_abs_diff_eq!(forward.p_value, backward.p_value, epsilon = 1e-12);
            assert_abs_diff_eq!(forward.w_plus, backward.w_minus, epsilon = 1e-12);
            assert_abs_diff_eq!(forward.w_minus, backward.w_plus, epsilon = 1e-12);
        }
    }

    #[test]
    fn wilcoxon_rank_sum_identity() {
        let x = [5.0, 1.0, 8.0, 2.0, 2.0, 9.0];
        let y = [2.0, 2.0, 3.0, 2.0, 7.0, 1.0];
        let result = wilcoxon_signed_rank(&x, &y).unwrap();
        let n = result.n_nonzero as f64;
        assert_abs_diff_eq!(
            result.w_plus + result.w_minus,
            n * (n + 1.0) / 2.0,
            epsilon = 1e-12
        );
    }

    // ------------------------------------------------------------------
    // Rank-biserial and Holm
    // ------------------------------------------------------------------

    #[test]
    fn rank_biserial_known_values() {
        assert_abs_diff_eq!(rank_biserial(6.0, 0.0).value, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(rank_biserial(3.0, 3.0).value, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(rank_biserial(9.0, 1.0).value, 0.8, epsilon = 1e-15);
        let degenerate = rank_biserial(0.0, 0.0);
        assert_eq!(degenerate.value, 0.0);
        assert!(!degenerate.defined);
    }

    #[test]
    fn holm_hand_example() {
        // (0.01, 0.04, 0.03) -> sorted (0.01, 0.03, 0.04) -> scaled
        // (0.03, 0.06, 0.04) -> running max (0.03, 0.06, 0.06).
        let result = holm_bonferroni(&[0.01, 0.04, 0.03], 0.01).unwrap();
        assert_abs_diff_eq!(result.adjusted[0], 0.03, epsilon = 1e-12);
        assert_abs_diff_eq!(result.adjusted[1], 0.06, epsilon = 1e-12);
        assert_abs_diff_eq!(result.adjusted[2], 0.06, epsilon = 1e-12);
        assert_eq!(result.reject, vec![false, false, false]);
    }

    #[test]
    fn holm_single_p_unchanged() {
        let result = holm_bonferroni(&[0.007], 0.01).unwrap();
        assert_abs_diff_eq!(result.adjusted[0], 0.007, epsilon = 1e-15);
        assert_eq!(result.reject, vec![true]);
    }

    #[test]
    fn holm_all_ones_capped() {
        let result = holm_bonferroni(&[1.0, 1.0, 1.0], 0.01).unwrap();
        assert_eq!(result.adjusted, vec![1.0, 1.0, 1.0]);
        assert!(result.reject.iter().all(|r| !r));
    }

    #[test]
    fn holm_rejects_invalid_p() {
        assert!(holm_bonferroni(&[0.5, 1.2], 0.01).is_err());
    }

    #[test]
    fn holm_dominates_raw_and_bonferroni_superset() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..50 {
            let m = rng.random_range(1..=8);
            let ps: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..1.0)).collect();
            let alpha = 0.05;
            let holm = holm_bonferroni(&ps, alpha).unwrap();
            for (adjusted, raw) in holm.adjusted.iter().zip(&ps) {
                assert!(*adjusted >= *raw - 1e-15);
            }
            for (i, p) in ps.iter().enumerate() {
                let bonferroni_rejects = m as f64 * p <= alpha;
                if bonferroni_rejects {
                    assert!(holm.reject[i], "Holm must reject wherever Bonferroni does");
                }
            }
        }
    }

    // ------------------------------------------------------------------
    // Pairwise battery
    // ------------------------------------------------------------------

    #[test]
    fn pairwise_adjusted_dominates_raw() {
        let matrix = vec![
            vec![12.0, 5.0, 3.0],
            vec![11.0, 6.0, 3.0],
            vec![13.0, 4.0, 3.0],
            vec![10.0, 7.0, 3.0],
            vec![12.0, 5.0, 3.0],
            vec![14.0, 3.0, 3.0],
        ];
        let results = pairwise_wilcoxon(&matrix, 0.01).unwrap();
        assert_eq!(results.len(), 3);
        for r in &results {
            assert!(r.p_adjusted >= r.p_raw - 1e-15);
            assert!((-1.0..=1.0).contains(&r.effect_size));
        }
        // column 0 dominates column 2 in every row
        let r02 = results.iter().find(|r| r.option_pair == (0, 2)).unwrap();
        assert_abs_diff_eq!(r02.effect_size, 1.0, epsilon = 1e-12);
    }

    // ------------------------------------------------------------------
    // Dirichlet-Multinomial posterior
    // ------------------------------------------------------------------

    #[test]
    fn symmetric_counts_give_half_pd() {
        let result = dirichlet_compare_pooled(&[10, 10], 1.0, 20_000, 42).unwrap();
        assert!(
            (result.pd - 0.5).abs() <= 0.02,
            "pd {} not within 0.02 of 0.5",
            result.pd
        );
    }

    #[test]
    fn dominant_correct_role_gives_high_pd() {
        let result = dirichlet_compare_pooled(&[30, 10, 10, 10], 1.0, 20_000, 42).unwrap();
        assert!(result.pd > 0.99, "pd {} should exceed 0.99", result.pd);
        assert!(result.mean_diff > 0.0);
        assert!(result.hdi_low <= result.mean_diff && result.mean_diff <= result.hdi_high);
    }

    #[test]
    fn role_swap_pds_sum_to_one() {
        let forward = dirichlet_compare_pooled(&[14, 6], 1.0, 20_000, 42).unwrap();
        let swapped = dirichlet_compare_pooled(&[6, 14], 1.0, 20_000, 42).unwrap();
        assert!(
            (forward.pd + swapped.pd - 1.0).abs() <= 0.02,
            "pds {} + {} should sum to 1",
            forward.pd,
            swapped.pd
        );
    }

    #[test]
    fn identical_seed_is_bit_identical() {
        let a = dirichlet_compare_pooled(&[12, 4, 7], 1.0, 5_000, 7).unwrap();
        let b = dirichlet_compare_pooled(&[12, 4, 7], 1.0, 5_000, 7).unwrap();
        assert_eq!(a.pd.to_bits(), b.pd.to_bits());
        assert_eq!(a.mean_diff.to_bits(), b.mean_diff.to_bits());
        assert_eq!(a.hdi_low.to_bits(), b.hdi_low.to_bits());
        assert_eq!(a.hdi_high.to_bits(), b.hdi_high.to_bits());
    }

    #[test]
    fn zero_counts_rejected() {
        assert!(matches!(
            dirichlet_compare_pooled(&[0, 0], 1.0, 100, 1),
            Err(StatsError::ZeroTotalCounts)
        ));
    }

    #[test]
    fn hdi_of_symmetric_samples_matches_central_interval() {
        // Draws from a symmetric unimodal distribution: the narrowest 95%
        // window should coincide with the central (2.5%, 97.5%) quantiles.
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let normal = rand_distr::Normal::new(0.0, 0.1).unwrap();
        let samples: Vec<f64> = (0..50_000).map(|_| normal.sample(&mut rng)).collect();
        let (low, high) = hdi(&samples, 0.95);
        let mut sorted = samples.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let central_low = sorted[(0.025 * sorted.len() as f64) as usize];
        let central_high = sorted[(0.975 * sorted.len() as f64) as usize];
        assert!((low - central_low).abs() <= 0.01, "{low} vs {central_low}");
        assert!(
            (high - central_high).abs() <= 0.01,
            "{high} vs {central_high}"
        );
    }

    #[test]
    fn hdi_covers_required_mass() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let samples: Vec<f64> = (0..10_000).map(|_| rng.random_range(0.0..1.0)).collect();
        let (low, high) = hdi(&samples, 0.95);
        let covered = samples.iter().filter(|s| (low..=high).contains(s)).count();
        assert!(covered as f64 >= 0.95 * samples.len() as f64);
    }

    #[test]
    fn pooling_maps_distractor_slots_in_stored_order() {
        let profiles = vec![
            AvailabilityProfile {
                item_id: "q1".into(),
                counts: vec![5, 10, 2],
                k_effective: 17,
            },
            AvailabilityProfile {
                item_id: "q2".into(),
                counts: vec![4, 1, 6],
                k_effective: 11,
            },
        ];
        // q1 correct = 1, q2 correct = 2
        let pooled = pool_by_role(&profiles, &[1, 2]).unwrap();
        // correct role: 10 + 6; first distractor slot: 5 + 4; second: 2 + 1
        assert_eq!(pooled, vec![16, 9, 3]);
    }

    #[test]
    fn per_item_diagnostic_aligns_with_items() {
        let profiles = vec![
            AvailabilityProfile {
                item_id: "q1".into(),
                counts: vec![18, 1, 1],
                k_effective: 20,
            },
            AvailabilityProfile {
                item_id: "q2".into(),
                counts: vec![1, 18, 1],
                k_effective: 20,
            },
        ];
        let results = dirichlet_per_item(&profiles, &[0, 0], 1.0, 4_000, 3).unwrap();
        assert_eq!(results.len(), 2);
        assert!(results[0].pd > 0.95);
        assert!(results[1].pd < 0.5);
    }
}
