//! Python bindings for the optavail library: corpus loading, the hashing
//! embedder + exact vector index, availability measurement, the statistics
//! battery, strategy scoring, and the distractor-generation helpers.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyModule;
use std::path::PathBuf;

use optavail::availability::{
    self, AvailabilityConfig, AvailabilityProfile, QueryMode,
};
use optavail::corpus;
use optavail::embedding::{cosine as vec_cosine, EmbeddingProvider, EmbeddingProviderConfig, EmbeddingVector};
use optavail::llmops;
use optavail::stats;
use optavail::strategy;
use optavail::vecindex;

fn value_err(err: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(err.to_string())
}

fn io_err(err: impl std::fmt::Display) -> PyErr {
    PyIOError::new_err(err.to_string())
}

fn parse_mode(mode: &str) -> PyResult<QueryMode> {
    match mode {
        "out_of_context" | "out-of-context" => Ok(QueryMode::OutOfContext),
        "in_context" | "in-context" => Ok(QueryMode::InContext),
        other => Err(value_err(format!(
            "unknown mode {other:?}; expected \"out_of_context\" or \"in_context\""
        ))),
    }
}

/// One corpus passage.
#[pyclass(name = "Passage", from_py_object)]
#[derive(Clone)]
struct PyPassage {
    #[pyo3(get, set)]
    id: String,
    #[pyo3(get, set)]
    text: String,
}

#[pymethods]
impl PyPassage {
    #[new]
    fn new(id: String, text: String) -> Self {
        Self { id, text }
    }

    fn __repr__(&self) -> String {
        format!("Passage(id={:?}, text_len={})", self.id, self.text.len())
    }
}

impl From<&PyPassage> for corpus::Passage {
    fn from(p: &PyPassage) -> Self {
        corpus::Passage {
            id: p.id.clone(),
            text: p.text.clone(),
        }
    }
}

/// One multiple-choice question.
#[pyclass(name = "McqItem", from_py_object)]
#[derive(Clone)]
struct PyMcqItem {
    #[pyo3(get, set)]
    id: String,
    #[pyo3(get, set)]
    stem: String,
    #[pyo3(get, set)]
    options: Vec<String>,
    #[pyo3(get, set)]
    correct_index: usize,
    #[pyo3(get, set)]
    selection_rates: Option<Vec<f64>>,
}

#[pymethods]
impl PyMcqItem {
    #[new]
    #[pyo3(signature = (id, stem, options, correct_index, selection_rates=None))]
    fn new(
        id: String,
        stem: String,
        options: Vec<String>,
        correct_index: usize,
        selection_rates: Option<Vec<f64>>,
    ) -> PyResult<Self> {
        let item = corpus::McqItem {
            id,
            stem,
            options,
            correct_index,
            selection_rates,
        };
        item.validate().map_err(value_err)?;
        Ok(Self {
            id: item.id,
            stem: item.stem,
            options: item.options,
            correct_index: item.correct_index,
            selection_rates: item.selection_rates,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "McqItem(id={:?}, options={}, correct_index={})",
            self.id,
            self.options.len(),
            self.correct_index
        )
    }
}

impl From<&PyMcqItem> for corpus::McqItem {
    fn from(item: &PyMcqItem) -> Self {
        corpus::McqItem {
            id: item.id.clone(),
            stem: item.stem.clone(),
            options: item.options.clone(),
            correct_index: item.correct_index,
            selection_rates: item.selection_rates.clone(),
        }
    }
}

/// Per-option retrieved-passage counts for one item.
#[pyclass(name = "AvailabilityProfile", from_py_object)]
#[derive(Clone)]
struct PyAvailabilityProfile {
    #[pyo3(get)]
    item_id: String,
    #[pyo3(get)]
    counts: Vec<u32>,
    #[pyo3(get)]
    k_effective: u32,
}

#[pymethods]
impl PyAvailabilityProfile {
    /// Counts as proportions of k_effective.
    fn proportions(&self) -> Vec<f64> {
        self.as_profile().proportions()
    }

    fn __repr__(&self) -> String {
        format!(
            "AvailabilityProfile(item_id={:?}, counts={:?})",
            self.item_id, self.counts
        )
    }
}

impl PyAvailabilityProfile {
    fn as_profile(&self) -> AvailabilityProfile {
        AvailabilityProfile {
            item_id: self.item_id.clone(),
            counts: self.counts.clone(),
            k_effective: self.k_effective,
        }
    }
}

/// An exact brute-force cosine index over hashed passage embeddings.
/// Construction remembers the hashing configuration so queries and
/// availability measurements embed with the same provider.
#[pyclass(name = "VectorIndex")]
struct PyVectorIndex {
    index: vecindex::VectorIndex,
    dimension: usize,
    seed: u64,
}

impl PyVectorIndex {
    fn provider(&self) -> PyResult<EmbeddingProvider> {
        EmbeddingProvider::new(EmbeddingProviderConfig::hashing(self.dimension, self.seed))
            .map_err(value_err)
    }
}

#[pymethods]
impl PyVectorIndex {
    /// Embeds the passages with the deterministic hashing embedder and
    /// builds the index.
    #[staticmethod]
    #[pyo3(signature = (passages, dimension=256, seed=42))]
    fn build(passages: Vec<PyPassage>, dimension: usize, seed: u64) -> PyResult<Self> {
        let provider =
            EmbeddingProvider::new(EmbeddingProviderConfig::hashing(dimension, seed))
                .map_err(value_err)?;
        let native: Vec<corpus::Passage> = passages.iter().map(Into::into).collect();
        let index = vecindex::VectorIndex::build(&native, &provider).map_err(value_err)?;
        Ok(Self {
            index,
            dimension,
            seed,
        })
    }

    /// Loads a persisted index. The hashing seed is not stored in the
    /// file, so it must be passed again for query embedding to match.
    #[staticmethod]
    #[pyo3(signature = (path, seed=42))]
    fn load(path: PathBuf, seed: u64) -> PyResult<Self> {
        let index = vecindex::VectorIndex::load(&path).map_err(io_err)?;
        let dimension = index.dimension();
        Ok(Self {
            index,
            dimension,
            seed,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.index.save(&path).map_err(io_err)
    }

    fn __len__(&self) -> usize {
        self.index.len()
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.dimension
    }

    /// Exact top-k for a text query: list of (passage_id, score).
    fn top_k(&self, query: &str, k: usize) -> PyResult<Vec<(String, f64)>> {
        let provider = self.provider()?;
        let query_vec = provider.embed_one(query).map_err(value_err)?;
        let hits = self.index.top_k(&query_vec, k).map_err(value_err)?;
        Ok(hits
            .into_iter()
            .map(|h| (h.passage_id, h.score))
            .collect())
    }

    /// Measures one item: retrieve k passages and assign each to its most
    /// similar option.
    #[pyo3(signature = (item, k=20, mode="out_of_context"))]
    fn measure_item(
        &self,
        item: &PyMcqItem,
        k: usize,
        mode: &str,
    ) -> PyResult<PyAvailabilityProfile> {
        let provider = self.provider()?;
        let config = AvailabilityConfig {
            k,
            mode: parse_mode(mode)?,
        };
        let profile =
            availability::measure_item(&item.into(), &self.index, &provider, config)
                .map_err(value_err)?;
        Ok(PyAvailabilityProfile {
            item_id: profile.item_id,
            counts: profile.counts,
            k_effective: profile.k_effective,
        })
    }

    /// Measures a whole dataset; returns (profiles, failures) where
    /// failures is a list of (item_id, message).
    #[pyo3(signature = (items, k=20, mode="out_of_context"))]
    #[allow(clippy::type_complexity)]
    fn measure_dataset(
        &self,
        items: Vec<PyMcqItem>,
        k: usize,
        mode: &str,
    ) -> PyResult<(Vec<PyAvailabilityProfile>, Vec<(String, String)>)> {
        let provider = self.provider()?;
        let config = AvailabilityConfig {
            k,
            mode: parse_mode(mode)?,
        };
        let native: Vec<corpus::McqItem> = items.iter().map(Into::into).collect();
        let measurement = availability::measure_dataset(&native, &self.index, &provider, config);
        Ok((
            measurement
                .profiles
                .into_iter()
                .map(|p| PyAvailabilityProfile {
                    item_id: p.item_id,
                    counts: p.counts,
                    k_effective: p.k_effective,
                })
                .collect(),
            measurement
                .failures
                .into_iter()
                .map(|f| (f.item_id, f.message))
                .collect(),
        ))
    }
}

/// Loads a passage corpus from a line-delimited file.
#[pyfunction]
fn load_corpus(path: PathBuf) -> PyResult<Vec<PyPassage>> {
    let passages = corpus::load_corpus(&path).map_err(io_err)?;
    Ok(passages
        .into_iter()
        .map(|p| PyPassage {
            id: p.id,
            text: p.text,
        })
        .collect())
}

/// Loads and validates an MCQ dataset from a line-delimited file.
#[pyfunction]
fn load_mcq_dataset(path: PathBuf) -> PyResult<Vec<PyMcqItem>> {
    let items = corpus::load_mcq_dataset(&path).map_err(io_err)?;
    Ok(items
        .into_iter()
        .map(|i| PyMcqItem {
            id: i.id,
            stem: i.stem,
            options: i.options,
            correct_index: i.correct_index,
            selection_rates: i.selection_rates,
        })
        .collect())
}

/// Deterministic hashing embeddings: one unit vector per text.
#[pyfunction]
#[pyo3(signature = (texts, dimension=256, seed=42))]
fn hash_embed(texts: Vec<String>, dimension: usize, seed: u64) -> PyResult<Vec<Vec<f32>>> {
    let provider = EmbeddingProvider::new(EmbeddingProviderConfig::hashing(dimension, seed))
        .map_err(value_err)?;
    let vectors = provider.embed_batch(&texts).map_err(value_err)?;
    Ok(vectors.into_iter().map(|v| v.values().to_vec()).collect())
}

/// Cosine similarity of two equal-length vectors (normalized first).
#[pyfunction]
fn cosine(a: Vec<f32>, b: Vec<f32>) -> PyResult<f64> {
    let va = EmbeddingVector::normalized(a).ok_or_else(|| value_err("zero vector"))?;
    let vb = EmbeddingVector::normalized(b).ok_or_else(|| value_err("zero vector"))?;
    vec_cosine(&va, &vb).map_err(value_err)
}

/// The retrieval query for an item under "out_of_context" or "in_context".
#[pyfunction]
fn build_query(item: &PyMcqItem, mode: &str) -> PyResult<String> {
    Ok(availability::build_query(&item.into(), parse_mode(mode)?))
}

/// Friedman test over an items x options matrix:
/// returns (statistic, df, p_value).
#[pyfunction]
fn friedman_test(matrix: Vec<Vec<f64>>) -> PyResult<(f64, usize, f64)> {
    let result = stats::friedman_test(&matrix).map_err(value_err)?;
    Ok((result.statistic, result.df, result.p_value))
}

/// Two-sided Wilcoxon signed-rank test: returns (w_plus, w_minus, p_value).
#[pyfunction]
fn wilcoxon_signed_rank(x: Vec<f64>, y: Vec<f64>) -> PyResult<(f64, f64, f64)> {
    let result = stats::wilcoxon_signed_rank(&x, &y).map_err(value_err)?;
    Ok((result.w_plus, result.w_minus, result.p_value))
}

/// Matched-pairs rank-biserial correlation.
#[pyfunction]
fn rank_biserial(w_plus: f64, w_minus: f64) -> f64 {
    stats::rank_biserial(w_plus, w_minus).value
}

/// Holm-Bonferroni adjustment: returns (adjusted, reject).
#[pyfunction]
#[pyo3(signature = (p_values, alpha=0.01))]
fn holm_bonferroni(p_values: Vec<f64>, alpha: f64) -> PyResult<(Vec<f64>, Vec<bool>)> {
    let result = stats::holm_bonferroni(&p_values, alpha).map_err(value_err)?;
    Ok((result.adjusted, result.reject))
}

/// Dirichlet-Multinomial posterior comparison from pooled per-role counts
/// (index 0 = correct role). Returns a dict with pd, mean_diff, hdi_low,
/// hdi_high.
#[pyfunction]
#[pyo3(signature = (pooled, alpha_prior=1.0, samples=20_000, seed=42))]
fn dirichlet_compare<'py>(
    py: Python<'py>,
    pooled: Vec<u64>,
    alpha_prior: f64,
    samples: usize,
    seed: u64,
) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let result = stats::dirichlet_compare_pooled(&pooled, alpha_prior, samples, seed)
        .map_err(value_err)?;
    let dict = pyo3::types::PyDict::new(py);
    dict.set_item("pd", result.pd)?;
    dict.set_item("mean_diff", result.mean_diff)?;
    dict.set_item("hdi_low", result.hdi_low)?;
    dict.set_item("hdi_high", result.hdi_high)?;
    dict.set_item("samples", result.samples)?;
    dict.set_item("seed", result.seed)?;
    Ok(dict)
}

/// Narrowest contiguous interval holding `mass` of the samples.
#[pyfunction]
#[pyo3(signature = (samples, mass=0.95))]
fn hdi(samples: Vec<f64>, mass: f64) -> PyResult<(f64, f64)> {
    if samples.is_empty() {
        return Err(value_err("hdi of an empty sample set"));
    }
    if !(mass > 0.0 && mass <= 1.0) {
        return Err(value_err("mass must be in (0, 1]"));
    }
    Ok(stats::hdi(&samples, mass))
}

/// Scores the most-available guessing strategy. Returns a dict with
/// accuracy, baseline, delta, item_count.
#[pyfunction]
#[pyo3(signature = (profiles, items, mode="out_of_context", k=20, dataset_id="dataset"))]
fn score_strategy<'py>(
    py: Python<'py>,
    profiles: Vec<PyAvailabilityProfile>,
    items: Vec<PyMcqItem>,
    mode: &str,
    k: usize,
    dataset_id: &str,
) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let native_profiles: Vec<AvailabilityProfile> =
        profiles.iter().map(|p| p.as_profile()).collect();
    let native_items: Vec<corpus::McqItem> = items.iter().map(Into::into).collect();
    let report = strategy::score_strategy(
        dataset_id,
        parse_mode(mode)?,
        k,
        &native_profiles,
        &native_items,
    )
    .map_err(value_err)?;
    let dict = pyo3::types::PyDict::new(py);
    dict.set_item("dataset_id", report.dataset_id)?;
    dict.set_item("mode", report.mode.slug())?;
    dict.set_item("k", report.k)?;
    dict.set_item("accuracy", report.accuracy)?;
    dict.set_item("baseline", report.baseline)?;
    dict.set_item("delta", report.delta)?;
    dict.set_item("item_count", report.item_count)?;
    Ok(dict)
}

/// The distractor-generation instruction for (item, n).
#[pyfunction]
fn render_generation_prompt(item: &PyMcqItem, n: usize) -> String {
    llmops::render_generation_prompt(&llmops::DistractorRequest {
        item: item.into(),
        n,
    })
}

/// Extracts the first boxed{...} span, split on vertical bars.
#[pyfunction]
fn parse_boxed(response: &str) -> PyResult<Vec<String>> {
    llmops::parse_boxed(response).map_err(value_err)
}

/// Validates a candidate distractor set; raises ValueError on the first
/// repair trigger (wrong count, contains answer, duplicates).
#[pyfunction]
fn validate_distractors(candidates: Vec<String>, item: &PyMcqItem, n: usize) -> PyResult<()> {
    llmops::validate_distractors(&candidates, &item.into(), n).map_err(value_err)
}

/// The deterministic option permutation shown for (seed, item_id, rep).
#[pyfunction]
fn presentation_order(seed: u64, item_id: &str, repetition: u32, count: usize) -> Vec<usize> {
    llmops::presentation_order(seed, item_id, repetition, count)
}

#[pymodule]
fn optavail_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyPassage>()?;
    m.add_class::<PyMcqItem>()?;
    m.add_class::<PyAvailabilityProfile>()?;
    m.add_class::<PyVectorIndex>()?;
    m.add_function(wrap_pyfunction!(load_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(load_mcq_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(hash_embed, m)?)?;
    m.add_function(wrap_pyfunction!(cosine, m)?)?;
    m.add_function(wrap_pyfunction!(build_query, m)?)?;
    m.add_function(wrap_pyfunction!(friedman_test, m)?)?;
    m.add_function(wrap_pyfunction!(wilcoxon_signed_rank, m)?)?;
    m.add_function(wrap_pyfunction!(rank_biserial, m)?)?;
    m.add_function(wrap_pyfunction!(holm_bonferroni, m)?)?;
    m.add_function(wrap_pyfunction!(dirichlet_compare, m)?)?;
    m.add_function(wrap_pyfunction!(hdi, m)?)?;
    m.add_function(wrap_pyfunction!(score_strategy, m)?)?;
    m.add_function(wrap_pyfunction!(render_generation_prompt, m)?)?;
    m.add_function(wrap_pyfunction!(parse_boxed, m)?)?;
    m.add_function(wrap_pyfunction!(validate_distractors, m)?)?;
    m.add_function(wrap_pyfunction!(presentation_order, m)?)?;
    Ok(())
}
