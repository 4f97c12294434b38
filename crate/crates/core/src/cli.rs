//! Command-line orchestration: `index`, `measure`, `analyze`, `generate`,
//! and `evaluate`, each writing a manifest (inputs, checksums, seeds,
//! versions) next to its outputs so a run can be reproduced exactly with
//! the hashing provider.
//!
//! Exit codes: 0 success, 1 validation error, 2 partial failure,
//! 3 external-service failure.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::availability::{
    load_profiles, measure_dataset, save_profiles, AvailabilityConfig, ItemFailure, QueryMode,
};
use crate::corpus::{
    corpus_stats, load_corpus, load_mcq_dataset, save_mcq_dataset, CorpusError, McqItem,
};
use crate::embedding::{EmbeddingError, EmbeddingProvider, EmbeddingProviderConfig, ProviderKind};
use crate::jsonl;
use crate::llmops::{
    dataset_accuracy, evaluate_test_taker, generate_distractors, ChatClient, ChatClientConfig,
    DistractorRequest, HttpChatClient, LlmError, ScriptedChatClient, TestTakerResult,
};
use crate::report::{
    analyze, write_means_csv, write_pairwise_csv, write_strategy_csv, AnalysisParams,
    AnalysisReport, ProfileFileProvenance, ProfileSet, Provenance, ReportError,
};
use crate::vecindex::{IndexError, VectorIndex};

pub const TOOL_NAME: &str = "optavail";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Records(#[from] jsonl::ReadError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Partial(String),
    #[error("{0}")]
    External(String),
}

impl CliError {
    /// Exit-code convention: 1 validation, 2 partial failure, 3 external
    /// service failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Partial(_) => 2,
            CliError::External(_) => 3,
            CliError::Embedding(EmbeddingError::Transport { .. }) => 3,
            CliError::Index(IndexError::Provider {
                source: EmbeddingError::Transport { .. },
                ..
            }) => 3,
            CliError::Llm(LlmError::Transport(_)) => 3,
            _ => 1,
        }
    }
}

// ---------------------------------------------------------------------
// Argument structures
// ---------------------------------------------------------------------

#[derive(Debug, Parser)]
#[command(
    name = TOOL_NAME,
    version = TOOL_VERSION,
    about = "Measure the corpus availability of MCQ options and run the downstream analysis"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Embed a passage corpus and persist the vector index.
    Index(IndexCmd),
    /// Measure availability profiles for an MCQ dataset against an index.
    Measure(MeasureCmd),
    /// Run the statistical battery and strategy scoring over profile files.
    Analyze(AnalyzeCmd),
    /// Generate alternative distractors for every item via a chat model.
    Generate(GenerateCmd),
    /// Evaluate a chat model as a test taker with shuffled option orders.
    Evaluate(EvaluateCmd),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProviderArg {
    Hashing,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    OutOfContext,
    InContext,
}

impl From<ModeArg> for QueryMode {
    fn from(value: ModeArg) -> Self {
        match value {
            ModeArg::OutOfContext => QueryMode::OutOfContext,
            ModeArg::InContext => QueryMode::InContext,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ProviderArgs {
    /// Embedding backend.
    #[arg(long, value_enum, default_value = "hashing")]
    pub provider: ProviderArg,
    /// Embedding dimension (minimum 8).
    #[arg(long, default_value_t = 256)]
    pub dimension: usize,
    /// Seed for the hashing provider.
    #[arg(long, default_value_t = 42)]
    pub embed_seed: u64,
    /// Texts per embedding request.
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    /// Endpoint URL (required for the remote provider).
    #[arg(long)]
    pub endpoint: Option<String>,
}

impl ProviderArgs {
    pub fn to_config(&self) -> EmbeddingProviderConfig {
        EmbeddingProviderConfig {
            kind: match self.provider {
                ProviderArg::Hashing => ProviderKind::Hashing,
                ProviderArg::Remote => ProviderKind::Remote,
            },
            dimension: self.dimension,
            endpoint: self.endpoint.clone(),
            batch_size: self.batch_size,
            seed: self.embed_seed,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ClientArgs {
    /// Chat backend: a scripted-responses file or an HTTP service.
    #[arg(long, value_enum, default_value = "scripted")]
    pub client: ClientArg,
    /// Scripted-responses file (one {"text": ...} record per line).
    #[arg(long)]
    pub script: Option<PathBuf>,
    /// Chat endpoint URL (required for the http client).
    #[arg(long)]
    pub chat_endpoint: Option<String>,
    /// Model name sent to the chat service.
    #[arg(long, default_value = "")]
    pub model: String,
    /// Sampling temperature.
    #[arg(long, default_value_t = 0.7)]
    pub temperature: f64,
    /// Generation attempts per item before giving up.
    #[arg(long, default_value_t = 5)]
    pub max_retries: u32,
    /// Request timeout in seconds.
    #[arg(long, default_value_t = 60)]
    pub timeout: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClientArg {
    Scripted,
    Http,
}

impl ClientArgs {
    fn build(&self) -> Result<Box<dyn ChatClient>, CliError> {
        match self.client {
            ClientArg::Scripted => {
                let path = self.script.as_ref().ok_or_else(|| {
                    CliError::Validation("--script is required for the scripted client".into())
                })?;
                Ok(Box::new(
                    ScriptedChatClient::from_file(path)?.with_max_retries(self.max_retries),
                ))
            }
            ClientArg::Http => {
                let endpoint = self.chat_endpoint.clone().ok_or_else(|| {
                    CliError::Validation("--chat-endpoint is required for the http client".into())
                })?;
                let config = ChatClientConfig {
                    endpoint,
                    model_name: self.model.clone(),
                    temperature: self.temperature,
                    max_retries: self.max_retries,
                    timeout_secs: self.timeout,
                    seed: None,
                };
                Ok(Box::new(HttpChatClient::new(config)?))
            }
        }
    }
}

#[derive(Debug, Args)]
pub struct IndexCmd {
    /// Passage corpus file (one {"id", "text"} record per line).
    #[arg(long)]
    pub corpus: PathBuf,
    /// Output index file.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub provider: ProviderArgs,
}

#[derive(Debug, Args)]
pub struct MeasureCmd {
    /// MCQ dataset file.
    #[arg(long)]
    pub mcqs: PathBuf,
    /// Vector index produced by `index`.
    #[arg(long)]
    pub index: PathBuf,
    /// Output directory for profile files.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Query modes to measure.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = vec![ModeArg::OutOfContext, ModeArg::InContext])]
    pub modes: Vec<ModeArg>,
    /// Passage counts to retrieve per item.
    #[arg(long = "ks", value_delimiter = ',', default_values_t = vec![20, 60])]
    pub ks: Vec<usize>,
    #[command(flatten)]
    pub provider: ProviderArgs,
}

#[derive(Debug, Args)]
pub struct AnalyzeCmd {
    /// MCQ dataset the profiles were measured from.
    #[arg(long)]
    pub mcqs: PathBuf,
    /// Profile files (repeatable). Defaults to profiles_*.jsonl in --profiles-dir.
    #[arg(long = "profiles")]
    pub profiles: Vec<PathBuf>,
    /// Directory containing profile files from `measure`.
    #[arg(long)]
    pub profiles_dir: Option<PathBuf>,
    /// Output directory for the report and CSV plot data.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Dataset label in the report (defaults to the MCQ file stem).
    #[arg(long)]
    pub dataset_id: Option<String>,
    /// Family-wise error rate for Holm-Bonferroni.
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    /// Dirichlet prior concentration.
    #[arg(long, default_value_t = 1.0)]
    pub alpha_prior: f64,
    /// Posterior Monte Carlo sample count.
    #[arg(long, default_value_t = 20_000)]
    pub bayes_samples: usize,
    /// Posterior Monte Carlo seed.
    #[arg(long, default_value_t = 42)]
    pub bayes_seed: u64,
}

#[derive(Debug, Args)]
pub struct GenerateCmd {
    /// MCQ dataset whose distractors are replaced.
    #[arg(long)]
    pub mcqs: PathBuf,
    /// Number of distractors to generate per item.
    #[arg(long)]
    pub n: usize,
    /// Output directory (generated.jsonl + skipped.jsonl).
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub client: ClientArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateCmd {
    /// MCQ dataset to answer.
    #[arg(long)]
    pub mcqs: PathBuf,
    /// Output directory (results.jsonl + summary files).
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Presentations per item.
    #[arg(long, default_value_t = 10)]
    pub repetitions: u32,
    /// Seed for the option-order shuffles.
    #[arg(long, default_value_t = 271_828)]
    pub shuffle_seed: u64,
    #[command(flatten)]
    pub client: ClientArgs,
}

// ---------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FileDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(hex_digest(&bytes))
}

fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn digest(role: &str, path: &Path) -> Result<FileDigest, CliError> {
    Ok(FileDigest {
        role: role.to_string(),
        path: path.display().to_string(),
        sha256: sha256_file(path)?,
    })
}

fn write_manifest(path: &Path, manifest: &Manifest) -> Result<(), CliError> {
    write_json(path, manifest)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut body = serde_json::to_string_pretty(value).expect("serializable value");
    body.push('\n');
    fs::write(path, body).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn ensure_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn profile_file_name(mode: QueryMode, k: usize) -> String {
    format!("profiles_{}_k{}.jsonl", mode.slug(), k)
}

// ---------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------

pub fn cmd_index(cmd: &IndexCmd) -> Result<(), CliError> {
    let config = cmd.provider.to_config();
    let provider = EmbeddingProvider::new(config.clone())?;
    let passages = load_corpus(&cmd.corpus)?;
    let stats = corpus_stats(&passages);
    let index = VectorIndex::build(&passages, &provider)?;
    index.save(&cmd.out)?;

    let manifest = Manifest {
        tool: TOOL_NAME.into(),
        version: TOOL_VERSION.into(),
        command: "index".into(),
        config: serde_json::to_value(&config).expect("serializable config"),
        inputs: vec![digest("corpus", &cmd.corpus)?],
        outputs: vec![cmd.out.display().to_string()],
    };
    let manifest_path = PathBuf::from(format!("{}.manifest.json", cmd.out.display()));
    write_manifest(&manifest_path, &manifest)?;

    println!(
        "indexed {} passages (dimension {}, mean text length {:.1}) -> {}",
        index.len(),
        index.dimension(),
        stats.mean_text_length,
        cmd.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct MeasureFailureRecord<'a> {
    mode: QueryMode,
    k: usize,
    #[serde(flatten)]
    failure: &'a ItemFailure,
}

pub fn cmd_measure(cmd: &MeasureCmd) -> Result<(), CliError> {
    let config = cmd.provider.to_config();
    let provider = EmbeddingProvider::new(config.clone())?;
    let items = load_mcq_dataset(&cmd.mcqs)?;
    let index = VectorIndex::load(&cmd.index)?;
    if index.dimension() != provider.dimension() {
        return Err(CliError::Validation(format!(
            "index dimension {} does not match provider dimension {}",
            index.dimension(),
            provider.dimension()
        )));
    }
    for k in &cmd.ks {
        if *k == 0 {
            return Err(CliError::Validation("--ks values must be >= 1".into()));
        }
    }
    ensure_dir(&cmd.out_dir)?;
    if items.is_empty() {
        log::warn!("{}: empty MCQ dataset, writing empty profiles", cmd.mcqs.display());
    }

    let mut outputs = Vec::new();
    let mut failure_lines = Vec::new();
    let mut total_successes = 0usize;
    for mode_arg in &cmd.modes {
        let mode: QueryMode = (*mode_arg).into();
        for k in &cmd.ks {
            let config = AvailabilityConfig { k: *k, mode };
            let measurement = measure_dataset(&items, &index, &provider, config);
            total_successes += measurement.profiles.len();
            let file = cmd.out_dir.join(profile_file_name(mode, *k));
            save_profiles(&file, &measurement.profiles, config)?;
            println!(
                "measured mode={} k={}: {} profiles, {} failures -> {}",
                mode,
                k,
                measurement.profiles.len(),
                measurement.failures.len(),
                file.display()
            );
            outputs.push(file.display().to_string());
            for failure in &measurement.failures {
                failure_lines.push(serde_json::to_value(MeasureFailureRecord {
                    mode,
                    k: *k,
                    failure,
                })
                .expect("serializable failure"));
            }
        }
    }

    if !failure_lines.is_empty() {
        let errors_path = cmd.out_dir.join("errors.jsonl");
        jsonl::write_records(&errors_path, &failure_lines)?;
        outputs.push(errors_path.display().to_string());
    }

    let manifest = Manifest {
        tool: TOOL_NAME.into(),
        version: TOOL_VERSION.into(),
        command: "measure".into(),
        config: serde_json::json!({
            "provider": config,
            "modes": cmd.modes.iter().map(|m| QueryMode::from(*m).slug()).collect::<Vec<_>>(),
            "ks": cmd.ks,
        }),
        inputs: vec![digest("mcqs", &cmd.mcqs)?, digest("index", &cmd.index)?],
        outputs,
    };
    write_manifest(&cmd.out_dir.join("manifest.json"), &manifest)?;

    if !items.is_empty() && total_successes == 0 {
        return Err(CliError::Partial(format!(
            "all {} items failed in every (mode, k) combination",
            items.len()
        )));
    }
    Ok(())
}

fn discover_profile_files(cmd: &AnalyzeCmd) -> Result<Vec<PathBuf>, CliError> {
    if !cmd.profiles.is_empty() {
        return Ok(cmd.profiles.clone());
    }
    let dir = cmd.profiles_dir.as_ref().ok_or_else(|| {
        CliError::Validation("pass --profiles files or --profiles-dir".into())
    })?;
    let mut found = Vec::new();
    let entries = fs::read_dir(dir).map_err(|source| CliError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    for entry in entries {
        let entry = entry.map_err(|source| CliError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        let name = entry.file_name().to_string_lossy().to_string();
        if name.starts_with("profiles_") && name.ends_with(".jsonl") {
            found.push(entry.path());
        }
    }
    found.sort();
    if found.is_empty() {
        return Err(CliError::Validation(format!(
            "no profiles_*.jsonl files in {}",
            dir.display()
        )));
    }
    Ok(found)
}

/// Pull the index checksum and provider config out of a measure manifest,
/// when one sits next to the profile files.
fn measure_provenance(dir: Option<&Path>) -> (Option<String>, Option<serde_json::Value>) {
    let Some(dir) = dir else {
        return (None, None);
    };
    let Ok(body) = fs::read_to_string(dir.join("manifest.json")) else {
        return (None, None);
    };
    let Ok(manifest) = serde_json::from_str::<Manifest>(&body) else {
        return (None, None);
    };
    let index_sha = manifest
        .inputs
        .into_iter()
        .find(|input| input.role == "index")
        .map(|input| input.sha256);
    let provider = manifest.config.get("provider").cloned();
    (index_sha, provider)
}

pub fn cmd_analyze(cmd: &AnalyzeCmd) -> Result<(), CliError> {
    let items = load_mcq_dataset(&cmd.mcqs)?;
    let files = discover_profile_files(cmd)?;
    ensure_dir(&cmd.out_dir)?;

    let mut sets = Vec::new();
    let mut file_provenance = Vec::new();
    for file in &files {
        let records = load_profiles(file)?;
        if records.is_empty() {
            log::warn!("{}: empty profile file, skipping", file.display());
            continue;
        }
        let mode = records[0].mode;
        let k = records[0].k;
        if records.iter().any(|r| r.mode != mode || r.k != k) {
            return Err(CliError::Validation(format!(
                "{}: mixed (mode, k) within one profile file",
                file.display()
            )));
        }
        file_provenance.push(ProfileFileProvenance {
            path: file.display().to_string(),
            sha256: sha256_file(file)?,
            mode,
            k,
        });
        sets.push(ProfileSet {
            mode,
            k,
            profiles: records.into_iter().map(|r| r.into_profile()).collect(),
        });
    }
    if sets.is_empty() {
        return Err(CliError::Validation("no non-empty profile files".into()));
    }
    sets.sort_by_key(|s| (s.mode, s.k));

    let params = AnalysisParams {
        alpha: cmd.alpha,
        alpha_prior: cmd.alpha_prior,
        bayes_samples: cmd.bayes_samples,
        bayes_seed: cmd.bayes_seed,
    };
    let dataset_id = cmd.dataset_id.clone().unwrap_or_else(|| {
        cmd.mcqs
            .file_stem()
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or_else(|| "dataset".into())
    });
    let (index_sha256, measure_provider) = measure_provenance(cmd.profiles_dir.as_deref());
    let provenance = Provenance {
        tool_version: TOOL_VERSION.into(),
        mcq_path: cmd.mcqs.display().to_string(),
        mcq_sha256: sha256_file(&cmd.mcqs)?,
        profile_files: file_provenance,
        index_sha256,
        measure_provider,
        params: Some(params.clone()),
    };

    let report = analyze(&dataset_id, &items, &sets, &params, provenance)?;

    let report_path = cmd.out_dir.join("report.json");
    write_json(&report_path, &report)?;
    let means_path = cmd.out_dir.join("availability_means.csv");
    write_means_csv(&means_path, &report)?;
    let pairwise_path = cmd.out_dir.join("pairwise.csv");
    write_pairwise_csv(&pairwise_path, &report)?;
    let strategy_path = cmd.out_dir.join("strategy.csv");
    write_strategy_csv(&strategy_path, &report)?;

    let manifest = Manifest {
        tool: TOOL_NAME.into(),
        version: TOOL_VERSION.into(),
        command: "analyze".into(),
        config: serde_json::to_value(&params).expect("serializable params"),
        inputs: {
            let mut inputs = vec![digest("mcqs", &cmd.mcqs)?];
            for file in &files {
                inputs.push(digest("profiles", file)?);
            }
            inputs
        },
        outputs: vec![
            report_path.display().to_string(),
            means_path.display().to_string(),
            pairwise_path.display().to_string(),
            strategy_path.display().to_string(),
        ],
    };
    write_manifest(&cmd.out_dir.join("manifest.json"), &manifest)?;

    print_report_summary(&report);
    Ok(())
}

fn print_report_summary(report: &AnalysisReport) {
    for group in &report.groups {
        println!(
            "{} mode={} k={} options={} items={}: friedman chi2={:.3} p={:.4}, pd={:.4}",
            report.dataset_id,
            group.mode,
            group.k,
            group.option_count,
            group.item_count,
            group.friedman.statistic,
            group.friedman.p_value,
            group.bayes.pd
        );
    }
    for row in &report.strategy {
        println!(
            "{} mode={} k={}: strategy accuracy {:.4} vs baseline {:.4} ({:+.4})",
            report.dataset_id, row.mode, row.k, row.accuracy, row.baseline, row.delta
        );
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SkipRecord {
    item_id: String,
    message: String,
}

pub fn cmd_generate(cmd: &GenerateCmd) -> Result<(), CliError> {
    if cmd.n == 0 {
        return Err(CliError::Validation("--n must be >= 1".into()));
    }
    if cmd.n + 1 > crate::corpus::MAX_OPTIONS {
        return Err(CliError::Validation(format!(
            "--n {} would exceed {} options per item",
            cmd.n,
            crate::corpus::MAX_OPTIONS
        )));
    }
    let items = load_mcq_dataset(&cmd.mcqs)?;
    let client = cmd.client.build()?;
    ensure_dir(&cmd.out_dir)?;

    let mut generated = Vec::new();
    let mut skipped = Vec::new();
    let mut abort: Option<CliError> = None;
    for item in &items {
        let request = DistractorRequest {
            item: item.clone(),
            n: cmd.n,
        };
        match generate_distractors(&request, client.as_ref()) {
            Ok(outcome) => {
                // Correct answer first, generated distractors after: the
                // rewritten item is position-normalised and rate-free.
                let mut options = Vec::with_capacity(cmd.n + 1);
                options.push(item.options[item.correct_index].clone());
                options.extend(outcome.distractors);
                generated.push(McqItem {
                    id: item.id.clone(),
                    stem: item.stem.clone(),
                    options,
                    correct_index: 0,
                    selection_rates: None,
                });
            }
            Err(LlmError::GenerationFailed {
                attempts,
                last_violation,
            }) => skipped.push(SkipRecord {
                item_id: item.id.clone(),
                message: format!("after {attempts} attempts: {last_violation}"),
            }),
            Err(err) => {
                abort = Some(err.into());
                break;
            }
        }
    }

    // Outputs are written even on abort so partial progress survives.
    let generated_path = cmd.out_dir.join("generated.jsonl");
    for item in &generated {
        item.validate()?;
    }
    save_mcq_dataset(&generated_path, &generated)?;
    let skipped_path = cmd.out_dir.join("skipped.jsonl");
    jsonl::write_records(&skipped_path, &skipped)?;

    let manifest = Manifest {
        tool: TOOL_NAME.into(),
        version: TOOL_VERSION.into(),
        command: "generate".into(),
        config: serde_json::json!({
            "n": cmd.n,
            "client": match cmd.client.client {
                ClientArg::Scripted => "scripted",
                ClientArg::Http => "http",
            },
            "model": cmd.client.model,
            "temperature": cmd.client.temperature,
            "max_retries": cmd.client.max_retries,
        }),
        inputs: vec![digest("mcqs", &cmd.mcqs)?],
        outputs: vec![
            generated_path.display().to_string(),
            skipped_path.display().to_string(),
        ],
    };
    write_manifest(&cmd.out_dir.join("manifest.json"), &manifest)?;

    println!(
        "generated {} items, skipped {} -> {}",
        generated.len(),
        skipped.len(),
        generated_path.display()
    );
    if let Some(err) = abort {
        return Err(err);
    }
    if !skipped.is_empty() {
        return Err(CliError::Partial(format!(
            "{} of {} items exhausted their generation retries",
            skipped.len(),
            items.len()
        )));
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct EvaluationSummary {
    dataset_id: String,
    item_count: usize,
    repetitions: u32,
    shuffle_seed: u64,
    accuracy: f64,
}

pub fn cmd_evaluate(cmd: &EvaluateCmd) -> Result<(), CliError> {
    if cmd.repetitions == 0 {
        return Err(CliError::Validation("--repetitions must be >= 1".into()));
    }
    let items = load_mcq_dataset(&cmd.mcqs)?;
    let client = cmd.client.build()?;
    ensure_dir(&cmd.out_dir)?;

    // Item-at-a-time so partial results survive a client failure.
    let mut results: Vec<TestTakerResult> = Vec::new();
    let mut abort: Option<CliError> = None;
    for item in &items {
        match evaluate_test_taker(
            std::slice::from_ref(item),
            client.as_ref(),
            cmd.repetitions,
            cmd.shuffle_seed,
        ) {
            Ok(mut item_results) => results.append(&mut item_results),
            Err(err) => {
                abort = Some(err.into());
                break;
            }
        }
    }

    let results_path = cmd.out_dir.join("results.jsonl");
    jsonl::write_records(&results_path, &results)?;
    let dataset_id = cmd
        .mcqs
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "dataset".into());
    let summary = EvaluationSummary {
        dataset_id: dataset_id.clone(),
        item_count: results.len(),
        repetitions: cmd.repetitions,
        shuffle_seed: cmd.shuffle_seed,
        accuracy: dataset_accuracy(&results),
    };
    let summary_path = cmd.out_dir.join("summary.json");
    write_json(&summary_path, &summary)?;
    let summary_csv = cmd.out_dir.join("summary.csv");
    fs::write(
        &summary_csv,
        format!(
            "dataset_id,item_count,repetitions,accuracy\n{},{},{},{:.6}\n",
            dataset_id, summary.item_count, summary.repetitions, summary.accuracy
        ),
    )
    .map_err(|source| CliError::Io {
        path: summary_csv.display().to_string(),
        source,
    })?;

    let manifest = Manifest {
        tool: TOOL_NAME.into(),
        version: TOOL_VERSION.into(),
        command: "evaluate".into(),
        config: serde_json::json!({
            "repetitions": cmd.repetitions,
            "shuffle_seed": cmd.shuffle_seed,
            "client": match cmd.client.client {
                ClientArg::Scripted => "scripted",
                ClientArg::Http => "http",
            },
            "model": cmd.client.model,
            "temperature": cmd.client.temperature,
        }),
        inputs: vec![digest("mcqs", &cmd.mcqs)?],
        outputs: vec![
            results_path.display().to_string(),
            summary_path.display().to_string(),
            summary_csv.display().to_string(),
        ],
    };
    write_manifest(&cmd.out_dir.join("manifest.json"), &manifest)?;

    println!(
        "evaluated {} of {} items x {} repetitions: accuracy {:.4}",
        results.len(),
        items.len(),
        cmd.repetitions,
        summary.accuracy
    );
    if let Some(err) = abort {
        let code_hint = err.to_string();
        return Err(CliError::External(format!(
            "evaluation aborted, partial results preserved: {code_hint}"
        )));
    }
    Ok(())
}

/// Parses argv, runs the selected command, and maps errors onto the exit
/// code convention.
pub fn run() -> i32 {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Index(cmd) => cmd_index(cmd),
        Command::Measure(cmd) => cmd_measure(cmd),
        Command::Analyze(cmd) => cmd_analyze(cmd),
        Command::Generate(cmd) => cmd_generate(cmd),
        Command::Evaluate(cmd) => cmd_evaluate(cmd),
    };
    match result {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}
