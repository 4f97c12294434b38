//! LLM-facing procedures: distractor generation (prompt rendering, boxed
//! output parsing, validation, bounded retry) and test-taker evaluation
//! with deterministically shuffled option orders.
//!
//! Everything talks to a chat backend through the [`ChatClient`] trait —
//! one `complete(prompt) -> text` call. `HttpChatClient` reaches a real
//! service; `ScriptedChatClient` replays canned responses for tests and
//! offline runs. Requests toward a client run one at a time so scripted
//! runs replay identically.

use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{fold_option, McqItem};
use crate::embedding::fnv1a64;
use crate::jsonl;

/// Environment variable holding the bearer token for the HTTP chat client.
pub const CHAT_TOKEN_ENV: &str = "OPTAVAIL_CHAT_TOKEN";

/// Option letters presented to test-taker LLMs, covering up to 8 options.
const OPTION_LETTERS: [char; 8] = ['A', 'B', 'C', 'D', 'E', 'F', 'G', 'H'];

/// Connection and sampling settings for a chat backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatClientConfig {
    pub endpoint: String,
    pub model_name: String,
    pub temperature: f64,
    pub max_retries: u32,
    pub timeout_secs: u64,
    /// Only meaningful for mock clients.
    pub seed: Option<u64>,
}

impl Default for ChatClientConfig {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            model_name: String::new(),
            temperature: 0.7,
            max_retries: 5,
            timeout_secs: 60,
            seed: None,
        }
    }
}

/// Ask a model for `n` alternative distractors for an item.
#[derive(Debug, Clone)]
pub struct DistractorRequest {
    pub item: McqItem,
    pub n: usize,
}

/// A successful generation: the accepted distractors, how many attempts it
/// took, and every raw response for auditing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerationOutcome {
    pub distractors: Vec<String>,
    pub attempts: u32,
    pub raw_responses: Vec<String>,
}

/// Accuracy of one item over repeated shuffled presentations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestTakerResult {
    pub item_id: String,
    pub repetitions: u32,
    pub correct_count: u32,
    pub accuracy: f64,
}

/// Why a candidate distractor set was rejected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    WrongCount { expected: usize, got: usize },
    ContainsAnswer { candidate: String },
    Duplicate { candidate: String },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::WrongCount { expected, got } => {
                write!(f, "wrong distractor count: expected {expected}, got {got}")
            }
            Violation::ContainsAnswer { candidate } => {
                write!(f, "correct answer presented as distractor: {candidate:?}")
            }
            Violation::Duplicate { candidate } => {
                write!(f, "repeated distractor: {candidate:?}")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("no boxed{{...}} span in response")]
    NoBoxedSpan,
    #[error("chat request failed: {0}")]
    Transport(String),
    #[error("scripted client exhausted its {0} responses")]
    ScriptExhausted(usize),
    #[error("generation failed after {attempts} attempts; last violation: {last_violation}")]
    GenerationFailed { attempts: u32, last_violation: String },
    #[error("distractor request needs n >= 1")]
    ZeroDistractors,
    #[error(transparent)]
    ScriptFile(#[from] jsonl::ReadError),
}

/// The chat backend contract: one completion call. `max_retries` bounds the
/// render/call/parse/validate loop in [`generate_distractors`].
pub trait ChatClient: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, LlmError>;

    fn max_retries(&self) -> u32 {
        5
    }
}

/// HTTP chat backend: POST {"model", "prompt", "temperature"} and read back
/// {"text"}. The bearer token, when needed, comes from `OPTAVAIL_CHAT_TOKEN`.
pub struct HttpChatClient {
    config: ChatClientConfig,
    http: reqwest::blocking::Client,
    token: Option<String>,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    temperature: f64,
}

#[derive(Deserialize)]
struct ChatResponse {
    text: String,
}

impl HttpChatClient {
    pub fn new(config: ChatClientConfig) -> Result<Self, LlmError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|err| LlmError::Transport(err.to_string()))?;
        let token = std::env::var(CHAT_TOKEN_ENV).ok();
        Ok(Self {
            config,
            http,
            token,
        })
    }
}

impl ChatClient for HttpChatClient {
    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        let mut request = self.http.post(&self.config.endpoint).json(&ChatRequest {
            model: &self.config.model_name,
            prompt,
            temperature: self.config.temperature,
        });
        if let Some(token) = &self.token {
            request = request.bearer_auth(token);
        }
        let response = request
            .send()
            .and_then(|r| r.error_for_status())
            .map_err(|err| LlmError::Transport(err.to_string()))?;
        let body: ChatResponse = response
            .json()
            .map_err(|err| LlmError::Transport(format!("invalid response body: {err}")))?;
        Ok(body.text)
    }

    fn max_retries(&self) -> u32 {
        self.config.max_retries
    }
}

#[derive(Deserialize, Serialize)]
struct ScriptLine {
    text: String,
}

/// Replays a fixed sequence of responses, one per `complete` call. Running
/// past the end is an error, so tests notice unexpected extra calls.
pub struct ScriptedChatClient {
    responses: Vec<String>,
    cursor: Mutex<usize>,
    max_retries: u32,
}

impl ScriptedChatClient {
    pub fn new(responses: Vec<String>) -> Self {
        Self {
            responses,
            cursor: Mutex::new(0),
            max_retries: 5,
        }
    }

    /// Loads a script from a line-delimited file of {"text": ...} records.
    pub fn from_file(path: &Path) -> Result<Self, LlmError> {
        let lines: Vec<ScriptLine> = jsonl::read_records(path)?;
        Ok(Self::new(lines.into_iter().map(|l| l.text).collect()))
    }

    pub fn with_max_retries(mut self, max_retries: u32) -> Self {
        self.max_retries = max_retries.max(1);
        self
    }

    /// How many scripted responses have been consumed so far.
    pub fn consumed(&self) -> usize {
        *self.cursor.lock().expect("cursor lock")
    }
}

impl ChatClient for ScriptedChatClient {
    fn complete(&self, _prompt: &str) -> Result<String, LlmError> {
        let mut cursor = self.cursor.lock().expect("cursor lock");
        if *cursor >= self.responses.len() {
            return Err(LlmError::ScriptExhausted(self.responses.len()));
        }
        let response = self.responses[*cursor].clone();
        *cursor += 1;
        Ok(response)
    }

    fn max_retries(&self) -> u32 {
        self.max_retries
    }
}

/// Renders the generation instruction for a request. The distractor count
/// appears twice on purpose — the repetition improves instruction-following.
pub fn render_generation_prompt(request: &DistractorRequest) -> String {
    let n = request.n;
    let answer = &request.item.options[request.item.correct_index];
    let stem = &request.item.stem;
    format!(
        "Provide {n} good distractors for the following Multiple-Choice Question. \
The correct answer is \"{answer}\". Provide them in a \"boxed\" environment, \
separated by a vertical bar. Do not include explanations. Do not include the \
correct answer as a distractor and make sure to generate the {n} distractors.\n\n\
Question: \"{stem}\"\n\n\
Alternative Distractors: "
    )
}

/// Extracts the first `boxed{...}` span (with or without a leading
/// backslash), splits it on vertical bars, trims each part, and drops empty
/// parts. No span is a parse error.
pub fn parse_boxed(response: &str) -> Result<Vec<String>, LlmError> {
    let start = response.find("boxed{").ok_or(LlmError::NoBoxedSpan)? + "boxed{".len();
    let mut depth = 1usize;
    let mut end = None;
    for (offset, c) in response[start..].char_indices() {
        match c {
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    end = Some(start + offset);
                    break;
                }
            }
            _ => {}
        }
    }
    let end = end.ok_or(LlmError::NoBoxedSpan)?;
    Ok(response[start..end]
        .split('|')
        .map(str::trim)
        .filter(|part| !part.is_empty())
        .map(str::to_string)
        .collect())
}

/// Checks a candidate set against the three repair triggers: wrong count,
/// correct answer among the candidates, or repeated candidates. Matching is
/// trim + case-fold.
pub fn validate_distractors(
    candidates: &[String],
    item: &McqItem,
    n: usize,
) -> Result<(), Violation> {
    if candidates.len() != n {
        return Err(Violation::WrongCount {
            expected: n,
            got: candidates.len(),
        });
    }
    let answer = fold_option(&item.options[item.correct_index]);
    let mut seen = std::collections::HashSet::new();
    for candidate in candidates {
        let folded = fold_option(candidate);
        if folded == answer {
            return Err(Violation::ContainsAnswer {
                candidate: candidate.clone(),
            });
        }
        if !seen.insert(folded) {
            return Err(Violation::Duplicate {
                candidate: candidate.clone(),
            });
        }
    }
    Ok(())
}

/// Runs render -> complete -> parse -> validate until a candidate set
/// passes or the client's retry budget is exhausted. Parse failures and
/// validation violations consume attempts; transport errors abort.
pub fn generate_distractors(
    request: &DistractorRequest,
    client: &dyn ChatClient,
) -> Result<GenerationOutcome, LlmError> {
    if request.n == 0 {
        return Err(LlmError::ZeroDistractors);
    }
    let prompt = render_generation_prompt(request);
    let max_retries = client.max_retries().max(1);
    let mut raw_responses = Vec::new();
    let mut last_violation = String::new();

    for attempt in 1..=max_retries {
        let response = client.complete(&prompt)?;
        raw_responses.push(response.clone());
        match parse_boxed(&response) {
            Ok(candidates) => match validate_distractors(&candidates, &request.item, request.n) {
                Ok(()) => {
                    return Ok(GenerationOutcome {
                        distractors: candidates,
                        attempts: attempt,
                        raw_responses,
                    });
                }
                Err(violation) => last_violation = violation.to_string(),
            },
            Err(err) => last_violation = err.to_string(),
        }
        log::debug!(
            "item {:?} attempt {attempt}/{max_retries} rejected: {last_violation}",
            request.item.id
        );
    }

    Err(LlmError::GenerationFailed {
        attempts: max_retries,
        last_violation,
    })
}

/// The option permutation shown to the test taker for (seed, item, rep):
/// a Fisher-Yates shuffle driven by a ChaCha stream keyed on all three.
/// `presented[p] = options[perm[p]]`.
pub fn presentation_order(seed: u64, item_id: &str, repetition: u32, count: usize) -> Vec<usize> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    let mut key = Vec::with_capacity(item_id.len() + 13);
    key.extend_from_slice(&seed.to_le_bytes());
    key.extend_from_slice(item_id.as_bytes());
    key.push(0xff);
    key.extend_from_slice(&repetition.to_le_bytes());
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(fnv1a64(&key));

    let mut perm: Vec<usize> = (0..count).collect();
    perm.shuffle(&mut rng);
    perm
}

/// Renders the question as lettered lines and asks for a single letter.
pub fn render_test_taker_prompt(item: &McqItem, perm: &[usize]) -> String {
    let mut prompt = format!(
        "Answer the following multiple-choice question. Reply with only the \
letter of the correct option.\n\nQuestion: {}\n",
        item.stem
    );
    for (pos, original) in perm.iter().enumerate() {
        prompt.push_str(&format!("{}) {}\n", OPTION_LETTERS[pos], item.options[*original]));
    }
    prompt.push_str("\nAnswer: ");
    prompt
}

/// First standalone letter token within the presented label range, if any.
/// Handles "B", "b)", "(B)", "Answer: B" and similar shapes.
fn parse_answer_letter(response: &str, option_count: usize) -> Option<usize> {
    for token in response.split(|c: char| !c.is_alphanumeric()) {
        let mut chars = token.chars();
        if let (Some(c), None) = (chars.next(), chars.next()) {
            let upper = c.to_ascii_uppercase();
            if let Some(pos) = OPTION_LETTERS[..option_count].iter().position(|l| *l == upper) {
                return Some(pos);
            }
        }
    }
    None
}

/// Presents every item `repetitions` times with seeded shuffled option
/// orders, maps the answered letter back through the permutation, and
/// aggregates per-item accuracy. An unparseable answer scores incorrect
/// and is logged — never retried, so every item gets exactly
/// `repetitions` attempts.
pub fn evaluate_test_taker(
    items: &[McqItem],
    client: &dyn ChatClient,
    repetitions: u32,
    seed: u64,
) -> Result<Vec<TestTakerResult>, LlmError> {
    let mut results = Vec::with_capacity(items.len());
    for item in items {
        let mut correct_count = 0u32;
        for rep in 0..repetitions {
            let perm = presentation_order(seed, &item.id, rep, item.options.len());
            let prompt = render_test_taker_prompt(item, &perm);
            let response = client.complete(&prompt)?;
            match parse_answer_letter(&response, item.options.len()) {
                Some(position) => {
                    if perm[position] == item.correct_index {
                        correct_count += 1;
                    }
                }
                None => {
                    log::warn!(
                        "item {:?} rep {rep}: unparseable answer {response:?}, scored incorrect",
                        item.id
                    );
                }
            }
        }
        results.push(TestTakerResult {
            item_id: item.id.clone(),
            repetitions,
            correct_count,
            accuracy: f64::from(correct_count) / f64::from(repetitions),
        });
    }
    Ok(results)
}

/// Mean per-item accuracy over a result set.
pub fn dataset_accuracy(results: &[TestTakerResult]) -> f64 {
    if results.is_empty() {
        return 0.0;
    }
    results.iter().map(|r| r.accuracy).sum::<f64>() / results.len() as f64
}
