//! Measure how "available" the options of a multiple-choice question are,
//! operationalised as their prevalence in a large text corpus.
//!
//! The pipeline: embed every corpus passage into a unit-norm vector space,
//! retrieve the top-k passages for the combined options of each question
//! (optionally prefixed with the question stem), assign each retrieved
//! passage to its most similar option by cosine, and report the per-option
//! passage counts. Downstream modules compare those counts statistically
//! (Friedman + Wilcoxon post-hocs, Holm-Bonferroni, a Dirichlet-Multinomial
//! posterior), score the "always pick the most available option" guessing
//! strategy, and drive LLM distractor generation and test-taker evaluation.

pub mod availability;
pub mod cli;
pub mod corpus;
pub mod embedding;
pub(crate) mod jsonl;
pub mod llmops;
pub mod report;
pub mod stats;
pub mod strategy;
pub mod vecindex;

pub use availability::{AvailabilityConfig, AvailabilityProfile, QueryMode};
pub use corpus::{CorpusStats, McqItem, Passage};
pub use embedding::{cosine, EmbeddingProvider, EmbeddingProviderConfig, EmbeddingVector};
pub use stats::{BayesResult, FriedmanResult, PairwiseResult};
pub use strategy::StrategyReport;
pub use vecindex::{RetrievalHit, VectorIndex};
