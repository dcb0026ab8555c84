//! Evaluation harness for LLM-based argument classification.
//!
//! The pipeline loads argument corpora, renders a suite of classification
//! prompts per record, queries (or replays) chat-completion models, parses
//! answers and elicited certainties, applies certainty-weighted multi-prompt
//! voting plus a cross-model ensemble vote, and emits metric tables,
//! error-taxonomy breakdowns, and prompt ablation studies.

pub mod cli;
pub mod config;
pub mod corpus;
pub mod gateway;
pub mod metrics;
pub mod orchestrator;
pub mod parse;
pub mod prompts;
pub mod report;
pub mod voting;

pub use config::{Mode, RunConfig};
pub use corpus::{ArgumentRecord, CorpusStats, Dataset, Label, TopicSpec};
pub use gateway::{Exchange, Gateway, ModelSpec};
pub use metrics::{ConfusionMatrix, ErrorType, MetricsReport, UnparsedPolicy};
pub use orchestrator::{run_ablation, run_experiment, RunResult};
pub use parse::{Certainty, CotTrace, ParsedAnswer};
pub use prompts::{AnswerFormat, PromptKind, RenderedPrompt, TopicTable};
pub use voting::{EnsembleDecision, ModelDecision, PromptVote, VoteTally};

/// Binary entry point; parses `std::env::args_os` and returns the exit code.
pub fn cli_main() -> i32 {
    cli::run(std::env::args_os())
}
