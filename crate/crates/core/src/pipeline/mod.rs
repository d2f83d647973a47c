//! Post-processing of generated poems: syntax checks, lexical diversity,
//! content classification, ranking and batch orchestration.

pub mod batch;
pub mod classify;
pub mod rank;
pub mod scorecard;
pub mod syntax;
pub mod ttr;

use thiserror::Error;

use crate::generation::GenerationError;

pub use batch::{generate_until, run_batch, BatchConfig, BatchOutcome, Funnel};
pub use classify::{
    classify_content, CachedClassifier, Category, Classification, ClassifierClient, ClassifyError,
    HttpClassifier, HttpClassifierConfig, StubClassifier,
};
pub use rank::{
    filter_and_rank, FilterConfig, FilterOutcome, RejectReason, Rejection, TtrThreshold,
};
pub use scorecard::{PoemScorecard, RankKey, Scorer, SCORECARD_SCHEMA};
pub use syntax::{autocorrect, syntactic_check, Lexicon, SyntaxReport};
pub use ttr::{mean_std, ttr, ttr_threshold};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("need at least 2 reference values, got {0}")]
    InsufficientData(usize),
    #[error("the TTR threshold is set to auto but no reference corpus was given")]
    UnresolvedThreshold,
    #[error("invalid filter configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Generation(#[from] GenerationError),
    #[error("retry budget of {budget} attempts exhausted with {parsed} of {target} poems parsed")]
    BudgetExhausted {
        budget: u64,
        parsed: usize,
        target: usize,
        partial: Box<BatchOutcome>,
    },
}
