//! Language-model contract, likelihood measures and model selection.
//!
//! Every model predicts the next token over the full vocabulary given the
//! prefix of an encoded poem (starting at `<bos>`). Probabilities are
//! strictly positive and sum to one, so negative log-likelihood and
//! perplexity are always finite. Natural logarithms throughout.

pub mod external;
pub mod ngram;

use thiserror::Error;

use crate::corpus::{Direction, EncodedSequence, TokenId, BOS_ID};

pub use external::{serve_model, ExternalLm};
pub use ngram::{NGramConfig, NGramModel, Smoothing};

#[derive(Debug, Error)]
pub enum LmError {
    #[error("no sequences to train or evaluate on")]
    EmptyCorpus,
    #[error("sequences mix forward and reverse encodings")]
    MixedDirection,
    #[error("model direction is {model}, sequence direction is {sequence}")]
    DirectionMismatch {
        model: Direction,
        sequence: Direction,
    },
    #[error("vocabulary mismatch: local {local}, remote {remote}")]
    VocabularyMismatch { local: String, remote: String },
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("cannot connect to {endpoint}")]
    Connect {
        endpoint: String,
        source: std::io::Error,
    },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("{path}:{line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub trait LanguageModel: Send + Sync {
    fn direction(&self) -> Direction;

    fn vocab_size(&self) -> usize;

    /// Hash of the vocabulary the model's ids refer to.
    fn vocab_hash(&self) -> &str;

    /// Distribution of the token following `context`. An empty context is
    /// read as `[<bos>]`.
    fn next_token_dist(&self, context: &[TokenId]) -> Result<Vec<f64>, LmError>;

    /// Natural-log probability of `token` after `context`.
    fn log_prob(&self, context: &[TokenId], token: TokenId) -> Result<f64, LmError> {
        let dist = self.next_token_dist(context)?;
        dist.get(token as usize)
            .map(|p| p.ln())
            .ok_or_else(|| LmError::Protocol(format!("token {token} outside vocabulary")))
    }
}

impl<M: LanguageModel + ?Sized> LanguageModel for Box<M> {
    fn direction(&self) -> Direction {
        (**self).direction()
    }
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }
    fn vocab_hash(&self) -> &str {
        (**self).vocab_hash()
    }
    fn next_token_dist(&self, context: &[TokenId]) -> Result<Vec<f64>, LmError> {
        (**self).next_token_dist(context)
    }
    fn log_prob(&self, context: &[TokenId], token: TokenId) -> Result<f64, LmError> {
        (**self).log_prob(context, token)
    }
}

impl<M: LanguageModel + ?Sized> LanguageModel for std::sync::Arc<M> {
    fn direction(&self) -> Direction {
        (**self).direction()
    }
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }
    fn vocab_hash(&self) -> &str {
        (**self).vocab_hash()
    }
    fn next_token_dist(&self, context: &[TokenId]) -> Result<Vec<f64>, LmError> {
        (**self).next_token_dist(context)
    }
    fn log_prob(&self, context: &[TokenId], token: TokenId) -> Result<f64, LmError> {
        (**self).log_prob(context, token)
    }
}

/// Uniform distribution over the vocabulary; the baseline every trained
/// model has to beat (its perplexity equals the vocabulary size).
#[derive(Debug, Clone)]
pub struct UniformModel {
    direction: Direction,
    vocab_size: usize,
    vocab_hash: String,
}

impl UniformModel {
    pub fn new(direction: Direction, vocab_size: usize, vocab_hash: impl Into<String>) -> Self {
        UniformModel {
            direction,
            vocab_size,
            vocab_hash: vocab_hash.into(),
        }
    }
}

impl LanguageModel for UniformModel {
    fn direction(&self) -> Direction {
        self.direction
    }
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }
    fn vocab_hash(&self) -> &str {
        &self.vocab_hash
    }
    fn next_token_dist(&self, _context: &[TokenId]) -> Result<Vec<f64>, LmError> {
        Ok(vec![1.0 / self.vocab_size as f64; self.vocab_size])
    }
    fn log_prob(&self, _context: &[TokenId], _token: TokenId) -> Result<f64, LmError> {
        Ok(-(self.vocab_size as f64).ln())
    }
}

fn check_direction(model: &dyn LanguageModel, seq: &EncodedSequence) -> Result<(), LmError> {
    if model.direction() != seq.direction {
        return Err(LmError::DirectionMismatch {
            model: model.direction(),
            sequence: seq.direction,
        });
    }
    Ok(())
}

/// `-Σ_{t≥1} ln P(w_t | w_0..w_{t-1})`, where `w_0` is the `<bos>` that
/// conditions the first prediction.
pub fn sequence_nll(model: &dyn LanguageModel, seq: &EncodedSequence) -> Result<f64, LmError> {
    check_direction(model, seq)?;
    let mut nll = 0.0;
    for t in 1..seq.tokens.len() {
        nll -= model.log_prob(&seq.tokens[..t], seq.tokens[t])?;
    }
    Ok(nll)
}

/// Number of predicted tokens in a sequence (everything after `<bos>`).
pub fn predicted_tokens(seq: &EncodedSequence) -> usize {
    match seq.tokens.first() {
        Some(&BOS_ID) => seq.tokens.len() - 1,
        _ => seq.tokens.len().saturating_sub(1),
    }
}

/// `exp(total NLL / total predicted tokens)` over a corpus.
pub fn perplexity(model: &dyn LanguageModel, corpus: &[EncodedSequence]) -> Result<f64, LmError> {
    if corpus.is_empty() {
        return Err(LmError::EmptyCorpus);
    }
    let mut nll = 0.0;
    let mut count = 0usize;
    for seq in corpus {
        nll += sequence_nll(model, seq)?;
        count += predicted_tokens(seq);
    }
    if count == 0 {
        return Err(LmError::EmptyCorpus);
    }
    Ok((nll / count as f64).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionRow {
    pub config: NGramConfig,
    pub perplexity: f64,
}

/// Trains one model per grid point on `train` and keeps the one with the
/// lowest validation perplexity (first wins on ties).
pub fn select_by_perplexity(
    train: &[EncodedSequence],
    validation: &[EncodedSequence],
    vocab: &crate::corpus::Vocabulary,
    grid: &[NGramConfig],
) -> Result<(NGramModel, Vec<SelectionRow>), LmError> {
    if grid.is_empty() {
        return Err(LmError::Config("empty hyperparameter grid".into()));
    }
    let mut rows = Vec::with_capacity(grid.len());
    let mut best: Option<(NGramModel, f64)> = None;
    for cfg in grid {
        let model = NGramModel::train(train, vocab, cfg.clone())?;
        let ppl = perplexity(&model, validation)?;
        rows.push(SelectionRow {
            config: cfg.clone(),
            perplexity: ppl,
        });
        if best.as_ref().is_none_or(|(_, b)| ppl < *b) {
            best = Some((model, ppl));
        }
    }
    Ok((best.expect("grid is non-empty").0, rows))
}
