//! Sampling limericks from forward and reverse models.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`), seeded with the run seed
//! and switched to stream `2 * attempt + stage`, where stage 0 drives
//! forward sampling and stage 1 reverse sampling. Every attempt therefore
//! owns its random numbers, and a batch comes out the same however it is
//! split across workers.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{
    content_id, ids_to_line, CorpusError, Direction, EncodedSequence, Poem, Source, TokenId,
    Vocabulary, BOS_ID, EOS_ID, LINE_ID, POEM_LINES, UNK_ID,
};
use crate::lm::{LanguageModel, LmError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub temperature: f64,
    /// `None` samples from the whole vocabulary.
    pub top_k: Option<usize>,
    /// Tokens sampled per stage, not counting `<bos>` or a seed line.
    pub max_tokens: usize,
    pub rng_seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            temperature: 1.0,
            top_k: Some(40),
            max_tokens: 64,
            rng_seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn greedy() -> Self {
        SamplerConfig {
            top_k: Some(1),
            ..Default::default()
        }
    }

    pub fn ancestral() -> Self {
        SamplerConfig {
            top_k: None,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), GenerationError> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(GenerationError::Config(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if self.top_k == Some(0) {
            return Err(GenerationError::Config("top_k must be at least 1".into()));
        }
        if self.max_tokens < 10 {
            return Err(GenerationError::Config(format!(
                "max_tokens must be at least 10, got {}",
                self.max_tokens
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    FirstLine,
    Continuation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseReason {
    LineCount,
    EmptyLine,
    NoEos,
    ReservedToken,
}

impl fmt::Display for ParseReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParseReason::LineCount => "line_count",
            ParseReason::EmptyLine => "empty_line",
            ParseReason::NoEos => "no_eos",
            ParseReason::ReservedToken => "reserved_token",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseFailure {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage: Option<Stage>,
    pub reason: ParseReason,
}

impl ParseFailure {
    fn new(reason: ParseReason) -> Self {
        ParseFailure {
            stage: None,
            reason,
        }
    }

    fn at(self, stage: Stage) -> Self {
        ParseFailure {
            stage: Some(stage),
            ..self
        }
    }
}

impl fmt::Display for ParseFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.stage {
            Some(s) => write!(f, "{} ({s:?})", self.reason),
            None => write!(f, "{}", self.reason),
        }
    }
}

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error("unparseable generation: {0}")]
    Parse(ParseFailure),
    #[error("invalid sampler configuration: {0}")]
    Config(String),
}

/// The generator for one stage of one attempt.
pub fn attempt_rng(seed: u64, attempt: u64, stage: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(attempt * 2 + stage);
    rng
}

/// Draws from the `top_k` most probable tokens of `dist`, reweighted by
/// `p^(1/temperature)`. Ties in probability go to the lower id.
pub fn sample_next<R: Rng + ?Sized>(dist: &[f64], cfg: &SamplerConfig, rng: &mut R) -> TokenId {
    let mut ids: Vec<usize> = (0..dist.len()).collect();
    let by_prob = |a: &usize, b: &usize| dist[*b].total_cmp(&dist[*a]).then(a.cmp(b));
    if let Some(k) = cfg.top_k.filter(|&k| k < ids.len()) {
        ids.select_nth_unstable_by(k - 1, by_prob);
        ids.truncate(k);
    }
    ids.sort_unstable_by(by_prob);
    let top = dist[ids[0]].ln();
    let weights: Vec<f64> = ids
        .iter()
        .map(|&i| ((dist[i].ln() - top) / cfg.temperature).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (&i, &w) in ids.iter().zip(&weights) {
        if u < w {
            return i as TokenId;
        }
        u -= w;
    }
    *ids.last().expect("non-empty distribution") as TokenId
}

fn require_direction(model: &dyn LanguageModel, want: Direction) -> Result<(), LmError> {
    if model.direction() != want {
        return Err(LmError::DirectionMismatch {
            model: model.direction(),
            sequence: want,
        });
    }
    Ok(())
}

/// Extends `tokens` until `stop` returns true for a sampled token or
/// `max_tokens` have been drawn.
fn extend<R: Rng + ?Sized>(
    model: &dyn LanguageModel,
    tokens: &mut Vec<TokenId>,
    cfg: &SamplerConfig,
    rng: &mut R,
    stop: impl Fn(TokenId) -> bool,
) -> Result<(), LmError> {
    for _ in 0..cfg.max_tokens {
        let dist = model.next_token_dist(tokens)?;
        let t = sample_next(&dist, cfg, rng);
        tokens.push(t);
        if stop(t) {
            break;
        }
    }
    Ok(())
}

/// Samples from `<bos>` until `<eos>` or `max_tokens`.
pub fn generate_forward<R: Rng + ?Sized>(
    model: &dyn LanguageModel,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<EncodedSequence, LmError> {
    require_direction(model, Direction::Forward)?;
    let mut tokens = vec![BOS_ID];
    extend(model, &mut tokens, cfg, rng, |t| t == EOS_ID)?;
    Ok(EncodedSequence {
        direction: Direction::Forward,
        tokens,
    })
}

/// Samples a reverse encoding. A non-empty `seed_line` (reading order) is
/// written reversed after `<bos>` and closed with `<line>` before sampling.
pub fn generate_reverse<R: Rng + ?Sized>(
    model: &dyn LanguageModel,
    seed_line: &[TokenId],
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<EncodedSequence, LmError> {
    require_direction(model, Direction::Reverse)?;
    let mut tokens = vec![BOS_ID];
    if !seed_line.is_empty() {
        tokens.extend(seed_line.iter().rev());
        tokens.push(LINE_ID);
    }
    extend(model, &mut tokens, cfg, rng, |t| t == EOS_ID)?;
    Ok(EncodedSequence {
        direction: Direction::Reverse,
        tokens,
    })
}

/// Stage one of two-stage generation: forward sampling up to the first
/// `<line>`, returning the tokens of line one.
pub fn generate_first_line<R: Rng + ?Sized>(
    model: &dyn LanguageModel,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<Result<Vec<TokenId>, ParseFailure>, LmError> {
    require_direction(model, Direction::Forward)?;
    let mut tokens = vec![BOS_ID];
    extend(model, &mut tokens, cfg, rng, |t| {
        t == LINE_ID || t == EOS_ID
    })?;
    let failure = |r| Ok(Err(ParseFailure::new(r).at(Stage::FirstLine)));
    match tokens.last() {
        Some(&LINE_ID) => {}
        Some(&EOS_ID) => return failure(ParseReason::LineCount),
        _ => return failure(ParseReason::NoEos),
    }
    let line = tokens[1..tokens.len() - 1].to_vec();
    if line.is_empty() {
        return failure(ParseReason::EmptyLine);
    }
    if line.iter().any(|&t| t == BOS_ID || t == UNK_ID) {
        return failure(ParseReason::ReservedToken);
    }
    Ok(Ok(line))
}

/// Splits a sampled stream into five lines of ids in reading order.
///
/// The fifth line ends at the first `<eos>` or at a fifth `<line>`;
/// anything after that is discarded.
pub fn split_generation(seq: &EncodedSequence) -> Result<Vec<Vec<TokenId>>, ParseFailure> {
    let body = match seq.tokens.split_first() {
        Some((&BOS_ID, rest)) => rest,
        _ => return Err(ParseFailure::new(ParseReason::LineCount)),
    };
    let mut lines: Vec<Vec<TokenId>> = vec![Vec::new()];
    let mut terminated = false;
    for &t in body {
        match t {
            EOS_ID => {
                terminated = true;
                break;
            }
            LINE_ID if lines.len() == POEM_LINES => {
                terminated = true;
                break;
            }
            LINE_ID => lines.push(Vec::new()),
            _ => lines.last_mut().expect("at least one line").push(t),
        }
    }
    if lines.len() != POEM_LINES {
        return Err(ParseFailure::new(ParseReason::LineCount));
    }
    if !terminated {
        return Err(ParseFailure::new(ParseReason::NoEos));
    }
    if lines.iter().any(Vec::is_empty) {
        return Err(ParseFailure::new(ParseReason::EmptyLine));
    }
    if lines.iter().flatten().any(|&t| t == BOS_ID || t == UNK_ID) {
        return Err(ParseFailure::new(ParseReason::ReservedToken));
    }
    if seq.direction == Direction::Reverse {
        lines.iter_mut().for_each(|l| l.reverse());
    }
    Ok(lines)
}

/// Parses a sampled stream into a generated poem.
pub fn parse_generation(seq: &EncodedSequence, vocab: &Vocabulary) -> Result<Poem, ParseFailure> {
    let lines = split_generation(seq)?;
    let lines = lines
        .iter()
        .map(|ids| ids_to_line(ids, Direction::Forward, vocab))
        .collect::<Result<Vec<_>, CorpusError>>()
        .map_err(|_| ParseFailure::new(ParseReason::ReservedToken))?;
    let id = content_id(&lines);
    Poem::new(id, Source::Generated, lines).map_err(|e| {
        ParseFailure::new(match e {
            CorpusError::EmptyLine(_) => ParseReason::EmptyLine,
            CorpusError::LineCount(_) => ParseReason::LineCount,
            _ => ParseReason::ReservedToken,
        })
    })
}

fn check_pair(fwd: &dyn LanguageModel, rev: &dyn LanguageModel) -> Result<(), LmError> {
    require_direction(fwd, Direction::Forward)?;
    require_direction(rev, Direction::Reverse)?;
    if fwd.vocab_hash() != rev.vocab_hash() {
        return Err(LmError::VocabularyMismatch {
            local: fwd.vocab_hash().to_string(),
            remote: rev.vocab_hash().to_string(),
        });
    }
    Ok(())
}

/// Raw output of a two-stage attempt before parsing.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoStageSample {
    pub first_line: Result<Vec<TokenId>, ParseFailure>,
    /// The reverse-stage stream, absent when stage one failed.
    pub sequence: Option<EncodedSequence>,
}

pub fn sample_two_stage(
    fwd: &dyn LanguageModel,
    rev: &dyn LanguageModel,
    cfg: &SamplerConfig,
    attempt: u64,
) -> Result<TwoStageSample, LmError> {
    check_pair(fwd, rev)?;
    let mut rng = attempt_rng(cfg.rng_seed, attempt, 0);
    let first_line = generate_first_line(fwd, cfg, &mut rng)?;
    let sequence = match &first_line {
        Ok(line) => {
            let mut rng = attempt_rng(cfg.rng_seed, attempt, 1);
            Some(generate_reverse(rev, line, cfg, &mut rng)?)
        }
        Err(_) => None,
    };
    Ok(TwoStageSample {
        first_line,
        sequence,
    })
}

/// Line one from the forward model, lines two to five from the reverse
/// model seeded with it.
pub fn generate_two_stage(
    fwd: &dyn LanguageModel,
    rev: &dyn LanguageModel,
    vocab: &Vocabulary,
    cfg: &SamplerConfig,
    attempt: u64,
) -> Result<Poem, GenerationError> {
    let sample = sample_two_stage(fwd, rev, cfg, attempt)?;
    sample.first_line.map_err(GenerationError::Parse)?;
    let seq = sample.sequence.expect("stage two ran");
    parse_generation(&seq, vocab).map_err(|f| GenerationError::Parse(f.at(Stage::Continuation)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Forward,
    Reverse,
    TwoStage,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Forward => "forward",
            Mode::Reverse => "reverse",
            Mode::TwoStage => "two-stage",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "forward" => Ok(Mode::Forward),
            "reverse" => Ok(Mode::Reverse),
            "two-stage" => Ok(Mode::TwoStage),
            _ => Err(format!(
                "unknown mode {s:?} (expected forward, reverse or two-stage)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttemptStatus {
    Parsed,
    Failed,
}

/// One generation attempt, as written to batch output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub attempt: u64,
    pub mode: Mode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed_line: Option<Vec<String>>,
    pub rng_seed: u64,
    pub status: AttemptStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<ParseFailure>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub poem_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lines: Option<Vec<Vec<String>>>,
}

impl AttemptRecord {
    pub fn poem(&self) -> Option<Poem> {
        let lines = self.lines.clone()?;
        let id = self.poem_id.clone().unwrap_or_else(|| content_id(&lines));
        Poem::new(id, Source::Generated, lines).ok()
    }
}

/// Models available to a batch.
#[derive(Clone, Default)]
pub struct Models {
    pub forward: Option<Arc<dyn LanguageModel>>,
    pub reverse: Option<Arc<dyn LanguageModel>>,
}

impl Models {
    fn get(&self, direction: Direction) -> Result<&dyn LanguageModel, GenerationError> {
        let m = match direction {
            Direction::Forward => &self.forward,
            Direction::Reverse => &self.reverse,
        };
        m.as_deref()
            .ok_or_else(|| GenerationError::Config(format!("no {direction} model loaded")))
    }

    pub fn check(&self, mode: Mode) -> Result<(), GenerationError> {
        match mode {
            Mode::Forward => self.get(Direction::Forward).map(|_| ()),
            Mode::Reverse => self.get(Direction::Reverse).map(|_| ()),
            Mode::TwoStage => {
                check_pair(self.get(Direction::Forward)?, self.get(Direction::Reverse)?)?;
                Ok(())
            }
        }
    }
}

/// Runs attempt number `attempt` in `mode`. `seed_line` only applies to
/// reverse mode.
pub fn run_attempt(
    models: &Models,
    mode: Mode,
    seed_line: Option<&[String]>,
    vocab: &Vocabulary,
    cfg: &SamplerConfig,
    attempt: u64,
) -> Result<AttemptRecord, GenerationError> {
    let outcome = match mode {
        Mode::Forward => {
            let mut rng = attempt_rng(cfg.rng_seed, attempt, 0);
            let seq = generate_forward(models.get(Direction::Forward)?, cfg, &mut rng)?;
            parse_generation(&seq, vocab)
        }
        Mode::Reverse => {
            let ids: Vec<TokenId> = seed_line
                .unwrap_or_default()
                .iter()
                .map(|t| vocab.id(t))
                .collect();
            let mut rng = attempt_rng(cfg.rng_seed, attempt, 1);
            let seq = generate_reverse(models.get(Direction::Reverse)?, &ids, cfg, &mut rng)?;
            parse_generation(&seq, vocab)
        }
        Mode::TwoStage => match generate_two_stage(
            models.get(Direction::Forward)?,
            models.get(Direction::Reverse)?,
            vocab,
            cfg,
            attempt,
        ) {
            Ok(p) => Ok(p),
            Err(GenerationError::Parse(f)) => Err(f),
            Err(e) => return Err(e),
        },
    };
    let seed_line = match mode {
        Mode::Reverse => seed_line.filter(|s| !s.is_empty()).map(<[String]>::to_vec),
        _ => None,
    };
    Ok(match outcome {
        Ok(poem) => AttemptRecord {
            attempt,
            mode,
            seed_line,
            rng_seed: cfg.rng_seed,
            status: AttemptStatus::Parsed,
            failure: None,
            poem_id: Some(poem.id().to_string()),
            lines: Some(poem.lines().to_vec()),
        },
        Err(f) => AttemptRecord {
            attempt,
            mode,
            seed_line,
            rng_seed: cfg.rng_seed,
            status: AttemptStatus::Failed,
            failure: Some(f),
            poem_id: None,
            lines: None,
        },
    })
}

/// Attempts `first .. first + count` in parallel, returned in attempt order.
pub fn run_attempts(
    models: &Models,
    mode: Mode,
    seed_line: Option<&[String]>,
    vocab: &Vocabulary,
    cfg: &SamplerConfig,
    first: u64,
    count: u64,
) -> Result<Vec<AttemptRecord>, GenerationError> {
    cfg.validate()?;
    models.check(mode)?;
    (first..first + count)
        .into_par_iter()
        .map(|a| run_attempt(models, mode, seed_line, vocab, cfg, a))
        .collect()
}
