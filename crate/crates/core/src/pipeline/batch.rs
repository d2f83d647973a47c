//! Generate, score and filter until enough poems have been produced.

use std::fmt;

use log::info;
use serde::{Deserialize, Serialize};

use crate::corpus::Vocabulary;
use crate::generation::{run_attempts, AttemptRecord, AttemptStatus, Mode, Models, SamplerConfig};

use super::rank::{filter_and_rank, FilterConfig, FilterOutcome};
use super::scorecard::{PoemScorecard, Scorer};
use super::PipelineError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchConfig {
    pub mode: Mode,
    pub seed_line: Option<Vec<String>>,
    pub sampler: SamplerConfig,
    /// Must carry a fixed TTR threshold; see [`FilterConfig::resolved`].
    pub filter: FilterConfig,
    /// Attempts generated per parallel round. Results do not depend on it.
    pub chunk: u64,
}

/// Counts at each stage; every stage is a subset of the one before.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Funnel {
    pub generated: usize,
    pub parsed: usize,
    pub syntactic: usize,
    pub ttr: usize,
    pub classified: usize,
    pub accepted: usize,
}

impl Funnel {
    pub fn from_parts(attempts: &[AttemptRecord], filter: &FilterOutcome) -> Funnel {
        Funnel {
            generated: attempts.len(),
            parsed: attempts
                .iter()
                .filter(|a| a.status == AttemptStatus::Parsed)
                .count(),
            syntactic: filter.passed_syntax,
            ttr: filter.passed_ttr,
            classified: filter.passed_classification,
            accepted: filter.accepted.len(),
        }
    }

    pub fn is_monotone(&self) -> bool {
        let s = [
            self.generated,
            self.parsed,
            self.syntactic,
            self.ttr,
            self.classified,
            self.accepted,
        ];
        s.windows(2).all(|w| w[1] <= w[0])
    }
}

impl fmt::Display for Funnel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows = [
            ("generated", self.generated),
            ("parsed", self.parsed),
            ("syntactic", self.syntactic),
            ("ttr", self.ttr),
            ("classified", self.classified),
            ("accepted", self.accepted),
        ];
        for (name, n) in rows {
            writeln!(f, "{name:<12}{n:>8}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchOutcome {
    pub attempts: Vec<AttemptRecord>,
    pub scorecards: Vec<PoemScorecard>,
    pub filter: FilterOutcome,
    pub funnel: Funnel,
}

/// Runs attempts `0, 1, ...` until `n_target` have parsed or `budget`
/// attempts were made. Returns the attempts up to and including the one
/// that completed the target, and the parsed count.
pub fn generate_until(
    models: &Models,
    vocab: &Vocabulary,
    cfg: &BatchConfig,
    n_target: usize,
    budget: u64,
) -> Result<(Vec<AttemptRecord>, usize), PipelineError> {
    let chunk = cfg.chunk.max(1);
    let seed_line = cfg.seed_line.as_deref();
    let mut attempts = Vec::new();
    let mut parsed = 0;
    let mut next = 0;
    while parsed < n_target && next < budget {
        let count = chunk.min(budget - next);
        let round = run_attempts(
            models,
            cfg.mode,
            seed_line,
            vocab,
            &cfg.sampler,
            next,
            count,
        )?;
        next += count;
        for rec in round {
            if parsed == n_target {
                break;
            }
            if rec.status == AttemptStatus::Parsed {
                parsed += 1;
            }
            attempts.push(rec);
        }
        info!("{} attempts, {parsed}/{n_target} parsed", attempts.len());
    }
    Ok((attempts, parsed))
}

/// Generates attempts until `n_target` have parsed or the retry budget runs
/// out, then scores and filters the parsed poems. Attempts after the one
/// that completes the target are discarded, so the outcome does not depend
/// on the chunk size or thread count.
pub fn run_batch(
    models: &Models,
    vocab: &Vocabulary,
    scorer: &Scorer<'_>,
    cfg: &BatchConfig,
    n_target: usize,
) -> Result<BatchOutcome, PipelineError> {
    if n_target == 0 {
        return Err(PipelineError::Config("n_target must be at least 1".into()));
    }
    cfg.filter.validate()?;
    cfg.filter.threshold()?;
    let budget = cfg.filter.retry_budget;
    let (attempts, parsed) = generate_until(models, vocab, cfg, n_target, budget)?;

    let poems: Vec<_> = attempts.iter().filter_map(AttemptRecord::poem).collect();
    let scorecards = scorer.score_all(&poems);
    let filter = filter_and_rank(&scorecards, &cfg.filter)?;
    let funnel = Funnel::from_parts(&attempts, &filter);
    let outcome = BatchOutcome {
        attempts,
        scorecards,
        filter,
        funnel,
    };
    if parsed < n_target {
        return Err(PipelineError::BudgetExhausted {
            budget,
            parsed,
            target: n_target,
            partial: Box::new(outcome),
        });
    }
    Ok(outcome)
}
