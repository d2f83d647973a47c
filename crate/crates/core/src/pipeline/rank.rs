//! Threshold filtering and the final ranking.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::classify::Classification;
use super::scorecard::PoemScorecard;
use super::ttr::ttr_threshold;
use super::PipelineError;

/// A fixed TTR cut-off, or `auto`: mean minus two standard deviations of a
/// reference corpus. Serialized as a number or the string `"auto"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TtrThreshold {
    Fixed(f64),
    Auto,
}

impl Serialize for TtrThreshold {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            TtrThreshold::Fixed(x) => s.serialize_f64(*x),
            TtrThreshold::Auto => s.serialize_str("auto"),
        }
    }
}

impl<'de> Deserialize<'de> for TtrThreshold {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(TtrThreshold::Fixed(x)),
            Raw::Str(s) if s == "auto" => Ok(TtrThreshold::Auto),
            Raw::Str(s) => Err(serde::de::Error::custom(format!(
                "ttr_threshold must be a number or \"auto\", got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub ttr_threshold: TtrThreshold,
    pub require_classified: bool,
    /// A poem passes when some category's confidence is strictly above this.
    pub min_classification_confidence: f64,
    /// Maximum generation attempts in a batch.
    pub retry_budget: u64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            ttr_threshold: TtrThreshold::Auto,
            require_classified: true,
            min_classification_confidence: 0.5,
            retry_budget: 1000,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if let TtrThreshold::Fixed(t) = self.ttr_threshold {
            if !unit(t) {
                return Err(PipelineError::Config(format!(
                    "ttr_threshold {t} outside [0, 1]"
                )));
            }
        }
        if !unit(self.min_classification_confidence) {
            return Err(PipelineError::Config(format!(
                "min_classification_confidence {} outside [0, 1]",
                self.min_classification_confidence
            )));
        }
        Ok(())
    }

    /// Replaces an `auto` threshold with the value derived from `reference`
    /// TTRs. A fixed threshold is kept as is.
    pub fn resolved(&self, reference: &[f64]) -> Result<FilterConfig, PipelineError> {
        let mut out = self.clone();
        if self.ttr_threshold == TtrThreshold::Auto {
            out.ttr_threshold = TtrThreshold::Fixed(ttr_threshold(reference)?);
        }
        Ok(out)
    }

    pub fn threshold(&self) -> Result<f64, PipelineError> {
        match self.ttr_threshold {
            TtrThreshold::Fixed(t) => Ok(t),
            TtrThreshold::Auto => Err(PipelineError::UnresolvedThreshold),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    Syntax,
    Ttr,
    /// The classifier answered with no category at all.
    Unclassified,
    /// Categories came back, none above the confidence floor.
    LowConfidence,
    /// The classifier call failed; a later run may succeed.
    ClassificationFailed,
    /// Classification is required but no classifier ran.
    NotClassified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub poem_id: String,
    pub reasons: Vec<RejectReason>,
}

/// Accepted cards in rank order, rejections sorted by poem id, and how many
/// cards survived each successive check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterOutcome {
    pub ttr_threshold: f64,
    pub accepted: Vec<PoemScorecard>,
    pub rejected: Vec<Rejection>,
    pub passed_syntax: usize,
    pub passed_ttr: usize,
    pub passed_classification: usize,
}

fn classification_reason(card: &PoemScorecard, cfg: &FilterConfig) -> Option<RejectReason> {
    if !cfg.require_classified {
        return None;
    }
    match &card.classification {
        None => Some(RejectReason::NotClassified),
        Some(Classification::Unclassified) => Some(RejectReason::Unclassified),
        Some(Classification::Failed { .. }) => Some(RejectReason::ClassificationFailed),
        Some(c @ Classification::Classified { .. }) => match c.max_confidence() {
            Some(m) if m > cfg.min_classification_confidence => None,
            _ => Some(RejectReason::LowConfidence),
        },
    }
}

/// Every reason that applies to `card`; empty means accepted.
pub fn rejection_reasons(
    card: &PoemScorecard,
    cfg: &FilterConfig,
    threshold: f64,
) -> Vec<RejectReason> {
    let mut reasons = Vec::new();
    if !card.syntactic_ok {
        reasons.push(RejectReason::Syntax);
    }
    if card.ttr < threshold {
        reasons.push(RejectReason::Ttr);
    }
    reasons.extend(classification_reason(card, cfg));
    reasons
}

pub fn filter_and_rank(
    cards: &[PoemScorecard],
    cfg: &FilterConfig,
) -> Result<FilterOutcome, PipelineError> {
    cfg.validate()?;
    let threshold = cfg.threshold()?;
    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    let (mut passed_syntax, mut passed_ttr, mut passed_classification) = (0, 0, 0);
    for card in cards {
        let reasons = rejection_reasons(card, cfg, threshold);
        if card.syntactic_ok {
            passed_syntax += 1;
            if card.ttr >= threshold {
                passed_ttr += 1;
                if classification_reason(card, cfg).is_none() {
                    passed_classification += 1;
                }
            }
        }
        if reasons.is_empty() {
            accepted.push(card.clone());
        } else {
            rejected.push(Rejection {
                poem_id: card.poem_id.clone(),
                reasons,
            });
        }
    }
    accepted.sort_by(PoemScorecard::rank_cmp);
    rejected.sort_by(|a: &Rejection, b: &Rejection| a.poem_id.cmp(&b.poem_id));
    Ok(FilterOutcome {
        ttr_threshold: threshold,
        accepted,
        rejected,
        passed_syntax,
        passed_ttr,
        passed_classification,
    })
}
