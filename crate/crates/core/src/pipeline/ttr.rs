//! Type-token ratio and the reference-corpus threshold.

use crate::corpus::Poem;

use super::PipelineError;

fn is_word(token: &str) -> bool {
    token.chars().any(char::is_alphanumeric)
}

/// Distinct tokens over total tokens across all five lines, compared
/// case-insensitively. Punctuation is left out unless `include_punct`; a
/// poem with no word tokens at all falls back to counting every token.
pub fn ttr(poem: &Poem, include_punct: bool) -> f64 {
    let mut tokens: Vec<String> = poem
        .tokens()
        .filter(|t| include_punct || is_word(t))
        .map(str::to_lowercase)
        .collect();
    if tokens.is_empty() {
        tokens = poem.tokens().map(str::to_lowercase).collect();
    }
    let total = tokens.len();
    tokens.sort_unstable();
    tokens.dedup();
    tokens.len() as f64 / total as f64
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let rough = values.iter().sum::<f64>() / n;
    // One correction pass removes the rounding left by the plain sum.
    let mean = rough + values.iter().map(|v| v - rough).sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

/// `mean - 2 * std` (population std) of reference TTR values.
pub fn ttr_threshold(reference: &[f64]) -> Result<f64, PipelineError> {
    if reference.len() < 2 {
        return Err(PipelineError::InsufficientData(reference.len()));
    }
    let (mean, std) = mean_std(reference).expect("non-empty");
    Ok(threshold_from(mean, std))
}

pub fn threshold_from(mean: f64, std: f64) -> f64 {
    mean - 2.0 * std
}
