//! Per-poem scorecards combining every metric.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::continuity::{
    continuity_report, ContinuityConfig, ContinuityReport, EmbeddingTable, OntologyGraph,
    OntologyTagger,
};
use crate::corpus::Poem;
use crate::rhyme::{rhyme_distance, PronunciationDictionary, RhymeConfig, RhymeReport};

use super::classify::{classify_content, Classification, ClassifierClient};
use super::syntax::{syntactic_check, Lexicon};
use super::syntax::{Correction, SyntaxIssue};
use super::ttr::ttr;

pub const SCORECARD_SCHEMA: &str = "limerick.scorecard/1";

/// Ranking fields pulled out of a scorecard. Lower rhyme distance ranks
/// first, then higher classification confidence, higher TTR and higher
/// ontology similarity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankKey {
    pub rhyme_distance: f64,
    pub max_confidence: Option<f64>,
    pub ttr: f64,
    pub similarity: Option<f64>,
}

/// Descending order on optional values, `None` after every `Some`.
fn desc(a: Option<f64>, b: Option<f64>) -> Ordering {
    match (a, b) {
        (Some(x), Some(y)) => y.total_cmp(&x),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    }
}

impl RankKey {
    pub fn compare(&self, other: &RankKey) -> Ordering {
        self.rhyme_distance
            .total_cmp(&other.rhyme_distance)
            .then_with(|| desc(self.max_confidence, other.max_confidence))
            .then_with(|| other.ttr.total_cmp(&self.ttr))
            .then_with(|| desc(self.similarity, other.similarity))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoemScorecard {
    pub schema: String,
    pub poem_id: String,
    pub lines: Vec<Vec<String>>,
    pub corrected: Vec<Vec<String>>,
    pub syntactic_ok: bool,
    pub syntax_reasons: Vec<SyntaxIssue>,
    pub corrections: Vec<Correction>,
    pub ttr: f64,
    pub rhyme: RhymeReport,
    pub continuity: ContinuityReport,
    /// `None` when no classifier was configured.
    pub classification: Option<Classification>,
    pub rank_key: RankKey,
}

impl PoemScorecard {
    pub fn rank_key_of(
        rhyme: &RhymeReport,
        classification: Option<&Classification>,
        ttr: f64,
        continuity: &ContinuityReport,
    ) -> RankKey {
        RankKey {
            rhyme_distance: rhyme.distance,
            max_confidence: classification.and_then(Classification::max_confidence),
            ttr,
            similarity: continuity.ontology_avg_similarity,
        }
    }

    /// Full ranking order, ties broken by poem id.
    pub fn rank_cmp(&self, other: &PoemScorecard) -> Ordering {
        self.rank_key
            .compare(&other.rank_key)
            .then_with(|| self.poem_id.cmp(&other.poem_id))
    }
}

/// Resources needed to score poems.
pub struct Scorer<'a> {
    pub lexicon: &'a Lexicon,
    pub dict: &'a PronunciationDictionary,
    pub rhyme: RhymeConfig,
    pub embeddings: &'a EmbeddingTable,
    pub ontology: &'a OntologyGraph,
    pub continuity: ContinuityConfig,
    pub classifier: Option<&'a dyn ClassifierClient>,
    pub ttr_include_punct: bool,
}

impl Scorer<'_> {
    /// Metrics are computed on the autocorrected poem.
    pub fn score(&self, poem: &Poem) -> PoemScorecard {
        let syntax = syntactic_check(poem, self.lexicon);
        let fixed = &syntax.corrected;
        let ttr = ttr(fixed, self.ttr_include_punct);
        let rhyme = rhyme_distance(fixed, self.dict, self.rhyme);
        let tagger = OntologyTagger {
            ontology: self.ontology,
        };
        let continuity = continuity_report(
            fixed,
            &tagger,
            self.embeddings,
            self.ontology,
            self.continuity,
        );
        let classification = self.classifier.map(|c| classify_content(fixed, c));
        let rank_key =
            PoemScorecard::rank_key_of(&rhyme, classification.as_ref(), ttr, &continuity);
        PoemScorecard {
            schema: SCORECARD_SCHEMA.to_string(),
            poem_id: poem.id().to_string(),
            lines: poem.lines().to_vec(),
            corrected: fixed.lines().to_vec(),
            syntactic_ok: syntax.ok,
            syntax_reasons: syntax.reasons,
            corrections: syntax.corrections,
            ttr,
            rhyme,
            continuity,
            classification,
            rank_key,
        }
    }

    /// Scores in parallel; output follows input order.
    pub fn score_all(&self, poems: &[Poem]) -> Vec<PoemScorecard> {
        poems.par_iter().map(|p| self.score(p)).collect()
    }
}
