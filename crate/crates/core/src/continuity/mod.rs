//! Subject continuity: how closely a poem's nouns stay on one topic,
//! measured by embedding spread and by ontology path similarity.

pub mod embedding;
pub mod ontology;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Poem;

pub use embedding::{centroid, centroid_distances, CentroidStats, EmbeddingTable};
pub use ontology::OntologyGraph;

#[derive(Debug, Error)]
pub enum ContinuityError {
    #[error("no noun has an embedding")]
    NoEmbeddedNouns,
    #[error("vector for {word:?} has {found} components, expected {expected}")]
    Dimension {
        word: String,
        expected: usize,
        found: usize,
    },
    #[error("{path}:{line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Closed-class words that happen to have noun senses ("a" the letter,
/// "will" the document, ...) and must not count as nouns.
pub const STOPWORDS: &[&str] = &[
    "a", "about", "after", "again", "all", "also", "am", "an", "and", "any", "are", "as", "at",
    "be", "been", "before", "but", "by", "can", "could", "did", "do", "does", "down", "each",
    "even", "ever", "every", "few", "for", "from", "had", "has", "have", "he", "her", "here",
    "him", "his", "how", "i", "if", "in", "into", "is", "it", "its", "just", "may", "me", "might",
    "more", "most", "much", "must", "my", "never", "no", "nor", "not", "now", "of", "off", "on",
    "once", "one", "only", "or", "other", "our", "out", "over", "own", "same", "shall", "she",
    "should", "so", "some", "still", "such", "than", "that", "the", "their", "them", "then",
    "there", "these", "they", "this", "those", "though", "through", "to", "too", "under", "until",
    "up", "upon", "us", "very", "was", "we", "well", "were", "what", "when", "where", "which",
    "while", "who", "whom", "why", "will", "with", "would", "yet", "you", "your",
];

/// Picks the nouns out of a poem.
pub trait NounTagger: Send + Sync {
    fn nouns(&self, poem: &Poem) -> Vec<String>;
}

/// Tags a token as a noun when the ontology has a noun sense for it and it
/// is not a stopword.
pub struct OntologyTagger<'a> {
    pub ontology: &'a OntologyGraph,
}

impl NounTagger for OntologyTagger<'_> {
    fn nouns(&self, poem: &Poem) -> Vec<String> {
        extract_nouns(poem, self.ontology)
    }
}

/// Lowercased noun tokens in reading order, duplicates kept.
pub fn extract_nouns(poem: &Poem, ontology: &OntologyGraph) -> Vec<String> {
    poem.tokens()
        .map(str::to_lowercase)
        .filter(|t| t.chars().any(char::is_alphabetic))
        .filter(|t| !STOPWORDS.contains(&t.as_str()))
        .filter(|t| ontology.has_noun_sense(t))
        .collect()
}

/// Best `1 / (1 + d)` over the two words' sense pairs; `None` when either
/// word has no sense or no pair is connected.
pub fn path_similarity(w1: &str, w2: &str, graph: &OntologyGraph) -> Option<f64> {
    let (s1, s2) = (graph.senses(w1), graph.senses(w2));
    s1.iter()
        .flat_map(|&a| s2.iter().filter_map(move |&b| graph.sense_distance(a, b)))
        .min()
        .map(|d| 1.0 / (1.0 + f64::from(d)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseSimilarity {
    /// Mean over distinct-noun pairs; `None` with fewer than two.
    pub mean: Option<f64>,
    pub pairs: usize,
    /// Pairs with no connecting path, counted as 0 in the mean.
    pub disconnected: Vec<(String, String)>,
}

pub fn avg_pairwise_similarity(nouns: &[String], graph: &OntologyGraph) -> PairwiseSimilarity {
    let mut distinct: Vec<&str> = Vec::new();
    for n in nouns {
        if !distinct.contains(&n.as_str()) {
            distinct.push(n);
        }
    }
    let mut total = 0.0;
    let mut pairs = 0;
    let mut disconnected = Vec::new();
    for (i, a) in distinct.iter().enumerate() {
        for b in &distinct[i + 1..] {
            pairs += 1;
            match path_similarity(a, b, graph) {
                Some(s) => total += s,
                None => disconnected.push((a.to_string(), b.to_string())),
            }
        }
    }
    PairwiseSimilarity {
        mean: (pairs > 0).then(|| total / pairs as f64),
        pairs,
        disconnected,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContinuityConfig {
    /// Report squared Euclidean distances to the centroid.
    pub squared_distance: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ContinuityFlags {
    pub no_nouns: bool,
    pub single_noun: bool,
    pub oov_nouns: Vec<String>,
    pub disconnected_pairs: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityReport {
    pub poem_id: String,
    pub nouns: Vec<String>,
    /// `None` when no noun has an embedding.
    pub centroid_mean: Option<f64>,
    pub centroid_std: Option<f64>,
    pub ontology_avg_similarity: Option<f64>,
    pub flags: ContinuityFlags,
}

pub fn continuity_report(
    poem: &Poem,
    tagger: &dyn NounTagger,
    emb: &EmbeddingTable,
    graph: &OntologyGraph,
    cfg: ContinuityConfig,
) -> ContinuityReport {
    let nouns = tagger.nouns(poem);
    let stats = centroid_distances(&nouns, emb, cfg.squared_distance).ok();
    let pairwise = avg_pairwise_similarity(&nouns, graph);
    let mut distinct = nouns.clone();
    distinct.sort();
    distinct.dedup();
    let oov_nouns = match &stats {
        Some(s) => s.oov.clone(),
        None => {
            let mut seen: Vec<String> = Vec::new();
            for n in &nouns {
                if !seen.contains(n) {
                    seen.push(n.clone());
                }
            }
            seen
        }
    };
    ContinuityReport {
        poem_id: poem.id().to_string(),
        centroid_mean: stats.as_ref().map(|s| s.mean),
        centroid_std: stats.as_ref().map(|s| s.std),
        ontology_avg_similarity: pairwise.mean,
        flags: ContinuityFlags {
            no_nouns: nouns.is_empty(),
            single_noun: distinct.len() == 1,
            oov_nouns,
            disconnected_pairs: pairwise.disconnected,
        },
        nouns,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;

    fn graph() -> OntologyGraph {
        OntologyGraph::from_parts(
            [
                ("animal", "entity", "hypernym"),
                ("dog.n", "animal", "hypernym"),
                ("cat.n", "animal", "hypernym"),
                ("will.n", "entity", "hypernym"),
            ],
            [
                ("dog", "dog.n"),
                ("cat", "cat.n"),
                ("will", "will.n"),
                ("moon", "moon.n"),
            ],
        )
    }

    #[test]
    fn stopwords_are_not_nouns() {
        let g = graph();
        let p = tokenize("the dog will\nsee the cat\na dog\nno\nthe moon").unwrap();
        assert_eq!(extract_nouns(&p, &g), vec!["dog", "cat", "dog", "moon"]);
    }

    #[test]
    fn similarity_values() {
        let g = graph();
        assert_eq!(path_similarity("dog", "dog", &g), Some(1.0));
        assert_eq!(path_similarity("dog", "animal", &g), None);
        assert!((path_similarity("dog", "cat", &g).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(path_similarity("dog", "moon", &g), None);
    }

    #[test]
    fn pairwise_dedups_and_flags_disconnected() {
        let g = graph();
        let ns: Vec<String> = ["dog", "dog"].iter().map(|s| s.to_string()).collect();
        assert_eq!(avg_pairwise_similarity(&ns, &g).mean, None);
        let ns: Vec<String> = ["dog", "cat", "moon"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let r = avg_pairwise_similarity(&ns, &g);
        assert_eq!(r.pairs, 3);
        assert_eq!(r.disconnected.len(), 2);
        assert!((r.mean.unwrap() - 1.0 / 9.0).abs() < 1e-12);
    }
}
