//! Static word vectors and centroid statistics.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ContinuityError;

/// Word vectors of one fixed dimension, looked up case-insensitively.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn from_vectors(
        vectors: impl IntoIterator<Item = (String, Vec<f64>)>,
    ) -> Result<Self, ContinuityError> {
        let mut table = EmbeddingTable::default();
        for (word, v) in vectors {
            if table.vectors.is_empty() {
                table.dim = v.len();
            }
            if v.len() != table.dim || v.is_empty() {
                return Err(ContinuityError::Dimension {
                    word,
                    expected: table.dim,
                    found: v.len(),
                });
            }
            table.vectors.insert(word.to_lowercase(), v);
        }
        Ok(table)
    }

    /// Text format: `word x1 x2 ... xk` per line. A leading `count dim`
    /// header line (word2vec style) is skipped.
    pub fn parse(text: &str, source: &str) -> Result<Self, ContinuityError> {
        let mut table = EmbeddingTable::default();
        for (i, line) in text.lines().enumerate() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() || fields[0].starts_with('#') {
                continue;
            }
            if i == 0 && fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
                continue;
            }
            let err = |message: String| ContinuityError::Format {
                path: source.to_string(),
                line: i + 1,
                message,
            };
            let v = fields[1..]
                .iter()
                .map(|f| f.parse::<f64>().ok().filter(|x| x.is_finite()))
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| err(format!("non-numeric component for {:?}", fields[0])))?;
            if v.is_empty() {
                return Err(err(format!("no vector for {:?}", fields[0])));
            }
            if table.vectors.is_empty() {
                table.dim = v.len();
            } else if v.len() != table.dim {
                return Err(err(format!(
                    "expected {} components, found {}",
                    table.dim,
                    v.len()
                )));
            }
            table.vectors.insert(fields[0].to_lowercase(), v);
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, ContinuityError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(&word.to_lowercase()).map(Vec::as_slice)
    }
}

/// Distances of each embedded noun to the centroid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidStats {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub distances: Vec<(String, f64)>,
    /// Nouns without a vector, dropped from the statistics.
    pub oov: Vec<String>,
}

fn split_embedded<'a>(
    nouns: &'a [String],
    emb: &'a EmbeddingTable,
) -> (Vec<(&'a str, &'a [f64])>, Vec<String>) {
    let mut found = Vec::new();
    let mut oov: Vec<String> = Vec::new();
    for n in nouns {
        match emb.get(n) {
            Some(v) => found.push((n.as_str(), v)),
            None if !oov.contains(n) => oov.push(n.clone()),
            None => {}
        }
    }
    (found, oov)
}

/// Dimension-wise mean of the nouns' vectors; nouns without a vector are
/// skipped.
pub fn centroid(nouns: &[String], emb: &EmbeddingTable) -> Result<Vec<f64>, ContinuityError> {
    let (found, _) = split_embedded(nouns, emb);
    mean_vector(&found)
}

fn mean_vector(found: &[(&str, &[f64])]) -> Result<Vec<f64>, ContinuityError> {
    let first = found.first().ok_or(ContinuityError::NoEmbeddedNouns)?;
    // Offsets from the first vector, so repeated nouns give an exact centroid.
    let mut c = vec![0.0; first.1.len()];
    for (_, v) in found {
        c.iter_mut()
            .zip(v.iter().zip(first.1))
            .for_each(|(a, (b, f))| *a += b - f);
    }
    let n = found.len() as f64;
    c.iter_mut().zip(first.1).for_each(|(a, f)| *a = f + *a / n);
    Ok(c)
}

/// Euclidean distance of every embedded noun to the centroid, with mean
/// and population standard deviation. `squared` reports squared distances.
pub fn centroid_distances(
    nouns: &[String],
    emb: &EmbeddingTable,
    squared: bool,
) -> Result<CentroidStats, ContinuityError> {
    let (found, oov) = split_embedded(nouns, emb);
    let c = mean_vector(&found)?;
    let distances: Vec<(String, f64)> = found
        .iter()
        .map(|(w, v)| {
            let sq: f64 = v.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
            (w.to_string(), if squared { sq } else { sq.sqrt() })
        })
        .collect();
    let n = distances.len() as f64;
    let mean = distances.iter().map(|d| d.1).sum::<f64>() / n;
    let var = distances.iter().map(|d| (d.1 - mean).powi(2)).sum::<f64>() / n;
    Ok(CentroidStats {
        mean,
        std: var.sqrt(),
        distances,
        oov,
    })
}
