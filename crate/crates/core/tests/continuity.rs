use std::path::{Path, PathBuf};

use limerick::continuity::{
    centroid, centroid_distances, continuity_report, path_similarity, ContinuityConfig,
    EmbeddingTable, OntologyGraph, OntologyTagger,
};
use limerick::corpus::tokenize;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

fn table(vectors: &[Vec<f64>]) -> (EmbeddingTable, Vec<String>) {
    let names: Vec<String> = (0..vectors.len()).map(|i| format!("w{i}")).collect();
    let t =
        EmbeddingTable::from_vectors(names.iter().cloned().zip(vectors.iter().cloned())).unwrap();
    (t, names)
}

/// Two-pass reference: centroid, Euclidean distances, population std.
fn oracle(vectors: &[Vec<f64>]) -> (f64, f64) {
    let n = vectors.len() as f64;
    let dim = vectors[0].len();
    let c: Vec<f64> = (0..dim)
        .map(|k| vectors.iter().map(|v| v[k]).sum::<f64>() / n)
        .collect();
    let d: Vec<f64> = vectors
        .iter()
        .map(|v| {
            v.iter()
                .zip(&c)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[test]
fn centroid_statistics_match_reference_on_random_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let n = rng.gen_range(1..12);
        let dim = rng.gen_range(1..50);
        let vs: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect())
            .collect();
        let (t, names) = table(&vs);
        let s = centroid_distances(&names, &t, false).unwrap();
        let (m, sd) = oracle(&vs);
        assert!((s.mean - m).abs() < 1e-9 && (s.std - sd).abs() < 1e-9);
        assert_eq!(centroid(&names, &t).unwrap().len(), dim);
    }
}

proptest! {
    #[test]
    fn translation_and_scale_behave(
        vs in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 2..8),
        shift in prop::collection::vec(-10.0f64..10.0, 3),
        scale in 0.1f64..10.0,
    ) {
        let (t, names) = table(&vs);
        let base = centroid_distances(&names, &t, false).unwrap();
        let moved: Vec<Vec<f64>> = vs.iter().map(|v| v.iter().zip(&shift).map(|(a, b)| a + b).collect()).collect();
        let (t2, _) = table(&moved);
        let m = centroid_distances(&names, &t2, false).unwrap();
        prop_assert!((m.mean - base.mean).abs() < 1e-9 && (m.std - base.std).abs() < 1e-9);
        let scaled: Vec<Vec<f64>> = vs.iter().map(|v| v.iter().map(|a| a * scale).collect()).collect();
        let (t3, _) = table(&scaled);
        let s = centroid_distances(&names, &t3, false).unwrap();
        prop_assert!((s.mean - scale * base.mean).abs() < 1e-9 * (1.0 + scale));
        prop_assert!((s.std - scale * base.std).abs() < 1e-9 * (1.0 + scale));
    }
}

fn reference_pairs() -> Vec<(String, String, f64)> {
    std::fs::read_to_string(data("reference/path_similarity.tsv"))
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            (f[0].to_string(), f[1].to_string(), f[2].parse().unwrap())
        })
        .collect()
}

fn check_reference(g: &OntologyGraph) {
    let pairs = reference_pairs();
    assert!(pairs.len() >= 50);
    for (a, b, want) in pairs {
        let got = path_similarity(&a, &b, g).unwrap_or_else(|| panic!("{a}/{b} disconnected"));
        assert!((got - want).abs() < 1e-6, "{a}/{b}: {got} vs {want}");
        assert_eq!(path_similarity(&b, &a, g), Some(got));
    }
}

#[test]
fn tsv_ontology_reproduces_reference_similarities() {
    check_reference(&OntologyGraph::load(&data("")).unwrap());
}

#[test]
fn wordnet_subset_reproduces_reference_similarities() {
    check_reference(&OntologyGraph::load(&data("wordnet-subset")).unwrap());
}

#[test]
fn single_noun_poem_has_zero_spread() {
    let g = OntologyGraph::load(&data("")).unwrap();
    let emb = EmbeddingTable::load(&data("embeddings.txt")).unwrap();
    let poem = tokenize("the cat\nthe cat\nthe cat\nthe cat\nthe cat").unwrap();
    let r = continuity_report(
        &poem,
        &OntologyTagger { ontology: &g },
        &emb,
        &g,
        ContinuityConfig::default(),
    );
    assert_eq!(r.nouns, vec!["cat"; 5]);
    assert!(r.flags.single_noun);
    assert_eq!((r.centroid_mean, r.centroid_std), (Some(0.0), Some(0.0)));
    assert_eq!(r.ontology_avg_similarity, None);
}

#[test]
fn benthic_report_is_populated() {
    let g = OntologyGraph::load(&data("")).unwrap();
    let emb = EmbeddingTable::load(&data("embeddings.txt")).unwrap();
    let poem = tokenize(&std::fs::read_to_string(data("benthic.txt")).unwrap()).unwrap();
    let r = continuity_report(
        &poem,
        &OntologyTagger { ontology: &g },
        &emb,
        &g,
        ContinuityConfig::default(),
    );
    for n in ["crew", "hair", "helm", "realm"] {
        assert!(
            r.nouns.iter().any(|x| x == n),
            "{n} missing from {:?}",
            r.nouns
        );
    }
    assert!(r.centroid_mean.unwrap() > 0.0);
    let s = r.ontology_avg_similarity.unwrap();
    assert!(s > 0.0 && s <= 1.0);
}
