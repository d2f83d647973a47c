use std::collections::HashMap;
use std::path::{Path, PathBuf};

use limerick::corpus::{parse_corpus, tokenize, Poem};
use limerick::rhyme::{
    corpus_rhyme_distance, rhyme_distance, words_rhyme, PronunciationDictionary, RhymeConfig,
};
use proptest::prelude::*;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

/// Word -> set of rhyme tails, computed straight from the dictionary text.
fn oracle_tails(text: &str) -> HashMap<String, Vec<String>> {
    let mut out: HashMap<String, Vec<String>> = HashMap::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap().trim();
        if line.is_empty() || line.starts_with(";;;") {
            continue;
        }
        let mut parts = line.split_whitespace();
        let head = parts.next().unwrap().to_lowercase();
        let word = match head.find('(') {
            Some(i) if head.ends_with(')') => head[..i].to_string(),
            _ => head,
        };
        let phones: Vec<&str> = parts.collect();
        let primary = phones.iter().rposition(|p| p.ends_with('1'));
        let vowel = phones
            .iter()
            .rposition(|p| p.ends_with(|c: char| c.is_ascii_digit()));
        let Some(start) = primary.or(vowel) else {
            continue;
        };
        let tail: Vec<String> = phones[start..]
            .iter()
            .map(|p| p.trim_end_matches(|c: char| c.is_ascii_digit()).to_string())
            .collect();
        out.entry(word).or_default().push(tail.join(" "));
    }
    out
}

#[test]
fn fixture_agrees_with_exhaustive_tail_comparison() {
    let text = std::fs::read_to_string(data("rhyme-fixture.dict")).unwrap();
    let dict = PronunciationDictionary::parse(&text, "fixture").unwrap();
    let tails = oracle_tails(&text);
    let mut words: Vec<&String> = tails.keys().collect();
    words.sort();
    assert!(words.len() >= 150, "fixture has {} words", words.len());
    let cfg = RhymeConfig::default();
    let (mut pairs, mut rhyming) = (0, 0);
    for a in &words {
        for b in &words {
            let want = a == b || tails[*a].iter().any(|t| tails[*b].contains(t));
            assert_eq!(words_rhyme(a, b, &dict, cfg), want, "{a} / {b}");
            assert_eq!(words_rhyme(a, b, &dict, cfg), words_rhyme(b, a, &dict, cfg));
            pairs += 1;
            rhyming += usize::from(want && a != b);
        }
    }
    assert!(rhyming > 0 && rhyming < pairs);
}

fn benthic() -> Poem {
    tokenize(&std::fs::read_to_string(data("benthic.txt")).unwrap()).unwrap()
}

#[test]
fn benthic_rhymes_perfectly() {
    let dict = PronunciationDictionary::load(&data("cmudict-subset.dict")).unwrap();
    let r = rhyme_distance(&benthic(), &dict, RhymeConfig::default());
    assert!(r.oov_words.is_empty(), "{:?}", r.oov_words);
    assert_eq!(r.distance, 0.0);
    assert!(r.pairs.iter().all(|p| p.indicator == 0));
}

#[test]
fn reordered_benthic_loses_rhymes() {
    let dict = PronunciationDictionary::load(&data("cmudict-subset.dict")).unwrap();
    let lines = std::fs::read_to_string(data("benthic.txt")).unwrap();
    let l: Vec<&str> = lines.lines().collect();
    let shuffled = [l[0], l[2], l[1], l[4], l[3]].join("\n");
    let r = rhyme_distance(&tokenize(&shuffled).unwrap(), &dict, RhymeConfig::default());
    assert!(r.distance > 0.0);
}

const WORDS: &[&str] = &[
    "side", "hide", "reside", "helm", "realm", "cat", "hat", "dog", "fog", "moon", "soon", "tree",
    "zzzq", "blorp",
];

fn arb_poem() -> impl Strategy<Value = Poem> {
    prop::collection::vec(prop::collection::vec(prop::sample::select(WORDS), 1..4), 5).prop_map(
        |lines| {
            let text: Vec<String> = lines.iter().map(|l| l.join(" ")).collect();
            tokenize(&text.join("\n")).unwrap()
        },
    )
}

fn small_dict() -> PronunciationDictionary {
    PronunciationDictionary::load(&data("cmudict-subset.dict")).unwrap()
}

proptest! {
    #[test]
    fn distance_is_a_quarter_step(poem in arb_poem()) {
        let dict = small_dict();
        let d = rhyme_distance(&poem, &dict, RhymeConfig::default()).distance;
        prop_assert!([0.0, 0.25, 0.5, 0.75, 1.0].contains(&d));
    }

    #[test]
    fn corpus_mean_matches_per_poem_mean(poems in prop::collection::vec(arb_poem(), 1..12)) {
        let dict = small_dict();
        let cfg = RhymeConfig { strict_self_rhyme: true, ..Default::default() };
        let brute: f64 = poems
            .iter()
            .map(|p| {
                let w: Vec<String> = p.lines().iter().map(|l| l.last().unwrap().clone()).collect();
                [(0, 1), (2, 3), (0, 4), (1, 4)]
                    .iter()
                    .filter(|&&(i, j)| !words_rhyme(&w[i], &w[j], &dict, cfg))
                    .count() as f64
                    / 4.0
            })
            .sum::<f64>()
            / poems.len() as f64;
        let got = corpus_rhyme_distance(&poems, &dict, cfg).unwrap();
        prop_assert!((got - brute).abs() < 1e-12);
    }
}

#[test]
fn empty_corpus_is_an_error() {
    let (poems, _) = parse_corpus("");
    assert!(corpus_rhyme_distance(&poems, &small_dict(), RhymeConfig::default()).is_err());
}
