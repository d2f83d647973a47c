//! Pronunciation dictionary and the rhyme-distance metric.
//!
//! Two words rhyme when some pair of their pronunciations shares a rhyme
//! part: the phonemes from the last primary-stressed vowel to the end, with
//! stress digits dropped. A poem's distance is the fraction of the four
//! limerick pairs (1,2), (3,4), (1,5), (2,5) that fail to rhyme, so 0 is a
//! perfect AABBA scheme.

use std::collections::HashMap;
use std::path::Path;

use log::info;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Poem;

#[derive(Debug, Error)]
pub enum RhymeError {
    #[error("{path}:{line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },
    #[error("pronunciation has no vowel: {0:?}")]
    NoVowel(Vec<String>),
    #[error("no poems to average over")]
    EmptyList,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Pronunciation = Vec<String>;

/// Word to pronunciations, CMU style (ARPAbet with stress digits on vowels).
#[derive(Debug, Clone, Default)]
pub struct PronunciationDictionary {
    entries: HashMap<String, Vec<Pronunciation>>,
}

impl PronunciationDictionary {
    /// Parses CMU dictionary text: `;;;` comment lines, entries
    /// `WORD  PH1 PH2 ...`, variants `WORD(2)` merged under `word`.
    pub fn parse(text: &str, source: &str) -> Result<Self, RhymeError> {
        let mut entries: HashMap<String, Vec<Pronunciation>> = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() || line.starts_with(";;;") {
                continue;
            }
            let mut fields = line.split_whitespace();
            let head = fields.next().expect("non-empty line");
            let phones: Pronunciation = fields.map(str::to_string).collect();
            let err = |message: String| RhymeError::Format {
                path: source.to_string(),
                line: i + 1,
                message,
            };
            if phones.is_empty() {
                return Err(err(format!("entry {head:?} has no phonemes")));
            }
            if let Some(p) = phones
                .iter()
                .find(|p| !p.chars().all(|c| c.is_ascii_alphanumeric()))
            {
                return Err(err(format!("bad phoneme {p:?}")));
            }
            let word = match head.find('(') {
                Some(i)
                    if head.ends_with(')')
                        && head[i + 1..head.len() - 1].parse::<u32>().is_ok() =>
                {
                    &head[..i]
                }
                Some(_) => return Err(err(format!("bad variant marker in {head:?}"))),
                None => head,
            };
            entries.entry(word.to_lowercase()).or_default().push(phones);
        }
        Ok(PronunciationDictionary { entries })
    }

    pub fn load(path: &Path) -> Result<Self, RhymeError> {
        let text = std::fs::read_to_string(path)?;
        let dict = Self::parse(&text, &path.display().to_string())?;
        info!(
            "loaded {} words, {} pronunciations from {}",
            dict.len(),
            dict.entries.values().map(Vec::len).sum::<usize>(),
            path.display()
        );
        Ok(dict)
    }

    pub fn lookup(&self, word: &str) -> Option<&[Pronunciation]> {
        self.entries.get(&word.to_lowercase()).map(Vec::as_slice)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.lookup(word).is_some()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

fn is_vowel(phone: &str) -> bool {
    phone.ends_with(|c: char| c.is_ascii_digit()) || phone.starts_with(['A', 'E', 'I', 'O', 'U'])
}

fn strip_stress(phone: &str) -> String {
    phone
        .trim_end_matches(|c: char| c.is_ascii_digit())
        .to_string()
}

/// Suffix from the last stress-1 vowel (else the last vowel), without
/// stress marks.
pub fn rhyme_part(pron: &[String]) -> Result<Vec<String>, RhymeError> {
    let start = pron
        .iter()
        .rposition(|p| p.ends_with('1'))
        .or_else(|| pron.iter().rposition(|p| is_vowel(p)))
        .ok_or_else(|| RhymeError::NoVowel(pron.to_vec()))?;
    Ok(pron[start..].iter().map(|p| strip_stress(p)).collect())
}

/// Spelling-based stand-in for out-of-dictionary words: the letters from
/// the last vowel group to the end.
pub fn grapheme_rhyme_part(word: &str) -> String {
    let w: Vec<char> = word
        .to_lowercase()
        .chars()
        .filter(|c| c.is_alphabetic())
        .collect();
    let vowel = |c: &char| "aeiouy".contains(*c);
    let Some(last) = w.iter().rposition(vowel) else {
        return w.into_iter().collect();
    };
    let mut start = last;
    while start > 0 && vowel(&w[start - 1]) {
        start -= 1;
    }
    w[start..].iter().collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RhymeConfig {
    /// Identical words do not rhyme with each other.
    pub strict_self_rhyme: bool,
    /// Compare spellings when a word is missing from the dictionary.
    pub grapheme_fallback: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Rhyme,
    NoRhyme,
    /// At least one word is not in the dictionary and no fallback applies.
    Unknown,
}

fn rhyme_parts(word: &str, dict: &PronunciationDictionary) -> Option<Vec<Vec<String>>> {
    let prons = dict.lookup(word)?;
    Some(prons.iter().filter_map(|p| rhyme_part(p).ok()).collect())
}

pub fn rhyme_verdict(
    w1: &str,
    w2: &str,
    dict: &PronunciationDictionary,
    cfg: RhymeConfig,
) -> Verdict {
    let (a, b) = (w1.to_lowercase(), w2.to_lowercase());
    if a == b {
        if cfg.strict_self_rhyme {
            return Verdict::NoRhyme;
        }
        if dict.contains(&a) || cfg.grapheme_fallback {
            return Verdict::Rhyme;
        }
        return Verdict::Unknown;
    }
    match (rhyme_parts(&a, dict), rhyme_parts(&b, dict)) {
        (Some(pa), Some(pb)) => {
            if pa.iter().any(|x| pb.contains(x)) {
                Verdict::Rhyme
            } else {
                Verdict::NoRhyme
            }
        }
        _ if cfg.grapheme_fallback => {
            if grapheme_rhyme_part(&a) == grapheme_rhyme_part(&b) {
                Verdict::Rhyme
            } else {
                Verdict::NoRhyme
            }
        }
        _ => Verdict::Unknown,
    }
}

/// Whether the two words rhyme; unknown words never rhyme.
pub fn words_rhyme(w1: &str, w2: &str, dict: &PronunciationDictionary, cfg: RhymeConfig) -> bool {
    rhyme_verdict(w1, w2, dict, cfg) == Verdict::Rhyme
}

fn is_word_token(token: &str) -> bool {
    let chars: Vec<char> = token.chars().collect();
    chars.iter().any(|c| c.is_alphabetic())
        && chars.iter().enumerate().all(|(i, &c)| {
            c.is_alphabetic() || ((c == '\'' || c == '-') && i > 0 && i + 1 < chars.len())
        })
}

/// The last alphabetic token of a line.
pub fn rhyme_word(line: &[String]) -> Option<&str> {
    line.iter()
        .rev()
        .find(|t| is_word_token(t))
        .map(String::as_str)
}

/// Line pairs scored by the rhyme distance (1-based).
pub const RHYME_PAIRS: [(usize, usize); 4] = [(1, 2), (3, 4), (1, 5), (2, 5)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairVerdict {
    pub lines: (usize, usize),
    pub words: (Option<String>, Option<String>),
    pub rhymes: bool,
    /// 0 when the lines rhyme, 1 otherwise.
    pub indicator: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhymeReport {
    pub poem_id: String,
    pub pairs: Vec<PairVerdict>,
    pub distance: f64,
    pub oov_words: Vec<String>,
}

pub fn rhyme_distance(
    poem: &Poem,
    dict: &PronunciationDictionary,
    cfg: RhymeConfig,
) -> RhymeReport {
    let words: Vec<Option<String>> = poem
        .lines()
        .iter()
        .map(|l| rhyme_word(l).map(str::to_lowercase))
        .collect();
    let mut oov_words: Vec<String> = Vec::new();
    if !cfg.grapheme_fallback {
        for w in words.iter().flatten() {
            if !dict.contains(w) && !oov_words.contains(w) {
                oov_words.push(w.clone());
            }
        }
    }
    let pairs: Vec<PairVerdict> = RHYME_PAIRS
        .iter()
        .map(|&(i, j)| {
            let (a, b) = (&words[i - 1], &words[j - 1]);
            let rhymes = match (a, b) {
                (Some(a), Some(b)) => words_rhyme(a, b, dict, cfg),
                _ => false,
            };
            PairVerdict {
                lines: (i, j),
                words: (a.clone(), b.clone()),
                rhymes,
                indicator: u8::from(!rhymes),
            }
        })
        .collect();
    let distance = pairs.iter().map(|p| f64::from(p.indicator)).sum::<f64>() / pairs.len() as f64;
    RhymeReport {
        poem_id: poem.id().to_string(),
        pairs,
        distance,
        oov_words,
    }
}

/// Mean rhyme distance over a set of poems.
pub fn corpus_rhyme_distance(
    poems: &[Poem],
    dict: &PronunciationDictionary,
    cfg: RhymeConfig,
) -> Result<f64, RhymeError> {
    if poems.is_empty() {
        return Err(RhymeError::EmptyList);
    }
    let total: f64 = poems
        .iter()
        .map(|p| rhyme_distance(p, dict, cfg).distance)
        .sum();
    Ok(total / poems.len() as f64)
}
