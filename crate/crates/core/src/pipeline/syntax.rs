//! Lexicon-based syntax check and the three automatic corrections.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::corpus::{Poem, Vocabulary, RESERVED};
use crate::rhyme::PronunciationDictionary;

/// Known words, lowercase.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    words: HashSet<String>,
}

impl Lexicon {
    pub fn new<S: AsRef<str>>(words: impl IntoIterator<Item = S>) -> Self {
        Lexicon {
            words: words
                .into_iter()
                .map(|w| w.as_ref().to_lowercase())
                .collect(),
        }
    }

    /// Training vocabulary plus every dictionary headword.
    pub fn from_resources(vocab: &Vocabulary, dict: Option<&PronunciationDictionary>) -> Self {
        let mut lex = Lexicon::new(
            vocab
                .tokens()
                .iter()
                .filter(|t| !RESERVED.contains(&t.as_str())),
        );
        if let Some(d) = dict {
            lex.words.extend(d.words().map(str::to_string));
        }
        lex
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(&word.to_lowercase())
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionRule {
    CapitalizeI,
    CapitalizeFirst,
    CollapsePunctuation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Correction {
    pub rule: CorrectionRule,
    /// 1-based line number.
    pub line: usize,
    pub before: String,
    pub after: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "word", rename_all = "snake_case")]
pub enum SyntaxIssue {
    Oov(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntaxReport {
    pub ok: bool,
    pub reasons: Vec<SyntaxIssue>,
    pub corrections: Vec<Correction>,
    pub corrected: Poem,
}

fn is_alphabetic_token(t: &str) -> bool {
    t.chars().any(char::is_alphabetic)
}

fn is_punct(t: &str) -> bool {
    !t.is_empty() && !t.chars().any(char::is_alphanumeric)
}

/// "i" and its contractions ("i'm", "i'll", ...) as a capitalized form.
fn capital_i(token: &str) -> Option<String> {
    match token {
        "i" => Some("I".into()),
        t if t.starts_with("i'") && t.len() > 2 && t[2..].chars().all(char::is_alphabetic) => {
            Some(format!("I{}", &t[1..]))
        }
        _ => None,
    }
}

fn capitalize_first(token: &str) -> String {
    let mut chars = token.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Applies the corrections; running it on its own output changes nothing.
pub fn autocorrect(poem: &Poem) -> (Poem, Vec<Correction>) {
    let mut corrections = Vec::new();
    let lines = poem
        .lines()
        .iter()
        .enumerate()
        .map(|(li, line)| {
            let mut out: Vec<String> = Vec::with_capacity(line.len());
            for tok in line {
                if is_punct(tok) && out.last() == Some(tok) {
                    corrections.push(Correction {
                        rule: CorrectionRule::CollapsePunctuation,
                        line: li + 1,
                        before: format!("{tok} {tok}"),
                        after: tok.clone(),
                    });
                    continue;
                }
                match capital_i(tok) {
                    Some(fixed) => {
                        corrections.push(Correction {
                            rule: CorrectionRule::CapitalizeI,
                            line: li + 1,
                            before: tok.clone(),
                            after: fixed.clone(),
                        });
                        out.push(fixed);
                    }
                    None => out.push(tok.clone()),
                }
            }
            if li == 0 {
                if let Some(first) = out.iter_mut().find(|t| is_alphabetic_token(t)) {
                    let fixed = capitalize_first(first);
                    if fixed != *first {
                        corrections.push(Correction {
                            rule: CorrectionRule::CapitalizeFirst,
                            line: 1,
                            before: first.clone(),
                            after: fixed.clone(),
                        });
                        *first = fixed;
                    }
                }
            }
            out
        })
        .collect();
    let corrected =
        Poem::new(poem.id(), poem.source(), lines).expect("corrections keep lines non-empty");
    (corrected, corrections)
}

/// Flags every alphabetic token missing from `lexicon` and returns the
/// corrected poem either way.
pub fn syntactic_check(poem: &Poem, lexicon: &Lexicon) -> SyntaxReport {
    let mut reasons: Vec<SyntaxIssue> = Vec::new();
    for tok in poem.tokens().filter(|t| is_alphabetic_token(t)) {
        let issue = SyntaxIssue::Oov(tok.to_lowercase());
        if !lexicon.contains(tok) && !reasons.contains(&issue) {
            reasons.push(issue);
        }
    }
    let (corrected, corrections) = autocorrect(poem);
    SyntaxReport {
        ok: reasons.is_empty(),
        reasons,
        corrections,
        corrected,
    }
}
