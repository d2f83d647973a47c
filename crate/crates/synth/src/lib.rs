//! Deterministic synthetic limericks.
//!
//! The generator fills line templates from a small lexicon and ends lines
//! 1, 2 and 5 with words from one rhyme group and lines 3 and 4 with words
//! from another, giving an AABBA corpus with a known rhyme structure. It
//! exists so tests and demos have a realistic-sized corpus without
//! shipping a scraped dataset.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

const LEXICON_JSON: &str = include_str!("../../../data/synth/lexicon.json");

#[derive(Debug, Clone, Deserialize)]
pub struct Lexicon {
    pub rhyme_groups: Vec<Vec<String>>,
    pub slots: BTreeMap<String, Vec<String>>,
    /// One list of templates per line position; `{rhyme}` marks the line-final slot.
    pub templates: Vec<Vec<String>>,
}

impl Lexicon {
    pub fn builtin() -> Self {
        serde_json::from_str(LEXICON_JSON).expect("bundled lexicon is valid JSON")
    }

    /// Every word the templates can emit, sorted and deduplicated.
    pub fn words(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .rhyme_groups
            .iter()
            .flatten()
            .chain(self.slots.values().flatten())
            .cloned()
            .collect();
        for t in self.templates.iter().flatten() {
            out.extend(
                t.split_whitespace()
                    .filter(|w| !w.starts_with('{'))
                    .map(str::to_string),
            );
        }
        out.sort();
        out.dedup();
        out
    }
}

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub poems: usize,
    pub seed: u64,
    /// Fraction of poems in which one line ending is replaced by a random word.
    pub imperfect_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            poems: 5000,
            seed: 1,
            imperfect_rate: 0.05,
        }
    }
}

/// Generates `cfg.poems` limericks, each as five newline-separated lines.
pub fn generate(lex: &Lexicon, cfg: &SynthConfig) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // A rhymes need three distinct words, so they come from the larger families.
    let a_groups: Vec<&Vec<String>> = lex.rhyme_groups.iter().filter(|g| g.len() >= 5).collect();
    let all_words: Vec<&String> = lex.rhyme_groups.iter().flatten().collect();
    (0..cfg.poems)
        .map(|_| {
            let a = a_groups.choose(&mut rng).expect("lexicon has A groups");
            let b = loop {
                let g = lex
                    .rhyme_groups
                    .choose(&mut rng)
                    .expect("lexicon has groups");
                if !std::ptr::eq(g, *a) {
                    break g;
                }
            };
            let mut a_words: Vec<&String> = a.choose_multiple(&mut rng, 3).collect();
            let b_words: Vec<&String> = b.choose_multiple(&mut rng, 2).collect();
            if rng.gen_bool(cfg.imperfect_rate) {
                a_words[2] = all_words.choose(&mut rng).unwrap();
            }
            let ends = [a_words[0], a_words[1], b_words[0], b_words[1], a_words[2]];
            let lines: Vec<String> = ends
                .iter()
                .enumerate()
                .map(|(i, end)| {
                    let template = lex.templates[i].choose(&mut rng).unwrap();
                    let mut line = fill(template, end, lex, &mut rng);
                    match i {
                        4 => line.push_str(if rng.gen_bool(0.8) { "." } else { "!" }),
                        _ if rng.gen_bool(0.4) => line.push(','),
                        _ => {}
                    }
                    if i == 0 && rng.gen_bool(0.5) {
                        line = capitalize(&line);
                    }
                    line
                })
                .collect();
            lines.join("\n")
        })
        .collect()
}

fn fill(template: &str, rhyme: &str, lex: &Lexicon, rng: &mut ChaCha8Rng) -> String {
    template
        .split_whitespace()
        .map(
            |tok| match tok.strip_prefix('{').and_then(|t| t.strip_suffix('}')) {
                Some("rhyme") => rhyme.to_string(),
                Some(slot) => lex.slots[slot].choose(rng).unwrap().clone(),
                None => tok.to_string(),
            },
        )
        .collect::<Vec<_>>()
        .join(" ")
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Corpus file text: poems separated by one blank line.
pub fn corpus_text(poems: &[String]) -> String {
    let mut out = poems.join("\n\n");
    out.push('\n');
    out
}
