//! Smoothed n-gram model over encoded poems.
//!
//! The base estimate is interpolated absolute discounting:
//!
//! ```text
//! P_m(w | h) = max(c(h w) - D, 0) / c(h) + D * N1+(h •) / c(h) * P_{m-1}(w | h')
//! P_0(w)     = 1 / |V|
//! ```
//!
//! With [`Smoothing::KneserNey`] the lower orders count distinct left
//! extensions instead of raw occurrences (n-grams that begin with `<bos>`
//! keep raw counts, since nothing can precede them). Contexts never seen in
//! training fall through to the next lower order unchanged.
//!
//! An n-gram window cannot see the previous line once a new line starts.
//! The optional line-head memory restores that: the first token of line
//! `k` is predicted by a mixture of the n-gram estimate and one
//! discounted pair table per earlier line `j`, `P_kj(head_k | head_j)`,
//! each backed off to the unigram of line-`k` heads. Mixture weights are
//! fitted by EM on every tenth training sequence with counts taken from the
//! rest; the final counts use the whole corpus. Nothing in the component
//! knows about phonetics: in reverse encodings line heads are the line-final
//! words, so whatever the corpus pairs there is what it learns.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LanguageModel, LmError};
use crate::corpus::{
    Direction, EncodedSequence, TokenId, Vocabulary, BOS_ID, EOS_ID, LINE_ID, POEM_LINES, RESERVED,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Smoothing {
    KneserNey,
    AbsoluteDiscount,
    /// Unsmoothed relative frequencies of the longest seen context. Can
    /// assign zero probability; reference use only.
    Mle,
}

impl Smoothing {
    fn name(self) -> &'static str {
        match self {
            Smoothing::KneserNey => "kneser-ney",
            Smoothing::AbsoluteDiscount => "absolute-discount",
            Smoothing::Mle => "mle",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "kneser-ney" => Some(Smoothing::KneserNey),
            "absolute-discount" => Some(Smoothing::AbsoluteDiscount),
            "mle" => Some(Smoothing::Mle),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NGramConfig {
    pub order: usize,
    pub discount: f64,
    pub smoothing: Smoothing,
    pub line_memory: bool,
}

impl Default for NGramConfig {
    fn default() -> Self {
        NGramConfig {
            order: 3,
            discount: 0.75,
            smoothing: Smoothing::KneserNey,
            line_memory: true,
        }
    }
}

impl NGramConfig {
    pub fn with_order(order: usize) -> Self {
        NGramConfig {
            order,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<(), LmError> {
        if self.order == 0 {
            return Err(LmError::Config("order must be at least 1".into()));
        }
        if self.smoothing != Smoothing::Mle && !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err(LmError::Config(format!(
                "discount must lie in (0, 1], got {}",
                self.discount
            )));
        }
        Ok(())
    }

    fn memory_enabled(&self) -> bool {
        self.line_memory && self.smoothing != Smoothing::Mle
    }
}

/// Counts observed after one context, sorted by token id.
#[derive(Debug, Clone, Default)]
struct Continuations {
    total: u64,
    entries: Vec<(TokenId, u64)>,
}

impl Continuations {
    fn from_map(map: HashMap<TokenId, u64>) -> Self {
        let mut entries: Vec<(TokenId, u64)> = map.into_iter().collect();
        entries.sort_unstable();
        Continuations {
            total: entries.iter().map(|e| e.1).sum(),
            entries,
        }
    }

    fn count(&self, token: TokenId) -> u64 {
        self.entries
            .binary_search_by_key(&token, |e| e.0)
            .map(|i| self.entries[i].1)
            .unwrap_or(0)
    }

    /// Weight left for the lower-order estimate.
    fn backoff(&self, discount: f64) -> f64 {
        discount * self.entries.len() as f64 / self.total as f64
    }

    fn discounted(&self, count: u64, discount: f64) -> f64 {
        (count as f64 - discount).max(0.0) / self.total as f64
    }

    /// `backoff * lower + discounted(w)` over a full distribution, in place.
    fn interpolate(&self, lower: &mut [f64], discount: f64) {
        let gamma = self.backoff(discount);
        lower.iter_mut().for_each(|p| *p *= gamma);
        for &(w, c) in &self.entries {
            lower[w as usize] += self.discounted(c, discount);
        }
    }
}

/// Raw training counts; everything else is derived from these.
#[derive(Debug, Clone, Default)]
struct Counts {
    /// `ngrams[m - 1]` holds the m-gram counts.
    ngrams: Vec<HashMap<Vec<TokenId>, u64>>,
    /// `heads[k - 1]`: counts of the first word of line k.
    heads: Vec<HashMap<TokenId, u64>>,
    /// `(k, j, head_j, head_k)` co-occurrence counts for j < k.
    pairs: HashMap<(u8, u8, TokenId, TokenId), u64>,
    /// `ends[k - 1]`: how often line k was closed by `<line>` and by `<eos>`.
    ends: Vec<[u64; 2]>,
}

/// First word token of each line (punctuation skipped), `None` for a line
/// without words.
fn line_heads(tokens: &[TokenId], words: &[bool]) -> Vec<Option<TokenId>> {
    let mut heads = vec![None];
    for &t in tokens.iter().skip(1) {
        match t {
            EOS_ID => break,
            LINE_ID => heads.push(None),
            _ => {
                let head = heads.last_mut().expect("non-empty");
                if head.is_none() && words[t as usize] {
                    *head = Some(t);
                }
            }
        }
    }
    heads
}

impl Counts {
    fn collect(corpus: &[&EncodedSequence], order: usize, words: Option<&[bool]>) -> Self {
        let mut counts = Counts {
            ngrams: vec![HashMap::new(); order],
            heads: vec![HashMap::new(); POEM_LINES],
            pairs: HashMap::new(),
            ends: vec![[0; 2]; POEM_LINES],
        };
        for seq in corpus {
            let toks = &seq.tokens;
            for t in 1..toks.len() {
                for m in 1..=order.min(t + 1) {
                    *counts.ngrams[m - 1]
                        .entry(toks[t + 1 - m..=t].to_vec())
                        .or_default() += 1;
                }
            }
            if let Some(words) = words {
                let mut line = 0;
                for &t in toks {
                    let slot = match t {
                        LINE_ID => 0,
                        EOS_ID => 1,
                        _ => continue,
                    };
                    if let Some(e) = counts.ends.get_mut(line) {
                        e[slot] += 1;
                    }
                    line += 1;
                }
                let heads = line_heads(toks, words);
                for (k, hk) in heads.iter().enumerate().take(POEM_LINES) {
                    let Some(hk) = *hk else { continue };
                    *counts.heads[k].entry(hk).or_default() += 1;
                    for (j, hj) in heads.iter().enumerate().take(k) {
                        if let Some(hj) = *hj {
                            *counts
                                .pairs
                                .entry((k as u8 + 1, j as u8 + 1, hj, hk))
                                .or_default() += 1;
                        }
                    }
                }
            }
        }
        counts
    }
}

/// Line-head tables. All distributions here live on word tokens only; the
/// n-gram decides how much mass goes to words at a line start and the
/// memory redistributes that mass.
#[derive(Debug, Clone)]
struct LineMemory {
    /// Head unigrams per line (index k - 1).
    heads: Vec<Continuations>,
    pairs: HashMap<(u8, u8, TokenId), Continuations>,
    ends: Vec<[u64; 2]>,
    /// `weights[k - 1]` = [n-gram, line 1, ..., line k-1], summing to one.
    weights: Vec<Vec<f64>>,
    words: Vec<bool>,
    word_count: usize,
}

impl LineMemory {
    fn build(counts: &Counts, weights: Vec<Vec<f64>>, words: Vec<bool>) -> Self {
        let heads = counts
            .heads
            .iter()
            .map(|h| Continuations::from_map(h.clone()))
            .collect();
        let mut grouped: HashMap<(u8, u8, TokenId), HashMap<TokenId, u64>> = HashMap::new();
        for (&(k, j, hj, hk), &c) in &counts.pairs {
            grouped.entry((k, j, hj)).or_default().insert(hk, c);
        }
        let pairs = grouped
            .into_iter()
            .map(|(key, m)| (key, Continuations::from_map(m)))
            .collect();
        let word_count = words.iter().filter(|&&w| w).count();
        LineMemory {
            heads,
            pairs,
            ends: counts.ends.clone(),
            weights,
            words,
            word_count,
        }
    }

    fn uniform_weights() -> Vec<Vec<f64>> {
        (1..=POEM_LINES).map(|k| vec![1.0 / k as f64; k]).collect()
    }

    fn uniform(&self, token: TokenId) -> f64 {
        if self.words[token as usize] {
            1.0 / self.word_count as f64
        } else {
            0.0
        }
    }

    fn head_unigram(&self, k: usize, token: TokenId, discount: f64) -> f64 {
        let h = &self.heads[k - 1];
        if h.total == 0 {
            return self.uniform(token);
        }
        h.backoff(discount) * self.uniform(token) + h.discounted(h.count(token), discount)
    }

    fn head_unigram_dist(&self, k: usize, discount: f64) -> Vec<f64> {
        let mut dist: Vec<f64> = (0..self.words.len())
            .map(|t| self.uniform(t as TokenId))
            .collect();
        let h = &self.heads[k - 1];
        if h.total > 0 {
            h.interpolate(&mut dist, discount);
        }
        dist
    }

    fn pair_prob(&self, k: usize, j: usize, head_j: TokenId, token: TokenId, discount: f64) -> f64 {
        let base = self.head_unigram(k, token, discount);
        match self.pairs.get(&(k as u8, j as u8, head_j)) {
            Some(c) => c.backoff(discount) * base + c.discounted(c.count(token), discount),
            None => base,
        }
    }

    /// Active components for the head of line `k`: (component index, head of line j).
    fn components(heads: &[Option<TokenId>], k: usize) -> Vec<(usize, TokenId)> {
        (1..k)
            .filter_map(|j| heads.get(j - 1).copied().flatten().map(|h| (j, h)))
            .collect()
    }

    /// `Some((k, heads))` when the next word would be the first word of
    /// line `k >= 2`.
    fn position(&self, context: &[TokenId]) -> Option<(usize, Vec<Option<TokenId>>)> {
        if self.word_count == 0 {
            return None;
        }
        let last_line = context.iter().rposition(|&t| t == LINE_ID)?;
        if context[last_line + 1..]
            .iter()
            .any(|&t| t == EOS_ID || self.words[t as usize])
        {
            return None;
        }
        let k = context.iter().filter(|&&t| t == LINE_ID).count() + 1;
        if k > POEM_LINES {
            return None;
        }
        Some((k, line_heads(context, &self.words)))
    }

    /// Shares of `<line>` and `<eos>` among the two ways of closing the
    /// current line, or `None` past the last line or without data.
    fn end_split(&self, context: &[TokenId], discount: f64) -> Option<(f64, f64)> {
        if context.last() == Some(&EOS_ID) {
            return None;
        }
        let k = context.iter().filter(|&&t| t == LINE_ID).count() + 1;
        let [line, eos] = *self.ends.get(k - 1)?;
        let total = (line + eos) as f64;
        if total == 0.0 {
            return None;
        }
        let seen = f64::from(u8::from(line > 0) + u8::from(eos > 0));
        let share = |c: u64| (c as f64 - discount).max(0.0) / total + discount * seen / total * 0.5;
        Some((share(line), share(eos)))
    }

    /// Normalized mixture weights of the active components.
    fn active_weights(&self, k: usize, comps: &[(usize, TokenId)]) -> (f64, Vec<f64>) {
        let w = &self.weights[k - 1];
        let norm: f64 = w[0] + comps.iter().map(|&(j, _)| w[j]).sum::<f64>();
        (
            w[0] / norm,
            comps.iter().map(|&(j, _)| w[j] / norm).collect(),
        )
    }
}

/// Word tokens are those outside the reserved range with at least one
/// letter or digit.
fn word_mask(vocab: &Vocabulary) -> Vec<bool> {
    vocab
        .tokens()
        .iter()
        .enumerate()
        .map(|(i, t)| i >= RESERVED.len() && t.chars().any(char::is_alphanumeric))
        .collect()
}

#[derive(Debug, Clone)]
pub struct NGramModel {
    config: NGramConfig,
    direction: Direction,
    vocab_size: usize,
    vocab_hash: String,
    counts: Counts,
    words: Vec<bool>,
    /// `tables[m - 1]`: context of length m-1 -> counts used at order m.
    tables: Vec<HashMap<Vec<TokenId>, Continuations>>,
    memory: Option<LineMemory>,
}

impl NGramModel {
    pub fn train(
        corpus: &[EncodedSequence],
        vocab: &Vocabulary,
        config: NGramConfig,
    ) -> Result<Self, LmError> {
        config.validate()?;
        let first = corpus.first().ok_or(LmError::EmptyCorpus)?;
        let direction = first.direction;
        if corpus.iter().any(|s| s.direction != direction) {
            return Err(LmError::MixedDirection);
        }
        let vocab_size = vocab.len();
        if let Some(bad) = corpus
            .iter()
            .flat_map(|s| &s.tokens)
            .find(|&&t| t as usize >= vocab_size)
        {
            return Err(LmError::Config(format!(
                "token id {bad} outside vocabulary of {vocab_size}"
            )));
        }
        let words = word_mask(vocab);
        let memory = config.memory_enabled();
        let all: Vec<&EncodedSequence> = corpus.iter().collect();
        let weights = if memory {
            Some(Self::fit_memory_weights(
                &all, vocab, &words, &config, direction,
            ))
        } else {
            None
        };
        let counts = Counts::collect(&all, config.order, memory.then_some(words.as_slice()));
        Ok(Self::from_counts(
            config,
            direction,
            vocab.hash(),
            counts,
            words,
            weights,
        ))
    }

    fn from_counts(
        config: NGramConfig,
        direction: Direction,
        vocab_hash: String,
        counts: Counts,
        words: Vec<bool>,
        weights: Option<Vec<Vec<f64>>>,
    ) -> Self {
        let tables = Self::build_tables(&counts, &config);
        let memory = weights.map(|w| LineMemory::build(&counts, w, words.clone()));
        NGramModel {
            config,
            direction,
            vocab_size: words.len(),
            vocab_hash,
            counts,
            words,
            tables,
            memory,
        }
    }

    fn build_tables(
        counts: &Counts,
        config: &NGramConfig,
    ) -> Vec<HashMap<Vec<TokenId>, Continuations>> {
        let n = config.order;
        (1..=n)
            .map(|m| {
                let raw = &counts.ngrams[m - 1];
                let adjusted: HashMap<&Vec<TokenId>, u64> =
                    if config.smoothing == Smoothing::KneserNey && m < n {
                        let mut left: HashMap<&[TokenId], u64> = HashMap::new();
                        for key in counts.ngrams[m].keys() {
                            *left.entry(&key[1..]).or_default() += 1;
                        }
                        raw.iter()
                            .map(|(k, &c)| {
                                let adj = if k[0] == BOS_ID {
                                    c
                                } else {
                                    left.get(k.as_slice()).copied().unwrap_or(c)
                                };
                                (k, adj)
                            })
                            .collect()
                    } else {
                        raw.iter().map(|(k, &c)| (k, c)).collect()
                    };
                let mut grouped: HashMap<Vec<TokenId>, HashMap<TokenId, u64>> = HashMap::new();
                for (key, c) in adjusted {
                    grouped
                        .entry(key[..m - 1].to_vec())
                        .or_default()
                        .insert(key[m - 1], c);
                }
                grouped
                    .into_iter()
                    .map(|(ctx, m)| (ctx, Continuations::from_map(m)))
                    .collect()
            })
            .collect()
    }

    /// Fits the mixture weights of the line-head memory by EM on every
    /// tenth sequence, with counts from the remaining ones.
    fn fit_memory_weights(
        corpus: &[&EncodedSequence],
        vocab: &Vocabulary,
        words: &[bool],
        config: &NGramConfig,
        direction: Direction,
    ) -> Vec<Vec<f64>> {
        if corpus.len() < 10 {
            return LineMemory::uniform_weights();
        }
        type Indexed<'s> = Vec<(usize, &'s EncodedSequence)>;
        let (held, fit): (Indexed, Indexed) = corpus
            .iter()
            .copied()
            .enumerate()
            .partition(|(i, _)| i % 10 == 9);
        let fit: Vec<&EncodedSequence> = fit.into_iter().map(|(_, s)| s).collect();
        let counts = Counts::collect(&fit, config.order, Some(words));
        let probe = Self::from_counts(
            config.clone(),
            direction,
            vocab.hash(),
            counts,
            words.to_vec(),
            Some(LineMemory::uniform_weights()),
        );
        let memory = probe.memory.as_ref().expect("probe has memory");
        let d = config.discount;

        // events[k - 1]: per held-out head, the probability under each component.
        let mut events: Vec<Vec<Vec<(usize, f64)>>> = vec![Vec::new(); POEM_LINES];
        for (_, seq) in held {
            let toks = &seq.tokens;
            for t in 1..toks.len() {
                let ctx = &toks[..t];
                let token = toks[t];
                if !words[token as usize] {
                    continue;
                }
                let Some((k, heads)) = memory.position(ctx) else {
                    continue;
                };
                let dist = probe.ngram_dist(ctx);
                let word_mass: f64 = dist
                    .iter()
                    .zip(words)
                    .filter(|(_, &w)| w)
                    .map(|(p, _)| p)
                    .sum();
                let mut comps = vec![(0, dist[token as usize] / word_mass)];
                for (j, hj) in LineMemory::components(&heads, k) {
                    comps.push((j, memory.pair_prob(k, j, hj, token, d)));
                }
                events[k - 1].push(comps);
            }
        }

        let mut weights = LineMemory::uniform_weights();
        for k in 2..=POEM_LINES {
            let evs = &events[k - 1];
            if evs.is_empty() {
                continue;
            }
            let w = &mut weights[k - 1];
            for _ in 0..200 {
                let mut resp = vec![0.0; k];
                for comps in evs {
                    let denom: f64 = comps.iter().map(|&(c, p)| w[c] * p).sum();
                    for &(c, p) in comps {
                        resp[c] += w[c] * p / denom;
                    }
                }
                let total: f64 = resp.iter().sum();
                let next: Vec<f64> = resp.iter().map(|r| r / total).collect();
                let delta: f64 = next.iter().zip(w.iter()).map(|(a, b)| (a - b).abs()).sum();
                *w = next;
                if delta < 1e-10 {
                    break;
                }
            }
        }
        weights
    }

    pub fn config(&self) -> &NGramConfig {
        &self.config
    }

    pub fn order(&self) -> usize {
        self.config.order
    }

    /// Mixture weights of the line-head memory for line `k` (2..=5).
    pub fn memory_weights(&self, k: usize) -> Option<&[f64]> {
        self.memory
            .as_ref()
            .and_then(|m| m.weights.get(k.checked_sub(1)?))
            .map(Vec::as_slice)
    }

    fn history<'a>(&self, context: &'a [TokenId]) -> &'a [TokenId] {
        const BOS_ONLY: &[TokenId] = &[BOS_ID];
        let ctx = if context.is_empty() {
            BOS_ONLY
        } else {
            context
        };
        &ctx[ctx.len().saturating_sub(self.config.order - 1)..]
    }

    fn seen_contexts<'a>(
        &'a self,
        hist: &'a [TokenId],
    ) -> impl Iterator<Item = &'a Continuations> + 'a {
        (1..=self.config.order)
            .take_while(move |m| m - 1 <= hist.len())
            .filter_map(move |m| self.tables[m - 1].get(&hist[hist.len() - (m - 1)..]))
    }

    /// Distribution from the n-gram tables alone.
    pub fn ngram_dist(&self, context: &[TokenId]) -> Vec<f64> {
        let hist = self.history(context);
        let v = self.vocab_size;
        let d = self.config.discount;
        if self.config.smoothing == Smoothing::Mle {
            return match self.seen_contexts(hist).last() {
                Some(c) => {
                    let mut dist = vec![0.0; v];
                    for &(w, n) in &c.entries {
                        dist[w as usize] = n as f64 / c.total as f64;
                    }
                    dist
                }
                None => vec![1.0 / v as f64; v],
            };
        }
        let mut dist = vec![1.0 / v as f64; v];
        for c in self.seen_contexts(hist) {
            c.interpolate(&mut dist, d);
        }
        dist
    }

    fn ngram_log_prob(&self, context: &[TokenId], token: TokenId) -> f64 {
        let hist = self.history(context);
        let d = self.config.discount;
        if self.config.smoothing == Smoothing::Mle {
            return match self.seen_contexts(hist).last() {
                Some(c) => (c.count(token) as f64 / c.total as f64).ln(),
                None => -(self.vocab_size as f64).ln(),
            };
        }
        let mut p = 1.0 / self.vocab_size as f64;
        for c in self.seen_contexts(hist) {
            p = c.backoff(d) * p + c.discounted(c.count(token), d);
        }
        p.ln()
    }

    fn end_split(&self, context: &[TokenId]) -> Option<(f64, f64)> {
        self.memory
            .as_ref()?
            .end_split(context, self.config.discount)
    }

    fn memory_position(
        &self,
        context: &[TokenId],
    ) -> Option<(&LineMemory, usize, Vec<Option<TokenId>>)> {
        let memory = self.memory.as_ref()?;
        let (k, heads) = memory.position(context)?;
        Some((memory, k, heads))
    }

    fn check_context(&self, context: &[TokenId]) -> Result<(), LmError> {
        match context.iter().find(|&&t| t as usize >= self.vocab_size) {
            Some(t) => Err(LmError::Config(format!(
                "context token {t} outside vocabulary"
            ))),
            None => Ok(()),
        }
    }
}

impl LanguageModel for NGramModel {
    fn direction(&self) -> Direction {
        self.direction
    }

    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn vocab_hash(&self) -> &str {
        &self.vocab_hash
    }

    fn next_token_dist(&self, context: &[TokenId]) -> Result<Vec<f64>, LmError> {
        self.check_context(context)?;
        let mut dist = self.ngram_dist(context);
        if let Some((line, eos)) = self.end_split(context) {
            let boundary = dist[LINE_ID as usize] + dist[EOS_ID as usize];
            dist[LINE_ID as usize] = boundary * line;
            dist[EOS_ID as usize] = boundary * eos;
        }
        if let Some((memory, k, heads)) = self.memory_position(context) {
            let d = self.config.discount;
            let comps = LineMemory::components(&heads, k);
            let (keep, lambdas) = memory.active_weights(k, &comps);
            let word_mass: f64 = dist
                .iter()
                .zip(&self.words)
                .filter(|(_, &w)| w)
                .map(|(p, _)| p)
                .sum();
            let mut mixed = vec![0.0; self.vocab_size];
            let base = memory.head_unigram_dist(k, d);
            for (&(j, hj), lambda) in comps.iter().zip(&lambdas) {
                let mut pair = base.clone();
                if let Some(c) = memory.pairs.get(&(k as u8, j as u8, hj)) {
                    c.interpolate(&mut pair, d);
                }
                mixed
                    .iter_mut()
                    .zip(&pair)
                    .for_each(|(m, q)| *m += lambda * q);
            }
            for ((p, m), &w) in dist.iter_mut().zip(&mixed).zip(&self.words) {
                if w {
                    *p = keep * *p + word_mass * m;
                }
            }
        }
        Ok(dist)
    }

    fn log_prob(&self, context: &[TokenId], token: TokenId) -> Result<f64, LmError> {
        self.check_context(context)?;
        if token as usize >= self.vocab_size {
            return Err(LmError::Config(format!("token {token} outside vocabulary")));
        }
        match self.memory_position(context) {
            Some(_) if self.words[token as usize] => {
                let dist = self.next_token_dist(context)?;
                Ok(dist[token as usize].ln())
            }
            _ => match self.end_split(context) {
                Some((line, eos)) if token == LINE_ID || token == EOS_ID => {
                    let boundary = self.ngram_log_prob(context, LINE_ID).exp()
                        + self.ngram_log_prob(context, EOS_ID).exp();
                    Ok((boundary * if token == LINE_ID { line } else { eos }).ln())
                }
                _ => Ok(self.ngram_log_prob(context, token)),
            },
        }
    }
}

const MODEL_MAGIC: &str = "limerick-ngram v1";

// Persistence: a line-oriented text format. Floats are stored as the hex
// of their IEEE-754 bits so a save/load/save cycle is byte-identical.
//
//   limerick-ngram v1
//   direction <forward|reverse>
//   order <n>
//   smoothing <kneser-ney|absolute-discount|mle>
//   discount <f64 bits as 16 hex digits>
//   line-memory <0|1>
//   vocab-size <|V|>
//   vocab-hash <hex>
//   s <id>                           a non-word (punctuation) token id
//   n <id> ... <id> <count>          one per m-gram, sorted by (m, ids)
//   h <k> <id> <count>               line-head unigram counts
//   p <k> <j> <head_j> <head_k> <count>
//   e <k> <closed by line> <closed by eos>
//   w <k> <bits> ... <bits>          memory weights for line k
//   end
impl NGramModel {
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        let mut out = String::new();
        let _ = writeln!(out, "{MODEL_MAGIC}");
        let _ = writeln!(out, "direction {}", self.direction);
        let _ = writeln!(out, "order {}", self.config.order);
        let _ = writeln!(out, "smoothing {}", self.config.smoothing.name());
        let _ = writeln!(out, "discount {:016x}", self.config.discount.to_bits());
        let _ = writeln!(out, "line-memory {}", u8::from(self.config.line_memory));
        let _ = writeln!(out, "vocab-size {}", self.vocab_size);
        let _ = writeln!(out, "vocab-hash {}", self.vocab_hash);
        for (id, _) in self
            .words
            .iter()
            .enumerate()
            .skip(RESERVED.len())
            .filter(|(_, &w)| !w)
        {
            let _ = writeln!(out, "s {id}");
        }
        for table in &self.counts.ngrams {
            let sorted: BTreeMap<&Vec<TokenId>, u64> = table.iter().map(|(k, &c)| (k, c)).collect();
            for (key, c) in sorted {
                out.push('n');
                for id in key {
                    let _ = write!(out, " {id}");
                }
                let _ = writeln!(out, " {c}");
            }
        }
        if let Some(memory) = &self.memory {
            for (k, heads) in self.counts.heads.iter().enumerate() {
                let sorted: BTreeMap<TokenId, u64> = heads.iter().map(|(&t, &c)| (t, c)).collect();
                for (t, c) in sorted {
                    let _ = writeln!(out, "h {} {t} {c}", k + 1);
                }
            }
            let sorted: BTreeMap<_, _> = self.counts.pairs.iter().collect();
            for ((k, j, hj, hk), c) in sorted {
                let _ = writeln!(out, "p {k} {j} {hj} {hk} {c}");
            }
            for (k, [line, eos]) in self.counts.ends.iter().enumerate() {
                let _ = writeln!(out, "e {} {line} {eos}", k + 1);
            }
            for (k, ws) in memory.weights.iter().enumerate() {
                let _ = write!(out, "w {}", k + 1);
                for x in ws {
                    let _ = write!(out, " {:016x}", x.to_bits());
                }
                out.push('\n');
            }
        }
        out.push_str("end\n");
        w.write_all(out.as_bytes())
    }

    pub fn read_from(r: impl BufRead, source: &str) -> Result<Self, LmError> {
        let err = |line: usize, message: String| LmError::Format {
            path: source.to_string(),
            line,
            message,
        };
        let mut lines = r.lines().enumerate();
        let mut next_header = |key: &str| -> Result<(usize, String), LmError> {
            let (i, line) = lines
                .next()
                .ok_or_else(|| err(0, format!("truncated before {key}")))?;
            let line = line?;
            let value = line
                .strip_prefix(key)
                .and_then(|v| v.strip_prefix(' '))
                .ok_or_else(|| err(i + 1, format!("expected {key}")))?;
            Ok((i + 1, value.to_string()))
        };
        let (_, magic) =
            next_header("limerick-ngram").map_err(|_| err(1, "not a model file".into()))?;
        if format!("limerick-ngram {magic}") != MODEL_MAGIC {
            return Err(err(1, format!("unsupported model version {magic:?}")));
        }
        let (i, v) = next_header("direction")?;
        let direction: Direction = v.parse().map_err(|e| err(i, e))?;
        let (i, v) = next_header("order")?;
        let order: usize = v.parse().map_err(|_| err(i, "bad order".into()))?;
        let (i, v) = next_header("smoothing")?;
        let smoothing =
            Smoothing::parse(&v).ok_or_else(|| err(i, format!("unknown smoothing {v:?}")))?;
        let (i, v) = next_header("discount")?;
        let discount =
            f64::from_bits(u64::from_str_radix(&v, 16).map_err(|_| err(i, "bad discount".into()))?);
        let (i, v) = next_header("line-memory")?;
        let line_memory = match v.as_str() {
            "0" => false,
            "1" => true,
            _ => return Err(err(i, "bad line-memory flag".into())),
        };
        let (i, v) = next_header("vocab-size")?;
        let vocab_size: usize = v.parse().map_err(|_| err(i, "bad vocab-size".into()))?;
        let (_, vocab_hash) = next_header("vocab-hash")?;
        let config = NGramConfig {
            order,
            discount,
            smoothing,
            line_memory,
        };
        config.validate()?;

        let mut counts = Counts {
            ngrams: vec![HashMap::new(); order],
            heads: vec![HashMap::new(); POEM_LINES],
            pairs: HashMap::new(),
            ends: vec![[0; 2]; POEM_LINES],
        };
        let mut weights = LineMemory::uniform_weights();
        let mut words: Vec<bool> = (0..vocab_size).map(|i| i >= RESERVED.len()).collect();
        let mut ended = false;
        for (i, line) in lines {
            let line = line?;
            let lineno = i + 1;
            let fields: Vec<&str> = line.split_whitespace().collect();
            let nums = |fs: &[&str]| -> Result<Vec<u64>, LmError> {
                fs.iter()
                    .map(|f| {
                        f.parse::<u64>()
                            .map_err(|_| err(lineno, format!("bad number {f:?}")))
                    })
                    .collect()
            };
            match fields.split_first() {
                Some((&"s", rest)) => match nums(rest)?.as_slice() {
                    &[id] if (RESERVED.len() as u64..vocab_size as u64).contains(&id) => {
                        words[id as usize] = false
                    }
                    _ => return Err(err(lineno, "bad non-word record".into())),
                },
                Some((&"n", rest)) => {
                    let v = nums(rest)?;
                    let m = v.len().saturating_sub(1);
                    if m == 0 || m > order {
                        return Err(err(lineno, "n-gram length outside model order".into()));
                    }
                    let key = v[..m].iter().map(|&x| x as TokenId).collect();
                    counts.ngrams[m - 1].insert(key, v[m]);
                }
                Some((&"h", rest)) => {
                    let v = nums(rest)?;
                    match v.as_slice() {
                        &[k, t, c] if (1..=POEM_LINES as u64).contains(&k) => {
                            counts.heads[k as usize - 1].insert(t as TokenId, c);
                        }
                        _ => return Err(err(lineno, "bad head record".into())),
                    }
                }
                Some((&"p", rest)) => {
                    let v = nums(rest)?;
                    match v.as_slice() {
                        &[k, j, hj, hk, c] if j < k && k <= POEM_LINES as u64 => {
                            counts
                                .pairs
                                .insert((k as u8, j as u8, hj as TokenId, hk as TokenId), c);
                        }
                        _ => return Err(err(lineno, "bad pair record".into())),
                    }
                }
                Some((&"e", rest)) => match nums(rest)?.as_slice() {
                    &[k, line, eos] if (1..=POEM_LINES as u64).contains(&k) => {
                        counts.ends[k as usize - 1] = [line, eos];
                    }
                    _ => return Err(err(lineno, "bad line-end record".into())),
                },
                Some((&"w", rest)) => {
                    let k: usize = rest
                        .first()
                        .and_then(|k| k.parse().ok())
                        .filter(|k| (1..=POEM_LINES).contains(k))
                        .ok_or_else(|| err(lineno, "bad weight line".into()))?;
                    let ws = rest[1..]
                        .iter()
                        .map(|b| u64::from_str_radix(b, 16).map(f64::from_bits))
                        .collect::<Result<Vec<f64>, _>>()
                        .map_err(|_| err(lineno, "bad weight".into()))?;
                    if ws.len() != k {
                        return Err(err(lineno, format!("line {k} needs {k} weights")));
                    }
                    weights[k - 1] = ws;
                }
                Some((&"end", _)) => {
                    ended = true;
                    break;
                }
                None => continue,
                Some((tag, _)) => return Err(err(lineno, format!("unknown record {tag:?}"))),
            }
        }
        if !ended {
            return Err(err(0, "missing end marker".into()));
        }
        let memory = config.memory_enabled().then_some(weights);
        Ok(Self::from_counts(
            config, direction, vocab_hash, counts, words, memory,
        ))
    }

    pub fn save(&self, path: &Path) -> Result<(), LmError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, LmError> {
        let f = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f), &path.display().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{encode, tokenize, Poem};

    fn poems() -> Vec<Poem> {
        [
            "a cat sat\non a mat\nthe dog ran\nthe log began\nand that was that",
            "a dog sat\non a log\nthe cat ran\nthe mat began\nand that was the dog",
            "the cat\nthe hat\na log\na dog\nthat cat",
        ]
        .iter()
        .map(|t| tokenize(t).unwrap())
        .collect()
    }

    fn setup(direction: Direction) -> (Vocabulary, Vec<EncodedSequence>) {
        let ps = poems();
        let v = Vocabulary::build(&ps);
        let seqs = ps.iter().map(|p| encode(p, direction, &v)).collect();
        (v, seqs)
    }

    #[test]
    fn distributions_are_normalized_and_positive() {
        let (v, seqs) = setup(Direction::Reverse);
        let m = NGramModel::train(&seqs, &v, NGramConfig::default()).unwrap();
        for seq in &seqs {
            for t in 0..=seq.tokens.len() {
                let d = m.next_token_dist(&seq.tokens[..t]).unwrap();
                assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                assert!(d.iter().all(|&p| p > 0.0));
            }
        }
    }

    #[test]
    fn mle_unigram_is_relative_frequency() {
        let v = Vocabulary::from_tokens(
            crate::corpus::RESERVED
                .iter()
                .map(|s| s.to_string())
                .chain(["a".into(), "b".into()])
                .collect(),
        )
        .unwrap();
        let (a, b) = (v.id("a"), v.id("b"));
        // Four predicted tokens: a a a b (no <eos>, so it does not take mass).
        let seq = EncodedSequence {
            direction: Direction::Forward,
            tokens: vec![BOS_ID, a, a, a, b],
        };
        let cfg = NGramConfig {
            order: 1,
            smoothing: Smoothing::Mle,
            line_memory: false,
            ..Default::default()
        };
        let m = NGramModel::train(&[seq], &v, cfg).unwrap();
        let d = m.next_token_dist(&[BOS_ID]).unwrap();
        assert_eq!(d[a as usize], 0.75);
        assert_eq!(d[b as usize], 0.25);
    }

    #[test]
    fn memorized_continuation_dominates() {
        let (v, seqs) = setup(Direction::Forward);
        let one = vec![seqs[0].clone(); 5];
        let m = NGramModel::train(&one, &v, NGramConfig::default()).unwrap();
        let toks = &one[0].tokens;
        for t in 2..toks.len() {
            let d = m.next_token_dist(&toks[..t]).unwrap();
            let argmax = d
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            // Contexts that recur in the poem may have several continuations.
            let attested: Vec<TokenId> = (2..toks.len())
                .filter(|&u| toks[u - 2..u] == toks[t - 2..t])
                .map(|u| toks[u])
                .collect();
            assert!(attested.contains(&(argmax as TokenId)), "position {t}");
        }
    }

    #[test]
    fn empty_context_reads_as_bos() {
        let (v, seqs) = setup(Direction::Forward);
        let m = NGramModel::train(&seqs, &v, NGramConfig::default()).unwrap();
        assert_eq!(
            m.next_token_dist(&[]).unwrap(),
            m.next_token_dist(&[BOS_ID]).unwrap()
        );
    }

    #[test]
    fn training_errors() {
        let (v, mut seqs) = setup(Direction::Forward);
        assert!(matches!(
            NGramModel::train(&[], &v, NGramConfig::default()),
            Err(LmError::EmptyCorpus)
        ));
        seqs[1].direction = Direction::Reverse;
        assert!(matches!(
            NGramModel::train(&seqs, &v, NGramConfig::default()),
            Err(LmError::MixedDirection)
        ));
        let (_, seqs) = setup(Direction::Forward);
        let bad = NGramConfig {
            discount: 1.5,
            ..Default::default()
        };
        assert!(matches!(
            NGramModel::train(&seqs, &v, bad),
            Err(LmError::Config(_))
        ));
    }

    #[test]
    fn log_prob_agrees_with_distribution() {
        let (v, seqs) = setup(Direction::Reverse);
        let m = NGramModel::train(&seqs, &v, NGramConfig::default()).unwrap();
        for seq in &seqs {
            for t in 1..seq.tokens.len() {
                let ctx = &seq.tokens[..t];
                let d = m.next_token_dist(ctx).unwrap();
                for w in 0..v.len() as TokenId {
                    let lp = m.log_prob(ctx, w).unwrap();
                    assert!((lp.exp() - d[w as usize]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn persistence_is_byte_exact() {
        let (v, seqs) = setup(Direction::Reverse);
        let many: Vec<EncodedSequence> = seqs.iter().cycle().take(30).cloned().collect();
        let m = NGramModel::train(&many, &v, NGramConfig::default()).unwrap();
        let mut a = Vec::new();
        m.write_to(&mut a).unwrap();
        let back = NGramModel::read_from(&a[..], "mem").unwrap();
        let mut b = Vec::new();
        back.write_to(&mut b).unwrap();
        assert_eq!(a, b);
        for seq in &seqs {
            for t in 1..seq.tokens.len() {
                assert_eq!(
                    m.next_token_dist(&seq.tokens[..t]).unwrap(),
                    back.next_token_dist(&seq.tokens[..t]).unwrap()
                );
            }
        }
    }

    #[test]
    fn corrupt_model_files_are_rejected() {
        assert!(NGramModel::read_from(&b"nonsense\n"[..], "x").is_err());
        let (v, seqs) = setup(Direction::Forward);
        let m = NGramModel::train(&seqs, &v, NGramConfig::default()).unwrap();
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let truncated = text.replace("end\n", "");
        assert!(NGramModel::read_from(truncated.as_bytes(), "x").is_err());
    }

    #[test]
    fn line_heads_skip_punctuation() {
        // ids 4..=10 are words except 5, which is punctuation.
        let words: Vec<bool> = (0..11).map(|i| i >= 4 && i != 5).collect();
        let toks = [BOS_ID, 7, 8, LINE_ID, 5, 9, LINE_ID, 5, LINE_ID, 10];
        assert_eq!(
            line_heads(&toks, &words),
            vec![Some(7), Some(9), None, Some(10)]
        );
        let memory = LineMemory::build(&Counts::default(), LineMemory::uniform_weights(), words);
        let (k, heads) = memory.position(&toks[..5]).unwrap();
        assert_eq!(k, 2);
        assert_eq!(heads, vec![Some(7), None]);
        assert!(memory.position(&toks[..6]).is_none());
        assert!(memory.position(&toks[..3]).is_none());
    }
}
