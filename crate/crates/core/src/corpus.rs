//! Poem corpora: tokenization, vocabulary, structural encoding and splits.
//!
//! A poem is encoded as `<bos> line1 <line> line2 <line> ... line5 <eos>`.
//! In the reverse direction each line's tokens are reversed in place while
//! the line order is kept, so the line-final (rhyming) word of every line is
//! the first thing a reverse model emits for that line.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub type TokenId = u32;

pub const BOS: &str = "<bos>";
pub const LINE: &str = "<line>";
pub const EOS: &str = "<eos>";
pub const UNK: &str = "<unk>";

pub const BOS_ID: TokenId = 0;
pub const LINE_ID: TokenId = 1;
pub const EOS_ID: TokenId = 2;
pub const UNK_ID: TokenId = 3;

pub const RESERVED: [&str; 4] = [BOS, LINE, EOS, UNK];

/// Number of lines in a limerick.
pub const POEM_LINES: usize = 5;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("expected {POEM_LINES} lines, found {0}")]
    LineCount(usize),
    #[error("line {0} is empty")]
    EmptyLine(usize),
    #[error("token {0:?} is reserved")]
    ReservedToken(String),
    #[error("malformed sequence: {0}")]
    MalformedSequence(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("validation fraction must lie in (0, 0.5), got {0}")]
    InvalidFraction(f64),
    #[error("{path}:{line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Reverse,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Forward => "forward",
            Direction::Reverse => "reverse",
        })
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "forward" => Ok(Direction::Forward),
            "reverse" => Ok(Direction::Reverse),
            other => Err(format!(
                "unknown direction {other:?} (expected forward or reverse)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Corpus,
    Generated,
}

/// Five non-empty lines of word and punctuation tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Poem {
    id: String,
    source: Source,
    lines: Vec<Vec<String>>,
}

impl Poem {
    pub fn new(
        id: impl Into<String>,
        source: Source,
        lines: Vec<Vec<String>>,
    ) -> Result<Self, CorpusError> {
        if lines.len() != POEM_LINES {
            return Err(CorpusError::LineCount(lines.len()));
        }
        for (i, line) in lines.iter().enumerate() {
            if line.is_empty() {
                return Err(CorpusError::EmptyLine(i + 1));
            }
            if let Some(tok) = line.iter().find(|t| RESERVED.contains(&t.as_str())) {
                return Err(CorpusError::ReservedToken(tok.clone()));
            }
        }
        Ok(Poem {
            id: id.into(),
            source,
            lines,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn source(&self) -> Source {
        self.source
    }

    pub fn lines(&self) -> &[Vec<String>] {
        &self.lines
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.lines.iter().flatten().map(String::as_str)
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn with_source(mut self, source: Source) -> Self {
        self.source = source;
        self
    }

    /// Lines as space-joined token strings.
    pub fn line_strings(&self) -> Vec<String> {
        self.lines.iter().map(|l| l.join(" ")).collect()
    }

    pub fn text(&self) -> String {
        self.line_strings().join("\n")
    }

    /// Replaces the token lines, re-checking every invariant.
    pub fn map_lines(
        &self,
        f: impl FnOnce(&[Vec<String>]) -> Vec<Vec<String>>,
    ) -> Result<Poem, CorpusError> {
        Poem::new(self.id.clone(), self.source, f(&self.lines))
    }
}

/// Stable identifier derived from the token content.
pub fn content_id(lines: &[Vec<String>]) -> String {
    let mut hasher = Sha256::new();
    for line in lines {
        hasher.update(line.join(" ").as_bytes());
        hasher.update(b"\n");
    }
    format!("p{}", &hex::encode(hasher.finalize())[..12])
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

/// Splits one line into lowercase word tokens and single-character
/// punctuation tokens. Apostrophes and hyphens stay inside a word when both
/// neighbours are word characters (`cap'n`, `law's`, `well-known`).
pub fn tokenize_line(line: &str) -> Vec<String> {
    let chars: Vec<char> = line.chars().collect();
    let mut tokens = Vec::new();
    let mut word = String::new();
    for (i, &c) in chars.iter().enumerate() {
        let joiner = matches!(c, '\'' | '’' | '-')
            && !word.is_empty()
            && chars.get(i + 1).is_some_and(|&n| is_word_char(n));
        if is_word_char(c) || joiner {
            word.extend(c.to_lowercase().map(|c| if c == '’' { '\'' } else { c }));
            continue;
        }
        if !word.is_empty() {
            tokens.push(std::mem::take(&mut word));
        }
        if !c.is_whitespace() {
            tokens.push(c.to_string());
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    tokens
}

/// Tokenizes a five-line poem. The id is derived from the content; corpus
/// loaders replace it with a positional id.
pub fn tokenize(text: &str) -> Result<Poem, CorpusError> {
    let raw: Vec<&str> = text.trim_matches('\n').split('\n').collect();
    if raw.len() != POEM_LINES {
        return Err(CorpusError::LineCount(raw.len()));
    }
    let mut lines = Vec::with_capacity(POEM_LINES);
    for (i, line) in raw.iter().enumerate() {
        let toks = tokenize_line(line);
        if toks.is_empty() {
            return Err(CorpusError::EmptyLine(i + 1));
        }
        lines.push(toks);
    }
    let id = content_id(&lines);
    Poem::new(id, Source::Corpus, lines)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedBlock {
    pub first_line: usize,
    pub reason: String,
}

/// Parses a corpus: five-line blocks separated by one or more blank lines.
/// Invalid blocks are skipped and reported; poems get ids `c000000`, ...
pub fn parse_corpus(text: &str) -> (Vec<Poem>, Vec<SkippedBlock>) {
    let mut poems = Vec::new();
    let mut skipped = Vec::new();
    let mut block: Vec<&str> = Vec::new();
    let mut block_start = 1;
    let mut flush = |block: &mut Vec<&str>, start: usize, poems: &mut Vec<Poem>| {
        if block.is_empty() {
            return;
        }
        match tokenize(&block.join("\n")) {
            Ok(p) => {
                let id = format!("c{:06}", poems.len());
                poems.push(p.with_id(id));
            }
            Err(e) => {
                warn!("skipping block at line {start}: {e}");
                skipped.push(SkippedBlock {
                    first_line: start,
                    reason: e.to_string(),
                });
            }
        }
        block.clear();
    };
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            flush(&mut block, block_start, &mut poems);
        } else {
            if block.is_empty() {
                block_start = i + 1;
            }
            block.push(line);
        }
    }
    flush(&mut block, block_start, &mut poems);
    (poems, skipped)
}

pub fn load_corpus(path: &Path) -> Result<(Vec<Poem>, Vec<SkippedBlock>), CorpusError> {
    let text = std::fs::read_to_string(path)?;
    Ok(parse_corpus(&text))
}

/// Token inventory with the four reserved ids fixed at 0..=3.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Vocabulary {
    /// Builds a vocabulary ordered by descending frequency, ties broken
    /// lexicographically, so the result does not depend on poem order.
    pub fn build<'a>(poems: impl IntoIterator<Item = &'a Poem>) -> Self {
        let mut freq: HashMap<&str, u64> = HashMap::new();
        for p in poems {
            for t in p.tokens() {
                *freq.entry(t).or_default() += 1;
            }
        }
        let mut entries: Vec<(&str, u64)> = freq.into_iter().collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let tokens = RESERVED
            .iter()
            .map(|s| s.to_string())
            .chain(entries.into_iter().map(|(t, _)| t.to_string()))
            .collect();
        Self::from_tokens(tokens).expect("built vocabulary is well formed")
    }

    pub fn from_tokens(tokens: Vec<String>) -> Result<Self, CorpusError> {
        for (i, r) in RESERVED.iter().enumerate() {
            if tokens.get(i).map(String::as_str) != Some(*r) {
                return Err(CorpusError::MalformedSequence(format!(
                    "vocabulary id {i} must be {r}"
                )));
            }
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as TokenId).is_some() {
                return Err(CorpusError::MalformedSequence(format!(
                    "duplicate vocabulary entry {t:?}"
                )));
            }
        }
        Ok(Vocabulary { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Id of `token`, or [`UNK_ID`] when absent.
    pub fn id(&self, token: &str) -> TokenId {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn get(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// SHA-256 over the newline-joined token list, hex encoded.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        for t in &self.tokens {
            hasher.update(t.as_bytes());
            hasher.update(b"\n");
        }
        hex::encode(hasher.finalize())
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        for t in &self.tokens {
            writeln!(w, "{t}")?;
        }
        Ok(())
    }

    pub fn read_from(r: impl BufRead) -> Result<Self, CorpusError> {
        let tokens = r.lines().collect::<Result<Vec<_>, _>>()?;
        Self::from_tokens(tokens)
    }

    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let f = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedSequence {
    pub direction: Direction,
    pub tokens: Vec<TokenId>,
}

impl EncodedSequence {
    pub fn count(&self, id: TokenId) -> usize {
        self.tokens.iter().filter(|&&t| t == id).count()
    }
}

pub fn encode_lines<S: AsRef<str>>(
    lines: &[Vec<S>],
    direction: Direction,
    vocab: &Vocabulary,
) -> EncodedSequence {
    let mut tokens = vec![BOS_ID];
    for (i, line) in lines.iter().enumerate() {
        if i > 0 {
            tokens.push(LINE_ID);
        }
        let ids = line.iter().map(|t| vocab.id(t.as_ref()));
        match direction {
            Direction::Forward => tokens.extend(ids),
            Direction::Reverse => tokens.extend(ids.rev()),
        }
    }
    tokens.push(EOS_ID);
    EncodedSequence { direction, tokens }
}

pub fn encode(poem: &Poem, direction: Direction, vocab: &Vocabulary) -> EncodedSequence {
    encode_lines(poem.lines(), direction, vocab)
}

/// Inverse of [`encode`]. The decoded poem carries a content-derived id.
pub fn decode(seq: &EncodedSequence, vocab: &Vocabulary) -> Result<Poem, CorpusError> {
    let malformed = |m: &str| CorpusError::MalformedSequence(m.to_string());
    let body = match seq.tokens.split_first() {
        Some((&BOS_ID, rest)) => rest,
        _ => return Err(malformed("missing <bos>")),
    };
    let body = match body.split_last() {
        Some((&EOS_ID, rest)) => rest,
        _ => return Err(malformed("missing <eos>")),
    };
    let separators = body.iter().filter(|&&t| t == LINE_ID).count();
    if separators != POEM_LINES - 1 {
        return Err(CorpusError::MalformedSequence(format!(
            "expected {} <line> separators, found {separators}",
            POEM_LINES - 1
        )));
    }
    let lines = body
        .split(|&t| t == LINE_ID)
        .map(|ids| ids_to_line(ids, seq.direction, vocab))
        .collect::<Result<Vec<_>, _>>()?;
    let id = content_id(&lines);
    Poem::new(id, Source::Corpus, lines)
}

/// Converts one line's ids back to forward-order tokens. Reserved ids are
/// rejected, including `<unk>`, which has no surface form.
pub(crate) fn ids_to_line(
    ids: &[TokenId],
    direction: Direction,
    vocab: &Vocabulary,
) -> Result<Vec<String>, CorpusError> {
    let mut line = ids
        .iter()
        .map(|&id| match vocab.token(id) {
            Some(t) if id as usize >= RESERVED.len() => Ok(t.to_string()),
            Some(t) => Err(CorpusError::ReservedToken(t.to_string())),
            None => Err(CorpusError::MalformedSequence(format!(
                "id {id} outside vocabulary"
            ))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    if direction == Direction::Reverse {
        line.reverse();
    }
    Ok(line)
}

/// Deterministic train/validation split. The validation set holds
/// `round(n * val_fraction)` poems drawn by a ChaCha8 shuffle seeded with
/// `seed`; both halves keep the input order.
pub fn split(
    corpus: &[Poem],
    val_fraction: f64,
    seed: u64,
) -> Result<(Vec<Poem>, Vec<Poem>), CorpusError> {
    if !(val_fraction > 0.0 && val_fraction < 0.5) {
        return Err(CorpusError::InvalidFraction(val_fraction));
    }
    if corpus.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let n_val = (corpus.len() as f64 * val_fraction).round() as usize;
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut is_val = vec![false; corpus.len()];
    for &i in &order[..n_val] {
        is_val[i] = true;
    }
    let (val, train): (Vec<_>, Vec<_>) = corpus.iter().cloned().zip(is_val).partition(|(_, v)| *v);
    Ok((
        train.into_iter().map(|(p, _)| p).collect(),
        val.into_iter().map(|(p, _)| p).collect(),
    ))
}

const ENCODED_MAGIC: &str = "#limerick-encoded v1";

/// Writes encoded sequences, one per line as space-separated ids, under a
/// header naming the direction and vocabulary hash.
pub fn write_encoded(
    mut w: impl Write,
    direction: Direction,
    vocab_hash: &str,
    seqs: &[EncodedSequence],
) -> std::io::Result<()> {
    writeln!(
        w,
        "{ENCODED_MAGIC} direction={direction} vocab={vocab_hash}"
    )?;
    for s in seqs {
        let line: Vec<String> = s.tokens.iter().map(|t| t.to_string()).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedFile {
    pub direction: Direction,
    pub vocab_hash: String,
    pub sequences: Vec<EncodedSequence>,
}

pub fn read_encoded(path: &Path) -> Result<EncodedFile, CorpusError> {
    let text = std::fs::read_to_string(path)?;
    let display = path.display().to_string();
    let err = |line: usize, message: String| CorpusError::Format {
        path: display.clone(),
        line,
        message,
    };
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| err(1, "missing header".into()))?;
    let rest = header
        .strip_prefix(ENCODED_MAGIC)
        .ok_or_else(|| err(1, "not an encoded sequence file".into()))?;
    let mut direction = None;
    let mut vocab_hash = None;
    for field in rest.split_whitespace() {
        match field.split_once('=') {
            Some(("direction", d)) => direction = Some(d.parse().map_err(|e| err(1, e))?),
            Some(("vocab", h)) => vocab_hash = Some(h.to_string()),
            _ => return Err(err(1, format!("unknown header field {field:?}"))),
        }
    }
    let direction = direction.ok_or_else(|| err(1, "header lacks direction".into()))?;
    let vocab_hash = vocab_hash.ok_or_else(|| err(1, "header lacks vocab".into()))?;
    let sequences = lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let tokens = l
                .split_whitespace()
                .map(|t| t.parse::<TokenId>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| err(i + 2, e.to_string()))?;
            Ok(EncodedSequence { direction, tokens })
        })
        .collect::<Result<Vec<_>, CorpusError>>()?;
    Ok(EncodedFile {
        direction,
        vocab_hash,
        sequences,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const BENTHIC: &str = "cap'n jack was washed over the side.\n\
        his crew searched but found not hair nor hide.\n\
        no longer the helm,\n\
        but the deep benthic realm,\n\
        is where jack will forever reside.";

    fn lines(v: &[&[&str]]) -> Vec<Vec<String>> {
        v.iter()
            .map(|l| l.iter().map(|s| s.to_string()).collect())
            .collect()
    }

    fn toy_poem() -> Poem {
        Poem::new(
            "t",
            Source::Corpus,
            lines(&[&["a", "b"], &["c"], &["d"], &["e"], &["f"]]),
        )
        .unwrap()
    }

    #[test]
    fn tokenize_lowercases_and_splits_punctuation() {
        let p = tokenize("A b.\nc\nd\ne\nf").unwrap();
        assert_eq!(
            p.lines(),
            lines(&[&["a", "b", "."], &["c"], &["d"], &["e"], &["f"]])
        );
    }

    #[test]
    fn tokenize_benthic_line_three() {
        let p = tokenize(BENTHIC).unwrap();
        assert_eq!(p.lines()[2], vec!["no", "longer", "the", "helm", ","]);
        assert_eq!(p.lines()[0][0], "cap'n");
    }

    #[test]
    fn tokenize_rejects_wrong_line_counts() {
        assert!(matches!(
            tokenize("a\nb\nc\nd"),
            Err(CorpusError::LineCount(4))
        ));
        assert!(matches!(
            tokenize("a\nb\n \nd\ne"),
            Err(CorpusError::EmptyLine(3))
        ));
    }

    #[test]
    fn tokenize_line_edge_cases() {
        assert_eq!(
            tokenize_line("'tis well-known..."),
            vec!["'", "tis", "well-known", ".", ".", "."]
        );
        assert_eq!(tokenize_line("I’m law's"), vec!["i'm", "law's"]);
        assert_eq!(tokenize_line("a - b"), vec!["a", "-", "b"]);
    }

    #[test]
    fn encode_forward_and_reverse_layouts() {
        let p = toy_poem();
        let v = Vocabulary::build([&p]);
        let id = |t: &str| v.id(t);
        let fwd = encode(&p, Direction::Forward, &v);
        assert_eq!(
            fwd.tokens,
            vec![
                BOS_ID,
                id("a"),
                id("b"),
                LINE_ID,
                id("c"),
                LINE_ID,
                id("d"),
                LINE_ID,
                id("e"),
                LINE_ID,
                id("f"),
                EOS_ID
            ]
        );
        let rev = encode(&p, Direction::Reverse, &v);
        assert_eq!(
            rev.tokens,
            vec![
                BOS_ID,
                id("b"),
                id("a"),
                LINE_ID,
                id("c"),
                LINE_ID,
                id("d"),
                LINE_ID,
                id("e"),
                LINE_ID,
                id("f"),
                EOS_ID
            ]
        );
        assert_eq!(decode(&rev, &v).unwrap().lines(), p.lines());
    }

    #[test]
    fn benthic_round_trip() {
        let p = tokenize(BENTHIC).unwrap();
        let v = Vocabulary::build([&p]);
        for d in [Direction::Forward, Direction::Reverse] {
            assert_eq!(decode(&encode(&p, d, &v), &v).unwrap().lines(), p.lines());
        }
    }

    #[test]
    fn decode_rejects_malformed() {
        let p = toy_poem();
        let v = Vocabulary::build([&p]);
        let mut seq = encode(&p, Direction::Forward, &v);
        let pos = seq.tokens.iter().rposition(|&t| t == LINE_ID).unwrap();
        seq.tokens.remove(pos);
        assert!(matches!(
            decode(&seq, &v),
            Err(CorpusError::MalformedSequence(_))
        ));
        let no_bos = EncodedSequence {
            direction: Direction::Forward,
            tokens: encode(&p, Direction::Forward, &v).tokens[1..].to_vec(),
        };
        assert!(matches!(
            decode(&no_bos, &v),
            Err(CorpusError::MalformedSequence(_))
        ));
    }

    #[test]
    fn unknown_tokens_map_to_unk() {
        let p = toy_poem();
        let v = Vocabulary::build([&p]);
        assert_eq!(v.id("zebra"), UNK_ID);
        let seq = encode_lines(
            &lines(&[&["zebra"], &["c"], &["d"], &["e"], &["f"]]),
            Direction::Forward,
            &v,
        );
        assert_eq!(seq.tokens[1], UNK_ID);
        assert!(matches!(
            decode(&seq, &v),
            Err(CorpusError::ReservedToken(_))
        ));
    }

    #[test]
    fn split_sizes_and_determinism() {
        let poems: Vec<Poem> = (0..100)
            .map(|i| toy_poem().with_id(format!("c{i}")))
            .collect();
        let (t1, v1) = split(&poems, 0.1, 7).unwrap();
        let (t2, v2) = split(&poems, 0.1, 7).unwrap();
        assert_eq!((t1.len(), v1.len()), (90, 10));
        assert_eq!(t1, t2);
        assert_eq!(v1, v2);
        assert!(v1.iter().all(|p| !t1.iter().any(|q| q.id() == p.id())));
        let (t, v) = split(&poems[..10], 0.1, 7).unwrap();
        assert_eq!((t.len(), v.len()), (9, 1));
        assert!(matches!(split(&[], 0.1, 7), Err(CorpusError::EmptyCorpus)));
        assert!(matches!(
            split(&poems, 0.5, 7),
            Err(CorpusError::InvalidFraction(_))
        ));
    }

    #[test]
    fn corpus_parsing_skips_bad_blocks() {
        let text = "a\nb\nc\nd\ne\n\n\nx\ny\nz\nw\n\nf\ng\nh\ni\nj\n";
        let (poems, skipped) = parse_corpus(text);
        assert_eq!(poems.len(), 2);
        assert_eq!(poems[1].id(), "c000001");
        assert_eq!(skipped.len(), 1);
        assert_eq!(skipped[0].first_line, 8);
    }

    #[test]
    fn vocabulary_persistence_and_reserved_ids() {
        let p = tokenize(BENTHIC).unwrap();
        let v = Vocabulary::build([&p]);
        assert_eq!(&v.tokens()[..4], &RESERVED.map(String::from));
        let mut buf = Vec::new();
        v.write_to(&mut buf).unwrap();
        let back = Vocabulary::read_from(&buf[..]).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.hash(), v.hash());
        assert!(Vocabulary::from_tokens(vec!["x".into()]).is_err());
    }

    #[test]
    fn encoded_file_round_trip() {
        let p = toy_poem();
        let v = Vocabulary::build([&p]);
        let seqs = vec![encode(&p, Direction::Reverse, &v)];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rev.txt");
        write_encoded(
            std::fs::File::create(&path).unwrap(),
            Direction::Reverse,
            &v.hash(),
            &seqs,
        )
        .unwrap();
        let back = read_encoded(&path).unwrap();
        assert_eq!(back.direction, Direction::Reverse);
        assert_eq!(back.vocab_hash, v.hash());
        assert_eq!(back.sequences, seqs);
    }
}
