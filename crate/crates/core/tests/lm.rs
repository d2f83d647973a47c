use std::collections::HashMap;

use limerick::corpus::{
    encode, parse_corpus, split, Direction, EncodedSequence, Poem, TokenId, Vocabulary, BOS_ID,
};
use limerick::lm::{
    perplexity, sequence_nll, LanguageModel, NGramConfig, NGramModel, Smoothing, UniformModel,
};
use limerick_synth::{corpus_text, generate, Lexicon, SynthConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn synth_poems(n: usize, seed: u64) -> Vec<Poem> {
    let cfg = SynthConfig {
        poems: n,
        seed,
        ..Default::default()
    };
    let (poems, skipped) = parse_corpus(&corpus_text(&generate(&Lexicon::builtin(), &cfg)));
    assert!(skipped.is_empty());
    poems
}

fn encode_all(poems: &[Poem], direction: Direction, vocab: &Vocabulary) -> Vec<EncodedSequence> {
    poems.iter().map(|p| encode(p, direction, vocab)).collect()
}

fn plain(order: usize, smoothing: Smoothing, discount: f64) -> NGramConfig {
    NGramConfig {
        order,
        discount,
        smoothing,
        line_memory: false,
    }
}

/// Straight from the recurrence: P(w | h) interpolates the discounted
/// count of (h, w) with the estimate for h minus its first token, starting
/// from uniform. Kneser-Ney replaces lower-order counts by the number of
/// distinct left extensions, except for n-grams that begin with `<bos>`.
struct Oracle {
    order: usize,
    discount: f64,
    vocab: usize,
    counts: Vec<HashMap<Vec<TokenId>, f64>>,
}

impl Oracle {
    fn new(
        corpus: &[EncodedSequence],
        vocab: usize,
        order: usize,
        discount: f64,
        kn: bool,
    ) -> Self {
        let mut raw: Vec<HashMap<Vec<TokenId>, f64>> = vec![HashMap::new(); order + 1];
        for s in corpus {
            for end in 1..s.tokens.len() {
                for (len, table) in raw.iter_mut().enumerate().take(order + 1).skip(1) {
                    if len > end + 1 {
                        break;
                    }
                    *table
                        .entry(s.tokens[end + 1 - len..=end].to_vec())
                        .or_default() += 1.0;
                }
            }
        }
        let mut counts = raw.clone();
        if kn {
            for len in 1..order {
                let mut left: HashMap<Vec<TokenId>, f64> = HashMap::new();
                for g in raw[len + 1].keys() {
                    *left.entry(g[1..].to_vec()).or_default() += 1.0;
                }
                for (g, c) in counts[len].iter_mut() {
                    if g[0] != BOS_ID {
                        *c = left[g];
                    }
                }
            }
        }
        Oracle {
            order,
            discount,
            vocab,
            counts,
        }
    }

    fn prob(&self, hist: &[TokenId], w: TokenId) -> f64 {
        let len = hist.len() + 1;
        let lower = if hist.is_empty() {
            1.0 / self.vocab as f64
        } else {
            self.prob(&hist[1..], w)
        };
        let table = &self.counts[len];
        let mut total = 0.0;
        let mut types = 0.0;
        for (g, c) in table {
            if &g[..len - 1] == hist {
                total += c;
                types += 1.0;
            }
        }
        if total == 0.0 {
            return lower;
        }
        let mut key = hist.to_vec();
        key.push(w);
        let c = table.get(&key).copied().unwrap_or(0.0);
        self.discount * types / total * lower + (c - self.discount).max(0.0) / total
    }

    fn dist(&self, context: &[TokenId]) -> Vec<f64> {
        let ctx: &[TokenId] = if context.is_empty() {
            &[BOS_ID]
        } else {
            context
        };
        let hist = &ctx[ctx.len().saturating_sub(self.order - 1)..];
        (0..self.vocab as TokenId)
            .map(|w| self.prob(hist, w))
            .collect()
    }
}

fn random_sequence(rng: &mut ChaCha8Rng, vocab: usize, direction: Direction) -> EncodedSequence {
    let len = rng.gen_range(2..30);
    let mut tokens = vec![BOS_ID];
    tokens.extend((1..len).map(|_| rng.gen_range(1..vocab as TokenId)));
    EncodedSequence { direction, tokens }
}

#[test]
fn uniform_model_perplexity_equals_vocab_size() {
    let m = UniformModel::new(Direction::Forward, 10, "v");
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let corpus: Vec<_> = (0..20)
        .map(|_| random_sequence(&mut rng, 10, Direction::Forward))
        .collect();
    let ppl = perplexity(&m, &corpus).unwrap();
    assert!((ppl - 10.0).abs() <= 1e-9, "{ppl}");
}

#[test]
fn nll_matches_probability_product() {
    let poems = synth_poems(300, 21);
    let vocab = Vocabulary::build(&poems);
    let model = NGramModel::train(
        &encode_all(&poems, Direction::Forward, &vocab),
        &vocab,
        NGramConfig::default(),
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let seq = random_sequence(&mut rng, vocab.len(), Direction::Forward);
        let mut product = 1.0f64;
        let mut scale = 0.0f64;
        for t in 1..seq.tokens.len() {
            product *= model.next_token_dist(&seq.tokens[..t]).unwrap()[seq.tokens[t] as usize];
            // Keep the running product in range; the exponent is tracked separately.
            while product < 1e-100 {
                product *= 1e100;
                scale += 100.0 * 10f64.ln();
            }
        }
        let brute = scale - product.ln();
        let nll = sequence_nll(&model, &seq).unwrap();
        assert!(
            (brute - nll).abs() <= 1e-9 * nll.max(1.0),
            "{brute} vs {nll}"
        );
    }
}

#[test]
fn absolute_discounting_matches_recurrence() {
    let poems = synth_poems(60, 5);
    let vocab = Vocabulary::build(&poems);
    let corpus = encode_all(&poems, Direction::Forward, &vocab);
    for order in 1..=3 {
        let model = NGramModel::train(
            &corpus,
            &vocab,
            plain(order, Smoothing::AbsoluteDiscount, 0.6),
        )
        .unwrap();
        let oracle = Oracle::new(&corpus, vocab.len(), order, 0.6, false);
        for seq in corpus.iter().take(5) {
            for t in 0..seq.tokens.len().min(12) {
                let ctx = &seq.tokens[..t];
                let (a, b) = (model.next_token_dist(ctx).unwrap(), oracle.dist(ctx));
                for (x, y) in a.iter().zip(&b) {
                    assert!(
                        (x - y).abs() < 1e-12,
                        "order {order} ctx {ctx:?}: {x} vs {y}"
                    );
                }
            }
        }
    }
}

#[test]
fn kneser_ney_matches_recurrence() {
    let poems = synth_poems(60, 6);
    let vocab = Vocabulary::build(&poems);
    let corpus = encode_all(&poems, Direction::Reverse, &vocab);
    let model = NGramModel::train(&corpus, &vocab, plain(3, Smoothing::KneserNey, 0.75)).unwrap();
    let oracle = Oracle::new(&corpus, vocab.len(), 3, 0.75, true);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut contexts: Vec<Vec<TokenId>> = corpus
        .iter()
        .take(4)
        .flat_map(|s| (0..s.tokens.len().min(10)).map(move |t| s.tokens[..t].to_vec()))
        .collect();
    contexts
        .extend((0..10).map(|_| random_sequence(&mut rng, vocab.len(), Direction::Reverse).tokens));
    for ctx in contexts {
        let (a, b) = (model.next_token_dist(&ctx).unwrap(), oracle.dist(&ctx));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12, "ctx {ctx:?}: {x} vs {y}");
        }
    }
}

#[test]
fn held_out_perplexity_beats_uniform() {
    for (n, seed) in [(100, 1), (400, 2), (1000, 3)] {
        let poems = synth_poems(n, seed);
        let (train, val) = split(&poems, 0.1, seed).unwrap();
        let vocab = Vocabulary::build(&train);
        for direction in [Direction::Forward, Direction::Reverse] {
            for cfg in [
                NGramConfig::default(),
                plain(3, Smoothing::KneserNey, 0.75),
                plain(2, Smoothing::AbsoluteDiscount, 0.5),
            ] {
                let model =
                    NGramModel::train(&encode_all(&train, direction, &vocab), &vocab, cfg).unwrap();
                let ppl = perplexity(&model, &encode_all(&val, direction, &vocab)).unwrap();
                assert!(
                    ppl < vocab.len() as f64,
                    "{n} poems {direction}: {ppl} vs {}",
                    vocab.len()
                );
            }
        }
    }
}

#[test]
fn unigram_perplexity_ignores_direction() {
    let poems = synth_poems(200, 8);
    let vocab = Vocabulary::build(&poems);
    let ppl = |d: Direction| {
        let corpus = encode_all(&poems, d, &vocab);
        let m = NGramModel::train(&corpus, &vocab, plain(1, Smoothing::KneserNey, 0.75)).unwrap();
        perplexity(&m, &corpus).unwrap()
    };
    let (f, r) = (ppl(Direction::Forward), ppl(Direction::Reverse));
    assert!((f - r).abs() < 1e-9 * f, "{f} vs {r}");
}

#[test]
fn mle_can_assign_zero_but_smoothed_models_cannot() {
    let poems = synth_poems(50, 12);
    let vocab = Vocabulary::build(&poems);
    let corpus = encode_all(&poems, Direction::Forward, &vocab);
    let ctx = corpus[0].tokens[..3].to_vec();
    let mle = NGramModel::train(&corpus, &vocab, plain(3, Smoothing::Mle, 0.0)).unwrap();
    assert!(mle.next_token_dist(&ctx).unwrap().contains(&0.0));
    for cfg in [
        NGramConfig::default(),
        plain(3, Smoothing::AbsoluteDiscount, 0.75),
    ] {
        let m = NGramModel::train(&corpus, &vocab, cfg).unwrap();
        assert!(m.next_token_dist(&ctx).unwrap().iter().all(|&p| p > 0.0));
    }
}

fn trained() -> &'static (Vocabulary, NGramModel, NGramModel) {
    use std::sync::OnceLock;
    static MODELS: OnceLock<(Vocabulary, NGramModel, NGramModel)> = OnceLock::new();
    MODELS.get_or_init(|| {
        let poems = synth_poems(300, 17);
        let vocab = Vocabulary::build(&poems);
        let f = NGramModel::train(
            &encode_all(&poems, Direction::Forward, &vocab),
            &vocab,
            NGramConfig::default(),
        )
        .unwrap();
        let r = NGramModel::train(
            &encode_all(&poems, Direction::Reverse, &vocab),
            &vocab,
            NGramConfig::default(),
        )
        .unwrap();
        (vocab, f, r)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distributions_are_normalized(ctx in proptest::collection::vec(0u32..400, 0..40), reverse: bool) {
        let (vocab, f, r) = trained();
        let model = if reverse { r } else { f };
        let mut ctx: Vec<TokenId> = ctx.into_iter().map(|t| t % vocab.len() as TokenId).collect();
        ctx.insert(0, BOS_ID);
        let dist = model.next_token_dist(&ctx).unwrap();
        prop_assert_eq!(dist.len(), vocab.len());
        prop_assert!(dist.iter().all(|p| p.is_finite() && *p > 0.0));
        let sum: f64 = dist.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-9, "sum {}", sum);
        let t = ctx[ctx.len() / 2];
        let lp = model.log_prob(&ctx, t).unwrap();
        prop_assert!((lp - dist[t as usize].ln()).abs() < 1e-9);
    }

    #[test]
    fn persistence_round_trips(order in 1usize..5, discount in 0.1f64..0.95, memory: bool) {
        let poems = synth_poems(30, order as u64);
        let vocab = Vocabulary::build(&poems);
        let cfg = NGramConfig { order, discount, smoothing: Smoothing::KneserNey, line_memory: memory };
        let m = NGramModel::train(&encode_all(&poems, Direction::Reverse, &vocab), &vocab, cfg).unwrap();
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        let back = NGramModel::read_from(&buf[..], "mem").unwrap();
        let mut again = Vec::new();
        back.write_to(&mut again).unwrap();
        prop_assert_eq!(&buf, &again);
        let ctx = encode(&poems[0], Direction::Reverse, &vocab).tokens[..4].to_vec();
        prop_assert_eq!(m.next_token_dist(&ctx).unwrap(), back.next_token_dist(&ctx).unwrap());
    }
}
