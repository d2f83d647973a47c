use std::net::TcpListener;
use std::sync::Arc;

use limerick::corpus::{encode, parse_corpus, Direction, Vocabulary};
use limerick::generation::{run_attempts, Mode, Models, SamplerConfig};
use limerick::lm::external::{serve, Message, ServerInfo};
use limerick::lm::{
    perplexity, serve_model, ExternalLm, LanguageModel, LmError, NGramConfig, NGramModel,
};
use limerick_synth::{corpus_text, generate, Lexicon, SynthConfig};

fn fixture() -> (
    Vocabulary,
    Arc<NGramModel>,
    Arc<NGramModel>,
    Vec<limerick::corpus::Poem>,
) {
    let cfg = SynthConfig {
        poems: 200,
        seed: 31,
        ..Default::default()
    };
    let (poems, _) = parse_corpus(&corpus_text(&generate(&Lexicon::builtin(), &cfg)));
    let vocab = Vocabulary::build(&poems);
    let train = |d| {
        let seqs: Vec<_> = poems.iter().map(|p| encode(p, d, &vocab)).collect();
        Arc::new(NGramModel::train(&seqs, &vocab, NGramConfig::default()).unwrap())
    };
    let (f, r) = (train(Direction::Forward), train(Direction::Reverse));
    (vocab, f, r, poems)
}

fn spawn_model(model: Arc<dyn LanguageModel>) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    std::thread::spawn(move || serve_model(listener, model));
    addr
}

fn spawn_stub(info: ServerInfo, reply: Message) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    std::thread::spawn(move || serve(listener, info, move |_| reply.clone()));
    addr
}

#[test]
fn served_model_matches_local_model() {
    let (vocab, f, r, poems) = fixture();
    let fa = spawn_model(f.clone());
    let ra = spawn_model(r.clone());
    let ef = ExternalLm::connect(&fa, Direction::Forward, &vocab).unwrap();
    assert_eq!(ef.endpoint(), fa);
    let seqs: Vec<_> = poems[..20]
        .iter()
        .map(|p| encode(p, Direction::Forward, &vocab))
        .collect();
    for s in &seqs[..3] {
        for t in 1..s.tokens.len() {
            let (a, b) = (
                f.next_token_dist(&s.tokens[..t]).unwrap(),
                ef.next_token_dist(&s.tokens[..t]).unwrap(),
            );
            assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12));
        }
    }
    let (pl, pe) = (
        perplexity(f.as_ref(), &seqs).unwrap(),
        perplexity(&ef, &seqs).unwrap(),
    );
    assert!((pl - pe).abs() < 1e-9 * pl);

    let er = ExternalLm::connect(&ra, Direction::Reverse, &vocab).unwrap();
    let local = Models {
        forward: Some(f),
        reverse: Some(r),
    };
    let remote = Models {
        forward: Some(Arc::new(ef)),
        reverse: Some(Arc::new(er)),
    };
    let cfg = SamplerConfig {
        rng_seed: 3,
        ..Default::default()
    };
    let a = run_attempts(&local, Mode::TwoStage, None, &vocab, &cfg, 0, 20).unwrap();
    let b = run_attempts(&remote, Mode::TwoStage, None, &vocab, &cfg, 0, 20).unwrap();
    assert_eq!(a, b);
}

#[test]
fn handshake_checks_direction_and_vocabulary() {
    let (vocab, f, _, poems) = fixture();
    let addr = spawn_model(f);
    assert!(matches!(
        ExternalLm::connect(&addr, Direction::Reverse, &vocab),
        Err(LmError::DirectionMismatch { .. })
    ));
    let other = Vocabulary::build(&poems[..10]);
    assert!(matches!(
        ExternalLm::connect(&addr, Direction::Forward, &other),
        Err(LmError::VocabularyMismatch { .. })
    ));
    assert!(matches!(
        ExternalLm::connect("127.0.0.1:1", Direction::Forward, &vocab),
        Err(LmError::Connect { .. })
    ));
}

#[test]
fn bad_replies_surface_as_protocol_errors() {
    let (vocab, ..) = fixture();
    let info = || ServerInfo {
        direction: Direction::Forward,
        vocab_hash: vocab.hash(),
        vocab_size: vocab.len(),
    };
    let n = vocab.len();
    let unnormalized = spawn_stub(
        info(),
        Message::Dist {
            probs: vec![1.0; n],
        },
    );
    let lm = ExternalLm::connect(&unnormalized, Direction::Forward, &vocab).unwrap();
    assert!(matches!(
        lm.next_token_dist(&[0]),
        Err(LmError::Protocol(_))
    ));

    let failing = spawn_stub(
        info(),
        Message::Error {
            message: "overloaded".into(),
        },
    );
    let lm = ExternalLm::connect(&failing, Direction::Forward, &vocab).unwrap();
    assert!(matches!(
        lm.next_token_dist(&[0]),
        Err(LmError::Protocol(_))
    ));

    let mut probs = vec![1.0 / n as f64; n];
    probs[0] += 5e-7;
    let near = spawn_stub(info(), Message::Dist { probs });
    let lm = ExternalLm::connect(&near, Direction::Forward, &vocab).unwrap();
    let d = lm.next_token_dist(&[0]).unwrap();
    assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}
