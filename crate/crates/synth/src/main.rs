use limerick_synth::{corpus_text, generate, Lexicon, SynthConfig};

fn main() {
    let mut cfg = SynthConfig::default();
    let mut args = std::env::args().skip(1);
    while let Some(flag) = args.next() {
        let value = args.next().unwrap_or_default();
        match flag.as_str() {
            "--poems" => cfg.poems = value.parse().expect("--poems takes an integer"),
            "--seed" => cfg.seed = value.parse().expect("--seed takes an integer"),
            "--imperfect-rate" => {
                cfg.imperfect_rate = value.parse().expect("--imperfect-rate takes a ratio")
            }
            _ => {
                eprintln!("usage: limerick-synth [--poems N] [--seed S] [--imperfect-rate R]");
                std::process::exit(1);
            }
        }
    }
    print!("{}", corpus_text(&generate(&Lexicon::builtin(), &cfg)));
}
