mod common;

use common::{code, read_jsonl, Desk};
use sha2::{Digest, Sha256};

fn digest(path: &std::path::Path) -> String {
    hex::encode(Sha256::digest(std::fs::read(path).unwrap()))
}

#[test]
fn prep_is_deterministic() {
    let desk = Desk::new(300, 4);
    desk.ok(&["prep", "--out-dir", desk.path("a").to_str().unwrap()]);
    desk.ok(&["prep", "--out-dir", desk.path("b").to_str().unwrap()]);
    let files = [
        "vocab.txt",
        "forward.train.enc",
        "forward.val.enc",
        "reverse.train.enc",
        "reverse.val.enc",
        "train.txt",
        "val.txt",
        "stats.json",
    ];
    for f in files {
        assert_eq!(
            digest(&desk.path("a").join(f)),
            digest(&desk.path("b").join(f)),
            "{f}"
        );
    }
    let train = std::fs::read_to_string(desk.path("a/train.txt")).unwrap();
    assert_eq!(
        train.split("\n\n").filter(|b| !b.trim().is_empty()).count(),
        270
    );
}

#[test]
fn train_rejects_wrong_direction_file() {
    let desk = Desk::new(200, 5);
    desk.ok(&["prep"]);
    let fwd = desk.path("data/forward.train.enc");
    let out = desk.run(&[
        "train",
        "--direction",
        "reverse",
        "--train-file",
        fwd.to_str().unwrap(),
        "--order",
        "2",
        "--discount",
        "0.75",
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("direction"));
}

#[test]
fn reverse_generation_keeps_the_seed_line() {
    let desk = Desk::new(400, 6);
    desk.prepare();
    let seed = "there once was a lazy old cat";
    desk.ok(&[
        "generate",
        "--mode",
        "reverse",
        "--n",
        "10",
        "--seed-line",
        seed,
    ]);
    let recs = read_jsonl(&desk.path("out/attempts.jsonl"));
    let parsed: Vec<_> = recs.iter().filter(|r| r["status"] == "parsed").collect();
    assert_eq!(parsed.len(), 10);
    for r in parsed {
        let first: Vec<&str> = r["lines"][0]
            .as_array()
            .unwrap()
            .iter()
            .map(|t| t.as_str().unwrap())
            .collect();
        assert_eq!(first.join(" "), seed);
    }
}

#[test]
fn exit_codes() {
    let desk = Desk::new(200, 7);
    // usage errors
    assert_eq!(code(&desk.run(&["generate", "--bogus"])), 1);
    assert_eq!(
        code(&desk.run(&["filter", "--input", "x", "--ttr-threshold", "high"])),
        1
    );
    // missing inputs
    assert_eq!(code(&desk.run(&["train", "--direction", "forward"])), 2);
    desk.ok(&["prep"]);
    assert_eq!(code(&desk.run(&["generate", "--n", "1"])), 2);
    desk.ok(&[
        "train",
        "--direction",
        "forward",
        "--order",
        "2",
        "--discount",
        "0.75",
    ]);
    desk.ok(&[
        "train",
        "--direction",
        "reverse",
        "--order",
        "2",
        "--discount",
        "0.75",
    ]);
    // seed line outside reverse mode, and out-of-vocabulary seed words
    assert_eq!(
        code(&desk.run(&["generate", "--mode", "forward", "--seed-line", "a cat"])),
        1
    );
    assert_eq!(
        code(&desk.run(&["generate", "--mode", "reverse", "--seed-line", "zqxv"])),
        1
    );
    // unreachable model server
    let out = desk.run(&[
        "generate",
        "--n",
        "1",
        "--forward-endpoint",
        "127.0.0.1:1",
        "--reverse-endpoint",
        "127.0.0.1:1",
    ]);
    assert_eq!(code(&out), 3);
    // an impossible target exhausts the budget but still writes its records
    let out = desk.run(&["generate", "--n", "5", "--budget", "3"]);
    assert_eq!(code(&out), 2);
    assert_eq!(read_jsonl(&desk.path("out/attempts.jsonl")).len(), 3);
}

#[test]
fn failed_classification_exits_three_after_writing() {
    let desk = Desk::new(50, 8);
    std::fs::write(
        desk.path("stub.json"),
        r#"{"default": [["/Arts", 0.9]], "fail": ["__none__"]}"#,
    )
    .unwrap();
    desk.ok(&[
        "score",
        "--input",
        desk.path("corpus.txt").to_str().unwrap(),
    ]);
    let cards = read_jsonl(&desk.path("out/scorecards.jsonl"));
    assert_eq!(cards.len(), 50);
    let id = cards[3]["poem_id"].as_str().unwrap().to_string();
    std::fs::write(
        desk.path("stub.json"),
        format!(r#"{{"default": [["/Arts", 0.9]], "fail": [{id:?}]}}"#),
    )
    .unwrap();
    let out = desk.run(&[
        "score",
        "--input",
        desk.path("corpus.txt").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 3);
    let cards = read_jsonl(&desk.path("out/scorecards.jsonl"));
    assert_eq!(cards.len(), 50);
    assert_eq!(cards[3]["classification"]["status"], "failed");
}

#[test]
fn filter_prints_threshold_from_given_statistics() {
    let desk = Desk::new(30, 9);
    desk.ok(&[
        "score",
        "--input",
        desk.path("corpus.txt").to_str().unwrap(),
    ]);
    let cards = desk.path("out/scorecards.jsonl");
    let stdout = desk.ok(&[
        "filter",
        "--input",
        cards.to_str().unwrap(),
        "--ttr-stats",
        "0.84,0.06678",
    ]);
    assert!(stdout.contains("ttr threshold: 70.644%"), "{stdout}");
    let stdout = desk.ok(&[
        "filter",
        "--input",
        cards.to_str().unwrap(),
        "--ttr-threshold",
        "0.95",
    ]);
    assert!(stdout.contains("ttr threshold: 95.000%"), "{stdout}");
}
