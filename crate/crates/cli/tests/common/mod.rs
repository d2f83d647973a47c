#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use limerick_synth::{corpus_text, generate, Lexicon, SynthConfig};
use tempfile::TempDir;

pub fn repo_data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

/// A scratch directory with a synthetic corpus and a run configuration
/// pointing every path into it.
pub struct Desk {
    pub dir: TempDir,
}

impl Desk {
    pub fn new(poems: usize, seed: u64) -> Self {
        let dir = TempDir::new().unwrap();
        let cfg = SynthConfig {
            poems,
            seed,
            ..Default::default()
        };
        std::fs::write(
            dir.path().join("corpus.txt"),
            corpus_text(&generate(&Lexicon::builtin(), &cfg)),
        )
        .unwrap();
        std::fs::write(
            dir.path().join("stub.json"),
            r#"{"default": [["/Arts & Entertainment/Humor", 0.8]]}"#,
        )
        .unwrap();
        let desk = Desk { dir };
        desk.write_config("run.toml", "out");
        desk
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    /// Writes a config whose outputs land in `out`.
    pub fn write_config(&self, name: &str, out: &str) -> PathBuf {
        let p = |rel: &str| self.path(rel).display().to_string();
        let text = format!(
            r#"[paths]
corpus = {corpus:?}
data_dir = {data:?}
model_dir = {models:?}
output_dir = {out:?}
dictionary = {dict:?}
embeddings = {emb:?}
ontology = {onto:?}

[score.classifier]
kind = "stub"
fixture = {stub:?}
"#,
            corpus = p("corpus.txt"),
            data = p("data"),
            models = p("models"),
            out = p(out),
            stub = p("stub.json"),
            dict = repo_data("cmudict-subset.dict").display().to_string(),
            emb = repo_data("embeddings.txt").display().to_string(),
            onto = repo_data("").display().to_string(),
        );
        let path = self.path(name);
        std::fs::write(&path, text).unwrap();
        path
    }

    pub fn run(&self, args: &[&str]) -> Output {
        self.run_with("run.toml", args)
    }

    pub fn run_with(&self, config: &str, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_limerick"))
            .arg("--config")
            .arg(self.path(config))
            .args(args)
            .output()
            .unwrap()
    }

    /// Runs and panics with the captured stderr unless the exit code is 0.
    pub fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }

    /// prep plus one order-3 model per direction.
    pub fn prepare(&self) {
        self.ok(&["prep"]);
        for d in ["forward", "reverse"] {
            self.ok(&[
                "train",
                "--direction",
                d,
                "--order",
                "3",
                "--discount",
                "0.75",
            ]);
        }
    }
}

pub fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

pub fn read_jsonl(path: &Path) -> Vec<serde_json::Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}
