//! Run configuration: a TOML file, overridden by command-line flags, and
//! echoed into every output directory.

use std::path::{Path, PathBuf};

use anyhow::Context;
use limerick::continuity::ContinuityConfig;
use limerick::generation::{Mode, SamplerConfig};
use limerick::lm::Smoothing;
use limerick::pipeline::FilterConfig;
use limerick::rhyme::RhymeConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    /// Output of `prep`: vocabulary, encoded splits, reference corpus.
    pub data_dir: PathBuf,
    pub model_dir: PathBuf,
    pub output_dir: PathBuf,
    pub dictionary: PathBuf,
    pub embeddings: PathBuf,
    /// Directory holding either the TSV edge/lemma files or a WordNet
    /// `data.noun`/`index.noun` pair.
    pub ontology: PathBuf,
    /// Corpus for the automatic TTR threshold; defaults to the training
    /// split written by `prep`.
    pub reference_corpus: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            corpus: None,
            data_dir: "out/data".into(),
            model_dir: "out/models".into(),
            output_dir: "out".into(),
            dictionary: "data/cmudict-subset.dict".into(),
            embeddings: "data/embeddings.txt".into(),
            ontology: "data".into(),
            reference_corpus: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrepConfig {
    pub val_fraction: f64,
    pub split_seed: u64,
}

impl Default for PrepConfig {
    fn default() -> Self {
        PrepConfig {
            val_fraction: 0.1,
            split_seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Grid searched by validation perplexity.
    pub orders: Vec<usize>,
    pub discounts: Vec<f64>,
    pub smoothing: Smoothing,
    pub line_memory: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            orders: vec![2, 3, 4],
            discounts: vec![0.5, 0.75, 0.9],
            smoothing: Smoothing::KneserNey,
            line_memory: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateConfig {
    pub mode: Mode,
    pub n: usize,
    /// Attempts generated per parallel round.
    pub chunk: u64,
    pub seed_line: Option<String>,
    /// `host:port` of an external model server, used instead of the
    /// persisted n-gram model for that direction.
    pub forward_endpoint: Option<String>,
    pub reverse_endpoint: Option<String>,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig {
            mode: Mode::TwoStage,
            n: 50,
            chunk: 64,
            seed_line: None,
            forward_endpoint: None,
            reverse_endpoint: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    None,
    Stub,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSettings {
    pub kind: ClassifierKind,
    /// JSON fixture for the stub classifier.
    pub fixture: Option<PathBuf>,
    /// Falls back to `LIMERICK_CLASSIFIER_URL`.
    pub endpoint: Option<String>,
    pub max_requests_per_sec: f64,
    pub timeout_secs: f64,
    pub retries: u32,
    pub backoff_ms: u64,
}

impl Default for ClassifierSettings {
    fn default() -> Self {
        ClassifierSettings {
            kind: ClassifierKind::None,
            fixture: None,
            endpoint: None,
            max_requests_per_sec: 5.0,
            timeout_secs: 10.0,
            retries: 3,
            backoff_ms: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreConfig {
    pub rhyme: RhymeConfig,
    pub continuity: ContinuityConfig,
    pub ttr_include_punct: bool,
    /// Add the pronunciation dictionary's words to the training vocabulary
    /// when checking tokens.
    pub lexicon_includes_dictionary: bool,
    pub classifier: ClassifierSettings,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        ScoreConfig {
            rhyme: RhymeConfig::default(),
            continuity: ContinuityConfig::default(),
            ttr_include_punct: false,
            lexicon_includes_dictionary: true,
            classifier: ClassifierSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Worker threads; 0 uses one per core.
    pub workers: usize,
    pub paths: Paths,
    pub prep: PrepConfig,
    pub train: TrainConfig,
    pub sampler: SamplerConfig,
    pub generate: GenerateConfig,
    pub score: ScoreConfig,
    pub filter: FilterConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Writes the effective configuration as `<dir>/<command>.config.toml`.
    pub fn echo(&self, dir: &Path, command: &str) -> anyhow::Result<()> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(format!("{command}.config.toml"));
        let text = toml::to_string_pretty(self).context("serializing config")?;
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }
}
