//! Line-delimited JSON records and small file helpers.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const ATTEMPT_SCHEMA: &str = "limerick.attempt/1";
pub const REJECTION_SCHEMA: &str = "limerick.rejection/1";

/// A record with a leading `schema` field.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tagged<T> {
    pub schema: String,
    #[serde(flatten)]
    pub record: T,
}

impl<T> Tagged<T> {
    pub fn new(schema: &str, record: T) -> Self {
        Tagged {
            schema: schema.to_string(),
            record,
        }
    }
}

pub fn require(path: &Path, what: &str) -> anyhow::Result<()> {
    if !path.exists() {
        bail!("{what} not found: {}", path.display());
    }
    Ok(())
}

pub fn write_jsonl<T: Serialize>(
    path: &Path,
    records: impl IntoIterator<Item = T>,
) -> anyhow::Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, &r)?;
        w.write_all(b"\n")?;
    }
    w.flush()
        .with_context(|| format!("writing {}", path.display()))
}

/// Reads records, checking each one's `schema` field when `schema` is given.
pub fn read_jsonl<T: DeserializeOwned>(
    path: &Path,
    schema: Option<&str>,
) -> anyhow::Result<Vec<T>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.with_context(|| format!("reading {}", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line)
            .with_context(|| format!("{}:{}: invalid JSON", path.display(), i + 1))?;
        if let Some(want) = schema {
            let found = value.get("schema").and_then(|s| s.as_str()).unwrap_or("");
            if found != want {
                bail!(
                    "{}:{}: expected schema {want:?}, found {found:?}",
                    path.display(),
                    i + 1
                );
            }
        }
        out.push(
            serde_json::from_value(value)
                .with_context(|| format!("{}:{}: bad record", path.display(), i + 1))?,
        );
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Whether the file looks like JSON lines rather than a plain-text corpus.
pub fn is_jsonl(path: &Path) -> anyhow::Result<bool> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text.trim_start().starts_with('{'))
}
