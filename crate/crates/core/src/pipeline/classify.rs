//! Content-classification clients.
//!
//! A client maps poem text to `(category path, confidence)` pairs. The HTTP
//! client speaks a small JSON contract:
//!
//! ```text
//! POST <endpoint>   {"text": "..."}
//! 200               {"categories": [{"name": "/Arts & Entertainment", "confidence": 0.91}]}
//! 429               quota exhausted
//! ```

use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Poem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Category {
    pub name: String,
    pub confidence: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifyError {
    #[error("classifier transport error: {0}")]
    Client(String),
    #[error("classifier quota exhausted: {0}")]
    Quota(String),
}

pub trait ClassifierClient: Send + Sync {
    fn classify(&self, poem: &Poem) -> Result<Vec<Category>, ClassifyError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Classification {
    Classified {
        categories: Vec<Category>,
    },
    /// The service answered but assigned no category.
    Unclassified,
    /// The request failed; the poem can be classified again later.
    Failed {
        error: String,
        quota: bool,
    },
}

impl Classification {
    pub fn max_confidence(&self) -> Option<f64> {
        match self {
            Classification::Classified { categories } => {
                categories.iter().map(|c| c.confidence).reduce(f64::max)
            }
            _ => None,
        }
    }
}

fn check_categories(categories: Vec<Category>) -> Result<Vec<Category>, ClassifyError> {
    match categories
        .iter()
        .find(|c| !(0.0..=1.0).contains(&c.confidence))
    {
        Some(c) => Err(ClassifyError::Client(format!(
            "confidence {} for {:?} outside [0, 1]",
            c.confidence, c.name
        ))),
        None => Ok(categories),
    }
}

/// Runs one classification; errors become [`Classification::Failed`].
pub fn classify_content(poem: &Poem, client: &dyn ClassifierClient) -> Classification {
    match client.classify(poem).and_then(check_categories) {
        Ok(c) if c.is_empty() => Classification::Unclassified,
        Ok(categories) => Classification::Classified { categories },
        Err(e) => Classification::Failed {
            quota: matches!(e, ClassifyError::Quota(_)),
            error: e.to_string(),
        },
    }
}

/// Fixture-driven client. Lookup order: poem id, poem text (lines joined
/// by newlines), then the default. Ids listed in `fail` produce a transport
/// error.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StubClassifier {
    #[serde(default)]
    pub default: Vec<(String, f64)>,
    #[serde(default)]
    pub by_id: HashMap<String, Vec<(String, f64)>>,
    #[serde(default)]
    pub by_text: HashMap<String, Vec<(String, f64)>>,
    #[serde(default)]
    pub fail: Vec<String>,
}

impl StubClassifier {
    pub fn constant(categories: &[(&str, f64)]) -> Self {
        StubClassifier {
            default: categories
                .iter()
                .map(|(n, c)| (n.to_string(), *c))
                .collect(),
            ..Default::default()
        }
    }

    pub fn load(path: &Path) -> Result<Self, ClassifyError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ClassifyError::Client(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| ClassifyError::Client(format!("{}: {e}", path.display())))
    }
}

impl ClassifierClient for StubClassifier {
    fn classify(&self, poem: &Poem) -> Result<Vec<Category>, ClassifyError> {
        if self.fail.iter().any(|id| id == poem.id()) {
            return Err(ClassifyError::Client(format!(
                "simulated failure for {}",
                poem.id()
            )));
        }
        let entries = self
            .by_id
            .get(poem.id())
            .or_else(|| self.by_text.get(&poem.text()))
            .unwrap_or(&self.default);
        Ok(entries
            .iter()
            .map(|(name, confidence)| Category {
                name: name.clone(),
                confidence: *confidence,
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpClassifierConfig {
    pub endpoint: String,
    #[serde(default, skip_serializing)]
    pub token: Option<String>,
    /// Upper bound on requests per second.
    pub max_requests_per_sec: f64,
    pub timeout_secs: f64,
    pub retries: u32,
    pub backoff_ms: u64,
}

impl HttpClassifierConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        HttpClassifierConfig {
            endpoint: endpoint.into(),
            token: None,
            max_requests_per_sec: 5.0,
            timeout_secs: 10.0,
            retries: 3,
            backoff_ms: 500,
        }
    }
}

#[derive(Deserialize)]
struct HttpReply {
    #[serde(default)]
    categories: Vec<Category>,
}

pub struct HttpClassifier {
    cfg: HttpClassifierConfig,
    agent: ureq::Agent,
    next_slot: Mutex<Instant>,
}

impl HttpClassifier {
    pub fn new(cfg: HttpClassifierConfig) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs_f64(cfg.timeout_secs))
            .build();
        HttpClassifier {
            cfg,
            agent,
            next_slot: Mutex::new(Instant::now()),
        }
    }

    /// Blocks until the rate ceiling allows another request.
    fn throttle(&self) {
        if self.cfg.max_requests_per_sec <= 0.0 {
            return;
        }
        let gap = Duration::from_secs_f64(1.0 / self.cfg.max_requests_per_sec);
        let wait = {
            let mut slot = self.next_slot.lock().unwrap_or_else(|e| e.into_inner());
            let now = Instant::now();
            let start = (*slot).max(now);
            *slot = start + gap;
            start - now
        };
        std::thread::sleep(wait);
    }

    fn request(&self, text: &str) -> Result<Vec<Category>, (ClassifyError, bool)> {
        self.throttle();
        let mut req = self.agent.post(&self.cfg.endpoint);
        if let Some(t) = &self.cfg.token {
            req = req.set("Authorization", &format!("Bearer {t}"));
        }
        let body = serde_json::json!({ "text": text }).to_string();
        match req
            .set("Content-Type", "application/json")
            .send_string(&body)
        {
            Ok(resp) => resp
                .into_string()
                .map_err(|e| e.to_string())
                .and_then(|s| serde_json::from_str::<HttpReply>(&s).map_err(|e| e.to_string()))
                .map(|r| r.categories)
                .map_err(|e| (ClassifyError::Client(format!("bad reply: {e}")), false)),
            Err(ureq::Error::Status(429, _)) => {
                Err((ClassifyError::Quota("HTTP 429".into()), false))
            }
            Err(ureq::Error::Status(code, _)) => {
                Err((ClassifyError::Client(format!("HTTP {code}")), code >= 500))
            }
            Err(e) => Err((ClassifyError::Client(e.to_string()), true)),
        }
    }
}

impl ClassifierClient for HttpClassifier {
    fn classify(&self, poem: &Poem) -> Result<Vec<Category>, ClassifyError> {
        let text = poem.text();
        let mut delay = Duration::from_millis(self.cfg.backoff_ms);
        let mut attempt = 0;
        loop {
            match self.request(&text) {
                Ok(c) => return Ok(c),
                Err((e, retryable)) if retryable && attempt < self.cfg.retries => {
                    warn!("classifier request failed ({e}); retrying in {delay:?}");
                    std::thread::sleep(delay);
                    delay *= 2;
                    attempt += 1;
                }
                Err((e, _)) => return Err(e),
            }
        }
    }
}

/// Remembers successful answers per poem id. Failures are not cached so a
/// later run can retry them.
pub struct CachedClassifier<C> {
    inner: C,
    cache: Mutex<HashMap<String, Vec<Category>>>,
}

impl<C: ClassifierClient> CachedClassifier<C> {
    pub fn new(inner: C) -> Self {
        CachedClassifier {
            inner,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn cached(&self) -> usize {
        self.cache.lock().unwrap_or_else(|e| e.into_inner()).len()
    }
}

impl<C: ClassifierClient> ClassifierClient for CachedClassifier<C> {
    fn classify(&self, poem: &Poem) -> Result<Vec<Category>, ClassifyError> {
        if let Some(c) = self
            .cache
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .get(poem.id())
        {
            return Ok(c.clone());
        }
        let result = self.inner.classify(poem)?;
        self.cache
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .insert(poem.id().to_string(), result.clone());
        Ok(result)
    }
}
