//! Client for an external sentence-embedding provider.
//!
//! Protocol: `POST <url>` with `{"texts": [...]}`, answered by
//! `{"vectors": [[...], ...]}` in the same order. Vectors are cached on disk
//! under the SHA-256 of provider URL and text, so reruns only send unseen texts.

use std::fs;
use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::manifest::sha256_hex;
use crate::{Result, ServiceError};

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

pub struct EmbeddingClient {
    url: String,
    cache_dir: Option<PathBuf>,
    batch_size: usize,
    agent: ureq::Agent,
}

impl EmbeddingClient {
    pub fn new(url: &str, cache_dir: Option<PathBuf>, batch_size: usize, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        EmbeddingClient {
            url: url.to_string(),
            cache_dir,
            batch_size: batch_size.max(1),
            agent,
        }
    }

    fn cache_path(&self, text: &str) -> Option<PathBuf> {
        let key = sha256_hex(format!("{}\n{text}", self.url).as_bytes());
        self.cache_dir.as_ref().map(|d| d.join(&key[..2]).join(format!("{key}.json")))
    }

    fn cached(&self, text: &str) -> Option<Vec<f64>> {
        let path = self.cache_path(text)?;
        let bytes = fs::read(&path).ok()?;
        match serde_json::from_slice(&bytes) {
            Ok(v) => Some(v),
            Err(e) => {
                log::warn!("ignoring unreadable cache entry {}: {e}", path.display());
                None
            }
        }
    }

    fn store(&self, text: &str, vector: &[f64]) -> Result<()> {
        if let Some(path) = self.cache_path(text) {
            let dir = path.parent().expect("cache paths have a parent");
            fs::create_dir_all(dir).map_err(ServiceError::file(dir))?;
            let json = serde_json::to_vec(vector).expect("vectors serialize");
            crate::store::write_atomic(&path, &json)?;
        }
        Ok(())
    }

    fn request(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        let mut resp = self
            .agent
            .post(&self.url)
            .send_json(EmbedRequest { texts })
            .map_err(|e| ServiceError::Provider(format!("{}: {e}", self.url)))?;
        let body: EmbedResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| ServiceError::Provider(format!("{}: malformed response: {e}", self.url)))?;
        if body.vectors.len() != texts.len() {
            return Err(ServiceError::Provider(format!(
                "sent {} texts, received {} vectors",
                texts.len(),
                body.vectors.len()
            )));
        }
        Ok(body.vectors)
    }

    /// One vector per text, in order. All vectors must share a dimension and
    /// be finite.
    pub fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        let mut out: Vec<Option<Vec<f64>>> = texts.iter().map(|t| self.cached(t)).collect();
        let missing: Vec<usize> = (0..texts.len()).filter(|&i| out[i].is_none()).collect();
        log::info!("{} of {} texts cached", texts.len() - missing.len(), texts.len());
        for chunk in missing.chunks(self.batch_size) {
            let batch: Vec<&str> = chunk.iter().map(|&i| texts[i].as_str()).collect();
            for (&i, v) in chunk.iter().zip(self.request(&batch)?) {
                self.store(&texts[i], &v)?;
                out[i] = Some(v);
            }
        }
        let out: Vec<Vec<f64>> = out.into_iter().map(|v| v.expect("filled above")).collect();
        if let Some(first) = out.first() {
            let dim = first.len();
            if let Some(bad) = out.iter().find(|v| v.len() != dim || dim == 0) {
                return Err(ServiceError::Provider(format!(
                    "inconsistent vector dimensions {dim} and {}",
                    bad.len()
                )));
            }
            if out.iter().flatten().any(|x| !x.is_finite()) {
                return Err(ServiceError::Provider("non-finite vector component".into()));
            }
        }
        Ok(out)
    }
}
