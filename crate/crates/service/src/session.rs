//! Opaque annotator session tokens with server-side expiry.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use rand::Rng;
use serde::{Deserialize, Serialize};

pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionToken {
    pub annotator_id: String,
    pub campaign_id: String,
    pub expires_at_ms: u64,
}

#[derive(Debug, Default)]
pub struct Sessions {
    ttl_ms: u64,
    tokens: Mutex<HashMap<String, SessionToken>>,
}

impl Sessions {
    pub fn new(ttl_secs: u64) -> Self {
        Sessions {
            ttl_ms: ttl_secs.saturating_mul(1000),
            tokens: Mutex::default(),
        }
    }

    /// 256 random bits from the thread-local CSPRNG, hex encoded.
    pub fn issue(&self, annotator_id: &str, campaign_id: &str, now: u64) -> (String, SessionToken) {
        let bytes: [u8; 32] = rand::rng().random();
        let mut token = String::with_capacity(64);
        for b in bytes {
            let _ = write!(token, "{b:02x}");
        }
        let session = SessionToken {
            annotator_id: annotator_id.to_string(),
            campaign_id: campaign_id.to_string(),
            expires_at_ms: now.saturating_add(self.ttl_ms),
        };
        let mut map = self.tokens.lock().expect("session lock poisoned");
        map.retain(|_, s| s.expires_at_ms > now);
        map.insert(token.clone(), session.clone());
        (token, session)
    }

    pub fn validate(&self, token: &str, now: u64) -> Option<SessionToken> {
        let mut map = self.tokens.lock().expect("session lock poisoned");
        match map.get(token) {
            Some(s) if s.expires_at_ms > now => Some(s.clone()),
            Some(_) => {
                map.remove(token);
                None
            }
            None => None,
        }
    }
}

/// Comparison whose running time does not depend on where the inputs differ.
pub fn constant_time_eq(a: &str, b: &str) -> bool {
    let (a, b) = (a.as_bytes(), b.as_bytes());
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}
