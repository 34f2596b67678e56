//! Deterministic scripted backends: canned responses keyed by a fingerprint
//! of the request, an optional pure responder function, and a fallback.

use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

pub type Responder = Arc<dyn Fn(&str, &str) -> Option<String> + Send + Sync>;

/// Stable fingerprint of a (system, user) request.
pub fn request_fingerprint(system: &str, user: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(system.as_bytes());
    hasher.update([0x1f]);
    hasher.update(user.as_bytes());
    hex_digest(&hasher.finalize())
}

fn hex_digest(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Canned behavior of a scripted backend. Lookups are deterministic:
/// identical requests always yield identical responses. Resolution order is
/// fingerprint map, then responder, then fallback.
#[derive(Clone, Default)]
pub struct ScriptedBehavior {
    responses: BTreeMap<String, String>,
    /// Pure function of the request text. Must be deterministic; scripted
    /// backends promise byte-identical responses for identical requests.
    responder: Option<Responder>,
    fallback: Option<String>,
}

impl ScriptedBehavior {
    pub fn new() -> Self {
        Self::default()
    }

    /// Maps the exact (system, user) request to a canned response.
    pub fn with_response(
        mut self,
        system: &str,
        user: &str,
        response: impl Into<String>,
    ) -> Self {
        self.responses
            .insert(request_fingerprint(system, user), response.into());
        self
    }

    /// Maps a precomputed fingerprint to a canned response.
    pub fn with_fingerprint_response(
        mut self,
        fingerprint: impl Into<String>,
        response: impl Into<String>,
    ) -> Self {
        self.responses.insert(fingerprint.into(), response.into());
        self
    }

    pub fn with_responder(
        mut self,
        responder: impl Fn(&str, &str) -> Option<String> + Send + Sync + 'static,
    ) -> Self {
        self.responder = Some(Arc::new(responder));
        self
    }

    pub fn with_fallback(mut self, response: impl Into<String>) -> Self {
        self.fallback = Some(response.into());
        self
    }

    /// A behavior that answers every request with the same text.
    pub fn constant(response: impl Into<String>) -> Self {
        Self::new().with_fallback(response)
    }

    pub fn lookup(&self, system: &str, user: &str) -> Option<String> {
        let fingerprint = request_fingerprint(system, user);
        if let Some(hit) = self.responses.get(&fingerprint) {
            return Some(hit.clone());
        }
        if let Some(responder) = &self.responder {
            if let Some(hit) = responder(system, user) {
                return Some(hit);
            }
        }
        self.fallback.clone()
    }
}

impl fmt::Debug for ScriptedBehavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScriptedBehavior")
            .field("responses", &self.responses.len())
            .field("has_responder", &self.responder.is_some())
            .field("fallback", &self.fallback)
            .finish()
    }
}
