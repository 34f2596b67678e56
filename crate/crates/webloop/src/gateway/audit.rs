//! Append-only audit log of every backend exchange.

use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;

/// One completed (or failed) request/response pair, recorded verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatExchange {
    pub timestamp: String,
    pub backend: String,
    pub system_prompt: String,
    pub user_turns: Vec<String>,
    /// Model output, or the error text when the call failed.
    pub raw_response: String,
    pub attempts: u32,
    pub ok: bool,
}

#[derive(Serialize)]
struct FileRecord<'a> {
    timestamp: &'a str,
    backend: &'a str,
    system: &'a str,
    user: String,
    response: &'a str,
    attempts: u32,
}

/// Serialized-write audit sink. Every `complete()` call appends exactly one
/// exchange, including failed ones.
#[derive(Debug, Default)]
pub struct AuditLog {
    entries: Mutex<Vec<ChatExchange>>,
    sink: Option<Mutex<BufWriter<File>>>,
}

impl AuditLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// An audit log that also mirrors entries to a line-delimited JSON file
    /// with fields {timestamp, backend, system, user, response, attempts}.
    pub fn with_file(path: &Path) -> std::io::Result<Self> {
        Ok(AuditLog {
            entries: Mutex::new(Vec::new()),
            sink: Some(Mutex::new(BufWriter::new(File::create(path)?))),
        })
    }

    pub fn append(&self, exchange: ChatExchange) {
        if let Some(sink) = &self.sink {
            let record = FileRecord {
                timestamp: &exchange.timestamp,
                backend: &exchange.backend,
                system: &exchange.system_prompt,
                user: exchange.user_turns.join("\n"),
                response: &exchange.raw_response,
                attempts: exchange.attempts,
            };
            if let Ok(line) = serde_json::to_string(&record) {
                let mut sink = sink.lock().expect("audit sink poisoned");
                let _ = writeln!(sink, "{line}");
                let _ = sink.flush();
            }
        }
        self.entries.lock().expect("audit log poisoned").push(exchange);
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("audit log poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn snapshot(&self) -> Vec<ChatExchange> {
        self.entries.lock().expect("audit log poisoned").clone()
    }

    /// True when any recorded request contains `needle` in its user content.
    /// The confidentiality checks are substring audits over this.
    pub fn any_user_content_contains(&self, needle: &str) -> bool {
        self.entries
            .lock()
            .expect("audit log poisoned")
            .iter()
            .any(|e| e.user_turns.iter().any(|turn| turn.contains(needle)))
    }
}
