//! The knowledge base: validated sub-trajectories with generated
//! instructions, summaries, and embeddings, retrievable by three strategies.

pub mod embed;
mod filter;
mod retrieval;
mod synthesize;

pub use embed::{embed, Embedder, EmbeddingVector, HashEmbedder, DEFAULT_EMBED_DIM};
pub use filter::filter_examples;
pub use retrieval::{retrieve_by_match, retrieve_by_similarity, retrieve_by_summary, retrieve_mixed};
pub use synthesize::{debate_validate, synthesize_entries, SynthesisReport};

use crate::gateway::GatewayError;
use crate::trajectory::{to_record_json, Trajectory, TrajectoryError};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Arc;
use thiserror::Error;

/// Which side of the loop produced an entry's trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntrySource {
    Teacher,
    Student,
    Speculative,
}

/// A validated sub-trajectory with its generated instruction and summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeEntry {
    pub id: u64,
    pub trajectory: Trajectory,
    pub instruction: String,
    pub summary: String,
    /// Embedding of the serialized trajectory, stored unit-normalized.
    pub embedding: EmbeddingVector,
    pub validated: bool,
    pub source: EntrySource,
    pub iteration: u32,
    /// Stable digest of the serialized trajectory; no two entries share it.
    pub content_hash: String,
}

/// A retrieval request. At least the instruction is present.
#[derive(Debug, Clone)]
pub struct RetrievalQuery {
    pub instruction: String,
    pub observation: Option<crate::trajectory::Observation>,
    pub partial_trajectory: Option<Trajectory>,
    pub per_strategy_k: usize,
}

impl RetrievalQuery {
    pub fn new(instruction: impl Into<String>, per_strategy_k: usize) -> Self {
        RetrievalQuery {
            instruction: instruction.into(),
            observation: None,
            partial_trajectory: None,
            per_strategy_k,
        }
    }
}

#[derive(Debug, Error)]
pub enum KnowledgeError {
    #[error("trajectory cannot be split: {0}")]
    Trajectory(#[from] TrajectoryError),
    #[error("debate validation needs at least one judge")]
    NoJudges,
    #[error("gateway: {0}")]
    Gateway(#[from] GatewayError),
    #[error("store io: {0}")]
    Io(#[from] std::io::Error),
    #[error("store line {line}: {message}")]
    Load { line: usize, message: String },
}

/// Stable digest of a trajectory's record-format serialization.
pub fn content_hash(trajectory: &Trajectory) -> String {
    let mut hasher = Sha256::new();
    hasher.update(to_record_json(trajectory).as_bytes());
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// In-memory entry store. Reads are concurrent; ingestion goes through a
/// single `&mut` writer. Retrieval is a full scan; desk-scale stores do not
/// need an approximate index, and the brute-force cosine sort is the
/// behavioral contract.
pub struct KnowledgeStore {
    entries: Vec<KnowledgeEntry>,
    by_hash: BTreeMap<String, u64>,
    next_id: u64,
    embedder: Arc<dyn Embedder>,
    /// Per-entry embeddings of the summary text and of the
    /// first-observation + instruction text, keyed by entry id. Derived,
    /// never serialized; rebuilt on load.
    derived: BTreeMap<u64, DerivedEmbeddings>,
}

pub(crate) struct DerivedEmbeddings {
    pub summary: EmbeddingVector,
    pub matching: EmbeddingVector,
}

impl Default for KnowledgeStore {
    fn default() -> Self {
        Self::new()
    }
}

impl KnowledgeStore {
    pub fn new() -> Self {
        Self::with_embedder(Arc::new(HashEmbedder::default()))
    }

    pub fn with_embedder(embedder: Arc<dyn Embedder>) -> Self {
        KnowledgeStore {
            entries: Vec::new(),
            by_hash: BTreeMap::new(),
            next_id: 0,
            embedder,
            derived: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[KnowledgeEntry] {
        &self.entries
    }

    pub fn get(&self, id: u64) -> Option<&KnowledgeEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn validated_count(&self) -> usize {
        self.entries.iter().filter(|e| e.validated).count()
    }

    pub(crate) fn embedder(&self) -> &dyn Embedder {
        self.embedder.as_ref()
    }

    pub(crate) fn derived(&self, id: u64) -> Option<&DerivedEmbeddings> {
        self.derived.get(&id)
    }

    /// Inserts a new entry unless an entry with the same content hash
    /// already exists. Returns the stored entry on insertion.
    pub fn ingest(
        &mut self,
        trajectory: Trajectory,
        instruction: impl Into<String>,
        summary: impl Into<String>,
        validated: bool,
        source: EntrySource,
        iteration: u32,
    ) -> Option<&KnowledgeEntry> {
        let hash = content_hash(&trajectory);
        if self.by_hash.contains_key(&hash) {
            return None;
        }
        let instruction = instruction.into();
        let summary = summary.into();
        let embedding = self.embedder.embed(&trajectory.render_text());
        let id = self.next_id;
        self.next_id += 1;
        self.derived.insert(id, self.derive_embeddings_for(&trajectory, &instruction, &summary));
        self.by_hash.insert(hash.clone(), id);
        self.entries.push(KnowledgeEntry {
            id,
            trajectory,
            instruction,
            summary,
            embedding,
            validated,
            source,
            iteration,
            content_hash: hash,
        });
        self.entries.last()
    }

    fn derive_embeddings_for(
        &self,
        trajectory: &Trajectory,
        instruction: &str,
        summary: &str,
    ) -> DerivedEmbeddings {
        let first_observation = trajectory
            .observations()
            .next()
            .map(|o| o.content.as_str())
            .unwrap_or_default();
        DerivedEmbeddings {
            summary: self.embedder.embed(summary),
            matching: self
                .embedder
                .embed(&format!("{first_observation}\n{instruction}")),
        }
    }

    /// Writes the store as one JSON entry per line.
    pub fn save(&self, path: &Path) -> Result<(), KnowledgeError> {
        let mut file = fs::File::create(path)?;
        for entry in &self.entries {
            let line = serde_json::to_string(entry)
                .map_err(|e| KnowledgeError::Load { line: 0, message: e.to_string() })?;
            writeln!(file, "{line}")?;
        }
        Ok(())
    }

    /// Loads a store saved by [`KnowledgeStore::save`], using the default
    /// embedder for subsequent queries. Ids, hashes, and embeddings are
    /// reproduced bit-identically; bad lines are reported by number.
    pub fn load(path: &Path) -> Result<Self, KnowledgeError> {
        Self::load_with_embedder(path, Arc::new(HashEmbedder::default()))
    }

    pub fn load_with_embedder(
        path: &Path,
        embedder: Arc<dyn Embedder>,
    ) -> Result<Self, KnowledgeError> {
        let reader = BufReader::new(fs::File::open(path)?);
        let mut store = KnowledgeStore::with_embedder(embedder);
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: KnowledgeEntry =
                serde_json::from_str(&line).map_err(|e| KnowledgeError::Load {
                    line: line_no,
                    message: e.to_string(),
                })?;
            entry
                .embedding
                .check_stored_invariant()
                .map_err(|message| KnowledgeError::Load { line: line_no, message })?;
            entry
                .trajectory
                .check_invariants()
                .map_err(|e| KnowledgeError::Load {
                    line: line_no,
                    message: e.to_string(),
                })?;
            if store.by_hash.contains_key(&entry.content_hash) {
                return Err(KnowledgeError::Load {
                    line: line_no,
                    message: format!("duplicate content hash {}", entry.content_hash),
                });
            }
            store.by_hash.insert(entry.content_hash.clone(), entry.id);
            store.derived.insert(
                entry.id,
                store.derive_embeddings_for(&entry.trajectory, &entry.instruction, &entry.summary),
            );
            store.next_id = store.next_id.max(entry.id + 1);
            store.entries.push(entry);
        }
        Ok(store)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::Action;

    pub(crate) fn sample_trajectory(tag: &str, pages: &[&str]) -> Trajectory {
        let mut t = Trajectory::new(tag, format!("objective {tag}"), "sim://s/home");
        for (i, page) in pages.iter().enumerate() {
            t.push_observation(page.to_string(), format!("sim://s/p{i}")).unwrap();
            if i + 1 < pages.len() {
                t.push_action(Action::Click { element_id: i as u64 }, Some("advance".into()))
                    .unwrap();
            }
        }
        t
    }

    #[test]
    fn ingest_dedups_by_content_hash() {
        let mut store = KnowledgeStore::new();
        let t = sample_trajectory("a", &["page one", "page two"]);
        assert!(store.ingest(t.clone(), "i", "s", true, EntrySource::Teacher, 0).is_some());
        assert!(store.ingest(t, "other", "other", true, EntrySource::Student, 1).is_none());
        assert_eq!(store.len(), 1);
    }

    #[test]
    fn save_load_round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.jsonl");
        let mut store = KnowledgeStore::new();
        for i in 0..5 {
            let t = sample_trajectory(&format!("t{i}"), &["alpha page", "beta page", "gamma page"]);
            store.ingest(t, format!("instr {i}"), format!("sum {i}"), true, EntrySource::Teacher, 0);
        }
        store.save(&path).unwrap();
        let loaded = KnowledgeStore::load(&path).unwrap();
        assert_eq!(loaded.len(), store.len());
        for (a, b) in store.entries().iter().zip(loaded.entries()) {
            assert_eq!(a, b);
        }
        // Appending after load continues the id sequence.
        assert_eq!(loaded.next_id, store.next_id);
    }

    #[test]
    fn empty_store_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        KnowledgeStore::new().save(&path).unwrap();
        assert!(KnowledgeStore::load(&path).unwrap().is_empty());
    }

    #[test]
    fn corrupt_line_reports_its_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.jsonl");
        let mut store = KnowledgeStore::new();
        store.ingest(
            sample_trajectory("a", &["one page", "two page"]),
            "i",
            "s",
            true,
            EntrySource::Teacher,
            0,
        );
        store.save(&path).unwrap();
        let mut text = fs::read_to_string(&path).unwrap();
        text.push_str("{ corrupt\n");
        fs::write(&path, text).unwrap();
        match KnowledgeStore::load(&path) {
            Err(KnowledgeError::Load { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected load error, got {:?}", other.map(|s| s.len())),
        }
    }
}
