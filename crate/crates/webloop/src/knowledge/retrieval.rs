//! The three retrieval strategies and their mixture.
//!
//! Every strategy ranks the store's validated entries by cosine similarity
//! against a strategy-specific pair of texts, sorts descending with ties
//! broken by ascending entry id, and returns the top `per_strategy_k`.
//! Non-validated entries are never returned.

use super::{KnowledgeEntry, KnowledgeStore, RetrievalQuery};
use crate::knowledge::embed::EmbeddingVector;

fn ranked(
    store: &KnowledgeStore,
    query_embedding: &EmbeddingVector,
    score_of: impl Fn(&KnowledgeEntry) -> f64,
    k: usize,
) -> Vec<KnowledgeEntry> {
    if query_embedding.is_degenerate() {
        return Vec::new();
    }
    let mut scored: Vec<(f64, &KnowledgeEntry)> = store
        .entries()
        .iter()
        .filter(|e| e.validated)
        .map(|e| (score_of(e), e))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.id.cmp(&b.1.id)));
    scored.into_iter().take(k).map(|(_, e)| e.clone()).collect()
}

/// Query text of the summary strategy: the instruction, plus the observation
/// content when present.
pub(crate) fn summary_query_text(query: &RetrievalQuery) -> String {
    match &query.observation {
        Some(obs) => format!("{}\n{}", query.instruction, obs.content),
        None => query.instruction.clone(),
    }
}

/// Query text of the direct-matching strategy: observation content first,
/// then the instruction; entries answer with their first observation plus
/// generated instruction.
pub(crate) fn match_query_text(query: &RetrievalQuery) -> String {
    match &query.observation {
        Some(obs) => format!("{}\n{}", obs.content, query.instruction),
        None => query.instruction.clone(),
    }
}

/// (a) Task-guided summary retrieval: queries built from the instruction and
/// observation are ranked against embeddings of the entries' summaries.
pub fn retrieve_by_summary(query: &RetrievalQuery, store: &KnowledgeStore) -> Vec<KnowledgeEntry> {
    let q = store.embedder().embed(&summary_query_text(query));
    ranked(
        store,
        &q,
        |e| store.derived(e.id).map(|d| q.cosine(&d.summary)).unwrap_or(0.0),
        query.per_strategy_k,
    )
}

/// (b) Direct observation and instruction matching against each entry's
/// first observation content plus generated instruction.
pub fn retrieve_by_match(query: &RetrievalQuery, store: &KnowledgeStore) -> Vec<KnowledgeEntry> {
    let q = store.embedder().embed(&match_query_text(query));
    ranked(
        store,
        &q,
        |e| store.derived(e.id).map(|d| q.cosine(&d.matching)).unwrap_or(0.0),
        query.per_strategy_k,
    )
}

/// (c) Trajectory similarity search: the serialized partial trajectory
/// against the entries' stored trajectory embeddings. Without a partial
/// trajectory this strategy contributes nothing.
pub fn retrieve_by_similarity(query: &RetrievalQuery, store: &KnowledgeStore) -> Vec<KnowledgeEntry> {
    let Some(partial) = &query.partial_trajectory else {
        return Vec::new();
    };
    let q = store.embedder().embed(&partial.render_text());
    ranked(store, &q, |e| q.cosine(&e.embedding), query.per_strategy_k)
}

/// Mixture of the three strategies: concatenation in strategy order (a),
/// (b), (c), deduplicated by id keeping the best (earliest) rank, capped at
/// `3 * per_strategy_k` entries.
pub fn retrieve_mixed(query: &RetrievalQuery, store: &KnowledgeStore) -> Vec<KnowledgeEntry> {
    let mut out: Vec<KnowledgeEntry> = Vec::new();
    let mut seen: Vec<u64> = Vec::new();
    for entry in retrieve_by_summary(query, store)
        .into_iter()
        .chain(retrieve_by_match(query, store))
        .chain(retrieve_by_similarity(query, store))
    {
        if !seen.contains(&entry.id) {
            seen.push(entry.id);
            out.push(entry);
        }
    }
    out.truncate(3 * query.per_strategy_k);
    out
}
