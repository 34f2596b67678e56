//! Deterministic text embeddings.
//!
//! The default embedder lowercases, tokenizes on non-alphanumerics, hashes
//! each token into one of `dim` buckets, counts, and L2-normalizes. It is
//! stable across runs and platforms, which the retrieval oracle tests and
//! the reproducibility checks rely on. Anything satisfying [`Embedder`]
//! (e.g. a remote embedding service) can be plugged in instead.

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};
use std::hash::Hasher;

pub const DEFAULT_EMBED_DIM: usize = 256;

/// A stored-normalized embedding: unit L2 norm, or all-zero for degenerate
/// (empty) inputs. Serializes as a bare number array.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    dim: usize,
    values: Vec<f64>,
}

impl Serialize for EmbeddingVector {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.values.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for EmbeddingVector {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let values = Vec::<f64>::deserialize(deserializer)?;
        Ok(EmbeddingVector {
            dim: values.len(),
            values,
        })
    }
}

impl EmbeddingVector {
    /// Wraps raw values, checking the unit-norm (or zero) invariant.
    pub fn from_values(values: Vec<f64>) -> Result<Self, String> {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm != 0.0 && (norm - 1.0).abs() > 1e-9 {
            return Err(format!("embedding norm {norm} is neither 0 nor 1"));
        }
        Ok(EmbeddingVector {
            dim: values.len(),
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Zero vectors come from empty text; they are excluded from indexing.
    pub fn is_degenerate(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    /// Cosine similarity. Vectors are unit-norm, so this is the dot product;
    /// degenerate vectors score 0 against everything.
    pub fn cosine(&self, other: &EmbeddingVector) -> f64 {
        assert_eq!(self.dim, other.dim, "embedding dimensions differ");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn check_stored_invariant(&self) -> Result<(), String> {
        if self.values.len() != self.dim {
            return Err(format!(
                "embedding declares dim {} but has {} values",
                self.dim,
                self.values.len()
            ));
        }
        let norm = self.norm();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(format!("stored embedding norm {norm} is not 1"));
        }
        Ok(())
    }
}

pub trait Embedder: Send + Sync {
    fn embed(&self, text: &str) -> EmbeddingVector;
    fn dim(&self) -> usize;
}

/// Feature-hashing bag-of-tokens embedder.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        HashEmbedder { dim }
    }
}

impl Default for HashEmbedder {
    fn default() -> Self {
        HashEmbedder::new(DEFAULT_EMBED_DIM)
    }
}

impl Embedder for HashEmbedder {
    fn embed(&self, text: &str) -> EmbeddingVector {
        let mut counts = vec![0.0f64; self.dim];
        for token in tokenize(text) {
            let mut hasher = FnvHasher::default();
            hasher.write(token.as_bytes());
            let bucket = (hasher.finish() % self.dim as u64) as usize;
            counts[bucket] += 1.0;
        }
        let norm = counts.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut counts {
                *v /= norm;
            }
        }
        EmbeddingVector {
            dim: self.dim,
            values: counts,
        }
    }

    fn dim(&self) -> usize {
        self.dim
    }
}

/// Lowercased tokens split on non-alphanumeric characters.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
}

/// Embeds with the default 256-dimension feature hasher.
pub fn embed(text: &str) -> EmbeddingVector {
    HashEmbedder::default().embed(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_similarity_is_one() {
        let v = embed("click the wish list button");
        assert!((v.cosine(&v) - 1.0).abs() <= 1e-9);
        assert!((v.norm() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn empty_text_is_degenerate() {
        let v = embed("");
        assert!(v.is_degenerate());
        assert_eq!(v.norm(), 0.0);
        assert_eq!(v.cosine(&embed("anything")), 0.0);
    }

    #[test]
    fn bag_of_tokens_ignores_order() {
        let a = embed("click button");
        let b = embed("button click");
        assert!((a.cosine(&b) - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn tokenization_lowercases_and_splits_on_punctuation() {
        let tokens: Vec<String> = tokenize("Add to Wish-List, NOW!").collect();
        assert_eq!(tokens, vec!["add", "to", "wish", "list", "now"]);
    }

    #[test]
    fn stored_invariant_accepts_unit_vectors_only() {
        assert!(embed("x").check_stored_invariant().is_ok());
        let bad = EmbeddingVector {
            dim: 2,
            values: vec![0.9, 0.9],
        };
        assert!(bad.check_stored_invariant().is_err());
        assert!(EmbeddingVector::from_values(vec![0.0, 0.0]).is_ok());
        assert!(EmbeddingVector::from_values(vec![0.6, 0.8]).is_ok());
        assert!(EmbeddingVector::from_values(vec![0.5, 0.5]).is_err());
    }
}
