use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use sha2::{Digest, Sha256};
use unicode_segmentation::UnicodeSegmentation;

use super::{DiversityError, VectorSet};

/// Turns texts into vectors. The same text must map to the same vector for
/// a given provider.
pub trait EmbeddingProvider: Send + Sync {
    fn embed(&self, texts: &[String]) -> Result<VectorSet, DiversityError>;
}

/// Deterministic feature-hashing embedder: lowercase words (weight 1) and
/// character trigrams (weight 0.5) are hashed into signed buckets. Cheap
/// and offline; intended for tests and hermetic runs, not for semantics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashEmbedder {
    pub dim: usize,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        HashEmbedder { dim: 64 }
    }
}

impl HashEmbedder {
    fn add(&self, v: &mut [f64], feature: &str, weight: f64) {
        let h = Sha256::digest(feature.as_bytes());
        let bucket = u64::from_le_bytes(h[..8].try_into().expect("8 bytes")) % self.dim as u64;
        let sign = if h[8] & 1 == 0 { 1.0 } else { -1.0 };
        v[bucket as usize] += sign * weight;
    }

    pub fn embed_one(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        // Constant feature keeps empty texts away from the zero vector.
        self.add(&mut v, "\u{0}bias", 1.0);
        let lower = text.to_lowercase();
        for w in lower.unicode_words() {
            self.add(&mut v, &format!("w:{}", w), 1.0);
        }
        let chars: Vec<char> = lower.chars().collect();
        for t in chars.windows(3) {
            let tri: String = t.iter().collect();
            self.add(&mut v, &format!("c:{}", tri), 0.5);
        }
        v
    }
}

impl EmbeddingProvider for HashEmbedder {
    fn embed(&self, texts: &[String]) -> Result<VectorSet, DiversityError> {
        VectorSet::new(self.dim, texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

/// Vectors supplied ahead of time, looked up by exact text.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PrecomputedEmbeddings {
    pub dim: usize,
    pub table: BTreeMap<String, Vec<f64>>,
}

impl PrecomputedEmbeddings {
    pub fn from_pairs(dim: usize, texts: &[String], vectors: Vec<Vec<f64>>) -> Result<Self, DiversityError> {
        let set = VectorSet::new(dim, vectors)?;
        Ok(PrecomputedEmbeddings {
            dim,
            table: texts.iter().cloned().zip(set.vectors().iter().cloned()).collect(),
        })
    }
}

impl EmbeddingProvider for PrecomputedEmbeddings {
    fn embed(&self, texts: &[String]) -> Result<VectorSet, DiversityError> {
        let vectors = texts
            .iter()
            .map(|t| {
                self.table
                    .get(t)
                    .cloned()
                    .ok_or_else(|| DiversityError::Provider(format!("no precomputed vector for {:?}", t)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        VectorSet::new(self.dim, vectors)
    }
}
