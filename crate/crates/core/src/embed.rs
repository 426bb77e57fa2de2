//! Deterministic content embeddings and exact top-k cosine retrieval.
//!
//! Signed feature hashing (FNV-1a, seed-mixed) gives identical vectors for
//! identical (content, seed, dim) on every platform — no model weights, no
//! floating-point ambiguity in the ranking contract. Retrieval is an exact
//! scan: at desk scale (<= 1e4 records) exactness is cheap and keeps every
//! test reproducible. The call surface permits an approximate backend later.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::record::{MemoryRecord, RecordId};
use crate::tokenize::tokenize;

#[derive(Debug, Error, PartialEq)]
pub enum EmbedError {
    #[error("content has no tokens")]
    EmptyContent,
    #[error("embedding dimension must be > 0")]
    ZeroDim,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Embedder {
    pub dim: usize,
    pub seed: u64,
}

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET ^ seed.wrapping_mul(FNV_PRIME);
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

impl Embedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        Self { dim, seed }
    }

    /// Feature-hash each token into `dim` buckets with a signed contribution,
    /// sum, L2-normalize. If the signed sums cancel to the zero vector, fall
    /// back to the basis vector of the first token's bucket.
    pub fn embed(&self, content: &str) -> Result<Vec<f64>, EmbedError> {
        if self.dim == 0 {
            return Err(EmbedError::ZeroDim);
        }
        let tokens = tokenize(content);
        if tokens.is_empty() {
            return Err(EmbedError::EmptyContent);
        }
        let mut v = vec![0.0f64; self.dim];
        for tok in &tokens {
            let h = fnv1a(self.seed, tok.as_bytes());
            let bucket = ((h >> 1) % self.dim as u64) as usize;
            let sign = if h & 1 == 0 { 1.0 } else { -1.0 };
            v[bucket] += sign;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            let h = fnv1a(self.seed, tokens[0].as_bytes());
            let bucket = ((h >> 1) % self.dim as u64) as usize;
            v[bucket] = 1.0;
            return Ok(v);
        }
        for x in &mut v {
            *x /= norm;
        }
        Ok(v)
    }
}

/// Cosine similarity. Inputs are unit vectors by contract, but the norm is
/// recomputed so the function is total.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// k highest-cosine records, ties broken by ascending record id. Returns
/// fewer than k when the candidate set is smaller. The result is a prefix of
/// the full cosine-descending, id-ascending ordering.
pub fn top_k<'a, I>(query: &[f64], candidates: I, k: usize) -> Vec<(RecordId, f64)>
where
    I: IntoIterator<Item = &'a MemoryRecord>,
{
    if k == 0 {
        return Vec::new();
    }
    let mut scored: Vec<(RecordId, f64)> = candidates
        .into_iter()
        .map(|r| (r.id.clone(), cosine(query, &r.embedding)))
        .collect();
    scored.sort_by(|(ia, ca), (ib, cb)| {
        cb.partial_cmp(ca)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| ia.cmp(ib))
    });
    scored.truncate(k);
    scored
}
