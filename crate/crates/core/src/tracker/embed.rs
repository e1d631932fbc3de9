//! Deterministic hash embeddings standing in for a frozen text encoder.
//!
//! Each token maps to a unit vector drawn from a generator seeded by a
//! stable hash of the token string, so embeddings never change across runs
//! or machines.

use crate::error::{Error, Result};
use crate::neurocore::Tensor2;
use crate::stable_hash;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

#[derive(Debug, Clone, PartialEq)]
pub struct PromptEmbedding {
    pub tokens: Vec<String>,
    /// L x C, one row per token.
    pub matrix: Tensor2,
}

/// Unit-normalized pseudo-random embedding of one token.
pub fn embed_token(token: &str, dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(stable_hash(token));
    let t = Tensor2::randn(1, dim, 1.0, &mut rng);
    let norm = t.data().iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
    t.data().iter().map(|v| v / norm).collect()
}

/// Whitespace/punctuation tokenization followed by per-token hash
/// embeddings. Empty text (no alphanumeric tokens) is rejected.
pub fn embed_prompt(text: &str, dim: usize) -> Result<PromptEmbedding> {
    let tokens: Vec<String> = text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect();
    if tokens.is_empty() {
        return Err(Error::invalid("prompt text has no tokens"));
    }
    let mut data = Vec::with_capacity(tokens.len() * dim);
    for t in &tokens {
        data.extend(embed_token(t, dim));
    }
    let matrix = Tensor2::new(tokens.len(), dim, data)?;
    Ok(PromptEmbedding { tokens, matrix })
}

/// Unit-normalized mean of the tag embeddings; the oracle detector's
/// feature for an object carrying those tags.
pub fn embed_tag_set(tags: &BTreeSet<String>, dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    if tags.is_empty() {
        return out;
    }
    for tag in tags {
        for (o, v) in out.iter_mut().zip(embed_token(tag, dim)) {
            *o += v;
        }
    }
    let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
    out.iter_mut().for_each(|v| *v /= norm);
    out
}

/// Mean over token rows, used as the early-fusion gate vector.
pub fn pooled_embedding(e: &PromptEmbedding) -> Vec<f64> {
    let (rows, cols) = (e.matrix.rows(), e.matrix.cols());
    let mut out = vec![0.0; cols];
    for r in 0..rows {
        for (o, v) in out.iter_mut().zip(e.matrix.row(r)) {
            *o += v;
        }
    }
    out.iter_mut().for_each(|v| *v /= rows as f64);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_tokenized() {
        let a = embed_prompt("red cars", 16).unwrap();
        let b = embed_prompt("red cars", 16).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.tokens, vec!["red", "cars"]);
        assert_eq!(a.matrix.rows(), 2);

        let c = embed_prompt("the red pedestrians, not situated on the left side", 16).unwrap();
        assert_eq!(c.tokens.len(), 9);
    }

    #[test]
    fn rejects_empty_text() {
        assert!(embed_prompt("", 16).is_err());
        assert!(embed_prompt("  ... ", 16).is_err());
    }

    #[test]
    fn rows_are_unit_norm() {
        let e = embed_prompt("car truck pedestrian", 32).unwrap();
        for r in 0..e.matrix.rows() {
            let n: f64 = e.matrix.row(r).iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn distinct_tokens_are_nearly_orthogonal() {
        // At C = 32 random unit vectors concentrate near orthogonality;
        // fewer than 1% of pairs may reach |cos| 0.5.
        let mut below = 0;
        let total = 1000;
        for i in 0..total {
            let a = embed_token(&format!("token-a-{i}"), 32);
            let b = embed_token(&format!("token-b-{i}"), 32);
            let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
            if dot.abs() < 0.5 {
                below += 1;
            }
        }
        assert!(below >= 990, "only {below}/{total} pairs below 0.5 cosine");
    }
}
