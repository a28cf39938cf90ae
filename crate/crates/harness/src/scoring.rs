use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub model_id: String,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>, model_id: impl Into<String>) -> Self {
        EmbeddingVector {
            values,
            model_id: model_id.into(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Cosine similarity, clamped to [-1, 1].
pub fn cosine(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64> {
    if u.model_id != v.model_id {
        return Err(Error::Input(format!(
            "cannot compare embeddings from {} and {}",
            u.model_id, v.model_id
        )));
    }
    if u.values.len() != v.values.len() {
        return Err(Error::Input(format!(
            "embedding lengths differ: {} vs {}",
            u.values.len(),
            v.values.len()
        )));
    }
    if u.values.iter().chain(&v.values).any(|x| !x.is_finite()) {
        return Err(Error::Input("embedding has non-finite entries".into()));
    }
    let (nu, nv) = (u.norm(), v.norm());
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::UndefinedSimilarity("zero-norm embedding".into()));
    }
    let dot: f64 = u.values.iter().zip(&v.values).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}
