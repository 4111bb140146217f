use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::text::{normalize_phrase, tokenize};
use crate::{Error, Result};

pub const DEFAULT_EMBEDDING_DIM: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhraseEmbedding {
    pub phrase: String,
    pub vector: Vec<f64>,
}

pub trait PhraseEmbedder: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, phrase: &str) -> Result<PhraseEmbedding>;
}

/// Deterministic stand-in for a sentence encoder: every token hashes to a
/// pseudo-random unit vector, and a phrase is the renormalized mean of its
/// token vectors.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
    seed: u64,
}

impl HashEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim > 0);
        Self { dim, seed }
    }

    fn token_vector(&self, token: &str) -> Vec<f64> {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(token.as_bytes());
        let digest: [u8; 32] = h.finalize().into();
        let mut rng = ChaCha8Rng::from_seed(digest);
        let v: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        normalized(v).expect("gaussian draw is non-zero")
    }
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self::new(DEFAULT_EMBEDDING_DIM, 0)
    }
}

fn normalized(mut v: Vec<f64>) -> Option<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Some(v)
}

impl PhraseEmbedder for HashEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, phrase: &str) -> Result<PhraseEmbedding> {
        let tokens = tokenize(phrase);
        if tokens.is_empty() {
            return Err(Error::invalid("cannot embed an empty phrase"));
        }
        let mut acc = vec![0.0; self.dim];
        for t in &tokens {
            for (a, x) in acc.iter_mut().zip(self.token_vector(t)) {
                *a += x;
            }
        }
        let n = tokens.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        let vector =
            normalized(acc).ok_or_else(|| Error::Degenerate(format!("phrase `{phrase}` embeds to the zero vector")))?;
        Ok(PhraseEmbedding {
            phrase: phrase.to_string(),
            vector,
        })
    }
}

/// Embeddings precomputed by an external encoder, looked up by normalized phrase.
#[derive(Debug, Clone)]
pub struct FileEmbedder {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl FileEmbedder {
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut records = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: PhraseEmbedding = serde_json::from_str(&line)
                .map_err(|e| Error::invalid(format!("{}:{}: {e}", path.display(), i + 1)))?;
            records.push(rec);
        }
        Self::from_records(records)
    }

    pub fn from_records(records: impl IntoIterator<Item = PhraseEmbedding>) -> Result<Self> {
        let mut dim = None;
        let mut vectors = HashMap::new();
        for r in records {
            if r.vector.iter().all(|&x| x == 0.0) {
                return Err(Error::invalid(format!("zero embedding for `{}`", r.phrase)));
            }
            match dim {
                None => dim = Some(r.vector.len()),
                Some(d) if d != r.vector.len() => {
                    return Err(Error::invalid(format!(
                        "embedding for `{}` has dimension {}, expected {d}",
                        r.phrase,
                        r.vector.len()
                    )))
                }
                _ => {}
            }
            vectors.insert(normalize_phrase(&r.phrase), r.vector);
        }
        Ok(Self {
            dim: dim.ok_or_else(|| Error::invalid("embedding file is empty"))?,
            vectors,
        })
    }
}

impl PhraseEmbedder for FileEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, phrase: &str) -> Result<PhraseEmbedding> {
        if phrase.trim().is_empty() {
            return Err(Error::invalid("cannot embed an empty phrase"));
        }
        self.vectors
            .get(&normalize_phrase(phrase))
            .map(|v| PhraseEmbedding {
                phrase: phrase.to_string(),
                vector: v.clone(),
            })
            .ok_or_else(|| Error::MissingEmbedding(phrase.to_string()))
    }
}
