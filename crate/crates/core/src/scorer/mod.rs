//! Turn-level VA scoring.
//!
//! [`Scorer`] is the backend contract. [`CachedScorer`] sits in front of any
//! backend, enforcing request preconditions, splitting batches and
//! memoizing results by exact text for the lifetime of a run.

pub mod lexicon;
pub mod reference;
#[cfg(feature = "live")]
pub mod remote;

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::affect::VaPoint;
pub use lexicon::{lexicon_score, Lexicon, LexiconEntry, LexiconScorer};
pub use reference::ReferenceScorer;

pub const DEFAULT_MAX_BATCH: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoreError {
    #[error("score request has no texts")]
    EmptyRequest,
    #[error("text #{0} in score request is empty")]
    EmptyText(usize),
    #[error("batch of {size} exceeds the maximum of {max}")]
    BatchTooLarge { size: usize, max: usize },
    #[error("scorer unavailable: {0}")]
    Unavailable(String),
    #[error("scorer protocol error: {0}")]
    Protocol(String),
    #[error("lexicon error: {0}")]
    Lexicon(String),
}

pub trait Scorer: Send + Sync {
    /// One point per input text, in order.
    fn score_batch(&self, texts: &[String]) -> Result<Vec<VaPoint>, ScoreError>;

    /// Identifier written to run metadata.
    fn identity(&self) -> String;

    /// Largest batch the backend accepts in one call.
    fn max_batch(&self) -> usize {
        DEFAULT_MAX_BATCH
    }
}

impl<S: Scorer + ?Sized> Scorer for Arc<S> {
    fn score_batch(&self, texts: &[String]) -> Result<Vec<VaPoint>, ScoreError> {
        (**self).score_batch(texts)
    }

    fn identity(&self) -> String {
        (**self).identity()
    }

    fn max_batch(&self) -> usize {
        (**self).max_batch()
    }
}

impl<S: Scorer + ?Sized> Scorer for Box<S> {
    fn score_batch(&self, texts: &[String]) -> Result<Vec<VaPoint>, ScoreError> {
        (**self).score_batch(texts)
    }

    fn identity(&self) -> String {
        (**self).identity()
    }

    fn max_batch(&self) -> usize {
        (**self).max_batch()
    }
}

pub struct CachedScorer<S> {
    inner: S,
    cache: Mutex<HashMap<String, VaPoint>>,
    backend_calls: AtomicUsize,
}

impl<S: Scorer> CachedScorer<S> {
    pub fn new(inner: S) -> Self {
        Self {
            inner,
            cache: Mutex::new(HashMap::new()),
            backend_calls: AtomicUsize::new(0),
        }
    }

    pub fn inner(&self) -> &S {
        &self.inner
    }

    pub fn identity(&self) -> String {
        self.inner.identity()
    }

    /// Number of batch calls that reached the wrapped backend.
    pub fn backend_calls(&self) -> usize {
        self.backend_calls.load(Ordering::SeqCst)
    }

    pub fn score<T: AsRef<str>>(&self, texts: &[T]) -> Result<Vec<VaPoint>, ScoreError> {
        if texts.is_empty() {
            return Err(ScoreError::EmptyRequest);
        }
        if let Some(i) = texts.iter().position(|t| t.as_ref().trim().is_empty()) {
            return Err(ScoreError::EmptyText(i));
        }

        let mut missing: Vec<String> = Vec::new();
        {
            let cache = self.cache.lock().unwrap();
            for t in texts {
                let t = t.as_ref();
                if !cache.contains_key(t) && !missing.iter().any(|m| m == t) {
                    missing.push(t.to_string());
                }
            }
        }

        let max = self.inner.max_batch().max(1);
        for chunk in missing.chunks(max) {
            self.backend_calls.fetch_add(1, Ordering::SeqCst);
            let scores = self.inner.score_batch(chunk)?;
            if scores.len() != chunk.len() {
                return Err(ScoreError::Protocol(format!(
                    "asked for {} scores, got {}",
                    chunk.len(),
                    scores.len()
                )));
            }
            let mut cache = self.cache.lock().unwrap();
            for (t, s) in chunk.iter().zip(scores) {
                cache.insert(t.clone(), s);
            }
        }

        let cache = self.cache.lock().unwrap();
        Ok(texts.iter().map(|t| cache[t.as_ref()]).collect())
    }
}
