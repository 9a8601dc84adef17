//! Scorer that knows the VA tag of every scripted line the harness can emit
//! (mock phrasebook replies and greetings). Used for offline runs and
//! fixtures where the true affect of each turn must be known exactly.

use std::collections::HashMap;

use super::lexicon::{lexicon_score, Lexicon};
use super::{ScoreError, Scorer};
use crate::affect::{cell_midpoint, greeting_for, SamCell, VaPoint};
use crate::agents::mock::phrase_for;

pub struct ReferenceScorer {
    table: HashMap<&'static str, VaPoint>,
    bias: (f64, f64),
    fallback: Lexicon,
}

impl ReferenceScorer {
    pub fn new() -> Self {
        Self::with_bias(0.0, 0.0)
    }

    /// Adds `(dv, da)` to every tagged score before clamping.
    pub fn with_bias(dv: f64, da: f64) -> Self {
        let mut table = HashMap::new();
        for cell in SamCell::all() {
            table.insert(phrase_for(cell), cell_midpoint(cell));
            table.insert(greeting_for(cell), cell_midpoint(cell));
        }
        Self {
            table,
            bias: (dv, da),
            fallback: Lexicon::demo(),
        }
    }

    /// Lexicon used for texts outside the tagged set.
    pub fn with_fallback(mut self, lexicon: Lexicon) -> Self {
        self.fallback = lexicon;
        self
    }

    pub fn score_one(&self, text: &str) -> VaPoint {
        match self.table.get(text.trim()) {
            Some(va) => VaPoint::clamped(va.valence() + self.bias.0, va.arousal() + self.bias.1),
            None => lexicon_score(&self.fallback, text),
        }
    }
}

impl Default for ReferenceScorer {
    fn default() -> Self {
        Self::new()
    }
}

impl Scorer for ReferenceScorer {
    fn score_batch(&self, texts: &[String]) -> Result<Vec<VaPoint>, ScoreError> {
        Ok(texts.iter().map(|t| self.score_one(t)).collect())
    }

    fn identity(&self) -> String {
        format!("reference(bias=({},{}))", self.bias.0, self.bias.1)
    }

    fn max_batch(&self) -> usize {
        usize::MAX
    }
}
