//! Offline word-averaging VA scorer.

use std::collections::HashMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use super::{ScoreError, Scorer};
use crate::affect::VaPoint;

const DEMO_LEXICON: &str = include_str!("../../assets/demo_lexicon.csv");

#[derive(Debug, Clone, PartialEq)]
pub struct LexiconEntry {
    pub token: String,
    pub va: VaPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    entries: HashMap<String, VaPoint>,
    source: String,
}

/// Lowercases, drops apostrophes and splits on anything non-alphanumeric.
fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\'' || c == '\u{2019}'))
        .map(|t| {
            t.chars()
                .filter(|c| c.is_alphanumeric())
                .flat_map(char::to_lowercase)
                .collect::<String>()
        })
        .filter(|t| !t.is_empty())
}

impl Lexicon {
    pub fn demo() -> Lexicon {
        Lexicon::from_reader(DEMO_LEXICON.as_bytes(), "<bundled demo lexicon>")
            .expect("bundled lexicon is valid")
    }

    pub fn from_entries(entries: impl IntoIterator<Item = LexiconEntry>) -> Result<Lexicon, ScoreError> {
        let mut map = HashMap::new();
        for e in entries {
            let token = e.token.to_lowercase();
            if map.insert(token.clone(), e.va).is_some() {
                return Err(ScoreError::Lexicon(format!("duplicate token `{token}`")));
            }
        }
        Ok(Lexicon {
            entries: map,
            source: "<in-memory>".into(),
        })
    }

    /// Reads `token,valence,arousal` rows (header required, values in `[0,1]`).
    pub fn load(path: impl AsRef<Path>) -> Result<Lexicon, ScoreError> {
        let path = path.as_ref();
        let file = File::open(path)
            .map_err(|e| ScoreError::Lexicon(format!("cannot read {}: {e}", path.display())))?;
        Lexicon::from_reader(file, &path.display().to_string())
    }

    pub fn from_reader<R: Read>(reader: R, source: &str) -> Result<Lexicon, ScoreError> {
        #[derive(serde::Deserialize)]
        struct Row {
            token: String,
            valence: f64,
            arousal: f64,
        }
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut entries = Vec::new();
        for (i, row) in rdr.deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| ScoreError::Lexicon(format!("{source} row {}: {e}", i + 1)))?;
            let va = VaPoint::new(row.valence, row.arousal)
                .map_err(|e| ScoreError::Lexicon(format!("{source} row {}: {e}", i + 1)))?;
            entries.push(LexiconEntry {
                token: row.token,
                va,
            });
        }
        let mut lex = Lexicon::from_entries(entries)
            .map_err(|e| ScoreError::Lexicon(format!("{source}: {e}")))?;
        lex.source = source.to_string();
        Ok(lex)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn get(&self, token: &str) -> Option<VaPoint> {
        self.entries.get(token).copied()
    }
}

/// Mean VA of the in-lexicon tokens of `text`; neutral `(0.5, 0.5)` when none match.
pub fn lexicon_score(lexicon: &Lexicon, text: &str) -> VaPoint {
    let (mut sv, mut sa, mut n) = (0.0, 0.0, 0usize);
    for tok in tokens(text) {
        if let Some(va) = lexicon.get(&tok) {
            sv += va.valence();
            sa += va.arousal();
            n += 1;
        }
    }
    if n == 0 {
        return VaPoint::clamped(0.5, 0.5);
    }
    VaPoint::clamped(sv / n as f64, sa / n as f64)
}

pub struct LexiconScorer {
    lexicon: Lexicon,
}

impl LexiconScorer {
    pub fn new(lexicon: Lexicon) -> Self {
        Self { lexicon }
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }
}

impl Scorer for LexiconScorer {
    fn score_batch(&self, texts: &[String]) -> Result<Vec<VaPoint>, ScoreError> {
        Ok(texts.iter().map(|t| lexicon_score(&self.lexicon, t)).collect())
    }

    fn identity(&self) -> String {
        format!("lexicon:{} ({} tokens)", self.lexicon.source, self.lexicon.len())
    }

    fn max_batch(&self) -> usize {
        usize::MAX
    }
}
