//! Annotated VA utterance corpus: ingestion, exemplar retrieval and the
//! empirical VA cloud used to fit the state sampler.

use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::affect::{SamCell, VaPoint};

pub const REQUIRED_COLUMNS: [&str; 4] = ["text", "valence", "arousal", "language"];

pub const DEFAULT_EXEMPLAR_K: usize = 5;

const DEMO_CORPUS: &str = include_str!("../assets/demo_corpus.csv");

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corpus {source_name} is missing required column `{column}`")]
    MissingColumn { source_name: String, column: String },
    #[error("corpus {source_name}, row {row}: cannot parse {column} value `{value}`")]
    Parse {
        source_name: String,
        row: usize,
        column: &'static str,
        value: String,
    },
    #[error("corpus {source_name}, row {row}: {message}")]
    Malformed {
        source_name: String,
        row: usize,
        message: String,
    },
    #[error("corpus is empty")]
    Empty,
    #[error("no utterances left after filtering by language `{0}`")]
    EmptyAfterFilter(String),
    #[error("no English exemplars for {0} or its neighbouring cells")]
    ExemplarShortage(SamCell),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnotatedUtterance {
    pub text: String,
    pub va: VaPoint,
    pub language: String,
}

/// A row dropped during ingestion because it violated a corpus invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct SkippedRow {
    /// 1-based data row number (header excluded).
    pub row: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    utterances: Vec<AnnotatedUtterance>,
    source_path: String,
    skipped: Vec<SkippedRow>,
}

/// Maps a rating on a 1..9 SAM scale linearly onto `[0,1]`.
pub fn normalize_nine_point(rating: f64) -> f64 {
    (rating - 1.0) / 8.0
}

/// Reads a comma-delimited corpus with header `text,valence,arousal,language`.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Corpus::from_reader(file, &path.display().to_string())
}

impl Corpus {
    /// Small English demo corpus covering every SAM cell, bundled with the crate.
    pub fn demo() -> Corpus {
        Corpus::from_reader(DEMO_CORPUS.as_bytes(), "<bundled demo corpus>")
            .expect("bundled demo corpus is valid")
    }

    pub fn from_utterances(utterances: Vec<AnnotatedUtterance>, source_path: &str) -> Corpus {
        Corpus {
            utterances,
            source_path: source_path.to_string(),
            skipped: Vec::new(),
        }
    }

    pub fn from_reader<R: Read>(reader: R, source_name: &str) -> Result<Corpus, CorpusError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::Fields)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| CorpusError::Malformed {
                source_name: source_name.to_string(),
                row: 0,
                message: e.to_string(),
            })?
            .clone();
        let mut idx = [0usize; 4];
        for (slot, name) in idx.iter_mut().zip(REQUIRED_COLUMNS) {
            *slot = headers
                .iter()
                .position(|h| h.trim_start_matches('\u{feff}') == name)
                .ok_or_else(|| CorpusError::MissingColumn {
                    source_name: source_name.to_string(),
                    column: name.to_string(),
                })?;
        }
        let [text_i, val_i, aro_i, lang_i] = idx;

        let mut utterances = Vec::new();
        let mut skipped = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let row = i + 1;
            let record = record.map_err(|e| CorpusError::Malformed {
                source_name: source_name.to_string(),
                row,
                message: e.to_string(),
            })?;
            let field = |j: usize| record.get(j).unwrap_or("");
            let number = |j: usize, column: &'static str| {
                field(j).parse::<f64>().map_err(|_| CorpusError::Parse {
                    source_name: source_name.to_string(),
                    row,
                    column,
                    value: field(j).to_string(),
                })
            };
            let valence = number(val_i, "valence")?;
            let arousal = number(aro_i, "arousal")?;
            let text = field(text_i).trim();
            if text.is_empty() {
                skipped.push(SkippedRow {
                    row,
                    reason: "empty text".into(),
                });
                continue;
            }
            let va = match VaPoint::new(valence, arousal) {
                Ok(va) => va,
                Err(e) => {
                    skipped.push(SkippedRow {
                        row,
                        reason: e.to_string(),
                    });
                    continue;
                }
            };
            utterances.push(AnnotatedUtterance {
                text: text.to_string(),
                va,
                language: field(lang_i).to_ascii_lowercase(),
            });
        }
        if !skipped.is_empty() {
            log::warn!("{}: skipped {} invalid rows", source_name, skipped.len());
        }
        Ok(Corpus {
            utterances,
            source_path: source_name.to_string(),
            skipped,
        })
    }

    pub fn utterances(&self) -> &[AnnotatedUtterance] {
        &self.utterances
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn source_path(&self) -> &str {
        &self.source_path
    }

    pub fn skipped(&self) -> &[SkippedRow] {
        &self.skipped
    }
}

/// Result of an exemplar draw. `widened` is set when the exact cell held
/// fewer than `k` candidates and neighbouring cells were consulted.
#[derive(Debug, Clone, PartialEq)]
pub struct ExemplarDraw<'a> {
    pub utterances: Vec<&'a AnnotatedUtterance>,
    pub widened: bool,
}

impl ExemplarDraw<'_> {
    pub fn texts(&self) -> Vec<String> {
        self.utterances.iter().map(|u| u.text.clone()).collect()
    }
}

/// Samples up to `k` English utterances from `cell` without replacement,
/// topping up from the 8-neighbourhood when the cell is sparse.
pub fn exemplars<'a, R: Rng + ?Sized>(
    corpus: &'a Corpus,
    cell: SamCell,
    k: usize,
    rng: &mut R,
) -> Result<ExemplarDraw<'a>, CorpusError> {
    if corpus.is_empty() {
        return Err(CorpusError::Empty);
    }
    let english = || corpus.utterances.iter().filter(|u| u.language == "en");
    let mut exact: Vec<&AnnotatedUtterance> = english().filter(|u| u.va.cell() == cell).collect();

    if exact.len() >= k {
        let picked = exact.choose_multiple(rng, k).copied().collect();
        return Ok(ExemplarDraw {
            utterances: picked,
            widened: false,
        });
    }

    exact.shuffle(rng);
    let neighbors = cell.neighbors();
    let around: Vec<&AnnotatedUtterance> = english()
        .filter(|u| neighbors.contains(&u.va.cell()))
        .collect();
    let need = k - exact.len();
    let mut picked = exact;
    picked.extend(around.choose_multiple(rng, need).copied());
    if picked.is_empty() {
        return Err(CorpusError::ExemplarShortage(cell));
    }
    Ok(ExemplarDraw {
        utterances: picked,
        widened: true,
    })
}

/// VA coordinates of the corpus, optionally restricted to one language.
pub fn empirical_va(corpus: &Corpus, language: Option<&str>) -> Result<Vec<VaPoint>, CorpusError> {
    if corpus.is_empty() {
        return Err(CorpusError::Empty);
    }
    let points: Vec<VaPoint> = corpus
        .utterances
        .iter()
        .filter(|u| language.is_none_or(|l| u.language.eq_ignore_ascii_case(l)))
        .map(|u| u.va)
        .collect();
    if points.is_empty() {
        return Err(CorpusError::EmptyAfterFilter(
            language.unwrap_or_default().to_string(),
        ));
    }
    Ok(points)
}
