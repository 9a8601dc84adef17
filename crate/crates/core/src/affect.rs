//! Valence-Arousal coordinates and the 5x5 Self-Assessment Manikin grid.
//!
//! Continuous affect lives in `[0,1]²`. Each axis is discretized into five
//! SAM levels using half-open bins `[0,0.2) [0.2,0.4) [0.4,0.6) [0.6,0.8)`
//! and a closed final bin `[0.8,1.0]`, which gives 25 cells. Every cell has
//! a fixed pair of textual descriptions (used verbatim in prompts) and a
//! matching greeting line.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AffectError {
    #[error("{dimension} value {value} is outside [0, 1]")]
    OutOfRange { dimension: Dimension, value: f64 },
    #[error("SAM level {0} is outside 1..=5")]
    InvalidLevel(u8),
}

/// One of the two affect axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Valence,
    Arousal,
}

impl Dimension {
    pub const ALL: [Dimension; 2] = [Dimension::Valence, Dimension::Arousal];

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::Valence => "valence",
            Dimension::Arousal => "arousal",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A point in the unit Valence-Arousal square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawVa")]
pub struct VaPoint {
    valence: f64,
    arousal: f64,
}

#[derive(Deserialize)]
struct RawVa {
    valence: f64,
    arousal: f64,
}

impl TryFrom<RawVa> for VaPoint {
    type Error = AffectError;

    fn try_from(raw: RawVa) -> Result<Self, Self::Error> {
        VaPoint::new(raw.valence, raw.arousal)
    }
}

fn check_unit(dimension: Dimension, value: f64) -> Result<f64, AffectError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(AffectError::OutOfRange { dimension, value })
    }
}

impl VaPoint {
    pub fn new(valence: f64, arousal: f64) -> Result<Self, AffectError> {
        Ok(Self {
            valence: check_unit(Dimension::Valence, valence)?,
            arousal: check_unit(Dimension::Arousal, arousal)?,
        })
    }

    /// Builds a point by clamping both coordinates into `[0,1]`. NaN maps to 0.5.
    pub fn clamped(valence: f64, arousal: f64) -> Self {
        let clamp = |x: f64| if x.is_nan() { 0.5 } else { x.clamp(0.0, 1.0) };
        Self {
            valence: clamp(valence),
            arousal: clamp(arousal),
        }
    }

    pub fn valence(&self) -> f64 {
        self.valence
    }

    pub fn arousal(&self) -> f64 {
        self.arousal
    }

    pub fn get(&self, dimension: Dimension) -> f64 {
        match dimension {
            Dimension::Valence => self.valence,
            Dimension::Arousal => self.arousal,
        }
    }

    pub fn cell(&self) -> SamCell {
        SamCell {
            valence_level: level_index(self.valence),
            arousal_level: level_index(self.arousal),
        }
    }
}

pub const VALENCE_DESCRIPTIONS: [&str; 5] = [
    "Very negative (unpleasant)",
    "Negative (unsatisfied)",
    "Neutral",
    "Positive (pleased)",
    "Very positive (pleasant)",
];

pub const AROUSAL_DESCRIPTIONS: [&str; 5] = [
    "Very calm",
    "Calm (dull)",
    "Moderate (neutral)",
    "Excited (wide-awake)",
    "Very excited",
];

/// One rung of the five-level SAM scale, carrying both axis descriptions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SamLevel {
    index: u8,
}

impl SamLevel {
    pub fn new(index: u8) -> Result<Self, AffectError> {
        if (1..=5).contains(&index) {
            Ok(Self { index })
        } else {
            Err(AffectError::InvalidLevel(index))
        }
    }

    pub fn index(&self) -> u8 {
        self.index
    }

    pub fn valence_desc(&self) -> &'static str {
        VALENCE_DESCRIPTIONS[usize::from(self.index - 1)]
    }

    pub fn arousal_desc(&self) -> &'static str {
        AROUSAL_DESCRIPTIONS[usize::from(self.index - 1)]
    }

    pub fn description(&self, dimension: Dimension) -> &'static str {
        match dimension {
            Dimension::Valence => self.valence_desc(),
            Dimension::Arousal => self.arousal_desc(),
        }
    }
}

// Caller guarantees value in [0,1].
fn level_index(value: f64) -> u8 {
    if value >= 0.8 {
        5
    } else if value >= 0.6 {
        4
    } else if value >= 0.4 {
        3
    } else if value >= 0.2 {
        2
    } else {
        1
    }
}

/// Maps a continuous coordinate on one axis to its SAM level.
pub fn sam_level_of(value: f64, dimension: Dimension) -> Result<SamLevel, AffectError> {
    let value = check_unit(dimension, value)?;
    Ok(SamLevel {
        index: level_index(value),
    })
}

/// A cell of the 5x5 SAM grid, identified by its (valence, arousal) levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawCell")]
pub struct SamCell {
    valence_level: u8,
    arousal_level: u8,
}

#[derive(Deserialize)]
struct RawCell {
    valence_level: u8,
    arousal_level: u8,
}

impl TryFrom<RawCell> for SamCell {
    type Error = AffectError;

    fn try_from(raw: RawCell) -> Result<Self, Self::Error> {
        SamCell::new(raw.valence_level, raw.arousal_level)
    }
}

impl SamCell {
    pub fn new(valence_level: u8, arousal_level: u8) -> Result<Self, AffectError> {
        SamLevel::new(valence_level)?;
        SamLevel::new(arousal_level)?;
        Ok(Self {
            valence_level,
            arousal_level,
        })
    }

    /// All 25 cells, valence-major.
    pub fn all() -> impl Iterator<Item = SamCell> {
        (1..=5u8).flat_map(|v| {
            (1..=5u8).map(move |a| SamCell {
                valence_level: v,
                arousal_level: a,
            })
        })
    }

    pub fn valence_level(&self) -> u8 {
        self.valence_level
    }

    pub fn arousal_level(&self) -> u8 {
        self.arousal_level
    }

    pub fn level(&self, dimension: Dimension) -> u8 {
        match dimension {
            Dimension::Valence => self.valence_level,
            Dimension::Arousal => self.arousal_level,
        }
    }

    pub fn valence_desc(&self) -> &'static str {
        VALENCE_DESCRIPTIONS[usize::from(self.valence_level - 1)]
    }

    pub fn arousal_desc(&self) -> &'static str {
        AROUSAL_DESCRIPTIONS[usize::from(self.arousal_level - 1)]
    }

    /// The (up to) eight cells surrounding this one on the grid.
    pub fn neighbors(&self) -> Vec<SamCell> {
        let mut out = Vec::with_capacity(8);
        for dv in -1i8..=1 {
            for da in -1i8..=1 {
                if dv == 0 && da == 0 {
                    continue;
                }
                let v = self.valence_level as i8 + dv;
                let a = self.arousal_level as i8 + da;
                if (1..=5).contains(&v) && (1..=5).contains(&a) {
                    out.push(SamCell {
                        valence_level: v as u8,
                        arousal_level: a as u8,
                    });
                }
            }
        }
        out
    }
}

impl fmt::Display for SamCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cell({},{})", self.valence_level, self.arousal_level)
    }
}

/// Canonical continuous representative of a cell: the centre of its bin.
pub fn cell_midpoint(cell: SamCell) -> VaPoint {
    const MIDPOINTS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];
    VaPoint {
        valence: MIDPOINTS[usize::from(cell.valence_level - 1)],
        arousal: MIDPOINTS[usize::from(cell.arousal_level - 1)],
    }
}

/// A continuous affect target together with its SAM cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "VaPoint", into = "VaPoint")]
pub struct EmotionalState {
    va: VaPoint,
    cell: SamCell,
}

impl From<VaPoint> for EmotionalState {
    fn from(va: VaPoint) -> Self {
        Self { va, cell: va.cell() }
    }
}

impl From<EmotionalState> for VaPoint {
    fn from(state: EmotionalState) -> Self {
        state.va
    }
}

impl EmotionalState {
    pub fn va(&self) -> VaPoint {
        self.va
    }

    pub fn cell(&self) -> SamCell {
        self.cell
    }
}

// Rows: valence level 1..=5; columns: arousal level 1..=5.
const GREETINGS: [[&str; 5]; 5] = [
    [
        "Oh... it's you again. Why bother?",
        "Hi. Whatever. Let's get this over with.",
        "What now? I hope this doesn't take long.",
        "Great. Just what I needed. More trouble.",
        "Oh, fantastic! Another disaster waiting to happen!",
    ],
    [
        "Hello. This isn't quite what I expected.",
        "Hi. Not great, but let's move on.",
        "Well, this could've been better. Let's see.",
        "Oh, come on! This is disappointing!",
        "Really?! This is the best we can do?!",
    ],
    [
        "Hello there. How are you?",
        "Hi. What's going on?",
        "Hey. What's up?",
        "Hello! What's happening?",
        "Hi! How's everything going?!",
    ],
    [
        "Hello. It's nice to see you.",
        "Hi. Good to see you.",
        "Hey, nice! Let's get started.",
        "Hi there! This is going to be great!",
        "Hello! I'm so glad you're here!",
    ],
    [
        "Hello. It's wonderful to have you here.",
        "Hi. Great to see you.",
        "Hey! This is awesome!",
        "Hi there! This is fantastic!",
        "Hello! Wow, I'm thrilled you're here!",
    ],
];

/// Opening line matched to the emotional state of a cell.
pub fn greeting_for(cell: SamCell) -> &'static str {
    GREETINGS[usize::from(cell.valence_level - 1)][usize::from(cell.arousal_level - 1)]
}

/// Signed difference in SAM levels between a scored point and a prompted cell.
pub fn sam_offset(prompted: SamCell, scored: VaPoint) -> (i8, i8) {
    let scored = scored.cell();
    (
        scored.valence_level as i8 - prompted.valence_level as i8,
        scored.arousal_level as i8 - prompted.arousal_level as i8,
    )
}

#[derive(Serialize)]
struct AssetGreeting {
    valence_level: u8,
    arousal_level: u8,
    valence_desc: &'static str,
    arousal_desc: &'static str,
    greeting: &'static str,
}

#[derive(Serialize)]
struct AssetBin {
    level: u8,
    lower: f64,
    upper: f64,
    upper_inclusive: bool,
    valence_desc: &'static str,
    arousal_desc: &'static str,
}

#[derive(Serialize)]
struct Assets {
    sam_scale: Vec<AssetBin>,
    greetings: Vec<AssetGreeting>,
}

/// Machine-readable dump of the SAM table and greeting table.
pub fn assets_json() -> String {
    let sam_scale = (1..=5u8)
        .map(|level| AssetBin {
            level,
            lower: f64::from(level - 1) / 5.0,
            upper: f64::from(level) / 5.0,
            upper_inclusive: level == 5,
            valence_desc: VALENCE_DESCRIPTIONS[usize::from(level - 1)],
            arousal_desc: AROUSAL_DESCRIPTIONS[usize::from(level - 1)],
        })
        .collect();
    let greetings = SamCell::all()
        .map(|cell| AssetGreeting {
            valence_level: cell.valence_level,
            arousal_level: cell.arousal_level,
            valence_desc: cell.valence_desc(),
            arousal_desc: cell.arousal_desc(),
            greeting: greeting_for(cell),
        })
        .collect();
    let mut out = serde_json::to_string_pretty(&Assets {
        sam_scale,
        greetings,
    })
    .expect("static assets serialize");
    out.push('\n');
    out
}
