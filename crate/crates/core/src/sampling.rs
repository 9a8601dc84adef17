//! Gaussian KDE over the empirical VA cloud, plus the fixed opposing-affect presets.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affect::{cell_midpoint, EmotionalState, SamCell, VaPoint};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplingError {
    #[error("KDE needs at least 2 support points, got {0}")]
    TooFewPoints(usize),
    #[error("KDE support has zero spread in {0}")]
    Degenerate(&'static str),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("unknown pairing `{0}` (expected sampled, hvha-lvha, lvha-nvla or hvha-nvla)")]
    UnknownPairing(String),
}

/// Gaussian KDE with a diagonal bandwidth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KdeModel {
    support: Vec<VaPoint>,
    bandwidth: [f64; 2],
}

fn sample_std(values: impl Iterator<Item = f64> + Clone, n: usize) -> f64 {
    let mean = values.clone().sum::<f64>() / n as f64;
    let ss: f64 = values.map(|x| (x - mean) * (x - mean)).sum();
    (ss / (n as f64 - 1.0)).sqrt()
}

/// Scott's rule factor for a `dims`-dimensional sample of size `n`.
pub fn scott_factor(n: usize, dims: i32) -> f64 {
    (n as f64).powf(-1.0 / f64::from(dims + 4))
}

/// Fits a 2-D Gaussian KDE; each axis gets `n^(-1/6) * std` (Scott's rule).
pub fn fit_kde(points: &[VaPoint]) -> Result<KdeModel, SamplingError> {
    let n = points.len();
    if n < 2 {
        return Err(SamplingError::TooFewPoints(n));
    }
    let factor = scott_factor(n, 2);
    let sv = sample_std(points.iter().map(|p| p.valence()), n);
    let sa = sample_std(points.iter().map(|p| p.arousal()), n);
    if sv.is_nan() || sv <= 0.0 {
        return Err(SamplingError::Degenerate("valence"));
    }
    if sa.is_nan() || sa <= 0.0 {
        return Err(SamplingError::Degenerate("arousal"));
    }
    Ok(KdeModel {
        support: points.to_vec(),
        bandwidth: [factor * sv, factor * sa],
    })
}

impl KdeModel {
    /// Builds a model with an explicit bandwidth.
    pub fn with_bandwidth(support: Vec<VaPoint>, bandwidth: [f64; 2]) -> Result<Self, SamplingError> {
        if support.len() < 2 {
            return Err(SamplingError::TooFewPoints(support.len()));
        }
        if bandwidth[0].is_nan() || bandwidth[0] <= 0.0 {
            return Err(SamplingError::Degenerate("valence"));
        }
        if bandwidth[1].is_nan() || bandwidth[1] <= 0.0 {
            return Err(SamplingError::Degenerate("arousal"));
        }
        Ok(Self { support, bandwidth })
    }

    pub fn support(&self) -> &[VaPoint] {
        &self.support
    }

    /// `[valence, arousal]` kernel standard deviations.
    pub fn bandwidth(&self) -> [f64; 2] {
        self.bandwidth
    }

    /// Draws one state: pick a support point, perturb it with kernel noise,
    /// clamp into the unit square.
    pub fn sample_state<R: Rng + ?Sized>(&self, rng: &mut R) -> EmotionalState {
        let centre = self.support[rng.random_range(0..self.support.len())];
        let nv = Normal::new(0.0, self.bandwidth[0]).expect("positive bandwidth");
        let na = Normal::new(0.0, self.bandwidth[1]).expect("positive bandwidth");
        let v = centre.valence() + nv.sample(rng);
        let a = centre.arousal() + na.sample(rng);
        EmotionalState::from(VaPoint::clamped(v, a))
    }
}

pub fn sample_state<R: Rng + ?Sized>(model: &KdeModel, rng: &mut R) -> EmotionalState {
    model.sample_state(rng)
}

/// Independent generator for one logical stream of a run, e.g. one conversation.
/// Streams depend only on `(seed, lane, index)`, never on scheduling.
pub fn substream(seed: u64, lane: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((lane << 32) ^ index);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PresetLabel {
    #[serde(rename = "HV_HA")]
    HvHa,
    #[serde(rename = "LV_HA")]
    LvHa,
    #[serde(rename = "NV_LA")]
    NvLa,
}

impl PresetLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            PresetLabel::HvHa => "HV_HA",
            PresetLabel::LvHa => "LV_HA",
            PresetLabel::NvLa => "NV_LA",
        }
    }

    fn short(self) -> &'static str {
        match self {
            PresetLabel::HvHa => "hvha",
            PresetLabel::LvHa => "lvha",
            PresetLabel::NvLa => "nvla",
        }
    }

    pub fn cell(self) -> SamCell {
        let (v, a) = match self {
            PresetLabel::HvHa => (5, 5),
            PresetLabel::LvHa => (1, 5),
            PresetLabel::NvLa => (3, 1),
        };
        SamCell::new(v, a).expect("preset cells are valid")
    }
}

impl fmt::Display for PresetLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PresetLabel {
    type Err = SamplingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['_', ','], "").as_str() {
            "hvha" => Ok(PresetLabel::HvHa),
            "lvha" => Ok(PresetLabel::LvHa),
            "nvla" => Ok(PresetLabel::NvLa),
            _ => Err(SamplingError::UnknownPreset(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpposingPreset {
    pub label: PresetLabel,
    pub state: EmotionalState,
}

pub fn preset(label: PresetLabel) -> OpposingPreset {
    OpposingPreset {
        label,
        state: EmotionalState::from(cell_midpoint(label.cell())),
    }
}

/// How the two agents of a chat conversation get their target states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pairing {
    Sampled,
    Opposing(PresetLabel, PresetLabel),
}

impl Pairing {
    /// The three opposing pairings, agent A listed first.
    pub const OPPOSING: [Pairing; 3] = [
        Pairing::Opposing(PresetLabel::HvHa, PresetLabel::LvHa),
        Pairing::Opposing(PresetLabel::LvHa, PresetLabel::NvLa),
        Pairing::Opposing(PresetLabel::HvHa, PresetLabel::NvLa),
    ];

    pub fn label(&self) -> String {
        match self {
            Pairing::Sampled => "sampled".to_string(),
            Pairing::Opposing(a, b) => format!("{}-{}", a.short(), b.short()),
        }
    }
}

impl fmt::Display for Pairing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for Pairing {
    type Err = SamplingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("sampled") {
            return Ok(Pairing::Sampled);
        }
        let (a, b) = s
            .split_once('-')
            .ok_or_else(|| SamplingError::UnknownPairing(s.to_string()))?;
        let a: PresetLabel = a.parse().map_err(|_| SamplingError::UnknownPairing(s.to_string()))?;
        let b: PresetLabel = b.parse().map_err(|_| SamplingError::UnknownPairing(s.to_string()))?;
        if a == b {
            return Err(SamplingError::UnknownPairing(s.to_string()));
        }
        Ok(Pairing::Opposing(a, b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn va(v: f64, a: f64) -> VaPoint {
        VaPoint::new(v, a).unwrap()
    }

    #[test]
    fn scott_bandwidth_hand_value() {
        // 100 points alternating 0.3 / 0.7 have sample std 0.2 * sqrt(100/99).
        let pts: Vec<_> = (0..100).map(|i| if i % 2 == 0 { va(0.3, 0.3) } else { va(0.7, 0.7) }).collect();
        let m = fit_kde(&pts).unwrap();
        let std = 0.2 * (100.0f64 / 99.0).sqrt();
        // 100^(-1/6) = 10^(-1/3) = 0.464158883...
        let expected = std * 0.464_158_883_361_277_9;
        assert!((m.bandwidth()[0] - expected).abs() < 1e-12);
        assert!((m.bandwidth()[1] - expected).abs() < 1e-12);
        // Unit-free form of the same rule with std exactly 0.2.
        assert!((0.2 * scott_factor(100, 2) - 0.092_831_776_672_255_6).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(fit_kde(&[va(0.5, 0.5), va(0.5, 0.5)]), Err(SamplingError::Degenerate("valence")));
        assert_eq!(fit_kde(&[va(0.5, 0.5)]), Err(SamplingError::TooFewPoints(1)));
        assert_eq!(fit_kde(&[va(0.4, 0.5), va(0.6, 0.5)]), Err(SamplingError::Degenerate("arousal")));
    }

    #[test]
    fn seeded_streams_repeat() {
        let pts: Vec<_> = (0..50).map(|i| va(i as f64 / 49.0, 1.0 - i as f64 / 49.0)).collect();
        let m = fit_kde(&pts).unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..10_000).map(|_| m.sample_state(&mut rng).va()).collect::<Vec<_>>()
        };
        assert_eq!(draw(42), draw(42));
        assert_ne!(draw(42), draw(43));
    }

    #[test]
    fn tiny_bandwidth_concentrates() {
        let m = KdeModel::with_bandwidth(vec![va(0.7, 0.6), va(0.7, 0.6)], [1e-3, 1e-3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let close = (0..1000)
            .filter(|_| {
                let s = m.sample_state(&mut rng).va();
                (s.valence() - 0.7).abs() < 0.05 && (s.arousal() - 0.6).abs() < 0.05
            })
            .count();
        assert_eq!(close, 1000);
    }

    #[test]
    fn clamps_at_the_edge() {
        let m = KdeModel::with_bandwidth(vec![va(0.98, 0.5), va(0.98, 0.5)], [0.2, 0.01]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut saw_clamp = false;
        for _ in 0..1000 {
            let s = m.sample_state(&mut rng);
            assert!((0.0..=1.0).contains(&s.va().valence()));
            assert_eq!(s.cell(), s.va().cell());
            if s.va().valence() == 1.0 {
                saw_clamp = true;
                assert_eq!(s.cell().valence_level(), 5);
            }
        }
        assert!(saw_clamp);
    }

    #[test]
    fn monte_carlo_mean_tracks_support_mean() {
        let pts: Vec<_> = (0..40)
            .map(|i| {
                let t = 0.25 + 0.5 * (i as f64) / 39.0;
                va(t, 0.3 + 0.4 * (t - 0.5).powi(2) * 4.0)
            })
            .collect();
        let m = fit_kde(&pts).unwrap();
        let (mv, ma) = (
            pts.iter().map(|p| p.valence()).sum::<f64>() / 40.0,
            pts.iter().map(|p| p.arousal()).sum::<f64>() / 40.0,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let (mut sv, mut sa) = (0.0, 0.0);
        for _ in 0..n {
            let s = m.sample_state(&mut rng).va();
            sv += s.valence();
            sa += s.arousal();
        }
        assert!((sv / n as f64 - mv).abs() < 0.02);
        assert!((sa / n as f64 - ma).abs() < 0.02);
    }

    #[test]
    fn mirrored_support_gives_symmetric_valence() {
        let pts: Vec<_> = (0..20)
            .flat_map(|i| {
                let d = 0.02 * i as f64;
                [va(0.5 - d, 0.4 + d), va(0.5 + d, 0.4 + d)]
            })
            .collect();
        let m = fit_kde(&pts).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 50_000;
        let below = (0..n).filter(|_| m.sample_state(&mut rng).va().valence() < 0.5).count();
        let frac = below as f64 / n as f64;
        assert!((frac - 0.5).abs() < 0.01, "{frac}");
    }

    #[test]
    fn presets() {
        let p = preset(PresetLabel::HvHa);
        assert_eq!(p.state.va(), va(0.9, 0.9));
        assert_eq!(p.state.cell(), SamCell::new(5, 5).unwrap());
        let p = preset(PresetLabel::LvHa);
        assert_eq!(p.state.va(), va(0.1, 0.9));
        assert_eq!(p.state.cell(), SamCell::new(1, 5).unwrap());
        let p = preset(PresetLabel::NvLa);
        assert_eq!(p.state.va(), va(0.5, 0.1));
        assert_eq!(p.state.cell(), SamCell::new(3, 1).unwrap());
    }

    #[test]
    fn pairing_labels_round_trip() {
        for p in Pairing::OPPOSING.into_iter().chain([Pairing::Sampled]) {
            assert_eq!(p.label().parse::<Pairing>().unwrap(), p);
        }
        assert_eq!("hvha-lvha".parse::<Pairing>().unwrap(), Pairing::OPPOSING[0]);
        assert!("hvha-hvha".parse::<Pairing>().is_err());
        assert!("bogus".parse::<Pairing>().is_err());
    }

    #[test]
    fn substreams_are_distinct_and_stable() {
        let a: u64 = substream(7, 0, 1).random();
        let b: u64 = substream(7, 0, 1).random();
        let c: u64 = substream(7, 0, 2).random();
        let d: u64 = substream(7, 1, 1).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}
