//! Rank correlation, correlation comparison, group tests and the offset,
//! convergence and trajectory aggregates computed over transcript records.
//!
//! Offsets, convergence and trajectories work in SAM-level units;
//! correlations work on continuous VA.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::affect::{sam_offset, Dimension, VaPoint};
use crate::experiments::{AgentId, ExperimentKind, Flag, TurnRecord};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("inputs have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} values, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("correlation undefined: constant input")]
    ConstantInput,
    #[error("non-finite input value")]
    NonFinite,
    #[error("domain error: {0}")]
    Domain(String),
}

/// Average ranks (1-based); tied values share the mean of their positions.
pub fn midranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(StatsError::TooFew { needed: 2, got: x.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ConstantInput);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(StatsError::TooFew { needed: 3, got: x.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    pearson(&midranks(x), &midranks(y))
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// `P(|Z| >= |z|)` for standard normal `Z`.
pub fn two_sided_p(z: f64) -> f64 {
    libm::erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)
}

/// Inverse of [`normal_cdf`] by bisection; `p` must lie in `(0, 1)`.
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile of {p}");
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZTest {
    pub z: f64,
    pub p: f64,
}

/// Compares two Spearman coefficients through Fisher's transform, with the
/// 1.06/(n-3) variance used for rank correlations.
pub fn fisher_z_compare(r1: f64, n1: usize, r2: f64, n2: usize) -> Result<ZTest, StatsError> {
    for (r, n) in [(r1, n1), (r2, n2)] {
        if !r.is_finite() || r.abs() >= 1.0 {
            return Err(StatsError::Domain(format!("|r| must be < 1, got {r}")));
        }
        if n <= 3 {
            return Err(StatsError::Domain(format!("n must exceed 3, got {n}")));
        }
    }
    let se = (1.06 / (n1 as f64 - 3.0) + 1.06 / (n2 as f64 - 3.0)).sqrt();
    let z = (r1.atanh() - r2.atanh()) / se;
    Ok(ZTest { z, p: two_sided_p(z) })
}

pub fn bonferroni(p_values: &[f64], m: usize) -> Result<Vec<f64>, StatsError> {
    if m == 0 || m < p_values.len() {
        return Err(StatsError::Domain(format!(
            "family size {m} smaller than {} tests",
            p_values.len()
        )));
    }
    if let Some(p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(StatsError::Domain(format!("p-value {p} outside [0,1]")));
    }
    Ok(p_values.iter().map(|p| (p * m as f64).min(1.0)).collect())
}

/// Number of pairwise comparisons among `k` models.
pub fn pairwise_family_size(k: usize) -> usize {
    k * k.saturating_sub(1) / 2
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MannWhitney {
    /// U for the first sample: pairs where it is larger, ties counting one half.
    pub u: f64,
    pub u_other: f64,
    pub z: f64,
    pub p: f64,
}

/// Two-sided Mann-Whitney U test, normal approximation with tie-corrected
/// variance and continuity correction.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::TooFew { needed: 1, got: a.len().min(b.len()) });
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let r1: f64 = ranks[..a.len()].iter().sum();
    let u = r1 - n1 * (n1 + 1.0) / 2.0;
    let u_other = n1 * n2 - u;

    let n = n1 + n2;
    let mut sorted = pooled.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)).max(1.0));
    let mean = n1 * n2 / 2.0;
    let dev = (u - mean).abs();
    if var <= 0.0 || dev < 0.5 {
        return Ok(MannWhitney { u, u_other, z: 0.0, p: 1.0 });
    }
    let z = (dev - 0.5) / var.sqrt();
    Ok(MannWhitney {
        u,
        u_other,
        z: z.copysign(u - mean),
        p: two_sided_p(z),
    })
}

/// Which records enter the aggregates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalysisOptions {
    /// Drop agent A's opening greeting (chat round 1) from every aggregate.
    pub exclude_greeting: bool,
    pub ci_level: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            exclude_greeting: false,
            ci_level: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Exclusion {
    pub conversation_id: String,
    pub round: u32,
    pub agent_id: AgentId,
    pub reason: String,
}

fn is_greeting(r: &TurnRecord) -> bool {
    !r.experiment.is_preliminary() && r.agent_id == AgentId::A && r.round == 1
}

/// Splits agent turns into those usable for analysis and enumerated exclusions.
/// Dummy-partner lines are neither: they carry no affect.
pub fn partition<'a>(records: &'a [TurnRecord], options: &AnalysisOptions) -> (Vec<&'a TurnRecord>, Vec<Exclusion>) {
    let mut kept = Vec::new();
    let mut excluded = Vec::new();
    for r in records.iter().filter(|r| r.is_agent_turn()) {
        let reason = if r.has(Flag::Aborted) {
            Some("conversation aborted")
        } else if r.has(Flag::Unscored) || r.scored_va.is_none() {
            Some("unscored")
        } else if r.prompted_va.is_none() {
            Some("no prompted state")
        } else if options.exclude_greeting && is_greeting(r) {
            Some("greeting excluded")
        } else {
            None
        };
        match reason {
            Some(reason) => excluded.push(Exclusion {
                conversation_id: r.conversation_id.clone(),
                round: r.round,
                agent_id: r.agent_id,
                reason: reason.to_string(),
            }),
            None => kept.push(r),
        }
    }
    (kept, excluded)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationReport {
    pub model: String,
    pub setting: String,
    pub corr_valence: Option<f64>,
    pub corr_arousal: Option<f64>,
    pub avg_corr: Option<f64>,
    pub n: usize,
    pub note: Option<String>,
}

/// Prompted-vs-scored Spearman correlations for one model and setting.
pub fn correlation_report(model: &str, setting: &str, pairs: &[(VaPoint, VaPoint)]) -> CorrelationReport {
    let per_dim = |d: Dimension| {
        let x: Vec<f64> = pairs.iter().map(|(p, _)| p.get(d)).collect();
        let y: Vec<f64> = pairs.iter().map(|(_, s)| s.get(d)).collect();
        spearman(&x, &y)
    };
    let v = per_dim(Dimension::Valence);
    let a = per_dim(Dimension::Arousal);
    let note = match (&v, &a) {
        (Err(e), _) => Some(format!("valence: {e}")),
        (_, Err(e)) => Some(format!("arousal: {e}")),
        _ => None,
    };
    let (v, a) = (v.ok(), a.ok());
    CorrelationReport {
        model: model.to_string(),
        setting: setting.to_string(),
        corr_valence: v,
        corr_arousal: a,
        avg_corr: v.zip(a).map(|(v, a)| (v + a) / 2.0),
        n: pairs.len(),
        note,
    }
}

/// One report per (model, experiment) among the given records.
pub fn correlation_reports(records: &[&TurnRecord]) -> Vec<CorrelationReport> {
    let mut groups: BTreeMap<(String, ExperimentKind), Vec<(VaPoint, VaPoint)>> = BTreeMap::new();
    for r in records {
        if let (Some(p), Some(s)) = (r.prompted_va, r.scored_va) {
            groups
                .entry((r.model.clone(), r.experiment))
                .or_default()
                .push((p, s));
        }
    }
    groups
        .iter()
        .map(|((model, kind), pairs)| correlation_report(model, kind.as_str(), pairs))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairwiseComparison {
    pub setting: String,
    pub dimension: Dimension,
    pub model_a: String,
    pub model_b: String,
    pub r_a: f64,
    pub r_b: f64,
    pub z: f64,
    pub p: f64,
    pub p_adjusted: f64,
}

/// Fisher z comparisons between every model pair of a setting, per
/// dimension, Bonferroni-adjusted over the pairwise family.
pub fn pairwise_comparisons(reports: &[CorrelationReport]) -> Vec<PairwiseComparison> {
    let mut by_setting: BTreeMap<&str, Vec<&CorrelationReport>> = BTreeMap::new();
    for r in reports {
        by_setting.entry(&r.setting).or_default().push(r);
    }
    let mut out = Vec::new();
    for (setting, group) in by_setting {
        let m = pairwise_family_size(group.len());
        for dim in Dimension::ALL {
            let corr = |r: &CorrelationReport| match dim {
                Dimension::Valence => r.corr_valence,
                Dimension::Arousal => r.corr_arousal,
            };
            for i in 0..group.len() {
                for j in i + 1..group.len() {
                    let (a, b) = (group[i], group[j]);
                    let (Some(ra), Some(rb)) = (corr(a), corr(b)) else { continue };
                    let Ok(t) = fisher_z_compare(ra, a.n, rb, b.n) else { continue };
                    let p_adjusted = (t.p * m as f64).min(1.0);
                    out.push(PairwiseComparison {
                        setting: setting.to_string(),
                        dimension: dim,
                        model_a: a.model.clone(),
                        model_b: b.model.clone(),
                        r_a: ra,
                        r_b: rb,
                        z: t.z,
                        p: t.p,
                        p_adjusted,
                    });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OffsetRow {
    pub model: String,
    pub dimension: Dimension,
    pub prompted_level: u8,
    pub mean_offset: f64,
    pub n: usize,
    pub baseline: Option<f64>,
}

type OffsetKey = (String, Dimension, u8);

fn offset_groups(records: &[&TurnRecord]) -> BTreeMap<OffsetKey, (f64, usize)> {
    let mut groups: BTreeMap<OffsetKey, (f64, usize)> = BTreeMap::new();
    for r in records {
        let (Some(cell), Some(scored)) = (r.prompted_cell, r.scored_va) else { continue };
        let (dv, da) = sam_offset(cell, scored);
        for (dim, off) in [(Dimension::Valence, dv), (Dimension::Arousal, da)] {
            let e = groups.entry((r.model.clone(), dim, cell.level(dim))).or_default();
            e.0 += off as f64;
            e.1 += 1;
        }
    }
    groups
}

/// Mean SAM-level offset per (model, dimension, prompted level). Baseline
/// values come from a separate record set (typically a preliminary run)
/// matched on the same key.
pub fn offset_summary(records: &[&TurnRecord], baseline: Option<&[&TurnRecord]>) -> Vec<OffsetRow> {
    let base = baseline.map(offset_groups).unwrap_or_default();
    offset_groups(records)
        .into_iter()
        .map(|((model, dimension, level), (sum, n))| {
            let baseline = base
                .get(&(model.clone(), dimension, level))
                .map(|(s, k)| s / *k as f64);
            OffsetRow {
                model,
                dimension,
                prompted_level: level,
                mean_offset: sum / n as f64,
                n,
                baseline,
            }
        })
        .collect()
}

/// Model/dimension/level combinations with no data, for the summary notes.
pub fn missing_offset_groups(rows: &[OffsetRow]) -> Vec<String> {
    let models: BTreeSet<&str> = rows.iter().map(|r| r.model.as_str()).collect();
    let mut notes = Vec::new();
    for m in models {
        for dim in Dimension::ALL {
            for level in 1..=5u8 {
                if !rows
                    .iter()
                    .any(|r| r.model == m && r.dimension == dim && r.prompted_level == level)
                {
                    notes.push(format!("{m}: no {} records prompted at level {level}", dim.as_str()));
                }
            }
        }
    }
    notes
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceCell {
    pub model: String,
    pub pairing: String,
    pub dimension: Dimension,
    pub first_round: u32,
    pub last_round: u32,
    pub first_diff: f64,
    pub last_diff: f64,
    pub conversations: usize,
}

type ChatKey = (String, String);

fn chat_groups<'a>(records: &[&'a TurnRecord]) -> BTreeMap<ChatKey, BTreeMap<String, Vec<&'a TurnRecord>>> {
    let mut groups: BTreeMap<ChatKey, BTreeMap<String, Vec<&'a TurnRecord>>> = BTreeMap::new();
    for r in records.iter().filter(|r| !r.experiment.is_preliminary()) {
        let pairing = r.pairing.clone().unwrap_or_else(|| "sampled".into());
        groups
            .entry((r.model.clone(), pairing))
            .or_default()
            .entry(r.conversation_id.clone())
            .or_default()
            .push(r);
    }
    groups
}

fn scored_level(turns: &[&TurnRecord], agent: AgentId, round: u32, dim: Dimension) -> Option<f64> {
    turns
        .iter()
        .find(|r| r.agent_id == agent && r.round == round)
        .and_then(|r| r.scored_va)
        .map(|s| s.cell().level(dim) as f64)
}

/// Absolute between-agent difference of mean scored SAM level, at the first
/// and the final analysed round. Each conversation contributes its A-minus-B
/// difference; conversations missing either end are excluded with a note.
pub fn convergence_table(records: &[&TurnRecord], options: &AnalysisOptions) -> (Vec<ConvergenceCell>, Vec<String>) {
    let mut cells = Vec::new();
    let mut notes = Vec::new();
    let first_round = if options.exclude_greeting { 2 } else { 1 };
    for ((model, pairing), convs) in chat_groups(records) {
        let Some(last_round) = convs.values().flatten().map(|r| r.round).max() else { continue };
        if last_round <= first_round {
            notes.push(format!("{model}/{pairing}: fewer than two analysable rounds"));
            continue;
        }
        for dim in Dimension::ALL {
            let mut first = Vec::new();
            let mut last = Vec::new();
            for (id, turns) in &convs {
                let f = scored_level(turns, AgentId::A, first_round, dim)
                    .zip(scored_level(turns, AgentId::B, first_round, dim));
                let l = scored_level(turns, AgentId::A, last_round, dim)
                    .zip(scored_level(turns, AgentId::B, last_round, dim));
                match f.zip(l) {
                    Some(((fa, fb), (la, lb))) => {
                        first.push(fa - fb);
                        last.push(la - lb);
                    }
                    None => {
                        if dim == Dimension::Valence {
                            notes.push(format!("{id}: missing round {first_round} or {last_round}, excluded from convergence"));
                        }
                    }
                }
            }
            if first.is_empty() {
                continue;
            }
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            cells.push(ConvergenceCell {
                model: model.clone(),
                pairing: pairing.clone(),
                dimension: dim,
                first_round,
                last_round,
                first_diff: mean(&first).abs(),
                last_diff: mean(&last).abs(),
                conversations: first.len(),
            });
        }
    }
    (cells, notes)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub model: String,
    pub pairing: String,
    pub agent: AgentId,
    pub dimension: Dimension,
    pub round: u32,
    pub n: usize,
    pub mean: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    /// Mean prompted SAM level of this agent across conversations.
    pub prompted: f64,
}

/// Mean scored SAM level per (agent, dimension, round) across conversations
/// with a normal-approximation confidence band. A single observation gives
/// the mean only.
pub fn trajectory_bands(records: &[&TurnRecord], level: f64) -> Result<Vec<TrajectoryPoint>, StatsError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(StatsError::Domain(format!("confidence level {level} outside (0,1)")));
    }
    let z = normal_quantile((1.0 + level) / 2.0);
    let mut out = Vec::new();
    for ((model, pairing), convs) in chat_groups(records) {
        type Cell = (Vec<f64>, Vec<f64>);
        let mut cells: BTreeMap<(AgentId, Dimension, u32), Cell> = BTreeMap::new();
        for r in convs.values().flatten() {
            let (Some(s), Some(p)) = (r.scored_va, r.prompted_cell) else { continue };
            for dim in Dimension::ALL {
                let e = cells.entry((r.agent_id, dim, r.round)).or_default();
                e.0.push(s.cell().level(dim) as f64);
                e.1.push(p.level(dim) as f64);
            }
        }
        for ((agent, dimension, round), (vals, prompted)) in cells {
            let n = vals.len();
            let mean = vals.iter().sum::<f64>() / n as f64;
            let (ci_low, ci_high) = if n >= 2 {
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
                let half = z * var.sqrt() / (n as f64).sqrt();
                (Some(mean - half), Some(mean + half))
            } else {
                (None, None)
            };
            out.push(TrajectoryPoint {
                model: model.clone(),
                pairing: pairing.clone(),
                agent,
                dimension,
                round,
                n,
                mean,
                ci_low,
                ci_high,
                prompted: prompted.iter().sum::<f64>() / prompted.len() as f64,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affect::{cell_midpoint, SamCell};
    use proptest::prelude::*;

    #[test]
    fn midranks_average_ties() {
        assert_eq!(midranks(&[10.0, 20.0, 20.0, 5.0]), vec![2.0, 3.5, 3.5, 1.0]);
    }

    #[test]
    fn spearman_examples() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap(), 1.0);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        // ranks x: 1, 2.5, 2.5, 4; y: 1, 3, 2, 4
        let hand = {
            let rx = [1.0, 2.5, 2.5, 4.0];
            let ry = [1.0, 3.0, 2.0, 4.0];
            let m = 2.5;
            let sxy: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - m) * (b - m)).sum();
            let sxx: f64 = rx.iter().map(|a| (a - m) * (a - m)).sum();
            let syy: f64 = ry.iter().map(|b| (b - m) * (b - m)).sum();
            sxy / (sxx * syy).sqrt()
        };
        let got = spearman(&[1.0, 2.0, 2.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((got - hand).abs() < 1e-12);
        assert!((got - 4.5 / 4.5f64.sqrt() / 5.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn spearman_errors() {
        assert_eq!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(StatsError::ConstantInput));
        assert!(matches!(spearman(&[1.0, 2.0], &[1.0, 2.0]), Err(StatsError::TooFew { .. })));
        assert!(matches!(spearman(&[1.0, 2.0, 3.0], &[1.0, 2.0]), Err(StatsError::LengthMismatch(3, 2))));
        assert_eq!(spearman(&[1.0, f64::NAN, 3.0], &[1.0, 2.0, 3.0]), Err(StatsError::NonFinite));
    }

    #[test]
    fn fisher_examples() {
        let t = fisher_z_compare(0.5, 250, 0.5, 250).unwrap();
        assert_eq!((t.z, t.p), (0.0, 1.0));
        let t = fisher_z_compare(0.67, 250, 0.17, 250).unwrap();
        assert!(t.p < 0.001, "{t:?}");
        assert!(fisher_z_compare(0.5, 3, 0.1, 250).is_err());
        assert!(fisher_z_compare(1.0, 30, 0.1, 250).is_err());
    }

    #[test]
    fn bonferroni_examples() {
        let adj = bonferroni(&[0.01], 66).unwrap();
        assert!((adj[0] - 0.66).abs() < 1e-12);
        assert_eq!(bonferroni(&[0.5], 10).unwrap(), vec![1.0]);
        assert_eq!(bonferroni(&[0.0], 7).unwrap(), vec![0.0]);
        assert!(bonferroni(&[0.1, 0.2], 1).is_err());
        assert_eq!(pairwise_family_size(12), 66);
    }

    #[test]
    fn mann_whitney_examples() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let mw = mann_whitney_u(&a, &a).unwrap();
        assert_eq!(mw.u, 8.0);
        assert_eq!(mw.p, 1.0);
        let mw = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!((mw.u, mw.u_other), (0.0, 9.0));
        // exact: 2 of 20 orderings are this extreme, p = 0.1
        assert!(mw.p > 0.05 && mw.p < 0.2, "{mw:?}");
        assert!(mw.z < 0.0);
        assert!(mann_whitney_u(&[], &[1.0]).is_err());
    }

    #[test]
    fn normal_quantile_inverts_cdf() {
        let z = normal_quantile(0.975);
        assert!((z - 1.959963984540054).abs() < 1e-9);
        assert!((normal_cdf(z) - 0.975).abs() < 1e-12);
    }

    fn rec(conv: &str, agent: AgentId, round: u32, prompted: SamCell, scored: SamCell) -> TurnRecord {
        TurnRecord {
            run_id: "r".into(),
            experiment: ExperimentKind::ChatOpposing,
            model: "m".into(),
            pairing: Some("hvha-lvha".into()),
            conversation_id: conv.into(),
            round,
            agent_id: agent,
            persona_name: "p".into(),
            prompted_va: Some(cell_midpoint(prompted)),
            prompted_cell: Some(prompted),
            text: "t".into(),
            scored_va: Some(cell_midpoint(scored)),
            flags: BTreeSet::new(),
        }
    }

    fn c(v: u8, a: u8) -> SamCell {
        SamCell::new(v, a).unwrap()
    }

    #[test]
    fn offsets_hand_fixture() {
        // prompted valence level 2 scored at 4, 3, 2 -> mean +1; level 5 scored 5, 3, 4 -> mean -1
        let rows = [
            rec("x", AgentId::A, 1, c(2, 1), c(4, 1)),
            rec("x", AgentId::A, 2, c(2, 1), c(3, 2)),
            rec("x", AgentId::A, 3, c(2, 1), c(2, 1)),
            rec("y", AgentId::B, 1, c(5, 1), c(5, 1)),
            rec("y", AgentId::B, 2, c(5, 1), c(3, 3)),
            rec("y", AgentId::B, 3, c(5, 1), c(4, 1)),
        ];
        let refs: Vec<&TurnRecord> = rows.iter().collect();
        let out = offset_summary(&refs, None);
        let get = |d, l| out.iter().find(|r| r.dimension == d && r.prompted_level == l).unwrap();
        assert_eq!(get(Dimension::Valence, 2).mean_offset, 1.0);
        assert_eq!(get(Dimension::Valence, 5).mean_offset, -1.0);
        // arousal level 1: offsets 0, 1, 0, 0, 2, 0 -> 0.5
        assert_eq!(get(Dimension::Arousal, 1).mean_offset, 0.5);
        assert_eq!(get(Dimension::Arousal, 1).n, 6);
        let with_base = offset_summary(&refs, Some(&refs[..3]));
        assert_eq!(with_base.iter().find(|r| r.prompted_level == 2).unwrap().baseline, Some(1.0));
        assert!(missing_offset_groups(&out).len() == 10 - 3);
    }

    fn constant_chat(rounds: u32, convs: usize) -> Vec<TurnRecord> {
        let mut out = vec![];
        for k in 0..convs {
            let id = format!("m/hvha-lvha/{k:03}");
            for r in 1..=rounds {
                out.push(rec(&id, AgentId::A, r, c(5, 5), c(5, 5)));
                out.push(rec(&id, AgentId::B, r, c(1, 5), c(1, 5)));
            }
        }
        out
    }

    #[test]
    fn convergence_constant() {
        let rows = constant_chat(20, 10);
        let refs: Vec<&TurnRecord> = rows.iter().collect();
        let (cells, notes) = convergence_table(&refs, &AnalysisOptions::default());
        assert!(notes.is_empty());
        assert_eq!(cells.len(), 2);
        assert_eq!((cells[0].first_diff, cells[0].last_diff), (4.0, 4.0));
        assert_eq!((cells[1].first_diff, cells[1].last_diff), (0.0, 0.0));
        assert_eq!(cells[0].conversations, 10);
    }

    #[test]
    fn convergence_excludes_truncated() {
        let mut rows = constant_chat(5, 2);
        rows.retain(|r| !(r.conversation_id.ends_with("001") && r.round == 5));
        let refs: Vec<&TurnRecord> = rows.iter().collect();
        let (cells, notes) = convergence_table(&refs, &AnalysisOptions::default());
        assert_eq!(cells[0].conversations, 1);
        assert_eq!(notes.len(), 1);
    }

    #[test]
    fn bands_by_hand() {
        let rows = [
            rec("a", AgentId::A, 1, c(3, 3), c(2, 3)),
            rec("b", AgentId::A, 1, c(3, 3), c(4, 3)),
        ];
        let refs: Vec<&TurnRecord> = rows.iter().collect();
        let bands = trajectory_bands(&refs, 0.95).unwrap();
        let v = bands.iter().find(|b| b.dimension == Dimension::Valence).unwrap();
        assert_eq!(v.mean, 3.0);
        let z = normal_quantile(0.975);
        assert!((v.ci_high.unwrap() - (3.0 + z)).abs() < 1e-12);
        assert!((v.ci_low.unwrap() - (3.0 - z)).abs() < 1e-12);
        assert!((z - 1.96).abs() < 1e-4);
        let a = bands.iter().find(|b| b.dimension == Dimension::Arousal).unwrap();
        assert_eq!((a.ci_low, a.ci_high), (Some(3.0), Some(3.0)));

        let single = trajectory_bands(&refs[..1], 0.95).unwrap();
        assert!(single.iter().all(|b| b.ci_low.is_none() && b.n == 1));
    }

    #[test]
    fn identical_trajectories_have_zero_width() {
        let rows = constant_chat(4, 10);
        let refs: Vec<&TurnRecord> = rows.iter().collect();
        for b in trajectory_bands(&refs, 0.95).unwrap() {
            assert_eq!(b.ci_low, Some(b.mean));
            assert_eq!(b.ci_high, Some(b.mean));
        }
    }

    #[test]
    fn correlation_average() {
        let pairs: Vec<(VaPoint, VaPoint)> = (0..5)
            .map(|i| {
                let p = VaPoint::new(0.2 * i as f64, 1.0 - 0.2 * i as f64).unwrap();
                (p, p)
            })
            .collect();
        let r = correlation_report("m", "s", &pairs);
        assert_eq!((r.corr_valence, r.corr_arousal, r.avg_corr), (Some(1.0), Some(1.0), Some(1.0)));
        let flat: Vec<_> = pairs.iter().map(|(p, _)| (*p, VaPoint::new(0.5, 0.5).unwrap())).collect();
        let r = correlation_report("m", "s", &flat);
        assert_eq!(r.avg_corr, None);
        assert!(r.note.is_some());
    }

    #[test]
    fn partition_accounts_for_every_agent_turn() {
        let mut rows = constant_chat(3, 2);
        rows[1].flags.insert(Flag::Unscored);
        rows[1].scored_va = None;
        rows[4].flags.insert(Flag::Aborted);
        let opts = AnalysisOptions {
            exclude_greeting: true,
            ..Default::default()
        };
        let (kept, excluded) = partition(&rows, &opts);
        assert_eq!(kept.len() + excluded.len(), rows.len());
        assert_eq!(excluded.iter().filter(|e| e.reason == "greeting excluded").count(), 2);
    }

    proptest! {
        #[test]
        fn spearman_symmetric_and_bounded(v in prop::collection::vec((0u8..6, 0u8..6), 3..15)) {
            let x: Vec<f64> = v.iter().map(|p| p.0 as f64).collect();
            let y: Vec<f64> = v.iter().map(|p| p.1 as f64).collect();
            match (spearman(&x, &y), spearman(&y, &x)) {
                (Ok(a), Ok(b)) => {
                    prop_assert!((a - b).abs() < 1e-12);
                    prop_assert!((-1.0..=1.0).contains(&a));
                }
                (Err(a), Err(b)) => prop_assert_eq!(a, b),
                _ => prop_assert!(false),
            }
        }

        #[test]
        fn spearman_monotone_invariant(v in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 3..15)) {
            let x: Vec<f64> = v.iter().map(|p| p.0).collect();
            let y: Vec<f64> = v.iter().map(|p| p.1).collect();
            let tx: Vec<f64> = x.iter().map(|a| a.exp() * 3.0 + 1.0).collect();
            let ty: Vec<f64> = y.iter().map(|b| b * b * b).collect();
            if let (Ok(a), Ok(b)) = (spearman(&x, &y), spearman(&tx, &ty)) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn fisher_antisymmetric(r1 in -0.99f64..0.99, r2 in -0.99f64..0.99, n1 in 4usize..500, n2 in 4usize..500) {
            let a = fisher_z_compare(r1, n1, r2, n2).unwrap();
            let b = fisher_z_compare(r2, n2, r1, n1).unwrap();
            prop_assert!((a.z + b.z).abs() < 1e-12);
            prop_assert!((a.p - b.p).abs() < 1e-15);
        }

        #[test]
        fn u_sums_to_product(a in prop::collection::vec(0u8..5, 1..10), b in prop::collection::vec(0u8..5, 1..10)) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            let ab = mann_whitney_u(&a, &b).unwrap();
            let ba = mann_whitney_u(&b, &a).unwrap();
            prop_assert!((ab.u + ba.u - (a.len() * b.len()) as f64).abs() < 1e-9);
            prop_assert!((ab.p - ba.p).abs() < 1e-12);
        }

        #[test]
        fn bonferroni_monotone_capped(p in prop::collection::vec(0.0f64..=1.0, 1..10), extra in 0usize..50) {
            let m = p.len() + extra;
            let adj = bonferroni(&p, m).unwrap();
            for i in 0..p.len() {
                prop_assert!(adj[i] <= 1.0 && adj[i] >= p[i]);
                for j in 0..p.len() {
                    if p[i] <= p[j] {
                        prop_assert!(adj[i] <= adj[j]);
                    }
                }
            }
        }
    }
}
