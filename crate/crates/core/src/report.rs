//! Builds the analysis tables, charts and summary from persisted transcripts.
//!
//! Output is a pure function of the input files and options: nothing
//! time-dependent or path-dependent is written, so re-running yields
//! byte-identical files.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::affect::Dimension;
use crate::experiments::{load_records, metadata_path, AgentId, ExperimentError, ExperimentKind, TurnRecord};
use crate::stats::{
    convergence_table, correlation_reports, mann_whitney_u, missing_offset_groups, offset_summary,
    pairwise_comparisons, partition, trajectory_bands, AnalysisOptions, ConvergenceCell, CorrelationReport,
    Exclusion, MannWhitney, OffsetRow, PairwiseComparison, StatsError, TrajectoryPoint,
};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no transcript files given")]
    NoInputs,
    #[error(transparent)]
    Load(#[from] ExperimentError),
    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReportOptions {
    pub analysis: AnalysisOptions,
    /// Preliminary-run transcript supplying the offset baseline column.
    pub baseline: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputSummary {
    pub file: String,
    pub records: usize,
    pub run: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub inputs: Vec<InputSummary>,
    pub baseline: Option<InputSummary>,
    pub options: AnalysisOptions,
    pub record_count: usize,
    pub dummy_turns: usize,
    pub analysed: usize,
    pub correlations: Vec<CorrelationReport>,
    pub comparisons: Vec<PairwiseComparison>,
    pub setting_test: Option<MannWhitney>,
    pub offsets: Vec<OffsetRow>,
    pub convergence: Vec<ConvergenceCell>,
    pub trajectories: Vec<TrajectoryPoint>,
    pub exclusions: Vec<Exclusion>,
    pub notes: Vec<String>,
}

fn file_label(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Run description from the side-car metadata, minus timestamps and scheduling.
fn run_echo(path: &Path) -> Value {
    let Ok(text) = fs::read_to_string(metadata_path(path)) else { return Value::Null };
    let Ok(Value::Object(mut meta)) = serde_json::from_str::<Value>(&text) else { return Value::Null };
    meta.retain(|k, _| !k.ends_with("_at_unix") && k != "conversations");
    if let Some(Value::Object(config)) = meta.get_mut("config") {
        config.remove("parallelism");
    }
    Value::Object(meta)
}

fn load_input(path: &Path) -> Result<(InputSummary, Vec<TurnRecord>), ReportError> {
    let records = load_records(path)?;
    let summary = InputSummary {
        file: file_label(path),
        records: records.len(),
        run: run_echo(path),
    };
    Ok((summary, records))
}

/// Loads every file and computes the aggregates.
pub fn analyze(files: &[PathBuf], options: &ReportOptions) -> Result<ReportBundle, ReportError> {
    if files.is_empty() {
        return Err(ReportError::NoInputs);
    }
    let mut inputs = Vec::new();
    let mut records = Vec::new();
    for f in files {
        let (summary, mut recs) = load_input(f)?;
        inputs.push(summary);
        records.append(&mut recs);
    }
    let (baseline, baseline_records) = match &options.baseline {
        Some(p) => {
            let (s, r) = load_input(p)?;
            (Some(s), Some(r))
        }
        None => (None, None),
    };
    let mut bundle = analyze_records(&records, baseline_records.as_deref(), &options.analysis)?;
    bundle.inputs = inputs;
    bundle.baseline = baseline;
    Ok(bundle)
}

/// Aggregates in-memory records; `inputs` is left empty.
pub fn analyze_records(
    records: &[TurnRecord],
    baseline: Option<&[TurnRecord]>,
    options: &AnalysisOptions,
) -> Result<ReportBundle, ReportError> {
    let (kept, exclusions) = partition(records, options);
    let preliminary: Vec<&TurnRecord> = kept.iter().copied().filter(|r| r.experiment.is_preliminary()).collect();

    let correlations = correlation_reports(&preliminary);
    let comparisons = pairwise_comparisons(&correlations);
    let setting_test = {
        let avg = |kind: ExperimentKind| -> Vec<f64> {
            correlations
                .iter()
                .filter(|c| c.setting == kind.as_str())
                .filter_map(|c| c.avg_corr)
                .collect()
        };
        let (zero, few) = (avg(ExperimentKind::PreliminaryZeroShot), avg(ExperimentKind::PreliminaryFewShot));
        if zero.is_empty() || few.is_empty() {
            None
        } else {
            mann_whitney_u(&zero, &few).ok()
        }
    };

    let base_kept = baseline.map(|b| partition(b, options).0);
    let offsets = offset_summary(&kept, base_kept.as_deref());
    let mut notes: Vec<String> = correlations
        .iter()
        .filter_map(|c| c.note.as_ref().map(|n| format!("{} {}: {n}", c.model, c.setting)))
        .collect();
    notes.extend(missing_offset_groups(&offsets));
    let (convergence, conv_notes) = convergence_table(&kept, options);
    notes.extend(conv_notes);
    let trajectories = trajectory_bands(&kept, options.ci_level)?;
    if trajectories.iter().any(|t| t.ci_low.is_none()) {
        notes.push("some trajectory points have a single observation; bands omitted there".into());
    }

    Ok(ReportBundle {
        inputs: vec![],
        baseline: None,
        options: *options,
        record_count: records.len(),
        dummy_turns: records.iter().filter(|r| !r.is_agent_turn()).count(),
        analysed: kept.len(),
        correlations,
        comparisons,
        setting_test,
        offsets,
        convergence,
        trajectories,
        exclusions,
        notes,
    })
}

/// Fixed-precision number with negative zero folded to zero.
fn num(x: f64, decimals: usize) -> String {
    let s = format!("{x:.decimals$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn opt_num(x: Option<f64>, decimals: usize) -> String {
    x.map_or_else(|| "NA".to_string(), |v| num(v, decimals))
}

/// "first -> last" at one decimal.
pub fn format_convergence(first: f64, last: f64) -> String {
    format!("{} -> {}", num(first, 1), num(last, 1))
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

impl ReportBundle {
    pub fn correlations_csv(&self) -> Vec<u8> {
        csv_bytes(
            &["model", "setting", "corr_v", "corr_a", "avg_corr", "n"],
            self.correlations.iter().map(|c| {
                vec![
                    c.model.clone(),
                    c.setting.clone(),
                    opt_num(c.corr_valence, 2),
                    opt_num(c.corr_arousal, 2),
                    opt_num(c.avg_corr, 2),
                    c.n.to_string(),
                ]
            }),
        )
    }

    pub fn comparisons_csv(&self) -> Vec<u8> {
        csv_bytes(
            &["setting", "dimension", "model_a", "model_b", "r_a", "r_b", "z", "p", "p_bonferroni"],
            self.comparisons.iter().map(|c| {
                vec![
                    c.setting.clone(),
                    c.dimension.as_str().to_string(),
                    c.model_a.clone(),
                    c.model_b.clone(),
                    num(c.r_a, 2),
                    num(c.r_b, 2),
                    num(c.z, 3),
                    format!("{:.3e}", c.p),
                    format!("{:.3e}", c.p_adjusted),
                ]
            }),
        )
    }

    /// One row per model and pairing, valence and arousal side by side.
    pub fn convergence_csv(&self) -> Vec<u8> {
        type Pair<'a> = (Option<&'a ConvergenceCell>, Option<&'a ConvergenceCell>);
        let mut rows: BTreeMap<(&str, &str), Pair<'_>> = BTreeMap::new();
        for c in &self.convergence {
            let e = rows.entry((&c.model, &c.pairing)).or_default();
            match c.dimension {
                Dimension::Valence => e.0 = Some(c),
                Dimension::Arousal => e.1 = Some(c),
            }
        }
        let cell = |c: Option<&ConvergenceCell>| c.map_or("NA".to_string(), |c| format_convergence(c.first_diff, c.last_diff));
        csv_bytes(
            &["model", "pairing", "valence", "arousal", "first_round", "last_round", "conversations"],
            rows.into_iter().map(|((model, pairing), (v, a))| {
                let any = v.or(a).expect("row has a cell");
                vec![
                    model.to_string(),
                    pairing.to_string(),
                    cell(v),
                    cell(a),
                    any.first_round.to_string(),
                    any.last_round.to_string(),
                    any.conversations.to_string(),
                ]
            }),
        )
    }

    pub fn offsets_csv(&self) -> Vec<u8> {
        csv_bytes(
            &["model", "dimension", "prompted_level", "mean_offset", "n", "baseline"],
            self.offsets.iter().map(|o| {
                vec![
                    o.model.clone(),
                    o.dimension.as_str().to_string(),
                    o.prompted_level.to_string(),
                    num(o.mean_offset, 3),
                    o.n.to_string(),
                    opt_num(o.baseline, 3),
                ]
            }),
        )
    }

    pub fn trajectories_csv(&self) -> Vec<u8> {
        csv_bytes(
            &[
                "model", "pairing", "agent", "dimension", "round", "n", "mean", "ci_low", "ci_high", "prompted",
            ],
            self.trajectories.iter().map(|t| {
                vec![
                    t.model.clone(),
                    t.pairing.clone(),
                    t.agent.as_str().to_string(),
                    t.dimension.as_str().to_string(),
                    t.round.to_string(),
                    t.n.to_string(),
                    num(t.mean, 3),
                    opt_num(t.ci_low, 3),
                    opt_num(t.ci_high, 3),
                    num(t.prompted, 3),
                ]
            }),
        )
    }

    pub fn summary_json(&self) -> String {
        let mut reasons: BTreeMap<&str, usize> = BTreeMap::new();
        for e in &self.exclusions {
            *reasons.entry(&e.reason).or_default() += 1;
        }
        let conversations: BTreeSet<&str> = self.exclusions.iter().map(|e| e.conversation_id.as_str()).collect();
        let aborted: Vec<&str> = conversations
            .into_iter()
            .filter(|c| {
                self.exclusions
                    .iter()
                    .any(|e| e.conversation_id == *c && e.reason == "conversation aborted")
            })
            .collect();
        let v = json!({
            "inputs": self.inputs,
            "baseline": self.baseline,
            "options": self.options,
            "counts": {
                "records": self.record_count,
                "dummy_turns": self.dummy_turns,
                "agent_turns": self.analysed + self.exclusions.len(),
                "analysed": self.analysed,
                "excluded": self.exclusions.len(),
            },
            "exclusion_reasons": reasons,
            "aborted_conversations": aborted,
            "exclusions": self.exclusions,
            "setting_comparison": self.setting_test.map(|t| json!({
                "test": "mann_whitney_u",
                "groups": ["preliminary_zero_shot", "preliminary_few_shot"],
                "u": t.u,
                "z": t.z,
                "p": t.p,
            })),
            "notes": self.notes,
        });
        serde_json::to_string_pretty(&v).expect("summary serializes") + "\n"
    }

    /// One chart per (pairing, dimension); model is prefixed when there are several.
    pub fn charts(&self) -> Vec<(String, String)> {
        let mut groups: BTreeMap<(&str, &str, Dimension), Vec<&TrajectoryPoint>> = BTreeMap::new();
        for t in &self.trajectories {
            groups.entry((&t.model, &t.pairing, t.dimension)).or_default().push(t);
        }
        let models: BTreeSet<&str> = groups.keys().map(|k| k.0).collect();
        groups
            .into_iter()
            .map(|((model, pairing, dim), points)| {
                let stem = if models.len() > 1 {
                    format!("{}_{}_{}", slug(model), slug(pairing), dim.as_str())
                } else {
                    format!("{}_{}", slug(pairing), dim.as_str())
                };
                let title = if models.len() > 1 {
                    format!("{model}: {pairing}, {}", dim.as_str())
                } else {
                    format!("{pairing}, {}", dim.as_str())
                };
                (format!("{stem}.svg"), trajectory_svg(&title, &points))
            })
            .collect()
    }

    /// Writes everything under `<out_dir>/report/` and returns that directory.
    pub fn write(&self, out_dir: &Path) -> Result<PathBuf, ReportError> {
        let dir = out_dir.join("report");
        let charts = dir.join("charts");
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| ReportError::Io { path, source }
        };
        fs::create_dir_all(&charts).map_err(io(&charts))?;
        let files: [(&str, Vec<u8>); 6] = [
            ("correlations.csv", self.correlations_csv()),
            ("comparisons.csv", self.comparisons_csv()),
            ("convergence.csv", self.convergence_csv()),
            ("offsets.csv", self.offsets_csv()),
            ("trajectories.csv", self.trajectories_csv()),
            ("summary.json", self.summary_json().into_bytes()),
        ];
        for (name, bytes) in files {
            let p = dir.join(name);
            fs::write(&p, bytes).map_err(io(&p))?;
        }
        for (name, svg) in self.charts() {
            let p = charts.join(name);
            fs::write(&p, svg).map_err(io(&p))?;
        }
        Ok(dir)
    }
}

fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '-' })
        .collect()
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

const W: f64 = 640.0;
const H: f64 = 360.0;
const PAD_L: f64 = 56.0;
const PAD_R: f64 = 110.0;
const PAD_T: f64 = 36.0;
const PAD_B: f64 = 44.0;

fn agent_color(agent: AgentId) -> &'static str {
    match agent {
        AgentId::A => "#1f77b4",
        AgentId::B => "#d62728",
        AgentId::Dummy => "#7f7f7f",
    }
}

/// Mean line, confidence band and dashed prompted level per agent.
pub fn trajectory_svg(title: &str, points: &[&TrajectoryPoint]) -> String {
    let max_round = points.iter().map(|p| p.round).max().unwrap_or(1).max(2);
    let x = |round: f64| PAD_L + (round - 1.0) / (max_round as f64 - 1.0) * (W - PAD_L - PAD_R);
    let y = |level: f64| PAD_T + (5.0 - level.clamp(0.5, 5.5)) / 4.0 * (H - PAD_T - PAD_B);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, (W - PAD_R + PAD_L) / 2.0, esc(title));
    for level in 1..=5 {
        let yy = y(level as f64);
        let _ = writeln!(
            s,
            r##"<line x1="{PAD_L}" y1="{yy:.1}" x2="{:.1}" y2="{yy:.1}" stroke="#e0e0e0"/><text x="{:.1}" y="{:.1}" text-anchor="end">{level}</text>"##,
            W - PAD_R,
            PAD_L - 6.0,
            yy + 4.0
        );
    }
    let step = if max_round > 10 { 5 } else { 1 };
    for round in (1..=max_round).filter(|r| *r == 1 || r % step == 0) {
        let xx = x(round as f64);
        let _ = writeln!(s, r#"<text x="{xx:.1}" y="{:.1}" text-anchor="middle">{round}</text>"#, H - PAD_B + 16.0);
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">round</text>"#, (W - PAD_R + PAD_L) / 2.0, H - 8.0);
    let _ = writeln!(
        s,
        r#"<text transform="translate(16 {:.1}) rotate(-90)" text-anchor="middle">SAM level</text>"#,
        (H - PAD_B + PAD_T) / 2.0
    );

    let agents: BTreeSet<AgentId> = points.iter().map(|p| p.agent).collect();
    for (i, agent) in agents.into_iter().enumerate() {
        let color = agent_color(agent);
        let mut pts: Vec<&&TrajectoryPoint> = points.iter().filter(|p| p.agent == agent).collect();
        pts.sort_by_key(|p| p.round);
        let banded: Vec<_> = pts.iter().filter(|p| p.ci_low.is_some()).collect();
        if banded.len() >= 2 {
            let mut poly = String::new();
            for p in &banded {
                let _ = write!(poly, "{:.1},{:.1} ", x(p.round as f64), y(p.ci_high.unwrap()));
            }
            for p in banded.iter().rev() {
                let _ = write!(poly, "{:.1},{:.1} ", x(p.round as f64), y(p.ci_low.unwrap()));
            }
            let _ = writeln!(s, r#"<polygon points="{}" fill="{color}" fill-opacity="0.18" stroke="none"/>"#, poly.trim_end());
        }
        let line: Vec<String> = pts.iter().map(|p| format!("{:.1},{:.1}", x(p.round as f64), y(p.mean))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, line.join(" "));
        let prompted = pts.iter().map(|p| p.prompted).sum::<f64>() / pts.len() as f64;
        let py = y(prompted);
        let _ = writeln!(
            s,
            r#"<line x1="{PAD_L}" y1="{py:.1}" x2="{:.1}" y2="{py:.1}" stroke="{color}" stroke-dasharray="6 4"/>"#,
            W - PAD_R
        );
        let ly = PAD_T + 10.0 + 36.0 * i as f64;
        let lx = W - PAD_R + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">agent {}</text>"#,
            lx + 18.0,
            lx + 24.0,
            ly + 4.0,
            agent.as_str()
        );
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{}" x2="{}" y2="{}" stroke="{color}" stroke-dasharray="6 4"/><text x="{}" y="{}">prompted</text>"#,
            ly + 16.0,
            lx + 18.0,
            ly + 16.0,
            lx + 24.0,
            ly + 20.0
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affect::{cell_midpoint, SamCell};
    use crate::experiments::Flag;

    fn rec(kind: ExperimentKind, conv: &str, agent: AgentId, round: u32, prompted: SamCell, scored: Option<SamCell>) -> TurnRecord {
        TurnRecord {
            run_id: "r".into(),
            experiment: kind,
            model: "m".into(),
            pairing: (!kind.is_preliminary()).then(|| "hvha-lvha".to_string()),
            conversation_id: conv.into(),
            round,
            agent_id: agent,
            persona_name: "p".into(),
            prompted_va: Some(cell_midpoint(prompted)),
            prompted_cell: Some(prompted),
            text: "t".into(),
            scored_va: scored.map(cell_midpoint),
            flags: if scored.is_none() { [Flag::Unscored].into() } else { BTreeSet::new() },
        }
    }

    fn c(v: u8, a: u8) -> SamCell {
        SamCell::new(v, a).unwrap()
    }

    #[test]
    fn number_formatting() {
        assert_eq!(format_convergence(4.0, 0.0), "4.0 -> 0.0");
        assert_eq!(format_convergence(2.0, 0.2), "2.0 -> 0.2");
        assert_eq!(num(-0.0001, 2), "0.00");
        assert_eq!(num(0.666, 2), "0.67");
        assert_eq!(opt_num(None, 2), "NA");
    }

    #[test]
    fn perfect_scores_give_unit_correlations() {
        let records: Vec<TurnRecord> = SamCell::all()
            .enumerate()
            .map(|(i, cell)| rec(ExperimentKind::PreliminaryZeroShot, &format!("m/{i:03}"), AgentId::A, 1, cell, Some(cell)))
            .collect();
        let b = analyze_records(&records, None, &AnalysisOptions::default()).unwrap();
        let csv = String::from_utf8(b.correlations_csv()).unwrap();
        assert_eq!(csv, "model,setting,corr_v,corr_a,avg_corr,n\nm,preliminary_zero_shot,1.00,1.00,1.00,25\n");
        assert!(b.offsets.iter().all(|o| o.mean_offset == 0.0));
    }

    #[test]
    fn constant_chat_convergence_csv() {
        let mut records = vec![];
        for k in 0..3 {
            let id = format!("m/hvha-lvha/{k:03}");
            for r in 1..=20 {
                records.push(rec(ExperimentKind::ChatOpposing, &id, AgentId::A, r, c(5, 5), Some(c(5, 5))));
                records.push(rec(ExperimentKind::ChatOpposing, &id, AgentId::B, r, c(1, 5), Some(c(1, 5))));
            }
        }
        let b = analyze_records(&records, None, &AnalysisOptions::default()).unwrap();
        let csv = String::from_utf8(b.convergence_csv()).unwrap();
        assert_eq!(
            csv,
            "model,pairing,valence,arousal,first_round,last_round,conversations\nm,hvha-lvha,4.0 -> 4.0,0.0 -> 0.0,1,20,3\n"
        );
        let charts = b.charts();
        let names: Vec<_> = charts.iter().map(|c| c.0.as_str()).collect();
        assert_eq!(names, ["hvha-lvha_valence.svg", "hvha-lvha_arousal.svg"]);
        assert!(charts[0].1.contains("stroke-dasharray"));
        assert!(charts[0].1.contains("<polygon"));
    }

    #[test]
    fn exclusions_are_enumerated() {
        let records = vec![
            rec(ExperimentKind::PreliminaryZeroShot, "m/001", AgentId::A, 1, c(2, 2), Some(c(2, 2))),
            rec(ExperimentKind::PreliminaryZeroShot, "m/001", AgentId::A, 2, c(2, 2), None),
        ];
        let b = analyze_records(&records, None, &AnalysisOptions::default()).unwrap();
        assert_eq!(b.analysed, 1);
        assert_eq!(b.exclusions.len(), 1);
        let summary: Value = serde_json::from_str(&b.summary_json()).unwrap();
        assert_eq!(summary["exclusion_reasons"]["unscored"], 1);
        assert_eq!(summary["counts"]["agent_turns"], 2);
    }

    #[test]
    fn empty_file_list_is_an_error() {
        assert!(matches!(analyze(&[], &ReportOptions::default()), Err(ReportError::NoInputs)));
    }
}
