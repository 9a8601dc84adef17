//! Browser bindings for the demo page in `www/`.
//!
//! Every export returns a JSON string; the `*_json` functions carry the logic
//! and are what the native tests exercise.

use affectsim_core::affect::{greeting_for, VaPoint};
use affectsim_core::corpus::{empirical_va, Corpus};
use affectsim_core::experiments::{run_chat, ExperimentConfig, ExperimentKind, MockProvider, RunContext};
use affectsim_core::sampling::{fit_kde, substream, KdeModel, Pairing};
use affectsim_core::scorer::{CachedScorer, ReferenceScorer};
use affectsim_core::stats::{convergence_table, partition, trajectory_bands, AnalysisOptions};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

const MAX_SAMPLES: usize = 5000;
const MAX_ROUNDS: usize = 100;
const MAX_CONVERSATIONS: usize = 50;

fn demo_kde() -> Result<(Corpus, KdeModel), String> {
    let corpus = Corpus::demo();
    let points = empirical_va(&corpus, Some("en")).map_err(|e| e.to_string())?;
    let kde = fit_kde(&points).map_err(|e| e.to_string())?;
    Ok((corpus, kde))
}

/// SAM cell, descriptions and greeting for a VA point.
pub fn sam_lookup_json(valence: f64, arousal: f64) -> Result<Value, String> {
    let va = VaPoint::new(valence, arousal).map_err(|e| e.to_string())?;
    let cell = va.cell();
    Ok(json!({
        "valence_level": cell.valence_level(),
        "arousal_level": cell.arousal_level(),
        "valence_desc": cell.valence_desc(),
        "arousal_desc": cell.arousal_desc(),
        "greeting": greeting_for(cell),
    }))
}

/// Draws `n` states from the density fitted to the bundled corpus.
pub fn kde_sample_json(seed: u64, n: usize) -> Result<Value, String> {
    if n == 0 || n > MAX_SAMPLES {
        return Err(format!("n must lie in 1..={MAX_SAMPLES}"));
    }
    let (_, kde) = demo_kde()?;
    let mut rng = substream(seed, 0, 0);
    let mut counts = [[0u32; 5]; 5];
    let samples: Vec<Value> = (0..n)
        .map(|_| {
            let s = kde.sample_state(&mut rng);
            let c = s.cell();
            counts[usize::from(c.valence_level() - 1)][usize::from(c.arousal_level() - 1)] += 1;
            json!([s.va().valence(), s.va().arousal()])
        })
        .collect();
    Ok(json!({
        "bandwidth": kde.bandwidth(),
        "support": kde.support().iter().map(|p| [p.valence(), p.arousal()]).collect::<Vec<_>>(),
        "samples": samples,
        "cell_counts": counts,
    }))
}

/// Mock-backed chat run plus its convergence row and per-round bands.
pub fn simulate_chat_json(
    pairing: &str,
    conversations: usize,
    rounds: usize,
    drift_a: [f64; 2],
    drift_b: [f64; 2],
    seed: u64,
) -> Result<Value, String> {
    let pairing: Pairing = pairing.parse().map_err(|e: affectsim_core::sampling::SamplingError| e.to_string())?;
    if rounds == 0 || rounds > MAX_ROUNDS {
        return Err(format!("rounds must lie in 1..={MAX_ROUNDS}"));
    }
    if conversations == 0 || conversations > MAX_CONVERSATIONS {
        return Err(format!("conversations must lie in 1..={MAX_CONVERSATIONS}"));
    }
    let kind = match pairing {
        Pairing::Sampled => ExperimentKind::ChatSampled,
        Pairing::Opposing(..) => ExperimentKind::ChatOpposing,
    };
    let (corpus, kde) = demo_kde()?;
    let scorer = CachedScorer::new(ReferenceScorer::new());
    let provider = MockProvider {
        drift_a: (drift_a[0], drift_a[1]),
        drift_b: (drift_b[0], drift_b[1]),
    };
    let ctx = RunContext {
        corpus: &corpus,
        kde: &kde,
        scorer: &scorer,
        backends: &provider,
    };
    let mut config = ExperimentConfig::new(kind, vec!["mock".into()], seed);
    config.iterations = conversations;
    config.rounds = rounds;
    let run = run_chat(&config, pairing, &ctx).map_err(|e| e.to_string())?;

    let records: Vec<_> = run.records().cloned().collect();
    let options = AnalysisOptions::default();
    let (kept, _) = partition(&records, &options);
    let (convergence, notes) = convergence_table(&kept, &options);
    let bands = trajectory_bands(&kept, options.ci_level).map_err(|e| e.to_string())?;
    let first = &run.transcripts[0];
    let transcript: Vec<Value> = first
        .records
        .iter()
        .map(|r| {
            json!({
                "agent": r.agent_id.as_str(),
                "persona": r.persona_name,
                "round": r.round,
                "text": r.text,
                "scored": r.scored_va,
            })
        })
        .collect();
    Ok(json!({
        "pairing": pairing.label(),
        "transcript": transcript,
        "convergence": convergence,
        "trajectories": bands,
        "notes": notes,
    }))
}

fn to_js(result: Result<Value, String>) -> Result<String, JsValue> {
    result.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn sam_lookup(valence: f64, arousal: f64) -> Result<String, JsValue> {
    to_js(sam_lookup_json(valence, arousal))
}

#[wasm_bindgen]
pub fn kde_sample(seed: u32, n: usize) -> Result<String, JsValue> {
    to_js(kde_sample_json(u64::from(seed), n))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn simulate_chat(
    pairing: &str,
    conversations: usize,
    rounds: usize,
    drift_a_v: f64,
    drift_a_a: f64,
    drift_b_v: f64,
    drift_b_a: f64,
    seed: u32,
) -> Result<String, JsValue> {
    to_js(simulate_chat_json(
        pairing,
        conversations,
        rounds,
        [drift_a_v, drift_a_a],
        [drift_b_v, drift_b_a],
        u64::from(seed),
    ))
}
