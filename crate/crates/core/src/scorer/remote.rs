//! Client for the `/score` + `/health` scoring service.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ScoreError, Scorer, DEFAULT_MAX_BATCH};
use crate::affect::VaPoint;
use crate::net;

pub const ENV_SCORER_URL: &str = "AFFECTSIM_SCORER_URL";

#[derive(Serialize)]
struct ScoreBody<'a> {
    texts: &'a [String],
}

#[derive(Deserialize)]
struct WireScore {
    valence: f64,
    arousal: f64,
}

#[derive(Deserialize)]
struct ScoreResponse {
    scores: Vec<WireScore>,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct Health {
    pub status: String,
    pub model: String,
}

pub struct RemoteScorer {
    base_url: String,
    agent: ureq::Agent,
    max_batch: usize,
}

impl RemoteScorer {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            agent: net::agent(Duration::from_secs(60)),
            max_batch: DEFAULT_MAX_BATCH,
        }
    }

    pub fn from_env() -> Option<Self> {
        std::env::var(ENV_SCORER_URL)
            .ok()
            .filter(|s| !s.is_empty())
            .map(Self::new)
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.agent = net::agent(timeout);
        self
    }

    pub fn with_max_batch(mut self, max_batch: usize) -> Self {
        self.max_batch = max_batch.max(1);
        self
    }

    fn unavailable(e: ureq::Error) -> ScoreError {
        ScoreError::Unavailable(e.to_string())
    }

    pub fn health(&self) -> Result<Health, ScoreError> {
        let url = net::join_url(&self.base_url, "/health");
        let mut resp = self.agent.get(&url).call().map_err(Self::unavailable)?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().map_err(Self::unavailable)?;
        if status != 200 {
            return Err(ScoreError::Unavailable(format!("health check returned HTTP {status}")));
        }
        serde_json::from_str(&body).map_err(|e| ScoreError::Protocol(format!("health body: {e}")))
    }
}

impl Scorer for RemoteScorer {
    fn score_batch(&self, texts: &[String]) -> Result<Vec<VaPoint>, ScoreError> {
        if texts.len() > self.max_batch {
            return Err(ScoreError::BatchTooLarge {
                size: texts.len(),
                max: self.max_batch,
            });
        }
        let url = net::join_url(&self.base_url, "/score");
        let mut resp = self
            .agent
            .post(&url)
            .send_json(ScoreBody { texts })
            .map_err(Self::unavailable)?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().map_err(Self::unavailable)?;
        if status != 200 {
            return Err(ScoreError::Unavailable(format!(
                "HTTP {status}: {}",
                body.chars().take(200).collect::<String>()
            )));
        }
        let parsed: ScoreResponse =
            serde_json::from_str(&body).map_err(|e| ScoreError::Protocol(format!("score body: {e}")))?;
        if parsed.scores.len() != texts.len() {
            return Err(ScoreError::Protocol(format!(
                "sent {} texts, received {} scores",
                texts.len(),
                parsed.scores.len()
            )));
        }
        parsed
            .scores
            .into_iter()
            .map(|s| VaPoint::new(s.valence, s.arousal).map_err(|e| ScoreError::Protocol(e.to_string())))
            .collect()
    }

    fn identity(&self) -> String {
        format!("remote:{}", self.base_url)
    }

    fn max_batch(&self) -> usize {
        self.max_batch
    }
}
