//! Shared blocking-HTTP plumbing for the live chat backends and the remote scorer.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use crate::agents::BackendError;

pub(crate) fn agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into()
}

pub(crate) fn classify(err: ureq::Error) -> BackendError {
    match err {
        ureq::Error::Timeout(_)
        | ureq::Error::Io(_)
        | ureq::Error::ConnectionFailed
        | ureq::Error::HostNotFound => BackendError::Transient(err.to_string()),
        other => BackendError::Fatal(other.to_string()),
    }
}

pub(crate) fn classify_status(status: u16, body: &str) -> BackendError {
    let msg = format!("HTTP {status}: {}", body.chars().take(200).collect::<String>());
    if status == 429 || status >= 500 {
        BackendError::Transient(msg)
    } else {
        BackendError::Fatal(msg)
    }
}

pub(crate) fn join_url(base: &str, path: &str) -> String {
    let base = base.trim_end_matches('/');
    if base.ends_with(path) {
        base.to_string()
    } else {
        format!("{base}{path}")
    }
}

/// Spaces requests at least `1 / rate` seconds apart.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Option<Duration>,
    next_slot: Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn new(requests_per_second: Option<f64>) -> Self {
        let interval = requests_per_second
            .filter(|r| *r > 0.0)
            .map(|r| Duration::from_secs_f64(1.0 / r));
        Self {
            interval,
            next_slot: Mutex::new(None),
        }
    }

    pub fn wait(&self) {
        let Some(interval) = self.interval else { return };
        let wait = {
            let mut slot = self.next_slot.lock().unwrap();
            let now = Instant::now();
            let at = slot.map_or(now, |s| s.max(now));
            *slot = Some(at + interval);
            at - now
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}
