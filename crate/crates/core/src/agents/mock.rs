//! Deterministic chat backends for offline runs and tests.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::backend::{BackendError, ChatBackend, ChatRequest};
use crate::affect::{cell_midpoint, SamCell, VaPoint};

// One reply per SAM cell, rows valence 1..=5, columns arousal 1..=5.
const PHRASES: [[&str; 5]; 5] = [
    [
        "I don't really want to talk. Everything feels heavy and grey.",
        "Honestly, it's all just bad. I can't find anything worth saying.",
        "This is miserable and I'm sick of it. Can we not?",
        "I'm so fed up! Everything keeps going wrong and it's awful!",
        "This is a nightmare! I hate this, I absolutely hate all of it!",
    ],
    [
        "It's not great. I'm a bit let down, but I'll live.",
        "Meh. Things have been kind of disappointing lately.",
        "I'm not happy about it. That's annoying, to be honest.",
        "Ugh, that's really frustrating! Why does this keep happening?",
        "Seriously?! This is so irritating, I can barely stand it!",
    ],
    [
        "Alright. Nothing much to report on my side.",
        "I see. That seems fine, I suppose.",
        "Okay, let's talk it through and see where it goes.",
        "Oh, interesting! Tell me more, what happened next?",
        "Wait, really?! What is going on over there?!",
    ],
    [
        "That's nice. I'm feeling quite content right now.",
        "Sounds good to me. Thanks for sharing that.",
        "I like that idea, it could work out well.",
        "Oh, that sounds fun! I'm really looking forward to it!",
        "Yes! That's great, let's do it right now!",
    ],
    [
        "I'm so grateful and at peace. This is truly lovely.",
        "That's wonderful. I'm really happy we're talking.",
        "I love that! This makes me genuinely happy.",
        "That's fantastic! I'm so delighted, this is brilliant!",
        "This is amazing! I'm absolutely overjoyed, best news ever!",
    ],
];

/// The mock reply associated with a cell.
pub fn phrase_for(cell: SamCell) -> &'static str {
    PHRASES[usize::from(cell.valence_level() - 1)][usize::from(cell.arousal_level() - 1)]
}

/// Every phrasebook sentence with its cell midpoint as VA tag.
pub fn phrasebook() -> Vec<(&'static str, VaPoint)> {
    SamCell::all().map(|c| (phrase_for(c), cell_midpoint(c))).collect()
}

/// Tagged phrase nearest to `point` (ties go to the higher cell).
pub fn nearest_phrase(point: VaPoint) -> &'static str {
    phrase_for(point.cell())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MockProfile {
    pub target: VaPoint,
    /// Per-round shift `(dv, da)` applied to the target.
    pub drift: (f64, f64),
}

impl MockProfile {
    pub fn fixed(target: VaPoint) -> Self {
        Self {
            target,
            drift: (0.0, 0.0),
        }
    }

    /// Point expressed on the agent's `round`-th reply.
    pub fn point_at(&self, round: usize) -> VaPoint {
        let r = round as f64;
        VaPoint::clamped(
            self.target.valence() + r * self.drift.0,
            self.target.arousal() + r * self.drift.1,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Reply {
    Phrasebook(MockProfile),
    Template(String),
}

/// Offline backend. The round number is derived from the request itself
/// (count of the agent's own earlier replies + 1), so one instance can be
/// shared by any number of conversations.
#[derive(Debug, Clone, PartialEq)]
pub struct MockBackend {
    reply: Reply,
}

impl MockBackend {
    pub fn phrasebook(profile: MockProfile) -> Self {
        Self {
            reply: Reply::Phrasebook(profile),
        }
    }

    /// Replies with `template`, replacing `{n}` with the round number.
    pub fn template(template: &str) -> Self {
        Self {
            reply: Reply::Template(template.to_string()),
        }
    }
}

pub fn mock_backend(profile: MockProfile) -> MockBackend {
    MockBackend::phrasebook(profile)
}

impl ChatBackend for MockBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        let round = request.own_round();
        Ok(match &self.reply {
            Reply::Phrasebook(profile) => nearest_phrase(profile.point_at(round)).to_string(),
            Reply::Template(t) => t.replace("{n}", &round.to_string()),
        })
    }

    fn describe(&self) -> String {
        match &self.reply {
            Reply::Phrasebook(p) => format!(
                "mock:phrasebook(target=({},{}),drift=({},{}))",
                p.target.valence(),
                p.target.arousal(),
                p.drift.0,
                p.drift.1
            ),
            Reply::Template(t) => format!("mock:template({t})"),
        }
    }
}

/// Plays back a fixed queue of outcomes, then repeats the last one.
#[derive(Debug)]
pub struct ScriptedBackend {
    queue: Mutex<VecDeque<Result<String, BackendError>>>,
    last: Mutex<Option<Result<String, BackendError>>>,
    calls: AtomicUsize,
}

impl ScriptedBackend {
    pub fn new(outcomes: Vec<Result<String, BackendError>>) -> Self {
        Self {
            queue: Mutex::new(outcomes.into()),
            last: Mutex::new(None),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, _request: &ChatRequest) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let next = self.queue.lock().unwrap().pop_front();
        let mut last = self.last.lock().unwrap();
        match next {
            Some(outcome) => {
                *last = Some(outcome.clone());
                outcome
            }
            None => last
                .clone()
                .unwrap_or_else(|| Err(BackendError::Fatal("script exhausted".into()))),
        }
    }

    fn describe(&self) -> String {
        "mock:scripted".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::backend::{WireMessage, WireRole};
    use std::collections::HashSet;

    fn request_at(round: usize) -> ChatRequest {
        let mut messages = vec![WireMessage {
            role: WireRole::System,
            content: "sys".into(),
        }];
        for _ in 1..round {
            messages.push(WireMessage {
                role: WireRole::User,
                content: "u".into(),
            });
            messages.push(WireMessage {
                role: WireRole::Assistant,
                content: "a".into(),
            });
        }
        messages.push(WireMessage {
            role: WireRole::User,
            content: "u".into(),
        });
        ChatRequest {
            model: "m".into(),
            messages,
            temperature: 0.8,
            max_tokens: 256,
        }
    }

    #[test]
    fn phrasebook_is_injective() {
        let set: HashSet<_> = phrasebook().into_iter().map(|(p, _)| p).collect();
        assert_eq!(set.len(), 25);
        for c in SamCell::all() {
            assert_ne!(phrase_for(c), crate::affect::greeting_for(c));
        }
    }

    #[test]
    fn fixed_target_repeats_cell_phrase() {
        let b = mock_backend(MockProfile::fixed(VaPoint::new(0.9, 0.9).unwrap()));
        let want = phrase_for(SamCell::new(5, 5).unwrap());
        for r in 1..=20 {
            assert_eq!(b.complete(&request_at(r)).unwrap(), want);
        }
    }

    #[test]
    fn drift_traverses_valence_levels() {
        // 0.1 + 0.08 r for r = 1..=10: 0.18 0.26 0.34 0.42 0.50 0.58 0.66 0.74 0.82 0.90
        let expected = [1, 2, 2, 3, 3, 3, 4, 4, 5, 5];
        let profile = MockProfile {
            target: VaPoint::new(0.1, 0.9).unwrap(),
            drift: (0.08, 0.0),
        };
        let b = mock_backend(profile);
        for (r, lvl) in (1..=10).zip(expected) {
            let text = b.complete(&request_at(r)).unwrap();
            assert_eq!(text, phrase_for(SamCell::new(lvl, 5).unwrap()), "round {r}");
        }
    }

    #[test]
    fn template_echo() {
        let b = MockBackend::template("OK round {n}");
        assert_eq!(b.complete(&request_at(1)).unwrap(), "OK round 1");
        assert_eq!(b.complete(&request_at(3)).unwrap(), "OK round 3");
    }

    #[test]
    fn scripted_plays_in_order() {
        let b = ScriptedBackend::new(vec![Err(BackendError::Transient("t".into())), Ok("x".into())]);
        assert!(b.complete(&request_at(1)).is_err());
        assert_eq!(b.complete(&request_at(1)).unwrap(), "x");
        assert_eq!(b.complete(&request_at(1)).unwrap(), "x");
        assert_eq!(b.calls(), 3);
    }
}
