//! Per-session dialogue state, kept as an append-only event log. Slots,
//! mode and the last action are always a fold over the events.

use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::dialogue::Action;
use crate::entity::{EntityMention, EntityType};
use crate::error::{Error, Result};
use crate::intent::{Intent, IntentSignal, SlotWrites};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Search,
    Explore,
}

impl Intent {
    /// The interaction mode this intent switches to, if any.
    pub fn mode(self) -> Option<Mode> {
        match self {
            Intent::Search => Some(Mode::Search),
            Intent::Explore => Some(Mode::Explore),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slots {
    pub topic: Option<String>,
    pub location: Option<String>,
    pub mode: Option<Mode>,
}

pub const SLOT_NAMES: [&str; 2] = ["topic", "location"];

/// A dataset link produced by the search action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultLink {
    pub id: String,
    pub title: String,
    pub url: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    User {
        seq: u64,
        timestamp_ms: u64,
        text: String,
        signal: IntentSignal,
        entities: Vec<EntityMention>,
        slot_writes: SlotWrites,
    },
    Bot {
        seq: u64,
        timestamp_ms: u64,
        action: Action,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        results: Option<Vec<ResultLink>>,
    },
    /// A user message that could not be applied, e.g. a payload naming an
    /// unknown slot. Leaves state untouched.
    Rejected {
        seq: u64,
        timestamp_ms: u64,
        text: String,
        reason: String,
    },
}

impl Event {
    pub fn seq(&self) -> u64 {
        match self {
            Event::User { seq, .. } | Event::Bot { seq, .. } | Event::Rejected { seq, .. } => *seq,
        }
    }

    pub fn timestamp_ms(&self) -> u64 {
        match self {
            Event::User { timestamp_ms, .. }
            | Event::Bot { timestamp_ms, .. }
            | Event::Rejected { timestamp_ms, .. } => *timestamp_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tracker {
    session_id: String,
    slots: Slots,
    events: Vec<Event>,
    last_action: Action,
    /// Most recent bot action, `None` until the bot has acted.
    previous_action: Option<Action>,
    latest_signal: Option<IntentSignal>,
    results: Vec<ResultLink>,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

impl Tracker {
    pub fn new(session_id: impl Into<String>) -> Result<Self> {
        let session_id = session_id.into();
        if session_id.is_empty() {
            return Err(Error::EmptySessionId);
        }
        Ok(Tracker {
            session_id,
            slots: Slots::default(),
            events: Vec::new(),
            last_action: Action::ActionListen,
            previous_action: None,
            latest_signal: None,
            results: Vec::new(),
        })
    }

    /// Rebuilds a tracker by applying `events` to a fresh one.
    pub fn replay(session_id: impl Into<String>, events: &[Event]) -> Result<Self> {
        let mut tracker = Tracker::new(session_id)?;
        for event in events {
            tracker.apply(event);
            tracker.events.push(event.clone());
        }
        Ok(tracker)
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn slots(&self) -> &Slots {
        &self.slots
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn last_action(&self) -> Action {
        self.last_action
    }

    pub fn previous_action(&self) -> Option<Action> {
        self.previous_action
    }

    pub fn latest_signal(&self) -> Option<IntentSignal> {
        self.latest_signal
    }

    /// Results of the search action in the current bot turn.
    pub fn results(&self) -> &[ResultLink] {
        &self.results
    }

    /// True when the newest state-changing event is a user message.
    pub fn awaiting_bot(&self) -> bool {
        self.events
            .iter()
            .rev()
            .find(|e| !matches!(e, Event::Rejected { .. }))
            .is_some_and(|e| matches!(e, Event::User { .. }))
    }

    /// The most recent question the bot asked, if any.
    pub fn last_question(&self) -> Option<Action> {
        self.events.iter().rev().find_map(|e| match e {
            Event::Bot { action, .. } if action.is_question() => Some(*action),
            _ => None,
        })
    }

    fn next_stamp(&self) -> (u64, u64) {
        let (seq, ts) = self
            .events
            .last()
            .map_or((0, 0), |e| (e.seq() + 1, e.timestamp_ms()));
        (seq, now_ms().max(ts))
    }

    fn apply(&mut self, event: &Event) {
        match event {
            Event::User {
                signal,
                entities,
                slot_writes,
                ..
            } => {
                if let IntentSignal::Intent(intent) = signal {
                    // A mode intent starts a new query; this message's own
                    // entities are applied after the reset.
                    if let Some(mode) = intent.mode() {
                        self.slots.mode = Some(mode);
                        self.slots.topic = None;
                        self.slots.location = None;
                    }
                    for mention in entities {
                        let slot = match mention.entity_type {
                            EntityType::Topic => &mut self.slots.topic,
                            EntityType::Location => &mut self.slots.location,
                        };
                        *slot = Some(mention.surface.clone());
                    }
                    for (name, value) in slot_writes {
                        match name.as_str() {
                            "topic" => self.slots.topic = Some(value.clone()),
                            "location" => self.slots.location = Some(value.clone()),
                            _ => {}
                        }
                    }
                }
                self.latest_signal = Some(*signal);
                self.results.clear();
            }
            Event::Bot {
                action, results, ..
            } => {
                self.last_action = *action;
                self.previous_action = Some(*action);
                if let Some(results) = results {
                    self.results = results.clone();
                }
            }
            Event::Rejected { .. } => {}
        }
    }

    fn push(&mut self, event: Event) {
        self.apply(&event);
        self.events.push(event);
    }

    /// Records a user turn. `search`/`explore` switch the mode and clear
    /// topic and location, then entities write their slots (last mention
    /// wins) and payload slot writes override entities. A low-confidence signal writes nothing.
    ///
    /// A payload naming an unknown slot is logged as a rejected event and
    /// leaves the state unchanged.
    pub fn update(
        &mut self,
        text: &str,
        signal: IntentSignal,
        entities: Vec<EntityMention>,
        slot_writes: SlotWrites,
    ) -> Result<()> {
        if let Some(unknown) = slot_writes.keys().find(|k| !SLOT_NAMES.contains(&k.as_str())) {
            let unknown = unknown.clone();
            self.reject(text, format!("unknown slot `{unknown}`"));
            return Err(Error::UnknownSlot(unknown));
        }
        let (seq, timestamp_ms) = self.next_stamp();
        self.push(Event::User {
            seq,
            timestamp_ms,
            text: text.to_string(),
            signal,
            entities,
            slot_writes,
        });
        Ok(())
    }

    /// Logs a user message that could not be interpreted. State is
    /// unchanged.
    pub fn reject(&mut self, text: &str, reason: impl Into<String>) {
        let (seq, timestamp_ms) = self.next_stamp();
        self.push(Event::Rejected {
            seq,
            timestamp_ms,
            text: text.to_string(),
            reason: reason.into(),
        });
    }

    /// Records a bot action. `results` is set only by the search action.
    pub fn record_action(&mut self, action: Action, results: Option<Vec<ResultLink>>) {
        let (seq, timestamp_ms) = self.next_stamp();
        self.push(Event::Bot {
            seq,
            timestamp_ms,
            action,
            results,
        });
    }
}

/// Functional form of [`Tracker::update`].
pub fn update_tracker(
    mut tracker: Tracker,
    signal: IntentSignal,
    entities: Vec<EntityMention>,
    slot_writes: SlotWrites,
) -> Result<Tracker> {
    tracker.update("", signal, entities, slot_writes)?;
    Ok(tracker)
}
