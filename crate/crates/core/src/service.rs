//! The message round-trip: interpret a user message, update the session's
//! tracker, run the policy, return the rendered responses.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use parking_lot::{FairMutex, Mutex};
use rand::Rng;

use crate::bundle::ModelBundle;
use crate::dialogue::{select_actions, BotResponse, Templates, Tracker};
use crate::entity::{extract_entities, EntityMention, Gazetteer};
use crate::error::{Error, Result};
use crate::index::Index;
use crate::intent::{parse_payload, IntentPrediction, IntentSignal, SlotWrites};

pub const DEFAULT_CONFIDENCE_THRESHOLD: f64 = 0.3;
pub const DEFAULT_SESSION_TTL: Duration = Duration::from_secs(30 * 60);

/// Everything immutable a conversation needs: trained models, gazetteer,
/// catalog and response wording.
#[derive(Debug)]
pub struct Pipeline {
    pub bundle: ModelBundle,
    pub gazetteer: Gazetteer,
    pub index: Index,
    pub templates: Templates,
    pub confidence_threshold: f64,
}

/// Result of interpreting free text.
#[derive(Debug, Clone, PartialEq)]
pub struct Interpretation {
    pub prediction: IntentPrediction,
    pub signal: IntentSignal,
    pub entities: Vec<EntityMention>,
}

impl Pipeline {
    pub fn new(bundle: ModelBundle, gazetteer: Gazetteer, index: Index, templates: Templates) -> Self {
        Pipeline {
            bundle,
            gazetteer,
            index,
            templates,
            confidence_threshold: DEFAULT_CONFIDENCE_THRESHOLD,
        }
    }

    pub fn model_version(&self) -> &str {
        &self.bundle.manifest.model_version
    }

    pub fn interpret(&self, text: &str) -> Interpretation {
        let entities = extract_entities(&self.bundle.crf, &self.gazetteer, text);
        let prediction = self.bundle.intent.classify(text);
        let signal = prediction.signal(self.confidence_threshold);
        Interpretation {
            prediction,
            signal,
            entities,
        }
    }

    /// One full turn against `tracker`.
    pub fn respond(&self, tracker: &mut Tracker, text: &str) -> Vec<BotResponse> {
        let payload_error = || vec![BotResponse::text(self.templates.messages().payload_error.clone())];
        let (signal, entities, slots) = match parse_payload(text) {
            Ok(Some((intent, slots))) => (IntentSignal::Intent(intent), Vec::new(), slots),
            Ok(None) => {
                let interpretation = self.interpret(text);
                (interpretation.signal, interpretation.entities, SlotWrites::new())
            }
            Err(e) => {
                tracker.reject(text, e.to_string());
                return payload_error();
            }
        };
        if tracker.update(text, signal, entities, slots).is_err() {
            return payload_error();
        }
        select_actions(&self.bundle.policy, tracker, &self.templates, &self.index).responses
    }
}

struct SessionSlot {
    tracker: Arc<FairMutex<Tracker>>,
    last_seen: Instant,
}

/// In-memory sessions with idle expiry. Each session's tracker sits behind a
/// fair lock, so concurrent messages to one session run one at a time in
/// arrival order while different sessions proceed independently.
pub struct SessionStore {
    sessions: Mutex<HashMap<String, SessionSlot>>,
    ttl: Duration,
}

impl SessionStore {
    pub fn new(ttl: Duration) -> Self {
        SessionStore {
            sessions: Mutex::new(HashMap::new()),
            ttl,
        }
    }

    pub fn ttl(&self) -> Duration {
        self.ttl
    }

    /// Creates a session with a fresh random id.
    pub fn create(&self) -> String {
        let id = format!("{:032x}", rand::thread_rng().gen::<u128>());
        self.create_with_id(&id).expect("random ids are non-empty and unique");
        id
    }

    /// Creates a session under a caller-chosen id. An id already in use is
    /// an error.
    pub fn create_with_id(&self, id: &str) -> Result<()> {
        let tracker = Tracker::new(id)?;
        let mut sessions = self.sessions.lock();
        self.evict_expired(&mut sessions);
        if sessions.contains_key(id) {
            return Err(Error::SessionExists(id.to_string()));
        }
        sessions.insert(
            id.to_string(),
            SessionSlot {
                tracker: Arc::new(FairMutex::new(tracker)),
                last_seen: Instant::now(),
            },
        );
        Ok(())
    }

    fn evict_expired(&self, sessions: &mut HashMap<String, SessionSlot>) {
        let ttl = self.ttl;
        sessions.retain(|_, slot| slot.last_seen.elapsed() <= ttl);
    }

    fn checkout(&self, id: &str) -> Result<Arc<FairMutex<Tracker>>> {
        let mut sessions = self.sessions.lock();
        match sessions.get_mut(id) {
            Some(slot) if slot.last_seen.elapsed() <= self.ttl => {
                slot.last_seen = Instant::now();
                Ok(Arc::clone(&slot.tracker))
            }
            Some(_) => {
                sessions.remove(id);
                Err(Error::SessionNotFound(id.to_string()))
            }
            None => Err(Error::SessionNotFound(id.to_string())),
        }
    }

    pub fn contains(&self, id: &str) -> bool {
        self.checkout(id).is_ok()
    }

    pub fn len(&self) -> usize {
        let mut sessions = self.sessions.lock();
        self.evict_expired(&mut sessions);
        sessions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// A copy of the session's tracker.
    pub fn snapshot(&self, id: &str) -> Result<Tracker> {
        Ok(self.checkout(id)?.lock().clone())
    }

    /// Runs `f` with exclusive access to the session's tracker.
    pub fn with_tracker<T>(&self, id: &str, f: impl FnOnce(&mut Tracker) -> T) -> Result<T> {
        let session = self.checkout(id)?;
        let mut tracker = session.lock();
        Ok(f(&mut tracker))
    }
}

impl Default for SessionStore {
    fn default() -> Self {
        SessionStore::new(DEFAULT_SESSION_TTL)
    }
}

/// Processes one user message in an existing session.
pub fn handle_message(
    store: &SessionStore,
    session_id: &str,
    text: &str,
    pipeline: &Pipeline,
) -> Result<Vec<BotResponse>> {
    store.with_tracker(session_id, |tracker| pipeline.respond(tracker, text))
}
