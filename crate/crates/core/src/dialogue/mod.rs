//! Dialogue state tracking and next-action selection.

mod action;
pub mod policy;
mod story;
mod templates;
mod tracker;

pub use action::{Action, NUM_ACTIONS};
pub use policy::{featurize_state, PolicyModel, PolicyTrainingConfig, StateVector, STATE_DIM};
pub use story::{
    load_stories, parse_stories, story_replay_accuracy, train_policy, train_policy_with,
    training_pairs, unroll, Story, StoryStep, StoryStepExample,
};
pub use templates::{
    render_action, BotResponse, Button, ButtonSource, Link, Messages, Template, Templates,
    MAX_BUTTONS, MAX_LINKS,
};
pub use tracker::{update_tracker, Event, Mode, ResultLink, Slots, Tracker, SLOT_NAMES};

use crate::intent::IntentSignal;

/// Longest run of actions in one bot turn, `action_listen` included.
pub const MAX_ACTIONS_PER_TURN: usize = 10;

/// The catalog operations the dialogue needs: the search action and the
/// option lists behind the explore buttons.
pub trait DatasetSearch {
    fn search(&self, topic: Option<&str>, location: Option<&str>) -> Vec<ResultLink>;
    fn topic_options(&self, limit: usize) -> Vec<String>;
    fn location_options(&self, limit: usize) -> Vec<String>;
}

/// What one bot turn did.
#[derive(Debug, Clone, PartialEq)]
pub struct Turn {
    pub actions: Vec<Action>,
    pub responses: Vec<BotResponse>,
    /// Set when the turn hit [`MAX_ACTIONS_PER_TURN`] without the policy
    /// choosing `action_listen`.
    pub runaway: bool,
}

/// Runs the bot side of a turn: predict, execute, record, until the policy
/// predicts `action_listen` or the action limit is reached.
///
/// After a low-confidence message the policy is bypassed: the bot apologises
/// and repeats its last question (the mode question if it has asked none).
pub fn select_actions(
    policy: &PolicyModel,
    tracker: &mut Tracker,
    templates: &Templates,
    search: &dyn DatasetSearch,
) -> Turn {
    let mut turn = Turn {
        actions: Vec::new(),
        responses: Vec::new(),
        runaway: false,
    };

    if tracker.latest_signal() == Some(IntentSignal::LowConfidence) {
        let question = tracker.last_question().unwrap_or(Action::UtterAskMode);
        turn.responses
            .push(BotResponse::text(templates.messages().clarify.clone()));
        tracker.record_action(question, None);
        turn.responses.push(templates.render(question, tracker, search));
        tracker.record_action(Action::ActionListen, None);
        turn.actions = vec![question, Action::ActionListen];
        return turn;
    }

    while turn.actions.len() < MAX_ACTIONS_PER_TURN {
        let action = policy.predict(&featurize_state(tracker));
        turn.actions.push(action);
        match action {
            Action::ActionListen => {
                tracker.record_action(action, None);
                return turn;
            }
            Action::ActionSearch => {
                let slots = tracker.slots();
                let results = search.search(slots.topic.as_deref(), slots.location.as_deref());
                tracker.record_action(action, Some(results));
            }
            _ => tracker.record_action(action, None),
        }
        turn.responses.push(templates.render(action, tracker, search));
    }

    log::warn!(
        "policy fault in session {}: no action_listen after {} actions: {:?}",
        tracker.session_id(),
        MAX_ACTIONS_PER_TURN,
        turn.actions
    );
    tracker.record_action(Action::ActionListen, None);
    turn.runaway = true;
    turn
}
