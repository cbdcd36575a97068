//! Hand-written training conversations for the policy.
//!
//! ```yaml
//! stories:
//!   - story: greet
//!     steps:
//!       - intent: greeting
//!       - action: utter_greet
//!       - action: utter_ask_mode
//! ```
//!
//! A user step may carry `slots: {topic: ..., location: ...}`. A search step
//! may carry `results: false` to describe an empty result list. Every run of
//! bot steps ends with an implicit `action_listen`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::dialogue::policy::{describe_state, featurize_state, fit_policy, PolicyTrainingConfig, StateVector};
use crate::dialogue::{Action, PolicyModel, ResultLink, Tracker};
use crate::error::{Error, Result};
use crate::intent::{Intent, SlotWrites};

#[derive(Debug, Clone, PartialEq)]
pub enum StoryStep {
    User { intent: Intent, slots: SlotWrites },
    Bot { action: Action, results: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Story {
    pub name: String,
    pub steps: Vec<StoryStep>,
}

#[derive(Deserialize)]
struct StoryFile {
    stories: Vec<RawStory>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStory {
    story: String,
    steps: Vec<RawStep>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStep {
    intent: Option<String>,
    action: Option<String>,
    #[serde(default)]
    slots: SlotWrites,
    results: Option<bool>,
}

impl Story {
    fn from_raw(raw: RawStory) -> Result<Story> {
        let fail = |reason: String| Error::Story {
            story: raw.story.clone(),
            reason,
        };
        let mut steps = Vec::with_capacity(raw.steps.len());
        for (i, step) in raw.steps.iter().enumerate() {
            let parsed = match (&step.intent, &step.action) {
                (Some(intent), None) => {
                    if step.results.is_some() {
                        return Err(fail(format!("step {i}: `results` on a user step")));
                    }
                    for name in step.slots.keys() {
                        if !crate::dialogue::SLOT_NAMES.contains(&name.as_str()) {
                            return Err(fail(format!("step {i}: unknown slot `{name}`")));
                        }
                    }
                    StoryStep::User {
                        intent: intent.parse().map_err(|e: Error| fail(format!("step {i}: {e}")))?,
                        slots: step.slots.clone(),
                    }
                }
                (None, Some(action)) => {
                    let action: Action =
                        action.parse().map_err(|e: Error| fail(format!("step {i}: {e}")))?;
                    if !step.slots.is_empty() {
                        return Err(fail(format!("step {i}: slots on a bot step")));
                    }
                    if step.results.is_some() && action != Action::ActionSearch {
                        return Err(fail(format!("step {i}: `results` on {action}")));
                    }
                    StoryStep::Bot {
                        action,
                        results: step.results.unwrap_or(true),
                    }
                }
                _ => {
                    return Err(fail(format!(
                        "step {i}: needs exactly one of `intent` or `action`"
                    )))
                }
            };
            steps.push(parsed);
        }
        match steps.first() {
            Some(StoryStep::User { .. }) => {}
            Some(StoryStep::Bot { .. }) => return Err(fail("must start with a user step".into())),
            None => return Err(fail("has no steps".into())),
        }
        Ok(Story {
            name: raw.story,
            steps,
        })
    }
}

pub fn parse_stories(source: &str) -> Result<Vec<Story>> {
    let file: StoryFile =
        serde_yaml::from_str(source).map_err(|e| Error::parse("stories", e))?;
    file.stories.into_iter().map(Story::from_raw).collect()
}

pub fn load_stories(path: impl AsRef<Path>) -> Result<Vec<Story>> {
    let path = path.as_ref();
    let source = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_stories(&source).map_err(|e| match e {
        Error::Parse { message, .. } => Error::parse(path, message),
        other => other,
    })
}

/// One supervised policy example, with the story it came from.
#[derive(Debug, Clone)]
pub struct StoryStepExample {
    pub story: String,
    pub state: StateVector,
    pub action: Action,
}

fn placeholder_results(present: bool) -> Vec<ResultLink> {
    if present {
        vec![ResultLink {
            id: "story-result".into(),
            title: "story result".into(),
            url: "about:blank".into(),
        }]
    } else {
        Vec::new()
    }
}

/// Replays a story through a fresh tracker, emitting the state before each
/// bot action together with that action.
pub fn unroll(story: &Story) -> Vec<StoryStepExample> {
    let mut tracker = Tracker::new(format!("story:{}", story.name)).expect("non-empty id");
    let mut examples = Vec::new();
    let mut pending_listen = false;

    let mut emit = |tracker: &mut Tracker, action: Action, results: bool| {
        examples.push(StoryStepExample {
            story: story.name.clone(),
            state: featurize_state(tracker),
            action,
        });
        let stored = (action == Action::ActionSearch).then(|| placeholder_results(results));
        tracker.record_action(action, stored);
    };

    for step in &story.steps {
        match step {
            StoryStep::User { intent, slots } => {
                if pending_listen {
                    emit(&mut tracker, Action::ActionListen, true);
                }
                tracker
                    .update("", (*intent).into(), Vec::new(), slots.clone())
                    .expect("slots validated at parse time");
                pending_listen = true;
            }
            StoryStep::Bot { action, results } => {
                emit(&mut tracker, *action, *results);
                pending_listen = *action != Action::ActionListen;
            }
        }
    }
    if pending_listen {
        emit(&mut tracker, Action::ActionListen, true);
    }
    examples
}

fn state_key(state: &StateVector) -> u64 {
    state
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > 0.5)
        .fold(0, |key, (i, _)| key | (1 << i))
}

/// Unrolls every story and checks that no state is paired with two
/// different actions. Returns the distinct training pairs.
pub fn training_pairs(stories: &[Story]) -> Result<Vec<StoryStepExample>> {
    let mut seen: BTreeMap<u64, StoryStepExample> = BTreeMap::new();
    let mut ordered = Vec::new();
    for story in stories {
        for example in unroll(story) {
            let key = state_key(&example.state);
            match seen.get(&key) {
                Some(prior) if prior.action != example.action => {
                    log::error!("conflicting state: {}", describe_state(&example.state));
                    return Err(Error::StoryConflict {
                        first: prior.story.clone(),
                        second: example.story.clone(),
                        first_action: prior.action.to_string(),
                        second_action: example.action.to_string(),
                    });
                }
                Some(_) => {}
                None => {
                    seen.insert(key, example.clone());
                    ordered.push(example);
                }
            }
        }
    }
    Ok(ordered)
}

/// Trains the policy on the unrolled stories and fails unless every story
/// step is reproduced.
pub fn train_policy(stories: &[Story], seed: u64) -> Result<PolicyModel> {
    train_policy_with(
        stories,
        &PolicyTrainingConfig {
            seed,
            ..PolicyTrainingConfig::default()
        },
    )
}

pub fn train_policy_with(stories: &[Story], config: &PolicyTrainingConfig) -> Result<PolicyModel> {
    if stories.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let pairs: Vec<(StateVector, Action)> = training_pairs(stories)?
        .into_iter()
        .map(|e| (e.state, e.action))
        .collect();
    let model = fit_policy(&pairs, config);
    let mismatches = model.mismatches(&pairs);
    if mismatches > 0 {
        return Err(Error::PolicyFit {
            mismatches,
            total: pairs.len(),
            epochs: config.epochs,
        });
    }
    Ok(model)
}

/// Fraction of unrolled story steps (duplicates included) the policy
/// predicts correctly.
pub fn story_replay_accuracy(policy: &PolicyModel, stories: &[Story]) -> (usize, usize) {
    let examples: Vec<_> = stories.iter().flat_map(unroll).collect();
    let correct = examples
        .iter()
        .filter(|e| policy.predict(&e.state) == e.action)
        .count();
    (correct, examples.len())
}
