//! Response wording, loaded from an editable YAML file.
//!
//! Each of the ten templates has a `text` with optional `{topic}` and
//! `{location}` markers, a slot-free `fallback` used when a referenced slot
//! is unset, and either static `buttons` or a `button_source` of `topics`
//! or `locations`. The `action_search` entry words the header above the
//! result links. `messages` holds wording that is not tied to an action.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dialogue::{Action, DatasetSearch, Tracker};
use crate::error::{Error, Result};
use crate::intent::{format_payload, parse_payload, Intent, SlotWrites};

pub const MAX_BUTTONS: usize = 6;
pub const MAX_LINKS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Button {
    pub title: String,
    pub payload: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    pub title: String,
    pub url: String,
}

/// One bot message: text plus optional quick-reply buttons and dataset
/// links.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BotResponse {
    pub text: String,
    #[serde(default)]
    pub buttons: Vec<Button>,
    #[serde(default)]
    pub links: Vec<Link>,
}

impl BotResponse {
    pub fn text(text: impl Into<String>) -> Self {
        BotResponse {
            text: text.into(),
            buttons: Vec::new(),
            links: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ButtonSource {
    Topics,
    Locations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Template {
    pub text: String,
    #[serde(default)]
    pub fallback: Option<String>,
    #[serde(default)]
    pub buttons: Vec<Button>,
    #[serde(default)]
    pub button_source: Option<ButtonSource>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Messages {
    /// Prefixed to the repeated question after a low-confidence turn.
    pub clarify: String,
    /// Sent when a button payload cannot be parsed or applied.
    pub payload_error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TemplateFile {
    responses: BTreeMap<String, Template>,
    messages: Messages,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Templates {
    responses: BTreeMap<Action, Template>,
    messages: Messages,
}

fn markers(text: &str) -> impl Iterator<Item = &str> {
    text.split('{')
        .skip(1)
        .filter_map(|rest| rest.split_once('}').map(|(name, _)| name))
}

impl Templates {
    pub fn parse(source: &str) -> Result<Self> {
        let file: TemplateFile =
            serde_yaml::from_str(source).map_err(|e| Error::Template(e.to_string()))?;
        let mut responses = BTreeMap::new();
        for (name, template) in file.responses {
            let action: Action = name.parse()?;
            if action == Action::ActionListen {
                return Err(Error::Template("action_listen has no wording".into()));
            }
            for marker in markers(&template.text) {
                if !crate::dialogue::SLOT_NAMES.contains(&marker) {
                    return Err(Error::Template(format!("{name}: unknown marker {{{marker}}}")));
                }
            }
            if let Some(fallback) = &template.fallback {
                if markers(fallback).next().is_some() {
                    return Err(Error::Template(format!("{name}: fallback must be slot-free")));
                }
            }
            if template.buttons.len() > MAX_BUTTONS {
                return Err(Error::Template(format!("{name}: more than {MAX_BUTTONS} buttons")));
            }
            for button in &template.buttons {
                match parse_payload(&button.payload) {
                    Ok(Some(_)) => {}
                    _ => {
                        return Err(Error::Template(format!(
                            "{name}: button payload `{}` does not parse",
                            button.payload
                        )))
                    }
                }
            }
            responses.insert(action, template);
        }
        for action in Action::TEMPLATES.into_iter().chain([Action::ActionSearch]) {
            if !responses.contains_key(&action) {
                return Err(Error::Template(format!("missing response for {action}")));
            }
        }
        Ok(Templates {
            responses,
            messages: file.messages,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let source = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Templates::parse(&source).map_err(|e| match e {
            Error::Template(msg) => Error::parse(path, msg),
            other => other,
        })
    }

    pub fn messages(&self) -> &Messages {
        &self.messages
    }

    pub fn template(&self, action: Action) -> Option<&Template> {
        self.responses.get(&action)
    }

    /// Interpolates slot markers, falling back to the slot-free wording when
    /// a referenced slot is unset.
    fn fill(&self, action: Action, tracker: &Tracker) -> String {
        let template = &self.responses[&action];
        let slots = tracker.slots();
        let mut text = template.text.clone();
        for marker in markers(&template.text).collect::<Vec<_>>() {
            let value = match marker {
                "topic" => slots.topic.as_deref(),
                "location" => slots.location.as_deref(),
                _ => None,
            };
            match value {
                Some(v) => text = text.replace(&format!("{{{marker}}}"), v),
                None => {
                    return template
                        .fallback
                        .clone()
                        .unwrap_or_else(|| text.replace(&format!("{{{marker}}}"), ""))
                }
            }
        }
        text
    }

    /// Renders a template action, or the stored results of the search
    /// action. Search with no stored results renders `utter_no_results`.
    ///
    /// Panics on `action_listen`, which produces no message.
    pub fn render(&self, action: Action, tracker: &Tracker, search: &dyn DatasetSearch) -> BotResponse {
        assert!(action != Action::ActionListen, "action_listen is not rendered");
        if action == Action::ActionSearch {
            if tracker.results().is_empty() {
                return self.render(Action::UtterNoResults, tracker, search);
            }
            let mut response = BotResponse::text(self.fill(action, tracker));
            response.links = tracker
                .results()
                .iter()
                .take(MAX_LINKS)
                .map(|r| Link {
                    title: r.title.clone(),
                    url: r.url.clone(),
                })
                .collect();
            return response;
        }
        let template = &self.responses[&action];
        let mut response = BotResponse::text(self.fill(action, tracker));
        response.buttons = match template.button_source {
            Some(ButtonSource::Topics) => option_buttons(
                search.topic_options(MAX_BUTTONS),
                Intent::AddKeyword,
                "topic",
            ),
            Some(ButtonSource::Locations) => option_buttons(
                search.location_options(MAX_BUTTONS),
                Intent::AddLocation,
                "location",
            ),
            None => template.buttons.clone(),
        };
        response.buttons.truncate(MAX_BUTTONS);
        response
    }
}

fn option_buttons(options: Vec<String>, intent: Intent, slot: &str) -> Vec<Button> {
    options
        .into_iter()
        .map(|option| {
            let mut slots = SlotWrites::new();
            slots.insert(slot.to_string(), option.clone());
            Button {
                payload: format_payload(intent, &slots),
                title: option,
            }
        })
        .collect()
}

/// Renders one action; see [`Templates::render`].
pub fn render_action(
    templates: &Templates,
    action: Action,
    tracker: &Tracker,
    search: &dyn DatasetSearch,
) -> BotResponse {
    templates.render(action, tracker, search)
}
