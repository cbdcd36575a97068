use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_ACTIONS: usize = 12;

/// Everything the bot can do in a turn: ten response templates, the
/// catalog search, and `action_listen`, which hands the turn back.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    UtterGreet,
    UtterAskMode,
    UtterAskTopic,
    UtterAskTopicOptions,
    UtterAskLocationOptions,
    UtterConfirmSearch,
    UtterNoResults,
    UtterAnythingElse,
    UtterGoodbye,
    UtterYoureWelcome,
    ActionSearch,
    ActionListen,
}

impl Action {
    pub const ALL: [Action; NUM_ACTIONS] = [
        Action::UtterGreet,
        Action::UtterAskMode,
        Action::UtterAskTopic,
        Action::UtterAskTopicOptions,
        Action::UtterAskLocationOptions,
        Action::UtterConfirmSearch,
        Action::UtterNoResults,
        Action::UtterAnythingElse,
        Action::UtterGoodbye,
        Action::UtterYoureWelcome,
        Action::ActionSearch,
        Action::ActionListen,
    ];

    pub const TEMPLATES: [Action; 10] = [
        Action::UtterGreet,
        Action::UtterAskMode,
        Action::UtterAskTopic,
        Action::UtterAskTopicOptions,
        Action::UtterAskLocationOptions,
        Action::UtterConfirmSearch,
        Action::UtterNoResults,
        Action::UtterAnythingElse,
        Action::UtterGoodbye,
        Action::UtterYoureWelcome,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Action {
        Self::ALL[index]
    }

    pub fn is_template(self) -> bool {
        !matches!(self, Action::ActionSearch | Action::ActionListen)
    }

    /// Actions that pose a question to the user; a low-confidence turn
    /// repeats the most recent one.
    pub fn is_question(self) -> bool {
        matches!(
            self,
            Action::UtterAskMode
                | Action::UtterAskTopic
                | Action::UtterAskTopicOptions
                | Action::UtterAskLocationOptions
                | Action::UtterAnythingElse
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Action::UtterGreet => "utter_greet",
            Action::UtterAskMode => "utter_ask_mode",
            Action::UtterAskTopic => "utter_ask_topic",
            Action::UtterAskTopicOptions => "utter_ask_topic_options",
            Action::UtterAskLocationOptions => "utter_ask_location_options",
            Action::UtterConfirmSearch => "utter_confirm_search",
            Action::UtterNoResults => "utter_no_results",
            Action::UtterAnythingElse => "utter_anything_else",
            Action::UtterGoodbye => "utter_goodbye",
            Action::UtterYoureWelcome => "utter_youre_welcome",
            Action::ActionSearch => "action_search",
            Action::ActionListen => "action_listen",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Action {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Action::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::UnknownAction(s.to_string()))
    }
}
