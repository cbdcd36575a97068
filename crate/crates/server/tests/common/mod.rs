#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use odbot::config::ServingData;
use odbot_core::bundle::{train_bundle, ModelBundle, TrainingConfig, TrainingSources};
use odbot_core::dialogue::{BotResponse, Templates};
use odbot_core::entity::Gazetteer;
use odbot_core::index::Index;
use odbot_core::service::{handle_message, Pipeline, SessionStore};
use serde::{Deserialize, Serialize};

pub fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

pub fn training_sources() -> TrainingSources {
    TrainingSources::read(&data("nlu.yml"), &data("stories.yml"), &data("templates.yml")).unwrap()
}

/// The bundle trained from the shipped data with the default seed, trained
/// once per test binary.
pub fn bundle() -> &'static ModelBundle {
    static BUNDLE: OnceLock<ModelBundle> = OnceLock::new();
    BUNDLE.get_or_init(|| train_bundle(&training_sources(), &TrainingConfig::default()).unwrap())
}

pub fn pipeline_with(bundle: ModelBundle) -> Pipeline {
    Pipeline::new(
        bundle,
        Gazetteer::load(data("gazetteer.txt")).unwrap(),
        Index::load(data("catalog.jsonl")).unwrap().0,
        Templates::load(data("templates.yml")).unwrap(),
    )
}

pub fn pipeline() -> Pipeline {
    pipeline_with(bundle().clone())
}

pub fn serving_data(model_dir: &Path) -> ServingData {
    ServingData {
        model_dir: model_dir.to_path_buf(),
        templates: data("templates.yml"),
        gazetteer: data("gazetteer.txt"),
        catalog: data("catalog.jsonl"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub user: String,
    pub bot: Vec<BotResponse>,
}

pub type Transcript = Vec<Exchange>;

pub const GREET: &[&str] = &["hi"];

pub const EXPLORE: &[&str] = &[
    "hi",
    "/explore",
    r#"/add_keyword{"topic":"education"}"#,
    r#"/add_location{"location":"Graz"}"#,
];

pub const SEARCH_THEN_EXPLORE: &[&str] = &[
    "hello",
    "/search",
    "Could I go back to explore?",
    r#"/add_keyword{"topic":"health care"}"#,
    r#"/add_location{"location":"Vienna"}"#,
];

pub const GOLDEN: [(&str, &[&str]); 3] = [
    ("greet", GREET),
    ("explore", EXPLORE),
    ("search_then_explore", SEARCH_THEN_EXPLORE),
];

/// Sends `messages` one by one to session `id`, which is created first.
pub fn converse(pipeline: &Pipeline, store: &SessionStore, id: &str, messages: &[&str]) -> Transcript {
    store.create_with_id(id).unwrap();
    messages
        .iter()
        .map(|m| Exchange {
            user: m.to_string(),
            bot: handle_message(store, id, m, pipeline).unwrap(),
        })
        .collect()
}

pub fn golden_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(format!("{name}.json"))
}

pub fn to_json(transcript: &Transcript) -> String {
    serde_json::to_string_pretty(transcript).unwrap() + "\n"
}
