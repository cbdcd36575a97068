//! Versioned on-disk model bundle: a directory holding the trained tagger,
//! intent classifier and policy plus a manifest describing how they were
//! trained.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{validate_corpus, CorpusFloors, NluCorpus};
use crate::dialogue::{parse_stories, policy::STATE_LAYOUT_VERSION, train_policy_with, PolicyModel, PolicyTrainingConfig, Story, Templates};
use crate::entity::{train_crf_traced, CrfModel, CrfTrainingConfig};
use crate::error::{Error, Result};
use crate::intent::{train_intent_model, IntentModel, IntentTrainingConfig};

pub const BUNDLE_FORMAT_VERSION: u32 = 1;

const MANIFEST: &str = "manifest.json";
const CRF: &str = "crf.json";
const INTENT: &str = "intent.json";
const POLICY: &str = "policy.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub model_version: String,
    pub seed: u64,
    pub nlu_sha256: String,
    pub stories_sha256: String,
    pub templates_sha256: String,
    pub state_layout_version: u32,
    pub crf_regularization: f64,
    pub crf_iterations: usize,
    pub intent_epochs: usize,
    pub intent_regularization: f64,
    pub policy_epochs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub manifest: Manifest,
    pub crf: CrfModel,
    pub intent: IntentModel,
    pub policy: PolicyModel,
}

/// Hyperparameters for every model in the bundle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingConfig {
    pub seed: u64,
    pub crf: CrfTrainingConfig,
    pub intent: IntentTrainingConfig,
    pub policy: PolicyTrainingConfig,
    pub floors: CorpusFloors,
}

impl TrainingConfig {
    pub fn with_seed(seed: u64) -> Self {
        TrainingConfig {
            seed,
            crf: CrfTrainingConfig::default(),
            intent: IntentTrainingConfig {
                seed,
                ..IntentTrainingConfig::default()
            },
            policy: PolicyTrainingConfig {
                seed,
                ..PolicyTrainingConfig::default()
            },
            floors: CorpusFloors::default(),
        }
    }
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig::with_seed(42)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Raw training inputs. Hashes are taken over these exact bytes.
#[derive(Debug, Clone)]
pub struct TrainingSources {
    pub nlu: String,
    pub stories: String,
    pub templates: String,
}

impl TrainingSources {
    pub fn read(nlu: &Path, stories: &Path, templates: &Path) -> Result<Self> {
        let read = |p: &Path| fs::read_to_string(p).map_err(|e| Error::io(p, e));
        Ok(TrainingSources {
            nlu: read(nlu)?,
            stories: read(stories)?,
            templates: read(templates)?,
        })
    }
}

/// Parses, validates and trains everything. Corpus floor violations and
/// story conflicts fail training.
pub fn train_bundle(sources: &TrainingSources, config: &TrainingConfig) -> Result<ModelBundle> {
    let corpus = NluCorpus::parse(&sources.nlu)?;
    let report = validate_corpus(&corpus, &config.floors);
    if !report.is_valid() {
        return Err(Error::Corpus(format!("validation failed:\n{report}")));
    }
    let stories = parse_stories(&sources.stories)?;
    // Templates are not trained on, but must be loadable at serve time.
    Templates::parse(&sources.templates)?;
    train_models(&corpus, &stories, sources, config)
}

fn train_models(
    corpus: &NluCorpus,
    stories: &[Story],
    sources: &TrainingSources,
    config: &TrainingConfig,
) -> Result<ModelBundle> {
    let crf = train_crf_traced(&corpus.labeled_sequences(), &config.crf)?.model;
    let intent = train_intent_model(&corpus.intent_pairs(), &config.intent)?;
    let policy = train_policy_with(stories, &config.policy)?;

    let nlu_sha256 = sha256_hex(sources.nlu.as_bytes());
    let stories_sha256 = sha256_hex(sources.stories.as_bytes());
    let templates_sha256 = sha256_hex(sources.templates.as_bytes());
    let model_version = format!(
        "{BUNDLE_FORMAT_VERSION}-{}",
        &sha256_hex(format!("{nlu_sha256}{stories_sha256}{}", config.seed).as_bytes())[..12]
    );
    let manifest = Manifest {
        format_version: BUNDLE_FORMAT_VERSION,
        model_version,
        seed: config.seed,
        nlu_sha256,
        stories_sha256,
        templates_sha256,
        state_layout_version: STATE_LAYOUT_VERSION,
        crf_regularization: config.crf.regularization,
        crf_iterations: config.crf.iterations,
        intent_epochs: config.intent.epochs,
        intent_regularization: config.intent.regularization,
        policy_epochs: config.policy.epochs,
    };
    Ok(ModelBundle {
        manifest,
        crf,
        intent,
        policy,
    })
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let path = dir.join(name);
    let json = serde_json::to_string_pretty(value).map_err(|e| Error::parse(&path, e))?;
    fs::write(&path, json).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(dir: &Path, name: &str) -> Result<T> {
    let path: PathBuf = dir.join(name);
    let source = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&source).map_err(|e| Error::parse(path, e))
}

impl ModelBundle {
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_json(dir, CRF, &self.crf)?;
        write_json(dir, INTENT, &self.intent)?;
        write_json(dir, POLICY, &self.policy)?;
        // Manifest last: its presence marks a complete bundle.
        write_json(dir, MANIFEST, &self.manifest)
    }

    /// Loads a bundle, refusing any other format version.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest: Manifest = read_json(dir, MANIFEST)?;
        if manifest.format_version != BUNDLE_FORMAT_VERSION {
            return Err(Error::BundleVersion {
                found: manifest.format_version,
                expected: BUNDLE_FORMAT_VERSION,
            });
        }
        let policy: PolicyModel = read_json(dir, POLICY)?;
        if policy.layout_version() != manifest.state_layout_version
            || policy.layout_version() != STATE_LAYOUT_VERSION
        {
            return Err(Error::parse(
                dir.join(POLICY),
                format!("state layout {} is not supported", policy.layout_version()),
            ));
        }
        Ok(ModelBundle {
            crf: read_json(dir, CRF)?,
            intent: read_json(dir, INTENT)?,
            policy,
            manifest,
        })
    }
}
