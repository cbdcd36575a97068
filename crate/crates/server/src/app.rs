//! What each subcommand does, separated from argument parsing so tests can
//! call it directly.

use std::io::{BufRead, Write};
use std::path::Path;

use anyhow::{bail, Context};
use odbot_core::bundle::{sha256_hex, train_bundle, ModelBundle, TrainingConfig, TrainingSources};
use odbot_core::corpus::{validate_corpus, CorpusFloors, NluCorpus};
use odbot_core::dialogue::{load_stories, training_pairs, BotResponse, Templates, Tracker};
use odbot_core::entity::{EntityType, Gazetteer};
use odbot_core::eval::{evaluate, EvalReport};
use odbot_core::index::Index;
use odbot_core::service::Pipeline;

use crate::config::{ServingData, TrainArgs, TrainingData};

fn require_file(path: &Path) -> anyhow::Result<()> {
    if !path.is_file() {
        bail!("missing file: {}", path.display());
    }
    Ok(())
}

fn require_dir(path: &Path) -> anyhow::Result<()> {
    if !path.is_dir() {
        bail!("missing model bundle directory: {}", path.display());
    }
    Ok(())
}

/// Fails naming the first missing input a server or chat session needs.
pub fn check_serving_files(data: &ServingData) -> anyhow::Result<()> {
    require_dir(&data.model_dir)?;
    require_file(&data.model_dir.join("manifest.json"))?;
    for path in [&data.templates, &data.gazetteer, &data.catalog] {
        require_file(path)?;
    }
    Ok(())
}

/// Loads the bundle, templates, gazetteer and catalog.
pub fn load_pipeline(data: &ServingData) -> anyhow::Result<Pipeline> {
    check_serving_files(data)?;
    let bundle = ModelBundle::load(&data.model_dir)
        .with_context(|| format!("loading model bundle {}", data.model_dir.display()))?;

    let template_source = std::fs::read_to_string(&data.templates)
        .with_context(|| format!("reading {}", data.templates.display()))?;
    if sha256_hex(template_source.as_bytes()) != bundle.manifest.templates_sha256 {
        log::warn!(
            "{} differs from the templates the bundle was trained with",
            data.templates.display()
        );
    }
    let templates = Templates::parse(&template_source)
        .with_context(|| format!("parsing {}", data.templates.display()))?;
    let gazetteer = Gazetteer::load(&data.gazetteer)?;
    let (index, report) = Index::load(&data.catalog)?;
    if report.skipped > 0 || !report.malformed_lines.is_empty() {
        log::warn!(
            "{}: skipped {} records without title or url, malformed lines {:?}",
            data.catalog.display(),
            report.skipped,
            report.malformed_lines
        );
    }
    log::info!(
        "loaded model {} with {} catalog records",
        bundle.manifest.model_version,
        index.records().len()
    );
    Ok(Pipeline::new(bundle, gazetteer, index, templates))
}

fn read_sources(data: &TrainingData) -> anyhow::Result<TrainingSources> {
    for path in [&data.nlu, &data.stories, &data.templates] {
        require_file(path)?;
    }
    Ok(TrainingSources::read(&data.nlu, &data.stories, &data.templates)?)
}

/// Trains and saves a bundle, returning it.
pub fn train(args: &TrainArgs) -> anyhow::Result<ModelBundle> {
    let sources = read_sources(&args.data)?;
    let bundle = train_bundle(&sources, &TrainingConfig::with_seed(args.seed)).context("training failed")?;
    bundle
        .save(&args.model_dir)
        .with_context(|| format!("writing {}", args.model_dir.display()))?;
    Ok(bundle)
}

/// Summary of a successful data check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataSummary {
    pub examples: usize,
    pub with_topic: usize,
    pub with_location: usize,
    pub stories: usize,
    pub story_states: usize,
}

/// Validates the corpus floors and span rules, the stories (names, slots,
/// conflicts) and the templates. Any finding is an error listing all of
/// them.
pub fn validate_data(data: &TrainingData) -> anyhow::Result<DataSummary> {
    let sources = read_sources(data)?;
    let mut problems = Vec::new();

    let corpus = NluCorpus::parse(&sources.nlu).with_context(|| format!("parsing {}", data.nlu.display()))?;
    let report = validate_corpus(&corpus, &CorpusFloors::default());
    problems.extend(
        report
            .violations
            .iter()
            .map(|v| format!("{}: {v}", data.nlu.display())),
    );

    let mut stories = 0;
    let mut story_states = 0;
    match load_stories(&data.stories) {
        Ok(parsed) => {
            stories = parsed.len();
            match training_pairs(&parsed) {
                Ok(pairs) => story_states = pairs.len(),
                Err(e) => problems.push(format!("{}: {e}", data.stories.display())),
            }
        }
        Err(e) => problems.push(e.to_string()),
    }
    if let Err(e) = Templates::parse(&sources.templates) {
        problems.push(format!("{}: {e}", data.templates.display()));
    }

    if !problems.is_empty() {
        bail!("data validation failed:\n- {}", problems.join("\n- "));
    }
    Ok(DataSummary {
        examples: corpus.examples.len(),
        with_topic: corpus.examples.iter().filter(|e| e.has_entity(EntityType::Topic)).count(),
        with_location: corpus
            .examples
            .iter()
            .filter(|e| e.has_entity(EntityType::Location))
            .count(),
        stories,
        story_states,
    })
}

pub fn eval(nlu: &Path, stories: &Path, model_dir: &Path) -> anyhow::Result<EvalReport> {
    require_file(nlu)?;
    require_file(stories)?;
    require_dir(model_dir)?;
    let bundle = ModelBundle::load(model_dir)?;
    let corpus = NluCorpus::load(nlu)?;
    let stories = load_stories(stories)?;
    Ok(evaluate(&bundle, &corpus, &stories))
}

/// Plain-text rendering of one bot response for the terminal.
pub fn format_response(response: &BotResponse) -> String {
    let mut out = format!("bot> {}", response.text);
    for button in &response.buttons {
        out.push_str(&format!("\n      [{}] {}", button.title, button.payload));
    }
    for link in &response.links {
        out.push_str(&format!("\n      - {} <{}>", link.title, link.url));
    }
    out
}

/// Reads user lines until end of input or `/quit` and writes the bot's
/// answers. Button payloads can be typed directly.
pub fn chat_loop(pipeline: &Pipeline, input: impl BufRead, mut output: impl Write) -> anyhow::Result<()> {
    let mut tracker = Tracker::new("terminal")?;
    write!(output, "you> ")?;
    output.flush()?;
    for line in input.lines() {
        let line = line?;
        let text = line.trim();
        if text == "/quit" {
            break;
        }
        if !text.is_empty() {
            for response in pipeline.respond(&mut tracker, text) {
                writeln!(output, "{}", format_response(&response))?;
            }
        }
        write!(output, "you> ")?;
        output.flush()?;
    }
    writeln!(output)?;
    Ok(())
}
