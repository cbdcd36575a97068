//! Command-line interface. Every flag can also be set through an
//! environment variable named after it with an `ODBOT_` prefix, e.g.
//! `ODBOT_MODEL_DIR`.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "odbot", version, about = "Conversational search over an Open Data catalog")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the tagger, intent classifier and policy; write a model bundle.
    Train(TrainArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
    /// Talk to the bot in the terminal.
    Chat(ChatArgs),
    /// Check the training corpus, stories and templates.
    ValidateData(TrainingData),
    /// Print training-fit metrics for a trained bundle.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Args)]
pub struct TrainingData {
    #[arg(long, env = "ODBOT_NLU", default_value = "data/nlu.yml")]
    pub nlu: PathBuf,
    #[arg(long, env = "ODBOT_STORIES", default_value = "data/stories.yml")]
    pub stories: PathBuf,
    #[arg(long, env = "ODBOT_TEMPLATES", default_value = "data/templates.yml")]
    pub templates: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ServingData {
    #[arg(long, env = "ODBOT_MODEL_DIR", default_value = "models")]
    pub model_dir: PathBuf,
    #[arg(long, env = "ODBOT_TEMPLATES", default_value = "data/templates.yml")]
    pub templates: PathBuf,
    #[arg(long, env = "ODBOT_GAZETTEER", default_value = "data/gazetteer.txt")]
    pub gazetteer: PathBuf,
    #[arg(long, env = "ODBOT_CATALOG", default_value = "data/catalog.jsonl")]
    pub catalog: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: TrainingData,
    #[arg(long, env = "ODBOT_MODEL_DIR", default_value = "models")]
    pub model_dir: PathBuf,
    #[arg(long, env = "ODBOT_SEED", default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub data: ServingData,
    #[arg(long, env = "ODBOT_PORT", default_value_t = 8080)]
    pub port: u16,
    #[arg(long, env = "ODBOT_TTL_MINUTES", default_value_t = 30)]
    pub ttl_minutes: u64,
    /// Origin allowed to call the API from a browser. Repeatable; in the
    /// environment variable, separate origins with commas.
    #[arg(long, env = "ODBOT_ALLOWED_ORIGIN", value_delimiter = ',')]
    pub allowed_origin: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ChatArgs {
    #[command(flatten)]
    pub data: ServingData,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long, env = "ODBOT_NLU", default_value = "data/nlu.yml")]
    pub nlu: PathBuf,
    #[arg(long, env = "ODBOT_STORIES", default_value = "data/stories.yml")]
    pub stories: PathBuf,
    #[arg(long, env = "ODBOT_MODEL_DIR", default_value = "models")]
    pub model_dir: PathBuf,
}
