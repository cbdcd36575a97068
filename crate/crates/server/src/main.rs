use std::io;
use std::process::ExitCode;

use clap::Parser;
use odbot::app;
use odbot::config::{Cli, Command};

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Train(args) => {
            let bundle = app::train(&args)?;
            println!(
                "wrote model {} to {}",
                bundle.manifest.model_version,
                args.model_dir.display()
            );
        }
        Command::Serve(args) => {
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(odbot::serve(args))?;
        }
        Command::Chat(args) => {
            let pipeline = app::load_pipeline(&args.data)?;
            println!("model {}; type /quit to leave", pipeline.model_version());
            app::chat_loop(&pipeline, io::stdin().lock(), io::stdout().lock())?;
        }
        Command::ValidateData(data) => {
            let summary = app::validate_data(&data)?;
            println!(
                "ok: {} examples ({} with topic, {} with location), {} stories ({} distinct states)",
                summary.examples, summary.with_topic, summary.with_location, summary.stories, summary.story_states
            );
        }
        Command::Eval(args) => {
            let report = app::eval(&args.nlu, &args.stories, &args.model_dir)?;
            println!("{report}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
