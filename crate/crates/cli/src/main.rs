//! `afrr <command> --config <path> [--override key=value]... [--workers N]`
//!
//! Exit codes: 0 ok, 1 usage, 2 data error, 3 runtime error. Failures print
//! one JSON line on stderr.

use std::path::PathBuf;
use std::process::ExitCode;

use afrr_core::pipeline::{run_command, Command, RunConfig};
use afrr_core::{Error, ErrorCategory};
use clap::{Parser, ValueEnum};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Fetch,
    Synth,
    Features,
    Split,
    Tune,
    Train,
    Predict,
    Evaluate,
    Explain,
    Report,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Fetch => Command::Fetch,
            Cmd::Synth => Command::Synth,
            Cmd::Features => Command::Features,
            Cmd::Split => Command::Split,
            Cmd::Tune => Command::Tune,
            Cmd::Train => Command::Train,
            Cmd::Predict => Command::Predict,
            Cmd::Evaluate => Command::Evaluate,
            Cmd::Explain => Command::Explain,
            Cmd::Report => Command::Report,
        }
    }
}

/// Explainable gradient-boosted models of activated aFRR.
#[derive(Debug, Parser)]
#[command(name = "afrr", version)]
struct Args {
    #[arg(value_enum)]
    command: Cmd,

    /// Run configuration (TOML).
    #[arg(long, short)]
    config: PathBuf,

    /// Overrides a config value, e.g. `train.num_rounds=200`. Repeatable.
    #[arg(long = "override", short = 'o', value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Worker threads for training and explanation.
    #[arg(long)]
    workers: Option<usize>,
}

fn exit_code(category: ErrorCategory) -> u8 {
    match category {
        ErrorCategory::Usage => 1,
        ErrorCategory::Data => 2,
        ErrorCategory::Runtime => 3,
    }
}

fn error_line(category: &str, code: &str, message: &str) -> String {
    serde_json::json!({ "error": { "category": category, "code": code, "message": message } })
        .to_string()
}

fn fail(e: &Error) -> ExitCode {
    let category = match e.category() {
        ErrorCategory::Usage => "usage",
        ErrorCategory::Data => "data",
        ErrorCategory::Runtime => "runtime",
    };
    eprintln!("{}", error_line(category, e.code(), &e.to_string()));
    ExitCode::from(exit_code(e.category()))
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.render().to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            let first = first.strip_prefix("error: ").unwrap_or(first);
            eprintln!("{}", error_line("usage", "arguments", first));
            return ExitCode::from(1);
        }
    };
    let config = match RunConfig::load(&args.config, &args.overrides) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    match run_command(&config, args.command.into(), args.workers) {
        Ok(summary) => {
            for a in &summary.artifacts {
                println!("{}  {}", a.sha256, a.path);
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}
