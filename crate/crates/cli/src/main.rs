use std::path::{Path, PathBuf};
use std::process::ExitCode;

use altgen_core::backend::ENV_URL;
use altgen_core::pipeline::{self, BackendChoice, PipelineConfig, ReportFormat};
use clap::{Parser, Subcommand, ValueEnum};

mod render;

#[derive(Debug, Parser)]
#[command(name = "altgen", version, about = "Audit and repair image alt text in EPUB files")]
struct Cli {
    /// `stub` or the base URL of a caption service.
    #[arg(long, global = true)]
    backend: Option<String>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true, value_enum)]
    report: Option<Format>,
    /// Fail a file when any of its images cannot be captioned.
    #[arg(long, global = true)]
    strict: bool,
    /// JSON file with pipeline settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Report accessibility issues without changing anything.
    Audit {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Write repaired copies to the output directory.
    Repair {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Score written alt text against reference descriptions.
    Validate {
        dir: PathBuf,
        #[arg(long)]
        references: PathBuf,
    },
}

fn config_sets_backend(path: &Path) -> bool {
    std::fs::read_to_string(path)
        .ok()
        .and_then(|t| serde_json::from_str::<serde_json::Value>(&t).ok())
        .is_some_and(|v| v.get("backend").is_some())
}

fn build_config(cli: &Cli) -> Result<PipelineConfig, pipeline::PipelineError> {
    let mut config = match &cli.config {
        Some(p) => PipelineConfig::from_file(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(b) = &cli.backend {
        config.backend = BackendChoice::from(b.clone());
    } else if !cli.config.as_deref().is_some_and(config_sets_backend) {
        if let Some(url) = std::env::var(ENV_URL).ok().filter(|u| !u.trim().is_empty()) {
            config.backend = BackendChoice::Remote(url);
        }
    }
    if let Some(j) = cli.jobs {
        config.jobs = j;
    }
    if let Some(f) = cli.report {
        config.report_format = match f {
            Format::Json => ReportFormat::Json,
            Format::Text => ReportFormat::Text,
        };
    }
    config.strict |= cli.strict;
    if let Command::Repair { output, .. } = &cli.command {
        config.output_dir = Some(output.clone());
    }
    config.validate()?;
    Ok(config)
}

fn emit<T: serde::Serialize>(config: &PipelineConfig, value: &T, text: impl FnOnce() -> String) {
    match config.report_format {
        ReportFormat::Json => println!("{}", serde_json::to_string_pretty(value).expect("report serializes")),
        ReportFormat::Text => print!("{}", text()),
    }
}

fn run(cli: &Cli) -> Result<i32, pipeline::PipelineError> {
    let config = build_config(cli)?;
    match &cli.command {
        Command::Audit { paths } => {
            let run = pipeline::run_audit(paths, &config)?;
            emit(&config, &run, || render::audit(&run));
            Ok(run.exit_code())
        }
        Command::Repair { paths, .. } => {
            let backend = config.make_backend()?;
            let run = pipeline::run_repair(paths, &config, backend.as_ref())?;
            emit(&config, &run, || render::repair(&run));
            Ok(run.exit_code())
        }
        Command::Validate { dir, references } => {
            let backend = config.make_backend()?;
            let run = pipeline::run_validate(dir, references, &config, backend.as_ref())?;
            emit(&config, &run, || render::validate(&run));
            Ok(run.exit_code())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("altgen: {e}");
            ExitCode::from(2)
        }
    }
}
