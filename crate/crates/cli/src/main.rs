use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use procxai::gbdt::Variant;
use procxai::pipeline::{self, PipelineConfig, Stage, StageError};

#[derive(Parser)]
#[command(name = "procxai", version, about = "Explainable process control for defect prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML configuration file; built-in defaults apply to anything omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for all artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    model: Option<ModelArg>,

    /// Master seed; overrides every seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Write ICE/PDP plots as SVG files.
    #[arg(long, global = true)]
    plots: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    ExactGreedy,
    GossLeafwise,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage in order.
    Run,
    /// Generate a synthetic dataset with a planted defect mechanism.
    Synth,
    /// Load, check and split the input data.
    Ingest,
    /// Balance the training split with SMOTE.
    Oversample,
    /// Train the classifier and evaluate it on the test split.
    Train,
    /// Compute Shapley values and select the main features.
    Explain,
    /// Compute ICE/PDP curves and control ranges for the main features.
    Ranges,
    /// Filter the test split by the control ranges and compare defect rates.
    Validate,
    /// Render the summary from existing artifacts.
    Report,
}

fn config(cli: &Cli) -> Result<PipelineConfig, StageError> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::from_file(path),
        None => Ok(PipelineConfig::default()),
    }
    .map_err(|source| StageError {
        stage: Stage::Config,
        source,
    })?;
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    if let Some(m) = cli.model {
        cfg.model.variant = match m {
            ModelArg::ExactGreedy => Variant::ExactGreedy,
            ModelArg::GossLeafwise => Variant::GossLeafwise,
        };
    }
    if let Some(s) = cli.seed {
        cfg.seed = Some(s);
    }
    cfg.output.plots |= cli.plots;
    Ok(cfg.resolved())
}

fn execute(cli: &Cli) -> Result<(), StageError> {
    let cfg = config(cli)?;
    match cli.command {
        Command::Run => {
            let outcome = pipeline::run(&cfg)?;
            println!("main features: {}", outcome.main_features.join(", "));
            print!("{}", outcome.validation.text_table());
        }
        Command::Synth => pipeline::synth_stage(&cfg)?,
        Command::Ingest => pipeline::ingest_stage(&cfg)?,
        Command::Oversample => pipeline::oversample_stage(&cfg)?,
        Command::Train => pipeline::train_stage(&cfg)?,
        Command::Explain => pipeline::explain_stage(&cfg)?,
        Command::Ranges => pipeline::ranges_stage(&cfg)?,
        Command::Validate => pipeline::validate_stage(&cfg)?,
        Command::Report => pipeline::report_stage(&cfg)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.stage.exit_code())
        }
    }
}
