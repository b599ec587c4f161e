use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ensemble_instruct::config::{ConfigError, PipelineConfig};
use ensemble_instruct::evaluate::{evaluate, render_report, EvaluateError};
use ensemble_instruct::pipeline::{self, Pipeline, PipelineError};

#[derive(Debug, Parser)]
#[command(name = "ensemble-instruct", version, about = "Synthetic instruction-tuning data by ensembling small LMs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate new instructions for both task types.
    GenInstructions(RunArgs),
    /// Generate one instance per instruction and keep the valid ones.
    GenInstances(RunArgs),
    /// Gather extra outputs, vote, and write the dataset.
    Ensemble(RunArgs),
    /// Run every generation stage, then `stats`.
    Build(RunArgs),
    /// Print per-type stage counts of a finished run.
    Stats {
        /// Run directory holding the stage artifacts.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Take the run directory from this config instead.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Score predictions against references with Rouge-L.
    Eval {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        references: PathBuf,
        /// Also write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed_path: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    rng_seed: Option<u64>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    target_a: Option<usize>,
    #[arg(long)]
    target_b: Option<usize>,
    #[arg(long)]
    parallelism: Option<usize>,
    #[arg(long)]
    retries: Option<u32>,
    #[arg(long)]
    include_seeds: Option<bool>,
    #[arg(long)]
    generator: Option<String>,
    #[arg(long)]
    aux1: Option<String>,
    #[arg(long)]
    aux2: Option<String>,
    /// Drop the auxiliary roles and keep the generator's outputs as is.
    #[arg(long, conflicts_with_all = ["aux1", "aux2"])]
    no_ensemble: bool,
}

impl RunArgs {
    fn load(&self) -> Result<PipelineConfig, ConfigError> {
        let mut cfg = PipelineConfig::load(&self.config)?;
        set(&mut cfg.seed_path, &self.seed_path);
        set(&mut cfg.out_dir, &self.out_dir);
        set(&mut cfg.rng_seed, &self.rng_seed);
        set(&mut cfg.threshold, &self.threshold);
        set(&mut cfg.targets.a, &self.target_a);
        set(&mut cfg.targets.b, &self.target_b);
        set(&mut cfg.include_seeds, &self.include_seeds);
        set(&mut cfg.roles.generator, &self.generator);
        if self.parallelism.is_some() {
            cfg.parallelism = self.parallelism;
        }
        if self.retries.is_some() {
            cfg.retries = self.retries;
        }
        if self.aux1.is_some() {
            cfg.roles.aux1 = self.aux1.clone();
        }
        if self.aux2.is_some() {
            cfg.roles.aux2 = self.aux2.clone();
        }
        if self.no_ensemble {
            cfg.roles.aux1 = None;
            cfg.roles.aux2 = None;
        }
        Ok(cfg)
    }
}

fn set<T: Clone>(dst: &mut T, src: &Option<T>) {
    if let Some(v) = src {
        *dst = v.clone();
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Evaluate(#[from] EvaluateError),
    #[error("{0}")]
    Usage(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Pipeline(e.into())
    }
}

impl CliError {
    fn category(&self) -> &'static str {
        match self {
            CliError::Pipeline(e) => e.category(),
            CliError::Evaluate(e) => e.category(),
            CliError::Usage(_) => "usage",
        }
    }

    fn exit_code(&self) -> u8 {
        match self.category() {
            "usage" | "config" => 2,
            "stage_input_missing" | "manifest" | "manifest_mismatch" => 3,
            "io" | "format" | "seed_file" => 4,
            _ => 1,
        }
    }
}

fn run(cli: Cli) -> Result<String, CliError> {
    let pipeline = |args: &RunArgs| -> Result<Pipeline, CliError> { Ok(Pipeline::new(args.load()?)?) };
    Ok(match cli.command {
        Command::GenInstructions(a) => pipeline(&a)?.gen_instructions()?,
        Command::GenInstances(a) => pipeline(&a)?.gen_instances()?,
        Command::Ensemble(a) => pipeline(&a)?.ensemble()?,
        Command::Build(a) => pipeline(&a)?.build()?,
        Command::Stats { out_dir, config } => {
            let dir = match (out_dir, config) {
                (Some(d), _) => d,
                (None, Some(c)) => PipelineConfig::load(&c)?.out_dir,
                (None, None) => return Err(CliError::Usage("stats needs --out-dir or --config".into())),
            };
            pipeline::stats(&dir)?
        }
        Command::Eval {
            predictions,
            references,
            json,
        } => {
            let report = evaluate(&predictions, &references)?;
            if let Some(path) = json {
                let text = serde_json::to_string_pretty(&report).expect("report serializes");
                std::fs::write(&path, text + "\n").map_err(|source| PipelineError::Io {
                    path: path.display().to_string(),
                    source,
                })?;
            }
            render_report(&report)
        }
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let result = match Cli::try_parse() {
        Ok(cli) => run(cli),
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => Err(CliError::Usage(e.render().to_string().trim_end().to_string())),
    };
    match result {
        Ok(text) => {
            print!("{text}");
            if !text.ends_with('\n') {
                println!();
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let err = serde_json::json!({ "error": e.category(), "message": e.to_string() });
            eprintln!("{err}");
            ExitCode::from(e.exit_code())
        }
    }
}
