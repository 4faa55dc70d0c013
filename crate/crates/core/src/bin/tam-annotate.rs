use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tam_annotate::gateway::ProviderKind;
use tam_annotate::pipeline::{self, exit, Clock, ExperimentConfig, PipelineError};
use tam_annotate::weights::{default_weight_matrix, WeightMatrix};

/// Annotate reviews with technology-acceptance ratings and measure how
/// consistent and expert-like the annotations are.
#[derive(Parser)]
#[command(name = "tam-annotate", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a multi-run annotation experiment and persist its records.
    Annotate(ExperimentArgs),
    /// Per-cell consistency statistics and mean pairwise WPA of an experiment.
    Consistency(MatrixArgs),
    /// Export the per-cell mode of an experiment as an annotations file.
    Mode {
        #[command(flatten)]
        matrix: MatrixArgs,
        /// Annotator label to write.
        #[arg(long, default_value = "LLM")]
        label: String,
    },
    /// Agreement among experts and between experts and the LLM.
    CompareExperts {
        /// Expert annotations file.
        #[arg(long)]
        experts: PathBuf,
        /// LLM annotations file or experiment directory.
        #[arg(long)]
        llm: PathBuf,
        /// Directory for agreement.json and agreement.txt.
        #[arg(long)]
        out: Option<PathBuf>,
        /// TOML file with a penalty matrix (`rows`, optional `w_max`).
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Label for the LLM when reading an experiment directory.
        #[arg(long, default_value = "LLM")]
        label: String,
    },
    /// Repeat an experiment at several temperatures and compare consistency.
    Sweep {
        #[command(flatten)]
        experiment: ExperimentArgs,
        /// Comma-separated temperatures, at least two.
        #[arg(long, value_delimiter = ',', required = true)]
        temperatures: Vec<f64>,
    },
    /// Check a configuration without contacting any provider.
    ValidateConfig(ExperimentArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment TOML file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Review file (.csv or .jsonl).
    #[arg(long)]
    reviews: Option<PathBuf>,
    #[arg(long)]
    runs: Option<u32>,
    /// Use 50 runs unless --runs is given.
    #[arg(long)]
    study_one: bool,
    #[arg(long)]
    temperature: Option<f64>,
    /// hosted-chat or mock.
    #[arg(long)]
    provider: Option<ProviderKind>,
    #[arg(long)]
    model: Option<String>,
    /// Seed for the mock provider.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Prompt spec TOML file.
    #[arg(long)]
    prompt_spec: Option<PathBuf>,
}

#[derive(Args)]
struct MatrixArgs {
    /// Experiment directory or run-records file.
    matrix: PathBuf,
    /// Output location; defaults to the experiment directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// TOML file with a penalty matrix (`rows`, optional `w_max`).
    #[arg(long)]
    weights: Option<PathBuf>,
}

impl ExperimentArgs {
    fn build(&self) -> Result<ExperimentConfig, PipelineError> {
        let mut cfg = match (&self.config, &self.reviews) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(reviews)) => ExperimentConfig::new(reviews, "results"),
            (None, None) => return Err(PipelineError::Config("give --config or --reviews".into())),
        };
        if let Some(r) = &self.reviews {
            cfg.reviews = r.clone();
        }
        if self.study_one {
            cfg = cfg.study_one();
        }
        if let Some(n) = self.runs {
            cfg.runs = n;
        }
        if let Some(kind) = self.provider {
            cfg.provider.kind = kind;
            if kind == ProviderKind::Mock && self.model.is_none() && self.config.is_none() {
                cfg.provider.model = "mock".into();
            }
        }
        if let Some(t) = self.temperature {
            cfg.provider.temperature = t;
        }
        if let Some(m) = &self.model {
            cfg.provider.model = m.clone();
        }
        if let Some(s) = self.seed {
            cfg.provider.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if let Some(p) = &self.prompt_spec {
            cfg.prompt = pipeline::load_prompt_spec(p)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn load_weights(path: Option<&Path>) -> Result<WeightMatrix, PipelineError> {
    let Some(path) = path else {
        return Ok(default_weight_matrix());
    };
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    toml::from_str(&text).map_err(|e| PipelineError::Format {
        path: path.to_path_buf(),
        detail: e.message().to_string(),
    })
}

fn experiment_dir(matrix: &Path) -> PathBuf {
    if matrix.is_dir() {
        matrix.to_path_buf()
    } else {
        matrix.parent().unwrap_or(Path::new(".")).to_path_buf()
    }
}

async fn run(command: Command) -> Result<i32, PipelineError> {
    match command {
        Command::Annotate(args) => {
            let cfg = args.build()?;
            let outcome = pipeline::annotate(&cfg, &Clock::for_provider(cfg.provider.kind)).await?;
            let m = &outcome.manifest;
            println!(
                "{} runs of {} requested, {} records, {} missing cells -> {}",
                m.runs_completed,
                m.runs_requested,
                outcome.records.len(),
                m.missing_cells,
                cfg.out.display()
            );
            if let Some(e) = &outcome.error {
                eprintln!("error: {e}");
            }
            Ok(outcome.exit_code())
        }
        Command::Consistency(args) => {
            let w = load_weights(args.weights.as_deref())?;
            let report = pipeline::consistency_report(&pipeline::load_matrix(&args.matrix)?, &w)?;
            let out = args.out.unwrap_or_else(|| experiment_dir(&args.matrix));
            pipeline::write_consistency_report(&out, &report)?;
            print!("{}", pipeline::render_consistency_text(&report));
            Ok(if report.missing_cells > 0 { exit::INCOMPLETE } else { exit::SUCCESS })
        }
        Command::Mode { matrix, label } => {
            let w = load_weights(matrix.weights.as_deref())?;
            let data = pipeline::mode_export(&pipeline::load_matrix(&matrix.matrix)?, &w, &label)?;
            let out = matrix
                .out
                .unwrap_or_else(|| experiment_dir(&matrix.matrix).join("modes.csv"));
            pipeline::write_annotations(&out, &data)?;
            println!("wrote {}", out.display());
            Ok(exit::SUCCESS)
        }
        Command::CompareExperts {
            experts,
            llm,
            out,
            weights,
            label,
        } => {
            let w = load_weights(weights.as_deref())?;
            let experts_data = pipeline::load_annotations(&experts, None)?;
            let llm_data = pipeline::load_llm_annotations(&llm, Some(&experts_data.variables), &w, &label)?;
            let report = pipeline::compare_experts(&experts_data, &llm_data, &w)?;
            let out = out.unwrap_or_else(|| experiment_dir(&experts));
            pipeline::write_agreement_report(&out, &report)?;
            print!("{}", pipeline::render_agreement_text(&report));
            Ok(exit::SUCCESS)
        }
        Command::Sweep {
            experiment,
            temperatures,
        } => {
            let cfg = experiment.build()?;
            let report =
                pipeline::temperature_sweep(&cfg, &temperatures, &Clock::for_provider(cfg.provider.kind)).await?;
            pipeline::write_sweep_report(&cfg.out, &report)?;
            print!("{}", pipeline::render_sweep_text(&report));
            Ok(exit::SUCCESS)
        }
        Command::ValidateConfig(args) => {
            let cfg = args.build()?;
            println!(
                "ok: {} runs, {} variables, provider {:?} ({}) at temperature {}, output {}",
                cfg.runs,
                cfg.prompt.variables().len(),
                cfg.provider.kind,
                cfg.provider.endpoint(),
                cfg.provider.temperature,
                cfg.out.display()
            );
            Ok(exit::SUCCESS)
        }
    }
}

#[tokio::main]
async fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::USAGE as u8 } else { 0 });
        }
    };
    let code = match run(cli.command).await {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
