use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use lure_ident::config::{ExperimentConfig, Overrides};
use lure_ident::experiment;
use lure_ident::lure::LureModel;
use lure_ident::Error;

#[derive(Parser)]
#[command(name = "lure-ident", version, about = "Lure-system simulation and two-stage identification")]
struct Cli {
    /// TOML configuration merged over its preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// desk-fhn, desk-chua, paper-fhn or paper-chua.
    #[arg(long, global = true)]
    preset: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Artifact directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Measurement noise standard deviation.
    #[arg(long, global = true)]
    sigma: Option<f64>,
    /// Worker threads, 0 for all cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Transfer function, nonlinearity, sector and frequency-domain checks.
    ModelInfo {
        name: String,
        /// Feedback gain for the shifted-sector check.
        #[arg(long)]
        k: Option<f64>,
    },
    /// Static stage: iv_curve.csv and static_fit.json.
    StaticId,
    /// Dynamic stage: frf.csv, G_k_hat.json, G_a_hat.json, identified_model.json.
    DynamicId {
        /// Cancel the true nonlinearity instead of the static fit.
        #[arg(long)]
        use_truth: bool,
    },
    /// Replay or attractor comparison against the ground truth.
    Validate,
    /// Window test for approximately-finite memory, open and closed loop.
    MemoryTest,
    /// One simulation run written to simulation.csv.
    Simulate,
}

fn load(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let cfg = match (&cli.config, &cli.preset) {
        (Some(path), preset) => ExperimentConfig::load(path, preset.as_deref())?,
        (None, Some(preset)) => ExperimentConfig::preset(preset)?,
        (None, None) => return Err(Error::Config("either --config or --preset is required".into())),
    };
    cfg.apply(&Overrides {
        seed: cli.seed,
        sigma: cli.sigma,
        workers: cli.workers,
        output_dir: cli.out.clone(),
    })
}

fn run(cli: &Cli) -> Result<serde_json::Value, Error> {
    if let Cmd::ModelInfo { name, k } = &cli.cmd {
        let info = experiment::model_info(name, &LureModel::builtin(name)?, *k)?;
        print!("{info}");
        return Ok(serde_json::to_value(info)?);
    }
    let cfg = load(cli)?;
    Ok(match &cli.cmd {
        Cmd::ModelInfo { .. } => unreachable!(),
        Cmd::StaticId => {
            let s = experiment::static_pipeline(&cfg)?;
            json!({ "w_hat": s.fit.w_hat, "truth": s.truth, "max_error": s.max_error })
        }
        Cmd::DynamicId { use_truth } => {
            let d = experiment::dynamic_pipeline(&cfg, *use_truth)?;
            json!({ "g_k": d.model.g_k, "g_a": d.model.g_a, "coefficient_error": d.g_a_coeff_error })
        }
        Cmd::Validate => serde_json::to_value(experiment::validate_pipeline(&cfg)?)?,
        Cmd::MemoryTest => {
            let r = experiment::memory_pipeline(&cfg)?;
            json!({ "open_loop": r.open_loop.verdict, "closed_loop": r.closed_loop.verdict })
        }
        Cmd::Simulate => {
            let r = experiment::simulate_pipeline(&cfg)?;
            json!({ "samples": r.len(), "out": cfg.output_dir })
        }
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            if !matches!(cli.cmd, Cmd::ModelInfo { .. }) {
                println!("{summary}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::from(match e {
                Error::Config(_) | Error::UnknownModel(_) | Error::UnknownPreset(_) | Error::InvalidArgument(_) => 2,
                Error::MissingArtifact(_) => 3,
                _ => 1,
            })
        }
    }
}
