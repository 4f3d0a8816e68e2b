use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use deckland::harness::{
    evaluate, export_plots, run_training, write_wave_panels, AgentKind, HarnessError, RunConfig,
};

/// Offshore VTOL landing: train, evaluate and inspect RL agents.
#[derive(Parser)]
#[command(name = "deckland", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent for every configured seed.
    Train {
        /// TOML run configuration; omitted keys take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// dqn, double, dueling or ppo.
        #[arg(long)]
        agent: Option<AgentKind>,
        /// Seed to train; repeat for several. Replaces the configured list.
        #[arg(long = "seed")]
        seeds: Vec<u64>,
        #[arg(long)]
        episodes: Option<usize>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print a progress line every this many episodes (0 for none).
        #[arg(long, default_value_t = 25)]
        every: usize,
    },
    /// Evaluate a trained weight file with its greedy or mean policy.
    Evaluate {
        #[arg(long)]
        weights: PathBuf,
        /// Defaults to the run configuration saved next to the weights.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Per-episode CSV; defaults to `<weights stem>.eval.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synthesize one platform heave record and its spectrum.
    SimulateWave {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Seconds; defaults to the episode horizon.
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Turn the training logs in a directory into plot-ready CSVs.
    ExportPlots { dir: PathBuf },
    /// Print the full default configuration.
    DefaultConfig,
}

#[derive(Debug)]
enum CliError {
    Harness(HarnessError),
    Usage(String),
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        CliError::Harness(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Harness(e.into())
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    RunConfig::from_toml_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn sibling_config(weights: &Path) -> Option<PathBuf> {
    let name = weights.file_name()?.to_str()?;
    let stem = name.strip_suffix(".weights")?;
    let stem = stem.strip_suffix(".critic").unwrap_or(stem);
    let path = weights.with_file_name(format!("{stem}.toml"));
    path.is_file().then_some(path)
}

fn eval_csv_path(weights: &Path) -> PathBuf {
    let name = weights
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let stem = name.strip_suffix(".weights").unwrap_or(&name);
    weights.with_file_name(format!("{stem}.eval.csv"))
}

fn fmt_opt(v: Option<f64>, unit: &str) -> String {
    v.map(|x| format!("{x:.3} {unit}"))
        .unwrap_or_else(|| "n/a (no landings)".into())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train {
            config,
            agent,
            seeds,
            episodes,
            out,
            every,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(agent) = agent {
                cfg.agent = agent.name().into();
            }
            if !seeds.is_empty() {
                cfg.seeds = seeds;
            }
            if let Some(n) = episodes {
                cfg.episodes = n;
            }
            if let Some(out) = out {
                cfg.out_dir = out;
            }
            let dt = cfg.env.dt;
            let outputs = run_training(&cfg, |seed, r| {
                if every > 0 && (r.episode + 1) % every == 0 {
                    let landing = match (r.time_to_land(dt), r.impact_velocity) {
                        (Some(t), Some(v)) => format!("landed at {t:.2} s, {v:.3} m/s"),
                        _ if r.aborted => "aborted".into(),
                        _ => "no landing".into(),
                    };
                    eprintln!(
                        "seed {seed} episode {:>5}: reward {:>10.1}, {landing}",
                        r.episode + 1,
                        r.total_reward
                    );
                }
            })?;
            for out in outputs {
                let a = &out.artifacts;
                println!("{} seed {}:", a.agent, a.seed);
                println!("  log     {}", a.log.display());
                println!("  weights {}", a.weights.display());
                if let Some(c) = &a.critic_weights {
                    println!("  critic  {}", c.display());
                }
                println!("  config  {}", a.config.display());
            }
        }
        Command::Evaluate {
            weights,
            config,
            episodes,
            seed,
            out,
        } => {
            let config = config.or_else(|| sibling_config(&weights));
            let cfg = load_config(config.as_deref())?;
            let problems = cfg.problems();
            if !problems.is_empty() {
                return Err(HarnessError::InvalidConfig(problems).into());
            }
            let report = evaluate(
                &weights,
                &cfg,
                episodes.unwrap_or(cfg.eval.episodes),
                seed.unwrap_or(cfg.eval.seed),
            )?;
            let csv_path = out.unwrap_or_else(|| eval_csv_path(&weights));
            let mut buf = Vec::new();
            report.write_episodes_csv(&mut buf)?;
            fs::write(&csv_path, buf)?;
            println!("episodes              {}", report.episodes.len());
            println!("landing rate          {:.1}%", report.landing_rate * 100.0);
            println!(
                "success rate          {:.1}% (impact < {} m/s)",
                report.success_rate * 100.0,
                cfg.eval.success_velocity
            );
            println!(
                "mean impact velocity  {}",
                fmt_opt(report.mean_impact_velocity, "m/s")
            );
            println!(
                "mean time to land     {}",
                fmt_opt(report.mean_time_to_land, "s")
            );
            println!("median inference      {:.4} ms", report.median_inference_ms);
            println!("episodes written to   {}", csv_path.display());
        }
        Command::SimulateWave {
            config,
            seed,
            duration,
            out,
        } => {
            let cfg = load_config(config.as_deref())?;
            let duration = duration.unwrap_or_else(|| cfg.env.horizon());
            let [wave, spectrum] = write_wave_panels(&cfg, seed, duration, &out)?;
            println!("{}", wave.display());
            println!("{}", spectrum.display());
        }
        Command::ExportPlots { dir } => {
            let bundle = export_plots(&dir)?;
            println!(
                "{} files written to {}",
                bundle.files.len(),
                bundle.out_dir.display()
            );
        }
        Command::DefaultConfig => print!("{}", RunConfig::default().to_toml_string()),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Harness(e @ HarnessError::InvalidConfig(_))) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(CliError::Harness(e)) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
