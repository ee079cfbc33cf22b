use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sensor_placement::asim::BRUTE_FORCE_LIMIT;
use sensor_placement::harness::{emit_traces, run_experiment, summarize, ExperimentConfig};
use sensor_placement::{oracle_check, Error};

#[derive(Parser)]
#[command(version, about = "Adaptive sensor placement experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Experiment {
    Unimodal,
    Bimodal,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; defaults to the config's `out_dir`, then `.`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one of the two reference experiments.
    ReplicatePaper {
        #[arg(long, value_enum)]
        experiment: Experiment,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replications: Option<usize>,
    },
    /// Compare the interval selector with exhaustive search on random inputs.
    OracleCheck {
        #[arg(long, default_value_t = 500)]
        instances: usize,
        #[arg(long, default_value_t = 12)]
        max_bins: usize,
        #[arg(long, default_value_t = 3)]
        max_sensors: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn execute(config: ExperimentConfig<f64>, out: PathBuf) -> Result<(), Error> {
    let result = run_experiment(&config)?;
    let paths = emit_traces(&result, &out)?;
    let summary = summarize(&result);
    for arm in &summary.arms {
        println!(
            "{:<24} mean cumulative regret {:>12.3}  (95% interval {:.3} .. {:.3})",
            arm.label,
            arm.final_mean,
            arm.checkpoints.last().map_or(0.0, |c| c.q025),
            arm.checkpoints.last().map_or(0.0, |c| c.q975),
        );
    }
    println!("wrote {}", paths.trace_csv.display());
    println!("wrote {}", paths.summary_json.display());
    println!("wrote {}", paths.posterior_json.display());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Run { config, seed, out } => {
            let mut cfg = ExperimentConfig::<f64>::from_json_file(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let out = out
                .or_else(|| cfg.out_dir.clone())
                .unwrap_or_else(|| PathBuf::from("."));
            execute(cfg, out)?;
            Ok(true)
        }
        Command::ReplicatePaper {
            experiment,
            out,
            seed,
            replications,
        } => {
            let mut cfg = match experiment {
                Experiment::Unimodal => ExperimentConfig::<f64>::unimodal_reference(),
                Experiment::Bimodal => ExperimentConfig::<f64>::bimodal_reference(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(r) = replications {
                cfg.replications = r;
            }
            execute(cfg, out)?;
            Ok(true)
        }
        Command::OracleCheck {
            instances,
            max_bins,
            max_sensors,
            seed,
        } => {
            if max_bins > BRUTE_FORCE_LIMIT {
                return Err(Error::SizeGuard {
                    size: max_bins,
                    limit: BRUTE_FORCE_LIMIT,
                });
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let report = oracle_check(instances, max_bins, max_sensors, 1e-12, &mut rng)?;
            println!(
                "pass {} fail {} of {} (max gap {:.3e})",
                report.passed, report.failed, report.instances, report.max_gap
            );
            Ok(report.failed == 0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            let line = serde_json::json!({ "error": e.to_string(), "kind": e.kind() });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
