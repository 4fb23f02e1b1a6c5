use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use swarmtune::dataset::{synth_generate, write_csv, SynthSpec};
use swarmtune::objective::BenchmarkKind;
use swarmtune::runner::{report_compare, run_tune, BenchmarkSettings, ExperimentConfig, OptimizerChoice};
use swarmtune::{Error, Result};

#[derive(Parser)]
#[command(name = "swarmtune", version, about = "Metaheuristic hyperparameter search with subject-wise evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config.
    Tune {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `master_seed`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        /// Overrides `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        optimizer: Option<OptimizerChoice>,
    },
    /// Write a synthetic subject-structured dataset as CSV.
    Generate {
        /// TOML file with generator settings; defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Destination CSV; ground truth goes next to it as `.truth.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare the final results of two run directories.
    Report {
        run_a: PathBuf,
        run_b: PathBuf,
        /// Also write the machine-readable comparison here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an optimizer on an analytic benchmark function.
    Bench {
        /// Experiment config with a `[benchmark]` table; flags build one
        /// otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_parser = parse_benchmark, default_value = "sphere")]
        function: BenchmarkKind,
        #[arg(long, default_value_t = 2)]
        dims: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        optimizer: Option<OptimizerChoice>,
    },
}

fn parse_benchmark(s: &str) -> std::result::Result<BenchmarkKind, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| format!("unknown function {s:?}"))
}

fn apply_overrides(
    cfg: &mut ExperimentConfig,
    seed: Option<u64>,
    workers: Option<usize>,
    out: Option<PathBuf>,
    optimizer: Option<OptimizerChoice>,
) {
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    if let Some(w) = workers {
        cfg.workers = w;
    }
    if let Some(o) = out {
        cfg.output_dir = o;
    }
    if let Some(o) = optimizer {
        cfg.optimizer = o;
    }
}

fn tune(cfg: &ExperimentConfig) -> Result<()> {
    let summary = run_tune(cfg)?;
    println!(
        "{}: {} evaluations, best value {:.6}",
        summary.optimizer.name(),
        summary.evaluations,
        summary.best_value
    );
    println!("best configuration: {}", summary.best_config);
    if let Some(mask) = &summary.best_mask {
        println!("feature mask: {mask}");
    }
    if let Some(r) = &summary.final_report {
        if let (Some(m), sd) = (r.f1.mean, r.f1.sd) {
            println!("final F1 over {} runs: {m:.4} ± {:.4}", r.reports, sd.unwrap_or(0.0));
        }
    }
    println!("outputs in {}", cfg.output_dir.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Tune {
            config,
            seed,
            workers,
            out,
            optimizer,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            apply_overrides(&mut cfg, seed, workers, out, optimizer);
            tune(&cfg)
        }
        Command::Generate { config, seed, out } => {
            let mut spec = match config {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)?;
                    toml::from_str::<SynthSpec>(&text).map_err(|e| Error::ExperimentConfig(e.to_string()))?
                }
                None => SynthSpec::default(),
            };
            if let Some(s) = seed {
                spec.seed = s;
            }
            let generated = synth_generate(&spec)?;
            write_csv(&generated.dataset, &out)?;
            let truth = out.with_extension("truth.json");
            std::fs::write(&truth, serde_json::to_string_pretty(&generated.truth)?)?;
            println!(
                "wrote {} rows x {} features to {} (ground truth in {})",
                generated.dataset.n_rows(),
                generated.dataset.n_features(),
                out.display(),
                truth.display()
            );
            Ok(())
        }
        Command::Report { run_a, run_b, out } => {
            let report = report_compare(&run_a, &run_b)?;
            print!("{}", report.to_table());
            if let Some(path) = out {
                std::fs::write(path, serde_json::to_string_pretty(&report)?)?;
            }
            Ok(())
        }
        Command::Bench {
            config,
            function,
            dims,
            seed,
            workers,
            out,
            optimizer,
        } => {
            let mut cfg = match config {
                Some(path) => ExperimentConfig::load(&path)?,
                None => ExperimentConfig {
                    optimizer: OptimizerChoice::Pso,
                    benchmark: Some(BenchmarkSettings { function, dims }),
                    output_dir: PathBuf::from("runs/bench"),
                    ..ExperimentConfig::default()
                },
            };
            if cfg.benchmark.is_none() {
                return Err(Error::ExperimentConfig("bench needs a [benchmark] table".into()));
            }
            apply_overrides(&mut cfg, seed, workers, out, optimizer);
            let summary = run_tune(&cfg)?;
            for (i, v) in summary.history.iter().enumerate() {
                println!("{i:>4}  {v:.6e}");
            }
            println!("best {:.6e} at {}", summary.best_value, summary.best_config);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
