//! `rmotif`: command-line front end for the motif pipeline.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use refined_motif::eval::Metrics;
use refined_motif::motif::MotifMethod;
use refined_motif::pipeline::{self, load_config, parse_override, RunConfig};
use refined_motif::Result;

#[derive(Parser)]
#[command(name = "rmotif", version, about = "Detect PV and electric-heating consumers from smart meter data")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Config file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Motif method: refined_motif, matrix_profile or average_profile.
    #[arg(long, global = true)]
    method: Option<String>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Worker threads; 1 runs sequentially.
    #[arg(long, env = "RMOTIF_WORKERS", global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic population and its ground truth.
    Simulate,
    /// Discover one motif per consumer.
    Motif,
    /// Fit the classifier on the training split.
    Train,
    /// Score every consumer with the trained model.
    Classify,
    /// Compute test-split metrics and reports.
    Evaluate,
    /// Run the comparison methods.
    Baseline,
    /// Simulate (unless an input is configured), run the motif method and the baselines.
    Run {
        /// Run every motif method instead of only the configured one.
        #[arg(long)]
        all_methods: bool,
    },
}

fn config(common: &Common) -> Result<RunConfig> {
    let mut overrides = common
        .set
        .iter()
        .map(|s| parse_override(s))
        .collect::<Result<Vec<_>>>()?;
    if let Some(m) = &common.method {
        overrides.push(("method".into(), m.clone()));
    }
    if let Some(d) = &common.output_dir {
        overrides.push(("output_dir".into(), d.display().to_string()));
    }
    if let Some(w) = common.workers {
        overrides.push(("workers".into(), w.to_string()));
    }
    load_config(common.config.as_deref(), &overrides)
}

fn print_metrics(name: &str, m: &Metrics) {
    println!(
        "{name}: accuracy {:.4} precision {:.4} recall {:.4} f_score {:.4}",
        m.accuracy, m.precision, m.recall, m.f_score
    );
}

fn run_method(cfg: &RunConfig) -> Result<()> {
    let out = pipeline::run_method(cfg)?;
    print_metrics(cfg.method.as_str(), &out.metrics);
    Ok(())
}

fn execute(cli: &Cli) -> Result<()> {
    let cfg = config(&cli.common)?;
    match &cli.command {
        Command::Simulate => {
            let out = pipeline::simulate(&cfg)?;
            println!("simulated {} consumers, {} positive", out.n_consumers, out.n_positive);
        }
        Command::Motif => {
            let out = pipeline::motif(&cfg)?;
            match out.threshold {
                Some(t) => println!("{} motifs, threshold {t}", out.motifs.len()),
                None => println!("{} motifs", out.motifs.len()),
            }
        }
        Command::Train => {
            let out = pipeline::train(&cfg)?;
            let loss = out.report.loss_history.last().copied().unwrap_or(f64::NAN);
            println!("final loss {loss:.6}, train accuracy {:.4}", out.report.train_accuracy);
        }
        Command::Classify => {
            let out = pipeline::classify(&cfg)?;
            println!("scored {} consumers in {:.3} ms", out.predictions.len(), out.elapsed_ms);
        }
        Command::Evaluate => {
            let out = pipeline::evaluate(&cfg)?;
            print_metrics(cfg.method.as_str(), &out.metrics);
        }
        Command::Baseline => {
            for (name, m) in pipeline::baseline(&cfg)?.metrics {
                print_metrics(&name, &m);
            }
        }
        Command::Run { all_methods } => {
            if cfg.input.is_none() {
                let out = pipeline::simulate(&cfg)?;
                println!("simulated {} consumers, {} positive", out.n_consumers, out.n_positive);
            }
            if *all_methods {
                for method in [MotifMethod::RefinedMotif, MotifMethod::MatrixProfile, MotifMethod::AverageProfile] {
                    let mut c = cfg.clone();
                    c.method = method;
                    run_method(&c)?;
                }
            } else {
                run_method(&cfg)?;
            }
            for (name, m) in pipeline::baseline(&cfg)?.metrics {
                print_metrics(&name, &m);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rmotif: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
