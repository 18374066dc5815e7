use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tevent_cli::config::{load, preset, DiagnosticKind, ExperimentConfig, PRESETS};
use tevent_cli::{run, RunError};

const EXIT_FAILURE: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_INCOMPATIBLE: u8 = 3;

#[derive(Parser)]
#[command(name = "tevent", version, about = "Targeted event detection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write ROC curves, config echo and summary.
    Run {
        #[command(flatten)]
        source: ConfigSource,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Master seed (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        hit_trials: Option<usize>,
        #[arg(long)]
        false_alarm_steps: Option<usize>,
        #[arg(long)]
        boundary_trials: Option<usize>,
        /// Write a gnuplot script next to the curves.
        #[arg(long)]
        plot: bool,
        /// Write sample data (detection stream or frames).
        #[arg(long)]
        samples: bool,
    },
    /// Check a configuration and list every problem found.
    Validate {
        #[command(flatten)]
        source: ConfigSource,
    },
    /// Print a preset as JSON, or list presets when no name is given.
    Preset { name: Option<String> },
}

#[derive(Args)]
struct ConfigSource {
    /// JSON config file; with --preset, its fields override the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = PRESETS)]
    preset: Option<String>,
}

impl ConfigSource {
    fn load(&self) -> Result<ExperimentConfig, ExitCode> {
        load(self.config.as_deref(), self.preset.as_deref()).map_err(|e| {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INVALID)
        })
    }
}

fn diagnostics_exit(config: &ExperimentConfig) -> Option<ExitCode> {
    let diags = config.validate();
    if diags.is_empty() {
        return None;
    }
    for d in &diags {
        eprintln!("error: {d}");
    }
    let code = if diags.iter().any(|d| d.kind == DiagnosticKind::Incompatible) {
        EXIT_INCOMPATIBLE
    } else {
        EXIT_INVALID
    };
    Some(ExitCode::from(code))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Preset { name: None } => {
            for p in PRESETS {
                println!("{p}");
            }
            ExitCode::SUCCESS
        }
        Command::Preset { name: Some(name) } => match preset(&name) {
            Some(cfg) => {
                println!("{}", cfg.to_json());
                ExitCode::SUCCESS
            }
            None => {
                eprintln!("error: unknown preset {name:?} (available: {})", PRESETS.join(", "));
                ExitCode::from(EXIT_INVALID)
            }
        },
        Command::Validate { source } => {
            let config = match source.load() {
                Ok(c) => c,
                Err(code) => return code,
            };
            if let Some(code) = diagnostics_exit(&config) {
                return code;
            }
            println!("ok");
            ExitCode::SUCCESS
        }
        Command::Run {
            source,
            out,
            seed,
            hit_trials,
            false_alarm_steps,
            boundary_trials,
            plot,
            samples,
        } => {
            let mut config = match source.load() {
                Ok(c) => c,
                Err(code) => return code,
            };
            if let Some(out) = out {
                config.output_dir = out;
            }
            if let Some(seed) = seed {
                config.seed = seed;
            }
            let mc = &mut config.monte_carlo;
            mc.hit_trials = hit_trials.unwrap_or(mc.hit_trials);
            mc.false_alarm_steps = false_alarm_steps.unwrap_or(mc.false_alarm_steps);
            mc.boundary_trials = boundary_trials.unwrap_or(mc.boundary_trials);
            config.plot_script |= plot;
            config.export_samples |= samples;
            if let Some(code) = diagnostics_exit(&config) {
                return code;
            }
            match run(&config) {
                Ok(report) => {
                    for r in &report.results {
                        println!(
                            "{}: {} ROC points -> {}",
                            r.detector,
                            r.curve.points().len(),
                            report.output_dir.join(r.detector.name()).join("roc.csv").display()
                        );
                    }
                    if let Some((_, secs)) = report.timings.iter().find(|(k, _)| *k == "total") {
                        println!("done in {secs:.1} s");
                    }
                    ExitCode::SUCCESS
                }
                Err(e @ RunError::Invalid(_)) => {
                    eprintln!("error: {e}");
                    ExitCode::from(if e.is_incompatibility() { EXIT_INCOMPATIBLE } else { EXIT_INVALID })
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_FAILURE)
                }
            }
        }
    }
}
