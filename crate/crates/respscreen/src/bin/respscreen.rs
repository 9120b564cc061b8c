//! Command-line interface over the pipeline operations.
//!
//! This binary only parses arguments, loads the layered configuration
//! and dispatches into [`respscreen::commands`]; every operation is
//! equally usable as a library call. Exit codes: 0 success, 2
//! configuration error, 3 data error or partial extraction, 4
//! train/test leakage, 5 numeric failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use respscreen::commands::{self, InferInput};
use respscreen::config::RunConfig;
use respscreen::dataset::Modality;
use respscreen::{Error, Result};

#[derive(Parser)]
#[command(
    name = "respscreen",
    version,
    about = "Respiratory illness screening from short recordings and symptom reports"
)]
struct Cli {
    /// Configuration file of `key = value` lines.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override one configuration key (repeatable). Overrides win over
    /// the file, the file over the built-in defaults.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Screen the manifest and write per-channel feature files.
    Extract,
    /// Write the stratified development/test split with its folds.
    Split,
    /// Grid-search hyperparameters and write the candidate tables.
    Cv {
        /// breathing, cough, speech or symptoms; all four when omitted.
        #[arg(long)]
        channel: Option<String>,
    },
    /// Cross-validate, fit and save the per-channel models.
    Train {
        #[arg(long)]
        channel: Option<String>,
    },
    /// Score the held-out test set and write score/ROC/summary files.
    Evaluate {
        #[arg(long)]
        channel: Option<String>,
    },
    /// Mean-fuse the configured channels' score files and evaluate.
    Fuse,
    /// Per-feature-group ablation over the acoustic modalities.
    Ablate {
        /// breathing, cough or speech; all three when omitted.
        #[arg(long)]
        modality: Option<String>,
    },
    /// Score one participant from three recordings plus symptoms.
    Infer {
        breathing: PathBuf,
        cough: PathBuf,
        speech: PathBuf,
        /// Comma-separated symptom names; omit for none reported.
        #[arg(long, value_delimiter = ',')]
        symptoms: Vec<String>,
    },
    /// Aggregate this run's artifacts into one plain-text report.
    Report,
}

fn parse_overrides(set: &[String]) -> Result<Vec<(String, String)>> {
    set.iter()
        .map(|pair| {
            pair.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Error::Config(format!("--set {pair}: expected KEY=VALUE")))
        })
        .collect()
}

fn run(cli: Cli) -> Result<i32> {
    let config = RunConfig::load(cli.config.as_deref(), &parse_overrides(&cli.set)?)?;
    match cli.command {
        Command::Extract => {
            let outcome = commands::cmd_extract(&config)?;
            println!(
                "retained {} participants, rejected {} at intake",
                outcome.n_retained,
                outcome.rejections.len()
            );
            println!(
                "extracted {} recordings, reused {}",
                outcome.recomputed, outcome.reused
            );
            for rejection in &outcome.rejections {
                eprintln!("rejected: {rejection}");
            }
            for (key, reason) in &outcome.failures {
                eprintln!("failed: {key}: {reason}");
            }
            if outcome.partial() {
                eprintln!("partial success: some recordings were skipped");
                return Ok(3);
            }
            Ok(0)
        }
        Command::Split => {
            let split = commands::cmd_split(&config)?;
            println!(
                "development {} / test {} / observation {} / recovered {}",
                split.development.len(),
                split.test.len(),
                split.observation.len(),
                split.recovered.len()
            );
            Ok(0)
        }
        Command::Cv { channel } => {
            let channels = commands::selected_channels(channel.as_deref())?;
            for (channel, report) in commands::cmd_cv(&config, &channels)? {
                println!(
                    "{channel}: selected {:?} with mean validation AUC {:.4}",
                    report.selected, report.selected_mean_auc
                );
            }
            Ok(0)
        }
        Command::Train { channel } => {
            let channels = commands::selected_channels(channel.as_deref())?;
            for (channel, report, path) in commands::cmd_train(&config, &channels)? {
                println!(
                    "{channel}: mean validation AUC {:.4}, model at {}",
                    report.selected_mean_auc,
                    path.display()
                );
            }
            Ok(0)
        }
        Command::Evaluate { channel } => {
            let channels = commands::selected_channels(channel.as_deref())?;
            for summary in commands::cmd_evaluate(&config, &channels)? {
                println!(
                    "{}: test AUC {:.4}, sensitivity {:.4} at specificity {:.4}",
                    summary.modality,
                    summary.auc,
                    summary.operating.sensitivity,
                    summary.operating.specificity
                );
            }
            Ok(0)
        }
        Command::Fuse => {
            let summary = commands::cmd_fuse(&config)?;
            println!(
                "{}: test AUC {:.4}, sensitivity {:.4} at specificity {:.4}",
                summary.modality,
                summary.auc,
                summary.operating.sensitivity,
                summary.operating.specificity
            );
            Ok(0)
        }
        Command::Ablate { modality } => {
            let modalities = match modality.as_deref() {
                None => Modality::ALL.to_vec(),
                Some(s) => vec![Modality::parse(s)
                    .ok_or_else(|| Error::Config(format!("unknown modality {s}")))?],
            };
            let rows = commands::cmd_ablate(&config, &modalities)?;
            for (modality, rows) in &rows {
                for row in rows {
                    println!(
                        "{modality} {}: fset {:.4} rest {:.4}",
                        row.group, row.fset_auc, row.rest_auc
                    );
                }
            }
            Ok(0)
        }
        Command::Infer {
            breathing,
            cough,
            speech,
            symptoms,
        } => {
            let input = InferInput {
                breathing,
                cough,
                speech,
                symptoms,
            };
            let output = commands::cmd_infer(&config, &input)?;
            for (channel, score) in &output.scores {
                println!("{channel}: {score:.4}");
            }
            println!("fused: {:.4}", output.fused);
            println!("elapsed: {:.0} ms", output.elapsed_ms);
            Ok(0)
        }
        Command::Report => {
            let (path, text) = commands::cmd_report(&config)?;
            print!("{text}");
            println!("written to {}", path.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
