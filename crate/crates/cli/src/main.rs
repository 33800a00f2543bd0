use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use xspace::attribution::{attribute, derive_seed};
use xspace::harness::{
    load_ucr_files, render_report, run_experiment, save_ucr_tsv, synth_dataset,
    write_attribution_csv, write_outputs, AttributionSet, ExperimentConfig, ReportFormat,
    SampleAttribution, SynthKind, SynthParams, SynthSpec,
};
use xspace::metrics::read_rows_csv;
use xspace::net::{load_model, save_model, train, Arch, TrainConfig};
use xspace::{Method, MethodConfig, SpaceKind, SpaceParams, WrappedClassifier};

#[derive(Parser)]
#[command(
    name = "xspace",
    version,
    about = "Explain time-series classifiers in invertible explanation spaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset as TRAIN.tsv and TEST.tsv.
    Synth {
        #[arg(long)]
        kind: SynthKind,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        n_samples: usize,
        #[arg(long, default_value_t = 128)]
        length: usize,
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        /// Kind-specific parameters as a JSON object.
        #[arg(long)]
        params: Option<String>,
    },
    /// Train a classifier and save it as JSON.
    Train {
        /// Training file, or a directory holding TRAIN.tsv.
        #[arg(long)]
        data: PathBuf,
        /// `linear`, `mlp`, `conv`, `resnet`, or a JSON object.
        #[arg(long, default_value = "conv")]
        arch: Arch,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 30)]
        epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.01)]
        learning_rate: f64,
        #[arg(long, default_value_t = 16)]
        batch_size: usize,
    },
    /// Attribute the predicted class of each sample and write the scores as CSV.
    Explain {
        #[arg(long)]
        model: PathBuf,
        /// Data file, or a directory holding TEST.tsv.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "time")]
        space: SpaceKind,
        #[arg(long)]
        method: Method,
        #[arg(long)]
        out: PathBuf,
        /// Frame length of the time-frequency space.
        #[arg(long)]
        frame_len: Option<usize>,
        /// Embedding window of the decomposition space.
        #[arg(long)]
        window: Option<usize>,
        /// Component count of the decomposition space.
        #[arg(long)]
        components: Option<usize>,
        /// Explain at most this many samples.
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run an experiment config and write reports, attributions and plots.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the output directory named in the config.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Render a report CSV as markdown or CSV.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "markdown")]
        format: ReportFormat,
        /// Write to this file instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn data_file(path: &Path, default_name: &str) -> PathBuf {
    if path.is_dir() {
        path.join(default_name)
    } else {
        path.to_path_buf()
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth {
            kind,
            out,
            seed,
            n_samples,
            length,
            noise,
            params,
        } => {
            let params: SynthParams = match params {
                Some(p) => serde_json::from_str(&p).context("parsing --params")?,
                None => SynthParams::default(),
            };
            let spec = SynthSpec {
                kind,
                n_samples,
                length,
                noise_sigma: noise,
                seed,
                params,
            };
            let data = synth_dataset(&spec)?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            save_ucr_tsv(&data.train, out.join("TRAIN.tsv"))?;
            save_ucr_tsv(&data.test, out.join("TEST.tsv"))?;
            println!(
                "wrote {} train and {} test series to {}",
                data.train.len(),
                data.test.len(),
                out.display()
            );
        }
        Command::Train {
            data,
            arch,
            out,
            epochs,
            seed,
            learning_rate,
            batch_size,
        } => {
            let path = data_file(&data, "TRAIN.tsv");
            let series = load_ucr_files(&[&path])?.remove(0);
            let cfg = TrainConfig {
                epochs,
                seed,
                learning_rate,
                batch_size,
                ..TrainConfig::default()
            };
            let report = train(&series, &arch, &cfg)?;
            save_model(&report.model, &out)?;
            println!(
                "train accuracy {:.4}, model written to {}",
                report.train_accuracy,
                out.display()
            );
        }
        Command::Explain {
            model,
            data,
            space,
            method,
            out,
            frame_len,
            window,
            components,
            limit,
            seed,
        } => {
            let model = load_model(&model)?;
            let path = data_file(&data, "TEST.tsv");
            let series = load_ucr_files(&[&path])?.remove(0);
            let params = SpaceParams {
                frame_len,
                window,
                components,
            };
            let space = xspace::make_space(space, model.input_len(), params)?;
            let w = WrappedClassifier::new(model, space.clone())?;
            let cfg = MethodConfig::default();
            let mut samples = Vec::new();
            for (i, s) in series.iter().take(limit.unwrap_or(usize::MAX)).enumerate() {
                let z = space
                    .forward(s.values())
                    .with_context(|| format!("sample {i}"))?;
                let predicted = w.predict_class(&z)?;
                let a = attribute(
                    &w,
                    &z,
                    predicted,
                    method,
                    &cfg.with_seed(derive_seed(seed, i as u64)),
                )
                .with_context(|| format!("sample {i}"))?;
                samples.push(SampleAttribution {
                    index: i,
                    label: s.label,
                    predicted,
                    scores: a.scores,
                });
            }
            let set = AttributionSet {
                space,
                method,
                samples,
            };
            write_attribution_csv(&set, &out)?;
            println!(
                "wrote {} attributions to {}",
                set.samples.len(),
                out.display()
            );
        }
        Command::Evaluate { config, out_dir } => {
            let cfg = ExperimentConfig::load(&config)?;
            let Some(dir) = out_dir.or_else(|| cfg.output.dir.clone()) else {
                bail!("no output directory: pass --out-dir or set output.dir in the config");
            };
            let report = run_experiment(&cfg)?;
            let written = write_outputs(&report, &dir, cfg.output.attributions, cfg.output.plots)?;
            println!(
                "wrote {} rows and {} files to {}",
                report.rows.len(),
                written.len(),
                dir.display()
            );
        }
        Command::Report { input, format, out } => {
            let rows = read_rows_csv(&input)?;
            let text = render_report(&rows, format)?;
            match out {
                Some(p) => {
                    fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?
                }
                None => std::io::stdout().write_all(text.as_bytes())?,
            }
        }
    }
    Ok(())
}

/// Joins the context chain, stopping at the first library error since its
/// message already includes its own causes.
fn describe(e: &anyhow::Error) -> String {
    let mut parts = Vec::new();
    for cause in e.chain() {
        parts.push(cause.to_string());
        if cause.is::<xspace::Error>() {
            break;
        }
    }
    parts.join(": ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(2)
        }
    }
}
