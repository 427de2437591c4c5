use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use scanpath_core::config::RunConfig;
use scanpath_core::harness::{
    cmd_complete, cmd_evaluate, cmd_predict, cmd_saliency, cmd_synth, cmd_train, SampleOptions,
};
use scanpath_core::types::GridSpec;
use scanpath_core::{Error, Exec};

#[derive(Parser, Debug)]
#[command(name = "scanpath", version, about = "Train, sample and evaluate scanpath models")]
struct Cli {
    /// Run configuration (`key=value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `train.seed` for training; the sampling seed elsewhere.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Run batch work on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model; writes config.txt, loss.csv and checkpoints.
    Train {
        /// Scanpath CSV; overrides `paths.dataset`.
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Continue from this checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Sample scanpaths for every test image.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 10)]
        count: usize,
        /// Sampling threshold; defaults to the checkpoint's value.
        #[arg(long)]
        th: Option<f64>,
        /// Also write every rollout's tSPM stack.
        #[arg(long)]
        dump_tspm: bool,
    },
    /// Complete every test scanpath from its first fixations.
    Complete {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 4)]
        prefix_len: usize,
        #[arg(long, default_value_t = 10)]
        repeats: usize,
    },
    /// Score predicted scanpaths against ground truth.
    Evaluate {
        #[arg(long)]
        predicted: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Also report human and random baselines.
        #[arg(long)]
        baselines: bool,
    },
    /// Aggregate scanpaths into one PGM heatmap per image.
    Saliency {
        #[arg(long)]
        scanpaths: PathBuf,
        /// `WxH`; defaults to each image's native size.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long, default_value_t = 2.0)]
        sigma: f64,
    },
    /// Generate the synthetic benchmark.
    Synth,
}

fn parse_grid(s: &str) -> scanpath_core::Result<GridSpec> {
    let bad = || Error::Usage(format!("grid must look like 32x32, got '{s}'"));
    let (w, h) = s.split_once('x').ok_or_else(bad)?;
    GridSpec::new(w.parse().map_err(|_| bad())?, h.parse().map_err(|_| bad())?)
}

fn load_config(path: Option<&Path>) -> scanpath_core::Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn run(cli: Cli) -> scanpath_core::Result<()> {
    let mut cfg = load_config(cli.config.as_deref())?;
    let seed = cli.seed.unwrap_or(0);
    let exec = if cli.sequential {
        Exec::Sequential
    } else {
        Exec::default()
    };
    let opts = SampleOptions {
        seed,
        exec,
        features: cfg.features.clone(),
    };
    let out = cli.out.as_path();
    match cli.command {
        Command::Train { dataset, resume } => {
            if let Some(d) = dataset {
                cfg.dataset = Some(d);
            }
            if let Some(s) = cli.seed {
                cfg.train.seed = s;
            }
            let run = cmd_train(&cfg, out, resume.as_deref())?;
            if let Some((step, loss)) = run.losses.last() {
                log::info!("finished at step {step} with loss {loss}");
            }
        }
        Command::Predict {
            checkpoint,
            dataset,
            count,
            th,
            dump_tspm,
        } => {
            let csv = cmd_predict(&checkpoint, &dataset, count, th, dump_tspm, &opts, out)?;
            println!("{}", csv.display());
        }
        Command::Complete {
            checkpoint,
            dataset,
            prefix_len,
            repeats,
        } => {
            let csv = cmd_complete(&checkpoint, &dataset, prefix_len, repeats, &opts, out)?;
            println!("{}", csv.display());
        }
        Command::Evaluate {
            predicted,
            truth,
            baselines,
        } => {
            let ev = cmd_evaluate(&predicted, &truth, &cfg.metrics, baselines, seed, out)?;
            print!("{}", ev.model.to_csv());
        }
        Command::Saliency { scanpaths, grid, sigma } => {
            let grid = grid.as_deref().map(parse_grid).transpose()?;
            for p in cmd_saliency(&scanpaths, grid, sigma, out)? {
                println!("{}", p.display());
            }
        }
        Command::Synth => {
            let csv = cmd_synth(&cfg, seed, out)?;
            println!("{}", csv.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
