use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ssl_iqa::evaluation::io::{format_gmad, format_ranking, format_report, format_scores, read_scores};
use ssl_iqa::evaluation::{evaluate, gmad_pairs, spot_failures};
use ssl_iqa::fsutil::write_atomic;
use ssl_iqa::harness::{
    format_summary, generate_synthetic, load_dataset, run_experiment, run_single, ExperimentConfig, QualityRule,
    SyntheticSpec,
};
use ssl_iqa::model::load_checkpoint;
use ssl_iqa::{Error, Result};

/// Semi-supervised ensemble quality prediction.
#[derive(Parser)]
#[command(name = "ssl-iqa", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled/unlabeled dataset pair.
    Generate(GenerateArgs),
    /// Train one grid point on one split repeat of an experiment config.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        repeat: usize,
        /// Grid point label (defaults to the first point).
        #[arg(long)]
        point: Option<String>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Evaluate a checkpoint on a labeled dataset.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write ensemble scores of a checkpoint on a dataset.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank a pool by head disagreement and keep the top k.
    Spot {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Find gMAD pairs between a defender and an attacker score file.
    Gmad {
        #[arg(long)]
        defender: PathBuf,
        #[arg(long)]
        attacker: PathBuf,
        #[arg(long)]
        levels: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a full experiment config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 2000)]
    n_labeled: usize,
    #[arg(long, default_value_t = 2000)]
    n_unlabeled: usize,
    #[arg(long, default_value_t = 16)]
    dim: usize,
    /// identity, cube or saturating.
    #[arg(long, default_value = "identity")]
    rule: String,
    #[arg(long, default_value_t = 0.31)]
    noise_std: f64,
    #[arg(long, default_value_t = 0.0)]
    ood_fraction: f64,
    #[arg(long, default_value_t = 3.0)]
    ood_shift: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn features(ds: &ssl_iqa::harness::Dataset) -> Vec<&[f64]> {
    ds.samples.iter().map(|s| s.features.as_slice()).collect()
}

fn write(path: &Path, text: String) -> Result<()> {
    write_atomic(path, text.as_bytes())
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Generate(a) => {
            let spec = SyntheticSpec {
                n_labeled: a.n_labeled,
                n_unlabeled: a.n_unlabeled,
                dim: a.dim,
                rule: a.rule.parse::<QualityRule>()?,
                noise_std: a.noise_std,
                ood_fraction: a.ood_fraction,
                ood_shift: a.ood_shift,
                seed: a.seed,
            };
            generate_synthetic(&spec)?.write_to(&a.out_dir)
        }
        Command::Train {
            config,
            repeat,
            point,
            out_dir,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.output_dir = out_dir.clone();
            let r = run_single(&cfg, point.as_deref(), repeat, &out_dir)?;
            println!("best_epoch\t{}\ntest_srcc\t{}\ntest_plcc\t{}", r.best_epoch, r.report.srcc, r.report.plcc);
            Ok(())
        }
        Command::Eval { checkpoint, data, out } => {
            let params = load_checkpoint(&checkpoint)?;
            let ds = load_dataset(&data)?;
            let moss = ds
                .moss()
                .ok_or_else(|| Error::InvalidArgument(format!("{} has unlabeled samples", data.display())))?;
            let report = evaluate(&params.predict(&features(&ds))?, &moss)?;
            write(&out, format_report(&report.to_records()))
        }
        Command::Predict { checkpoint, data, out } => {
            let params = load_checkpoint(&checkpoint)?;
            let ds = load_dataset(&data)?;
            let preds = params.predict(&features(&ds))?;
            write(&out, format_scores(ds.samples.iter().map(|s| s.id.as_str()).zip(preds)))
        }
        Command::Spot { checkpoint, pool, k, out } => {
            let params = load_checkpoint(&checkpoint)?;
            let ds = load_dataset(&pool)?;
            write(&out, format_ranking(&spot_failures(&params, &ds.samples, k)?))
        }
        Command::Gmad {
            defender,
            attacker,
            levels,
            out,
        } => {
            let d = read_scores(&defender)?;
            let a = read_scores(&attacker)?;
            write(&out, format_gmad(&gmad_pairs(&d, &a, levels)?))
        }
        Command::Run { config } => {
            let summary = run_experiment(&config)?;
            print!("{}", format_summary(&summary));
            let failed: usize = summary.points.iter().map(|p| p.repeats.len() - p.repeats_ok()).sum();
            if failed > 0 {
                eprintln!("warning\t{failed} repeat(s) failed; see error.txt in their directories");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error\tusage\t{first}");
            return ExitCode::from(2);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error\t{}\t{}", e.kind(), e.to_string().replace(['\n', '\t'], " "));
            ExitCode::FAILURE
        }
    }
}
