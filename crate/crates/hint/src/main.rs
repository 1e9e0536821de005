use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use hint::config::RunConfig;
use hint::data::Phase;
use hint::pipeline;
use hint::{Error, Result};

/// Clinical trial outcome prediction.
///
/// Settings are resolved as: command-line flags, then `--config` file, then
/// built-in defaults. Each command writes the resolved `config.json` to its
/// output directory; passing that file back with `--config` reruns it.
#[derive(Parser, Debug)]
#[command(name = "hint", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate a trial JSONL file, writing accepted records and rejections.
    Ingest,
    /// Generate a synthetic trial file with ontology and pretraining data.
    SynthGen,
    /// Pretrain the ADMET and disease-risk heads.
    Pretrain,
    /// Train the model on a date split of the trial file.
    Train,
    /// Score trials with a trained model.
    Predict,
    /// Compute bootstrap metrics for a score file against trial labels.
    Evaluate,
}

#[derive(Args, Debug, Default)]
struct Flags {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    trials: Option<PathBuf>,
    /// Ontology parent map (child<TAB>parent).
    #[arg(long, global = true)]
    ontology: Option<PathBuf>,
    /// Directory holding absorption.tsv ... toxicity.tsv.
    #[arg(long, global = true)]
    pk_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    risk: Option<PathBuf>,
    #[arg(long, global = true)]
    pretrain_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    model_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    scores: Option<PathBuf>,
    /// Second score file for a paired bootstrap p-value.
    #[arg(long, global = true)]
    baseline_scores: Option<PathBuf>,
    #[arg(long, short = 'o', global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    lr: Option<f64>,
    #[arg(long, global = true)]
    admet_lr: Option<f64>,
    #[arg(long, global = true)]
    risk_lr: Option<f64>,
    /// Training epochs (pretraining epochs for `pretrain`).
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long, global = true)]
    batch_size: Option<usize>,
    #[arg(long, global = true)]
    dropout: Option<f64>,
    /// `hashing:<seed>` or `precomputed:<path>`.
    #[arg(long, global = true)]
    encoder: Option<String>,
    /// YYYY-MM-DD; earlier trials train, the rest test.
    #[arg(long, global = true)]
    split_date: Option<NaiveDate>,
    #[arg(long, global = true)]
    validation_fraction: Option<f64>,
    /// 1, 2, 3 or indication.
    #[arg(long, global = true)]
    phase: Option<Phase>,
    /// Train from scratch without pretrained heads.
    #[arg(long, global = true)]
    no_pretrain: bool,
    /// Drop the attentive graph network; predict from the aggregators.
    #[arg(long, global = true)]
    no_gnn: bool,
    /// Bootstrap resamples.
    #[arg(long, global = true)]
    bootstrap: Option<usize>,
    /// Number of synthetic trials.
    #[arg(long, global = true)]
    n: Option<usize>,
    #[arg(long, global = true)]
    missing_fraction: Option<f64>,
    #[arg(long, global = true)]
    noise: Option<f64>,
    /// Records per synthetic pretraining dataset.
    #[arg(long, global = true)]
    aux_n: Option<usize>,
}

macro_rules! overlay {
    ($cfg:ident, $flags:ident; $($field:ident => $target:ident),* $(,)?) => {
        $(if let Some(v) = $flags.$field.clone() { $cfg.$target = v.into(); })*
    };
}

fn resolve(command: &Command, flags: &Flags) -> Result<RunConfig> {
    let mut cfg = match &flags.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    overlay!(cfg, flags;
        trials => trials, ontology => ontology, pk_dir => pk_dir, risk => risk,
        pretrain_dir => pretrain_dir, model_dir => model_dir, scores => scores,
        baseline_scores => baseline_scores, output_dir => output_dir, seed => seed,
        lr => lr, admet_lr => admet_lr, risk_lr => risk_lr, batch_size => batch_size,
        dropout => dropout, encoder => encoder, split_date => split_date,
        validation_fraction => validation_fraction, phase => phase, bootstrap => bootstrap,
        n => synth_n, missing_fraction => synth_missing_fraction, noise => synth_noise,
        aux_n => synth_aux_n,
    );
    if let Some(e) = flags.epochs {
        match command {
            Command::Pretrain => cfg.pretrain_epochs = e,
            _ => cfg.epochs = e,
        }
    }
    if flags.no_pretrain {
        cfg.no_pretrain = true;
    }
    if flags.no_gnn {
        cfg.use_gnn = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = resolve(&cli.command, &cli.flags)?;
    let out = cfg.output_dir.display();
    match cli.command {
        Command::Ingest => {
            let s = pipeline::cmd_ingest(&cfg)?;
            println!("{} lines: {} accepted, {} rejected -> {out}", s.lines, s.accepted, s.rejected);
        }
        Command::SynthGen => {
            pipeline::cmd_synth(&cfg)?;
            println!("{} synthetic trials -> {out}", cfg.synth_n);
        }
        Command::Pretrain => {
            for r in pipeline::cmd_pretrain(&cfg)? {
                let last = r.epoch_losses.last().copied().unwrap_or(f64::NAN);
                println!("{:<12} used {:>5} skipped {:>3} final loss {last:.4}", r.name, r.used, r.skipped);
            }
        }
        Command::Train => {
            let s = pipeline::cmd_train(&cfg)?;
            for e in &s.log {
                println!("epoch {:>3} train {:.4} recovery {:.4} valid {:.4}", e.epoch, e.train_loss, e.recovery_loss, e.valid_loss);
            }
            println!("best epoch {} ({} train / {} valid / {} test) -> {out}", s.best_epoch, s.train, s.valid, s.test);
        }
        Command::Predict => {
            let s = pipeline::cmd_predict(&cfg)?;
            println!("{} scores -> {out}", s.len());
        }
        Command::Evaluate => {
            print!("{}", pipeline::cmd_evaluate(&cfg)?.to_table());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    e.exit_code() as u8
}
