mod commands;
mod config;
mod error;
mod output;
mod selftest;
mod synth;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::ExperimentConfig;
use error::CliError;

/// Meta-learning for cross-lingual transfer: pretrain, meta-learn on
/// auxiliary languages, evaluate, sweep auxiliaries, scan typology.
#[derive(Debug, Parser)]
#[command(name = "xmaml", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Independent meta-learning runs.
    #[arg(long, global = true)]
    runs: Option<usize>,
    /// Meta-gradient order.
    #[arg(long, global = true)]
    order: Option<Order>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Order {
    Full,
    First,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Zero,
    Few,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ConditionArg {
    Value,
    Match,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train on the source language.
    Pretrain {
        /// Share of the source training records to use.
        #[arg(long)]
        train_fraction: Option<f64>,
    },
    /// Meta-learn from the pretrained model on auxiliary dev sets.
    Meta {
        /// Comma-separated auxiliary languages.
        #[arg(long, value_delimiter = ',')]
        aux: Vec<String>,
    },
    /// Evaluate on every pool language outside the auxiliary set.
    Eval {
        #[arg(long)]
        mode: Option<Mode>,
        /// Auxiliary set whose meta checkpoints to evaluate; none evaluates the pretrained model.
        #[arg(long, value_delimiter = ',')]
        aux: Vec<String>,
        /// Few-shot fine-tuning epochs (overrides the config).
        #[arg(long)]
        finetune_epochs: Option<usize>,
    },
    /// Single-auxiliary delta matrix, and best auxiliary pairs with --pairs.
    Sweep {
        #[arg(long)]
        pairs: bool,
        #[arg(long)]
        mode: Option<Mode>,
    },
    /// Scan typological features for predictability from transfer deltas.
    Typology {
        /// Typology table CSV (`language,feature,value`).
        #[arg(long)]
        wals: PathBuf,
        /// Delta matrix CSV.
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        condition: Option<ConditionArg>,
        /// Significance level before Bonferroni correction.
        #[arg(long)]
        cutoff: Option<f64>,
    },
    /// Run the built-in gradient and statistics oracles.
    Selftest,
    /// Write a synthetic language family and a matching config.
    Synth {
        #[arg(long, default_value_t = 5)]
        languages: usize,
        #[arg(long, default_value_t = 2)]
        bits: usize,
        #[arg(long, default_value_t = 6)]
        dim: usize,
        #[arg(long, default_value_t = 1.0)]
        strength: f64,
        #[arg(long, default_value_t = 1000)]
        train: usize,
        #[arg(long, default_value_t = 200)]
        dev: usize,
        #[arg(long, default_value_t = 500)]
        test: usize,
        /// Also write a planted typology table and delta matrix.
        #[arg(long)]
        planted: bool,
    },
}

fn load_config(common: &Common) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out = std::path::absolute(out).map_err(|e| CliError::io(out, e))?;
    }
    if let Some(runs) = common.runs {
        cfg.meta.runs = runs;
    }
    if let Some(order) = common.order {
        cfg.meta.order = match order {
            Order::Full => "full",
            Order::First => "first",
        }
        .into();
    }
    Ok(cfg)
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Zero => "zero",
        Mode::Few => "few",
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Command::Selftest = cli.command {
        return selftest::cmd_selftest();
    }
    let mut cfg = load_config(&cli.common)?;
    match cli.command {
        Command::Pretrain { train_fraction } => {
            if let Some(f) = train_fraction {
                cfg.pretrain.train_fraction = f;
            }
            cfg.validate()?;
            commands::cmd_pretrain(&cfg)
        }
        Command::Meta { aux } => {
            cfg.validate()?;
            commands::cmd_meta(&cfg, &aux)
        }
        Command::Eval {
            mode,
            aux,
            finetune_epochs,
        } => {
            if let Some(m) = mode {
                cfg.eval.mode = mode_name(m).into();
            }
            if let Some(e) = finetune_epochs {
                cfg.eval.finetune_epochs = e;
            }
            cfg.validate()?;
            commands::cmd_eval(&cfg, &aux)
        }
        Command::Sweep { pairs, mode } => {
            if let Some(m) = mode {
                cfg.eval.mode = mode_name(m).into();
            }
            cfg.validate()?;
            commands::cmd_sweep(&cfg, pairs)
        }
        Command::Typology {
            wals,
            matrix,
            condition,
            cutoff,
        } => {
            if let Some(c) = condition {
                cfg.typology.condition = match c {
                    ConditionArg::Value => "value",
                    ConditionArg::Match => "match",
                }
                .into();
            }
            if let Some(c) = cutoff {
                cfg.typology.cutoff = c;
            }
            cfg.validate()?;
            let condition = cfg.condition()?;
            commands::cmd_typology(&cfg, &wals, &matrix, condition)
        }
        Command::Synth {
            languages,
            bits,
            dim,
            strength,
            train,
            dev,
            test,
            planted,
        } => {
            let dir = cli.common.out.clone().unwrap_or_else(|| PathBuf::from("synthetic"));
            let opts = synth::SynthOptions {
                languages,
                bits,
                dim,
                strength,
                train,
                dev,
                test,
                seed: cfg.seed,
                planted,
            };
            synth::cmd_synth(&dir, &opts)
        }
        Command::Selftest => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
