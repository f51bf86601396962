//! `gduplan forecast` — train the GDU forecaster or cross-validate it
//! against the persistence baseline.

use crate::commands::{load_history, write_json};
use crate::manifest::Manifest;
use crate::Cli;
use clap::{Args, Subcommand};
use gduplan::forecaster::{
    cross_validate, persistence_cv, save_model, train, AccuracyReport, TrainConfig,
};
use gduplan::Result;
use serde::Serialize;
use std::path::PathBuf;

#[derive(Debug, Subcommand)]
pub enum ForecastAction {
    /// Train on one site's history and save the model as JSON.
    Train(ForecastArgs),
    /// Time-wise cross-validation of the model and the persistence baseline.
    Eval(ForecastArgs),
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct ForecastArgs {
    /// GDU history CSV (`site,date,gdu`).
    #[arg(long)]
    pub history: PathBuf,

    /// Site to train on.
    #[arg(long, default_value_t = 0)]
    pub site: u32,

    /// Training epochs (0 saves the freshly initialized model unchanged).
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,

    /// Input window length in days.
    #[arg(long, default_value_t = 30)]
    pub window: usize,

    /// Recurrent state width.
    #[arg(long, default_value_t = 20)]
    pub hidden: usize,

    /// Dense layer width.
    #[arg(long, default_value_t = 20)]
    pub dense: usize,

    /// Minibatch size.
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,

    /// Early-stopping patience in epochs (0 disables early stopping).
    #[arg(long, default_value_t = 20)]
    pub patience: usize,
}

impl ForecastArgs {
    fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            window: self.window,
            hidden: self.hidden,
            dense: self.dense,
            epochs: self.epochs,
            batch_size: self.batch_size,
            patience: self.patience,
            rng_seed: seed,
            ..TrainConfig::default()
        }
    }
}

#[derive(Debug, Serialize)]
struct CvReport {
    config: TrainConfig,
    model: AccuracyReport,
    persistence: AccuracyReport,
}

pub fn run(cli: &Cli, action: &ForecastAction) -> Result<()> {
    match action {
        ForecastAction::Train(args) => {
            let mut manifest = Manifest::new(&["forecast", "train"], cli.seed);
            let cfg = args.train_config(cli.seed);
            manifest.param("site", args.site);
            manifest.param("train_config", &cfg);
            let history = load_history(&mut manifest, &args.history, args.site)?;

            let model = train(&history, &cfg)?;
            let mut bytes = Vec::new();
            save_model(&model, &mut bytes)?;
            manifest.emit(&cli.out, "model.json", &bytes)?;
            manifest.write(&cli.out)?;
            println!(
                "trained on {} days of site {} history; model saved to {}",
                history.len(),
                args.site,
                cli.out.join("model.json").display()
            );
        }
        ForecastAction::Eval(args) => {
            let mut manifest = Manifest::new(&["forecast", "eval"], cli.seed);
            let cfg = args.train_config(cli.seed);
            manifest.param("site", args.site);
            manifest.param("train_config", &cfg);
            let history = load_history(&mut manifest, &args.history, args.site)?;

            let report = CvReport {
                model: cross_validate(&history, &cfg)?,
                persistence: persistence_cv(&history)?,
                config: cfg,
            };
            write_json(&mut manifest, &cli.out, "cv_report.json", &report)?;
            manifest.write(&cli.out)?;
            println!(
                "cross-validation rmse {:.4} (persistence {:.4}), r2 {:.4}",
                report.model.rmse, report.persistence.rmse, report.model.r2
            );
        }
    }
    Ok(())
}
