//! `gduplan scenarios generate` — fit the residual GP behind a trained
//! forecaster and roll out Monte Carlo GDU scenarios.

use crate::commands::load_history;
use crate::manifest::Manifest;
use crate::runio;
use crate::Cli;
use clap::{Args, Subcommand};
use gduplan::forecaster::load_model;
use gduplan::rio::{
    fit_gp_with, generate_scenarios, residual_training_set, save_scenarios, GpFitOptions,
};
use gduplan::Result;
use std::io::Cursor;
use std::path::PathBuf;

#[derive(Debug, Subcommand)]
pub enum ScenariosAction {
    /// Sample GDU trajectories beyond the end of the history.
    Generate(GenerateArgs),
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct GenerateArgs {
    /// Trained model JSON from `forecast train`.
    #[arg(long)]
    pub model: PathBuf,

    /// GDU history CSV the model was trained on.
    #[arg(long)]
    pub history: PathBuf,

    /// Site whose history seeds the rollout.
    #[arg(long, default_value_t = 0)]
    pub site: u32,

    /// Number of scenarios to sample.
    #[arg(long, default_value_t = 25)]
    pub count: usize,

    /// Days to roll out per scenario.
    #[arg(long, default_value_t = 730)]
    pub horizon: usize,

    /// Cap on GP residual training points (thinned by uniform stride).
    #[arg(long, default_value_t = 1000)]
    pub gp_max_points: usize,

    /// Fix the GP noise standard deviation instead of deriving it from the
    /// residual variance.
    #[arg(long)]
    pub gp_noise_sd: Option<f64>,
}

pub fn run(cli: &Cli, action: &ScenariosAction) -> Result<()> {
    let ScenariosAction::Generate(args) = action;
    let mut manifest = Manifest::new(&["scenarios", "generate"], cli.seed);
    manifest.param("site", args.site);
    manifest.param("count", args.count);
    manifest.param("horizon", args.horizon);
    manifest.param("gp_max_points", args.gp_max_points);
    manifest.param("gp_noise_sd", args.gp_noise_sd);

    let model_bytes = runio::read_bytes(&args.model)?;
    manifest.input("model", &args.model, &model_bytes);
    let model = load_model(Cursor::new(model_bytes))?;
    let history = load_history(&mut manifest, &args.history, args.site)?;

    let (features, predictions, residuals) = residual_training_set(&model, &history)?;
    let opts = GpFitOptions {
        max_points: args.gp_max_points,
        noise_sd: args.gp_noise_sd,
        ..GpFitOptions::default()
    };
    let gp = fit_gp_with(&features, &predictions, &residuals, &opts)?;
    manifest.param("gp_hyper", gp.hyper());

    let set = generate_scenarios(&model, &gp, &history, args.count, args.horizon, cli.seed)?;

    let mut csv = Vec::new();
    let mut meta = Vec::new();
    save_scenarios(&set, &mut csv, &mut meta)?;
    manifest.emit(&cli.out, "scenarios.csv", &csv)?;
    manifest.emit(&cli.out, "scenarios.json", &meta)?;
    manifest.write(&cli.out)?;
    println!(
        "{} scenarios x {} days from day {} written to {}",
        set.len(),
        set.horizon(),
        set.start_day().0,
        cli.out.display()
    );
    Ok(())
}
