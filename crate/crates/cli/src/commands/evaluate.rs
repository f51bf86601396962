//! `gduplan evaluate` — score an existing schedule (hand-made, baseline, or
//! a previous run's output) against a scenario set without solving anything.

use crate::commands::{
    expected_weekly, harvest_table, load_population_file, load_scenario_set, read_schedule_days,
    resolve_window, write_json, RunReport,
};
use crate::manifest::Manifest;
use crate::svg::{bar_chart, BarSeries};
use crate::Cli;
use clap::Args;
use gduplan::scheduler::{evaluate_schedule, score_schedule, write_profile_csv};
use gduplan::Result;
use std::path::PathBuf;

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct EvaluateArgs {
    /// Scenario CSV from `scenarios generate`.
    #[arg(long)]
    pub scenarios: PathBuf,

    /// Scenario JSON sidecar (default: the CSV path with extension .json).
    #[arg(long)]
    pub scenarios_meta: Option<PathBuf>,

    /// Populations CSV.
    #[arg(long)]
    pub populations: PathBuf,

    /// Schedule CSV to score (needs `population` and `plant_date` columns).
    #[arg(long)]
    pub schedule: PathBuf,

    /// Weekly harvest capacity the schedule is judged against.
    #[arg(long)]
    pub capacity: u64,

    /// First allowed harvest week (default: earliest reachable).
    #[arg(long)]
    pub first_week: Option<i64>,

    /// Last allowed harvest week (default: latest reachable).
    #[arg(long)]
    pub last_week: Option<i64>,
}

pub fn run(cli: &Cli, args: &EvaluateArgs) -> Result<()> {
    let mut manifest = Manifest::new(&["evaluate"], cli.seed);
    manifest.param("capacity", args.capacity);

    let populations = load_population_file(&mut manifest, &args.populations)?;
    let scenario_set = load_scenario_set(
        &mut manifest,
        &args.scenarios,
        args.scenarios_meta.as_deref(),
    )?;
    let table = harvest_table(&populations, &scenario_set)?;
    let window = resolve_window(&table, args.first_week, args.last_week)?;
    manifest.param("first_week", window.first_week().0);
    manifest.param("last_week", window.last_week().0);

    let days = read_schedule_days(&mut manifest, "schedule", &args.schedule, &table)?;
    let schedule = score_schedule(&table, days, window, args.capacity)?;

    let mut profile = Vec::new();
    write_profile_csv(&schedule.profile, &mut profile)?;
    manifest.emit(&cli.out, "harvest_profile.csv", &profile)?;

    let chart = bar_chart(
        "Expected weekly harvest",
        Some(args.capacity as f64),
        &[BarSeries {
            label: "schedule".to_string(),
            color: "#9ecae1",
            values: expected_weekly(&schedule, table.probabilities()),
        }],
    );
    manifest.emit(&cli.out, "weekly_harvest.svg", chart.as_bytes())?;

    let report = RunReport {
        mode: "evaluate".to_string(),
        engine: None,
        first_week: window.first_week().0,
        last_week: window.last_week().0,
        capacity: Some(args.capacity),
        min_capacity: None,
        schedule: evaluate_schedule(&schedule, &table, args.capacity)?,
        baseline: None,
    };
    write_json(&mut manifest, &cli.out, "report.json", &report)?;
    manifest.write(&cli.out)?;

    println!(
        "max weekly load {} vs capacity {}; expected worst slack {:.2}",
        report.schedule.max_required_capacity, args.capacity,
        report.schedule.expected_case1_objective
    );
    Ok(())
}
