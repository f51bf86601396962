//! `gduplan schedule` — solve one of the three scheduling problems and emit
//! the schedule, its quality report, the weekly harvest profile, and the
//! figure-style SVGs.

use crate::commands::{
    expected_weekly, harvest_table, load_population_file, load_scenario_set, read_schedule_days,
    resolve_window, write_json, RunReport,
};
use crate::manifest::Manifest;
use crate::svg::{bar_chart, sweep_heatmap, BarSeries};
use crate::Cli;
use clap::{Args, ValueEnum};
use gduplan::domain::WeekIndex;
use gduplan::harvest::HarvestTable;
use gduplan::scheduler::{
    audit_schedule, choose_engine, default_sweep_config, evaluate_schedule, score_schedule,
    solve_case2, sweep_harvest_windows, write_profile_csv, write_schedule_csv, write_sweep_grid,
    Engine, HeuristicConfig, PlantingSchedule, SolveOptions, SweepConfig, WindowLimit,
    DEFAULT_NODE_BUDGET,
};
use gduplan::{Error, Result};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Minimize expected worst capacity slack under a weekly capacity.
    Case1,
    /// Find the minimum weekly capacity any schedule needs.
    Case2,
    /// Grid-search harvest windows, re-solving case 1 per cell.
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EngineArg {
    /// Exact when the candidate space is small, heuristic otherwise.
    Auto,
    Exact,
    Heuristic,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct ScheduleArgs {
    /// Which problem to solve.
    #[arg(long, value_enum, default_value_t = Mode::Case1)]
    pub mode: Mode,

    /// Scenario CSV from `scenarios generate`.
    #[arg(long)]
    pub scenarios: PathBuf,

    /// Scenario JSON sidecar (default: the CSV path with extension .json).
    #[arg(long)]
    pub scenarios_meta: Option<PathBuf>,

    /// Populations CSV.
    #[arg(long)]
    pub populations: PathBuf,

    /// Weekly harvest capacity in ears (required for case1 and sweep).
    #[arg(long)]
    pub capacity: Option<u64>,

    #[arg(long, value_enum, default_value_t = EngineArg::Auto)]
    pub engine: EngineArg,

    /// First allowed harvest week (default: earliest reachable).
    #[arg(long)]
    pub first_week: Option<i64>,

    /// Last allowed harvest week (default: latest reachable).
    #[arg(long)]
    pub last_week: Option<i64>,

    /// Exact-engine node budget before giving up.
    #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
    pub node_budget: u64,

    /// Heuristic-engine budget of accepted improvement steps.
    #[arg(long, default_value_t = HeuristicConfig::default().max_iterations)]
    pub iterations: usize,

    /// Sweep mode: range of first harvest weeks, `a..b` inclusive.
    #[arg(long)]
    pub sweep_first: Option<String>,

    /// Sweep mode: range of last harvest weeks, `a..b` inclusive.
    #[arg(long)]
    pub sweep_last: Option<String>,

    /// A previously emitted schedule CSV to score and chart alongside the
    /// optimized schedule.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
}

fn parse_week_range(text: &str) -> Result<(WeekIndex, WeekIndex)> {
    let parsed = match text.split_once("..") {
        Some((a, b)) => a
            .trim()
            .parse::<i64>()
            .and_then(|a| b.trim().parse::<i64>().map(|b| (a, b)))
            .ok(),
        None => text.trim().parse::<i64>().map(|w| (w, w)).ok(),
    };
    parsed
        .map(|(a, b)| (WeekIndex(a), WeekIndex(b)))
        .ok_or_else(|| {
            Error::InvalidConfig(format!(
                "week range {text:?} is not of the form \"a..b\" or \"a\""
            ))
        })
}

fn require_capacity(args: &ScheduleArgs) -> Result<u64> {
    args.capacity.ok_or_else(|| {
        Error::InvalidConfig("this mode needs --capacity (ears per week)".into())
    })
}

fn resolve_engine(
    arg: EngineArg,
    table: &HarvestTable,
    window: WindowLimit,
) -> Engine {
    match arg {
        EngineArg::Auto => choose_engine(table, window),
        EngineArg::Exact => Engine::Exact,
        EngineArg::Heuristic => Engine::Heuristic,
    }
}

/// Artifacts shared by every mode: schedule CSV, profile CSV, report JSON,
/// weekly-harvest SVG.
#[allow(clippy::too_many_arguments)]
fn emit_solution(
    cli: &Cli,
    manifest: &mut Manifest,
    table: &HarvestTable,
    schedule: &PlantingSchedule,
    report_capacity: u64,
    mode: &Mode,
    engine: Option<Engine>,
    min_capacity: Option<u64>,
    baseline: Option<&Path>,
) -> Result<()> {
    let mut csv = Vec::new();
    write_schedule_csv(schedule, table, &mut csv)?;
    manifest.emit(&cli.out, "schedule.csv", &csv)?;

    let mut profile = Vec::new();
    write_profile_csv(&schedule.profile, &mut profile)?;
    manifest.emit(&cli.out, "harvest_profile.csv", &profile)?;

    let mut series = Vec::new();
    let baseline_report = match baseline {
        Some(path) => {
            let days = read_schedule_days(manifest, "baseline", path, table)?;
            let scored = score_schedule(table, days, schedule.window, report_capacity)?;
            series.push(BarSeries {
                label: "baseline".to_string(),
                color: "#9ecae1",
                values: expected_weekly(&scored, table.probabilities()),
            });
            Some(evaluate_schedule(&scored, table, report_capacity)?)
        }
        None => None,
    };
    series.push(BarSeries {
        label: "optimized".to_string(),
        color: "#2ca02c",
        values: expected_weekly(schedule, table.probabilities()),
    });
    let chart = bar_chart(
        "Expected weekly harvest",
        Some(report_capacity as f64),
        &series,
    );
    manifest.emit(&cli.out, "weekly_harvest.svg", chart.as_bytes())?;

    let report = RunReport {
        mode: format!("{mode:?}").to_lowercase(),
        engine: engine.map(|e| e.to_string()),
        first_week: schedule.window.first_week().0,
        last_week: schedule.window.last_week().0,
        capacity: Some(report_capacity),
        min_capacity,
        schedule: evaluate_schedule(schedule, table, report_capacity)?,
        baseline: baseline_report,
    };
    write_json(manifest, &cli.out, "report.json", &report)?;

    println!(
        "harvest weeks {}..={}, max weekly load {}, expected worst slack {:.2}",
        report.schedule.first_week,
        report.schedule.last_week,
        report.schedule.max_required_capacity,
        report.schedule.expected_case1_objective
    );
    Ok(())
}

pub fn run(cli: &Cli, args: &ScheduleArgs) -> Result<()> {
    let mut manifest = Manifest::new(&["schedule"], cli.seed);
    manifest.param("mode", format!("{:?}", args.mode).to_lowercase());
    manifest.param("capacity", args.capacity);
    manifest.param("node_budget", args.node_budget);
    manifest.param("iterations", args.iterations);

    let populations = load_population_file(&mut manifest, &args.populations)?;
    let scenario_set = load_scenario_set(
        &mut manifest,
        &args.scenarios,
        args.scenarios_meta.as_deref(),
    )?;
    let table = harvest_table(&populations, &scenario_set)?;

    let heuristic = HeuristicConfig {
        seed: cli.seed,
        max_iterations: args.iterations,
    };

    match args.mode {
        Mode::Case1 => {
            let capacity = require_capacity(args)?;
            let window = resolve_window(&table, args.first_week, args.last_week)?;
            let engine = resolve_engine(args.engine, &table, window);
            manifest.param("engine", engine.to_string());
            manifest.param("first_week", window.first_week().0);
            manifest.param("last_week", window.last_week().0);
            let options = SolveOptions {
                engine,
                node_budget: args.node_budget,
                heuristic,
            };
            let schedule = options.solve_case1(&table, capacity, window, &populations)?;
            audit_schedule(&schedule, &table, &populations, capacity)?;
            emit_solution(
                cli,
                &mut manifest,
                &table,
                &schedule,
                capacity,
                &args.mode,
                Some(engine),
                None,
                args.baseline.as_deref(),
            )?;
        }
        Mode::Case2 => {
            let window = resolve_window(&table, args.first_week, args.last_week)?;
            let engine = resolve_engine(args.engine, &table, window);
            manifest.param("engine", engine.to_string());
            manifest.param("first_week", window.first_week().0);
            manifest.param("last_week", window.last_week().0);
            let options = SolveOptions {
                engine,
                node_budget: args.node_budget,
                heuristic,
            };
            let (min_capacity, schedule) = solve_case2(&table, &populations, window, &options)?;
            audit_schedule(&schedule, &table, &populations, min_capacity)?;
            println!("minimum weekly capacity: {min_capacity}");
            emit_solution(
                cli,
                &mut manifest,
                &table,
                &schedule,
                min_capacity,
                &args.mode,
                Some(engine),
                Some(min_capacity),
                args.baseline.as_deref(),
            )?;
        }
        Mode::Sweep => {
            let capacity = require_capacity(args)?;
            // Cells share one engine, picked from the widest window the
            // sweep can encounter.
            let full = gduplan::scheduler::full_table_window(&table)?;
            let solve = SolveOptions {
                engine: resolve_engine(args.engine, &table, full),
                node_budget: args.node_budget,
                heuristic,
            };
            let config = match (&args.sweep_first, &args.sweep_last) {
                (Some(f), Some(l)) => SweepConfig {
                    first_weeks: parse_week_range(f)?,
                    last_weeks: parse_week_range(l)?,
                    solve,
                },
                (None, None) => default_sweep_config(&table, capacity, &populations, solve)?,
                _ => {
                    return Err(Error::InvalidConfig(
                        "sweep needs both --sweep-first and --sweep-last (or neither)".into(),
                    ))
                }
            };
            manifest.param("engine", config.solve.engine.to_string());
            manifest.param(
                "sweep_first",
                format!("{}..{}", config.first_weeks.0 .0, config.first_weeks.1 .0),
            );
            manifest.param(
                "sweep_last",
                format!("{}..{}", config.last_weeks.0 .0, config.last_weeks.1 .0),
            );

            let result = sweep_harvest_windows(&table, capacity, &populations, &config)?;
            audit_schedule(&result.best_schedule, &table, &populations, capacity)?;

            let mut grid = Vec::new();
            write_sweep_grid(&result.grid, &mut grid)?;
            manifest.emit(&cli.out, "sweep_grid.csv", &grid)?;
            let heat = sweep_heatmap(&result);
            manifest.emit(&cli.out, "sweep_heatmap.svg", heat.as_bytes())?;
            println!(
                "best window: weeks {}..={} ({} grid cells)",
                result.best_window.first_week().0,
                result.best_window.last_week().0,
                result.grid.len()
            );

            let engine = config.solve.engine;
            emit_solution(
                cli,
                &mut manifest,
                &table,
                &result.best_schedule,
                capacity,
                &args.mode,
                Some(engine),
                None,
                args.baseline.as_deref(),
            )?;
        }
    }

    manifest.write(&cli.out)?;
    Ok(())
}
