//! Subcommand implementations plus the input-loading helpers they share.
//! Every loader reads the file once, records its digest in the manifest,
//! and parses from the same bytes, so the manifest describes exactly what
//! the run consumed.

pub mod evaluate;
pub mod forecast;
pub mod scenarios;
pub mod schedule;
pub mod synth;

use crate::manifest::Manifest;
use crate::runio;
use gduplan::domain::{DayIndex, SeedPopulation, SiteId, WeekIndex, WeekMembership};
use gduplan::harvest::{build_harvest_table, HarvestTable};
use gduplan::ingest::{parse_gdu_history, parse_populations, site_series, DailyGduSeries};
use gduplan::rio::{load_scenarios, ScenarioSet};
use gduplan::scheduler::{PlantingSchedule, ScheduleReport, WindowLimit};
use gduplan::{Error, Result};
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Cursor;
use std::path::{Path, PathBuf};

pub fn load_history(
    manifest: &mut Manifest,
    path: &Path,
    site: u32,
) -> Result<DailyGduSeries> {
    let bytes = runio::read_bytes(path)?;
    manifest.input("history", path, &bytes);
    let all = parse_gdu_history(Cursor::new(bytes), &Vec::new())?;
    Ok(site_series(&all, SiteId(site))?.clone())
}

pub fn load_population_file(manifest: &mut Manifest, path: &Path) -> Result<Vec<SeedPopulation>> {
    let bytes = runio::read_bytes(path)?;
    manifest.input("populations", path, &bytes);
    parse_populations(Cursor::new(bytes), &Default::default())
}

/// Scenario sets live in two files: the CSV trajectories and a JSON sidecar
/// with probabilities and seeds. The sidecar defaults to the CSV path with
/// a `.json` extension.
pub fn load_scenario_set(
    manifest: &mut Manifest,
    csv_path: &Path,
    meta_path: Option<&Path>,
) -> Result<ScenarioSet> {
    let meta_path: PathBuf = match meta_path {
        Some(p) => p.to_path_buf(),
        None => csv_path.with_extension("json"),
    };
    let csv_bytes = runio::read_bytes(csv_path)?;
    manifest.input("scenarios", csv_path, &csv_bytes);
    let meta_bytes = runio::read_bytes(&meta_path)?;
    manifest.input("scenarios_meta", &meta_path, &meta_bytes);
    load_scenarios(Cursor::new(csv_bytes), Cursor::new(meta_bytes))
}

/// Harvest table for a population list against a scenario set, with week
/// membership spanning the scenarios.
pub fn harvest_table(
    populations: &[SeedPopulation],
    scenarios: &ScenarioSet,
) -> Result<HarvestTable> {
    let membership = WeekMembership::covering(scenarios.start_day(), scenarios.horizon())?;
    build_harvest_table(populations, scenarios, &membership)
}

/// Resolve the allowed harvest window from optional flags, defaulting each
/// end to the full span the table can reach.
pub fn resolve_window(
    table: &HarvestTable,
    first_week: Option<i64>,
    last_week: Option<i64>,
) -> Result<WindowLimit> {
    let full = gduplan::scheduler::full_table_window(table)?;
    WindowLimit::new(
        first_week.map(WeekIndex).unwrap_or_else(|| full.first_week()),
        last_week.map(WeekIndex).unwrap_or_else(|| full.last_week()),
    )
}

/// Read planting days back out of a previously emitted schedule CSV,
/// aligned to `table`'s population order. Only the `population` and
/// `plant_date` columns are consulted.
pub fn read_schedule_days(
    manifest: &mut Manifest,
    label: &str,
    path: &Path,
    table: &HarvestTable,
) -> Result<Vec<DayIndex>> {
    let bytes = runio::read_bytes(path)?;
    manifest.input(label, path, &bytes);
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(Cursor::new(bytes));
    let headers = reader.headers()?.clone();
    let pop_col = headers
        .iter()
        .position(|h| h == "population")
        .ok_or_else(|| Error::InvalidConfig(format!("{}: missing column \"population\"", path.display())))?;
    let date_col = headers
        .iter()
        .position(|h| h == "plant_date")
        .ok_or_else(|| Error::InvalidConfig(format!("{}: missing column \"plant_date\"", path.display())))?;

    let mut by_id: BTreeMap<String, DayIndex> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let id = record.get(pop_col).unwrap_or("").to_string();
        let date = record.get(date_col).unwrap_or("");
        let date = chrono_parse(date).ok_or_else(|| Error::InvalidConfig(format!(
            "{}: population {id:?}: unparseable plant_date {date:?}",
            path.display()
        )))?;
        by_id.insert(id, date);
    }
    (0..table.population_count())
        .map(|i| {
            let id = table.population_id(i);
            by_id.get(id).copied().ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "{}: no plant_date for population {id:?}",
                    path.display()
                ))
            })
        })
        .collect()
}

fn chrono_parse(text: &str) -> Option<DayIndex> {
    use std::str::FromStr;
    chrono::NaiveDate::from_str(text).ok().map(DayIndex::from_date)
}

/// Expected (probability-weighted) harvest total per week — the bar heights
/// in the weekly-harvest figure.
pub fn expected_weekly(schedule: &PlantingSchedule, probabilities: &[f64]) -> BTreeMap<i64, f64> {
    let profile = &schedule.profile;
    let mut out: BTreeMap<i64, f64> = BTreeMap::new();
    for s in 0..profile.scenario_count() {
        for (week, total) in profile.weekly(s) {
            *out.entry(week.0).or_insert(0.0) += probabilities[s] * *total as f64;
        }
    }
    out
}

/// The JSON report a scheduling or evaluation run emits: the window and
/// capacity in force, the schedule-quality tables, and optionally the same
/// tables for a supplied baseline schedule.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub mode: String,
    pub engine: Option<String>,
    pub first_week: i64,
    pub last_week: i64,
    pub capacity: Option<u64>,
    /// Case 2 only: the bisection minimum weekly capacity.
    pub min_capacity: Option<u64>,
    pub schedule: ScheduleReport,
    pub baseline: Option<ScheduleReport>,
}

pub fn write_json(
    manifest: &mut Manifest,
    out_dir: &Path,
    name: &str,
    value: &impl Serialize,
) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    manifest.emit(out_dir, name, &bytes)
}
