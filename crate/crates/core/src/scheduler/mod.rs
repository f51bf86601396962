//! Planting-day optimization over harvest scenarios.
//!
//! Two problems are solved over the precomputed [`HarvestTable`]:
//!
//! * **Case 1** (capacitated consistency): pick one planting day per
//!   population so that, in expectation over scenarios, the largest gap
//!   between weekly capacity and weekly harvest inside the allowed window is
//!   as small as possible — i.e. keep every week of the window busy.
//! * **Case 2** (minimum capacity): find the smallest weekly capacity any
//!   schedule can guarantee across all scenarios, by binary search over a
//!   case-1 feasibility engine.
//!
//! The pairwise-consistency value (expected sum of absolute differences of
//! weekly totals) is tracked as a secondary, tie-breaking and
//! window-selection criterion only; optimizing it directly is intractable at
//! full problem size.
//!
//! Both an exact branch-and-bound solver (small instances, optimality
//! certified) and a greedy + local-search heuristic (full scale) implement
//! the same interface and the same feasibility contract: one day per
//! population inside its window, every scenario's harvest confined to the
//! window, and weekly totals within capacity.

mod case2;
mod exact;
mod heuristic;
mod sweep;

pub use case2::solve_case2;
pub use exact::{solve_case1_exact, solve_case1_exact_with, DEFAULT_NODE_BUDGET};
pub use heuristic::{solve_case1_heuristic, HeuristicConfig};
pub use sweep::{
    default_sweep_config, sweep_harvest_windows, write_sweep_grid, CellStatus, SweepCell,
    SweepConfig, SweepResult,
};

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use std::collections::BTreeMap;
use std::io::Write;

use crate::domain::{DayIndex, SeedPopulation, WeekIndex};
use crate::error::{Error, Result};
use crate::harvest::HarvestTable;

/// Inclusive range of weeks harvests are allowed to land in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowLimit {
    first_week: WeekIndex,
    last_week: WeekIndex,
}

impl WindowLimit {
    pub fn new(first_week: WeekIndex, last_week: WeekIndex) -> Result<Self> {
        if first_week > last_week {
            return Err(Error::InvalidConfig(format!(
                "harvest window first week {first_week} after last week {last_week}"
            )));
        }
        Ok(WindowLimit {
            first_week,
            last_week,
        })
    }

    pub fn first_week(&self) -> WeekIndex {
        self.first_week
    }

    pub fn last_week(&self) -> WeekIndex {
        self.last_week
    }

    /// Number of weeks in the window (at least 1).
    pub fn len(&self) -> usize {
        (self.last_week.0 - self.first_week.0 + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false // first ≤ last is a construction invariant
    }

    pub fn contains(&self, week: WeekIndex) -> bool {
        self.first_week <= week && week <= self.last_week
    }

    pub fn weeks(&self) -> impl Iterator<Item = WeekIndex> + '_ {
        (self.first_week.0..=self.last_week.0).map(WeekIndex)
    }
}

impl std::fmt::Display for WindowLimit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "weeks {}..={}", self.first_week, self.last_week)
    }
}

/// Weekly harvest totals per scenario. Only harvested weeks are stored;
/// absent weeks total zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HarvestProfile {
    per_scenario: Vec<BTreeMap<WeekIndex, u64>>,
}

impl HarvestProfile {
    pub fn scenario_count(&self) -> usize {
        self.per_scenario.len()
    }

    pub fn weekly(&self, scenario: usize) -> &BTreeMap<WeekIndex, u64> {
        &self.per_scenario[scenario]
    }

    pub fn total(&self, scenario: usize, week: WeekIndex) -> u64 {
        self.per_scenario[scenario]
            .get(&week)
            .copied()
            .unwrap_or(0)
    }

    /// Largest weekly total over all scenarios and weeks.
    pub fn max_weekly(&self) -> u64 {
        self.per_scenario
            .iter()
            .flat_map(|m| m.values())
            .copied()
            .max()
            .unwrap_or(0)
    }

    /// Earliest week with a nonzero total in any scenario.
    pub fn first_week(&self) -> Option<WeekIndex> {
        self.per_scenario
            .iter()
            .filter_map(|m| m.keys().next())
            .min()
            .copied()
    }

    /// Latest week with a nonzero total in any scenario.
    pub fn last_week(&self) -> Option<WeekIndex> {
        self.per_scenario
            .iter()
            .filter_map(|m| m.keys().next_back())
            .max()
            .copied()
    }
}

/// Weekly totals implied by planting each population on its assigned day.
/// Every (population, day, scenario) triple must be harvestable.
pub fn build_profile(table: &HarvestTable, days: &[DayIndex]) -> Result<HarvestProfile> {
    if days.len() != table.population_count() {
        return Err(Error::ShapeMismatch {
            what: "schedule assignment",
            expected: table.population_count(),
            got: days.len(),
        });
    }
    let mut per_scenario = vec![BTreeMap::new(); table.scenario_count()];
    for (i, &day) in days.iter().enumerate() {
        for (s, map) in per_scenario.iter_mut().enumerate() {
            let week = table.harvest_week(i, day, s).ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "population {}: day {} is not harvestable in scenario {s}",
                    table.population_id(i),
                    day.0
                ))
            })?;
            *map.entry(week).or_insert(0) += table.quantity(i);
        }
    }
    Ok(HarvestProfile { per_scenario })
}

/// Expected worst weekly capacity slack (the case-1 objective), plus a
/// feasibility flag: true iff every weekly total fits the capacity and every
/// harvest lands inside the window.
///
/// The value is `Σ_s P_s · max_{w ∈ window} (capacity − total_s(w))`; weeks
/// of the window with no harvest count as zero, so sparse coverage of the
/// window is penalized at the full capacity.
pub fn evaluate_case1_objective(
    profile: &HarvestProfile,
    capacity: u64,
    probabilities: &[f64],
    window: &WindowLimit,
) -> Result<(f64, bool)> {
    if probabilities.len() != profile.scenario_count() {
        return Err(Error::ShapeMismatch {
            what: "scenario probabilities",
            expected: profile.scenario_count(),
            got: probabilities.len(),
        });
    }
    let mut value = 0.0;
    let mut feasible = true;
    for (s, p) in probabilities.iter().enumerate() {
        let min_load = window
            .weeks()
            .map(|w| profile.total(s, w))
            .min()
            .expect("window is non-empty");
        value += p * (capacity as f64 - min_load as f64);
        for (&week, &total) in profile.weekly(s) {
            if total > capacity || !window.contains(week) {
                feasible = false;
            }
        }
    }
    Ok((value, feasible))
}

/// Expected sum of absolute pairwise differences of weekly totals across the
/// window (the consistency measure used for window selection and
/// tie-breaking). Weeks without harvest contribute zeros.
pub fn evaluate_pairwise_objective(
    profile: &HarvestProfile,
    probabilities: &[f64],
    window: &WindowLimit,
) -> Result<f64> {
    if probabilities.len() != profile.scenario_count() {
        return Err(Error::ShapeMismatch {
            what: "scenario probabilities",
            expected: profile.scenario_count(),
            got: probabilities.len(),
        });
    }
    let mut value = 0.0;
    for (s, p) in probabilities.iter().enumerate() {
        let loads: Vec<u64> = window.weeks().map(|w| profile.total(s, w)).collect();
        let mut pair_sum = 0.0;
        for i in 0..loads.len() {
            for j in (i + 1)..loads.len() {
                pair_sum += loads[i].abs_diff(loads[j]) as f64;
            }
        }
        value += p * pair_sum;
    }
    Ok(value)
}

/// One planting day per population, with the profile and objective values it
/// induces under the window it was solved for.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantingSchedule {
    /// Assigned planting day, aligned with the table's population order.
    pub days: Vec<DayIndex>,
    pub window: WindowLimit,
    pub objective_case1: f64,
    pub pairwise_objective: f64,
    /// Largest weekly harvest over all scenarios and weeks.
    pub max_capacity_used: u64,
    pub profile: HarvestProfile,
}

/// Assemble a schedule from an assignment: build the profile and evaluate
/// both objectives through the public evaluators, so every solver reports
/// values from one code path.
/// Score an externally chosen day assignment (one planting day per table
/// population, in table order) exactly the way the solvers score their own
/// output. Feasibility is not enforced: over-capacity or out-of-window
/// schedules still get honest objective values, which is what baseline
/// comparisons need.
pub fn score_schedule(
    table: &HarvestTable,
    days: Vec<DayIndex>,
    window: WindowLimit,
    capacity: u64,
) -> Result<PlantingSchedule> {
    finish_schedule(table, days, window, capacity)
}

pub(crate) fn finish_schedule(
    table: &HarvestTable,
    days: Vec<DayIndex>,
    window: WindowLimit,
    capacity: u64,
) -> Result<PlantingSchedule> {
    let profile = build_profile(table, &days)?;
    let (objective_case1, _) =
        evaluate_case1_objective(&profile, capacity, table.probabilities(), &window)?;
    let pairwise_objective =
        evaluate_pairwise_objective(&profile, table.probabilities(), &window)?;
    let max_capacity_used = profile.max_weekly();
    Ok(PlantingSchedule {
        days,
        window,
        objective_case1,
        pairwise_objective,
        max_capacity_used,
        profile,
    })
}

/// The solver-facing view of one population: its candidate days after
/// dropping inadmissible ones and collapsing week-equivalent duplicates.
#[derive(Debug, Clone)]
pub(crate) struct InstancePop {
    pub quantity: u64,
    /// Ascending by day; week-equivalent days keep only the earliest.
    pub candidates: Vec<Candidate>,
}

#[derive(Debug, Clone)]
pub(crate) struct Candidate {
    pub day: DayIndex,
    /// Harvest week per scenario, as offsets from the window's first week.
    pub week_offsets: Vec<u16>,
}

#[derive(Debug, Clone)]
pub(crate) struct Instance {
    pub window: WindowLimit,
    pub week_count: usize,
    pub scenario_count: usize,
    pub probabilities: Vec<f64>,
    pub capacity: u64,
    pub pops: Vec<InstancePop>,
}

impl Instance {
    /// Candidate days per population restricted to the window: a day
    /// survives only if it is harvestable in every scenario and every
    /// scenario's harvest week lies inside the window. A population left
    /// with no candidates makes the instance infeasible outright.
    pub fn build(table: &HarvestTable, capacity: u64, window: WindowLimit) -> Result<Instance> {
        if table.population_count() == 0 {
            return Err(Error::InvalidConfig("no populations to schedule".into()));
        }
        let scenario_count = table.scenario_count();
        let week_count = window.len();
        let mut pops = Vec::with_capacity(table.population_count());
        for i in 0..table.population_count() {
            let mut candidates: Vec<Candidate> = Vec::new();
            let start = table.window_start(i);
            for off in 0..table.window_len(i) {
                let day = DayIndex(start.0 + off as i64);
                let Some(weeks) = table.week_vector(i, day) else {
                    continue;
                };
                if !weeks.iter().all(|w| window.contains(*w)) {
                    continue;
                }
                let week_offsets: Vec<u16> = weeks
                    .iter()
                    .map(|w| (w.0 - window.first_week().0) as u16)
                    .collect();
                // Days with identical week vectors are interchangeable for
                // every objective; keeping the earliest preserves the
                // lexicographic tie-break.
                if !candidates.iter().any(|c| c.week_offsets == week_offsets) {
                    candidates.push(Candidate { day, week_offsets });
                }
            }
            if candidates.is_empty() {
                return Err(Error::Infeasible(format!(
                    "population {}: no planting day lands every scenario's harvest in {}",
                    table.population_id(i),
                    window
                )));
            }
            pops.push(InstancePop {
                quantity: table.quantity(i),
                candidates,
            });
        }
        Ok(Instance {
            window,
            week_count,
            scenario_count,
            probabilities: table.probabilities().to_vec(),
            capacity,
            pops,
        })
    }

    /// Case-1 objective from flat per-scenario load vectors. Mirrors
    /// `evaluate_case1_objective` term for term (same accumulation order),
    /// so leaf values agree bit-for-bit with the public evaluator.
    pub fn objective_from_loads(&self, loads: &[u64]) -> f64 {
        let mut value = 0.0;
        for (s, p) in self.probabilities.iter().enumerate() {
            let min_load = loads[s * self.week_count..(s + 1) * self.week_count]
                .iter()
                .min()
                .expect("window is non-empty");
            value += p * (self.capacity as f64 - *min_load as f64);
        }
        value
    }

    /// Pairwise objective from flat loads; mirrors
    /// `evaluate_pairwise_objective`'s accumulation order.
    pub fn pairwise_from_loads(&self, loads: &[u64]) -> f64 {
        let mut value = 0.0;
        for (s, p) in self.probabilities.iter().enumerate() {
            let row = &loads[s * self.week_count..(s + 1) * self.week_count];
            let mut pair_sum = 0.0;
            for i in 0..row.len() {
                for j in (i + 1)..row.len() {
                    pair_sum += row[i].abs_diff(row[j]) as f64;
                }
            }
            value += p * pair_sum;
        }
        value
    }

    pub fn add_candidate(&self, loads: &mut [u64], pop: usize, cand: &Candidate) {
        for (s, &off) in cand.week_offsets.iter().enumerate() {
            loads[s * self.week_count + off as usize] += self.pops[pop].quantity;
        }
    }

    pub fn remove_candidate(&self, loads: &mut [u64], pop: usize, cand: &Candidate) {
        for (s, &off) in cand.week_offsets.iter().enumerate() {
            loads[s * self.week_count + off as usize] -= self.pops[pop].quantity;
        }
    }

    /// True if adding this candidate keeps its harvest weeks within capacity.
    pub fn fits(&self, loads: &[u64], pop: usize, cand: &Candidate) -> bool {
        cand.week_offsets
            .iter()
            .enumerate()
            .all(|(s, &off)| loads[s * self.week_count + off as usize] + self.pops[pop].quantity <= self.capacity)
    }
}

/// Check that the declared populations match the table the solvers will
/// read quantities and windows from.
pub(crate) fn check_population_alignment(
    table: &HarvestTable,
    populations: &[SeedPopulation],
) -> Result<()> {
    if populations.len() != table.population_count() {
        return Err(Error::ShapeMismatch {
            what: "populations vs harvest table",
            expected: table.population_count(),
            got: populations.len(),
        });
    }
    for (i, p) in populations.iter().enumerate() {
        if p.id != table.population_id(i)
            || p.harvest_quantity != table.quantity(i)
            || p.earliest_plant != table.window_start(i)
            || p.window_len() != table.window_len(i)
        {
            return Err(Error::InvalidConfig(format!(
                "population {} does not match harvest table entry {i} ({})",
                p.id,
                table.population_id(i)
            )));
        }
    }
    Ok(())
}

/// Independent audit of a solver's output: assignment shape, planting
/// windows, harvestability, window confinement, capacity, and agreement of
/// the stored profile and objective values with a recomputation from the
/// raw table. Violations are reported, not fixed.
pub fn audit_schedule(
    schedule: &PlantingSchedule,
    table: &HarvestTable,
    populations: &[SeedPopulation],
    capacity: u64,
) -> Result<()> {
    check_population_alignment(table, populations)?;
    if schedule.days.len() != populations.len() {
        return Err(Error::ShapeMismatch {
            what: "schedule days",
            expected: populations.len(),
            got: schedule.days.len(),
        });
    }
    let fail = |msg: String| Err(Error::InvalidConfig(format!("schedule audit: {msg}")));
    for (pop, &day) in populations.iter().zip(&schedule.days) {
        if day < pop.earliest_plant || day > pop.latest_plant {
            return fail(format!(
                "population {} planted on day {} outside window [{}, {}]",
                pop.id, day.0, pop.earliest_plant.0, pop.latest_plant.0
            ));
        }
    }
    let profile = build_profile(table, &schedule.days)?;
    if profile != schedule.profile {
        return fail("stored profile disagrees with recomputation from the table".into());
    }
    for s in 0..profile.scenario_count() {
        for (&week, &total) in profile.weekly(s) {
            if !schedule.window.contains(week) {
                return fail(format!(
                    "scenario {s} harvests {total} in week {week}, outside {}",
                    schedule.window
                ));
            }
            if total > capacity {
                return fail(format!(
                    "scenario {s} week {week} harvests {total} > capacity {capacity}"
                ));
            }
        }
    }
    let (case1, _) =
        evaluate_case1_objective(&profile, capacity, table.probabilities(), &schedule.window)?;
    let pairwise =
        evaluate_pairwise_objective(&profile, table.probabilities(), &schedule.window)?;
    if case1 != schedule.objective_case1 || pairwise != schedule.pairwise_objective {
        return fail(format!(
            "stored objectives ({}, {}) disagree with recomputation ({case1}, {pairwise})",
            schedule.objective_case1, schedule.pairwise_objective
        ));
    }
    if profile.max_weekly() != schedule.max_capacity_used {
        return fail(format!(
            "stored max capacity {} disagrees with recomputation {}",
            schedule.max_capacity_used,
            profile.max_weekly()
        ));
    }
    Ok(())
}

/// Baseline: plant every population on a uniformly random admissible day
/// (no week-window restriction beyond harvestability in all scenarios).
/// The schedule's window spans all weeks the table can harvest in, so the
/// objective values are comparable with optimized runs over that span.
pub fn random_schedule(
    table: &HarvestTable,
    capacity: u64,
    seed: u64,
) -> Result<PlantingSchedule> {
    if table.population_count() == 0 {
        return Err(Error::InvalidConfig("no populations to schedule".into()));
    }
    let window = full_table_window(table)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut days = Vec::with_capacity(table.population_count());
    for i in 0..table.population_count() {
        let admissible = table.admissible_days(i);
        let Some(day) = admissible.choose(&mut rng) else {
            return Err(Error::Infeasible(format!(
                "population {}: no planting day is harvestable in every scenario",
                table.population_id(i)
            )));
        };
        days.push(*day);
    }
    finish_schedule(table, days, window, capacity)
}

/// The widest window any schedule over this table could harvest in.
pub fn full_table_window(table: &HarvestTable) -> Result<WindowLimit> {
    let mut first: Option<WeekIndex> = None;
    let mut last: Option<WeekIndex> = None;
    for i in 0..table.population_count() {
        let start = table.window_start(i);
        for off in 0..table.window_len(i) {
            let day = DayIndex(start.0 + off as i64);
            for s in 0..table.scenario_count() {
                if let Some(w) = table.harvest_week(i, day, s) {
                    first = Some(first.map_or(w, |f| f.min(w)));
                    last = Some(last.map_or(w, |l| l.max(w)));
                }
            }
        }
    }
    match (first, last) {
        (Some(f), Some(l)) => WindowLimit::new(f, l),
        _ => Err(Error::Infeasible(
            "no (population, day, scenario) triple is harvestable".into(),
        )),
    }
}

/// Per-scenario and expected schedule statistics: the report a grower would
/// read before committing to the plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleReport {
    pub capacity: u64,
    pub first_week: i64,
    pub last_week: i64,
    pub window_first_week: i64,
    pub window_last_week: i64,
    /// Weeks from first to last harvest, inclusive.
    pub harvest_period_weeks: i64,
    pub max_required_capacity: u64,
    pub expected_case1_objective: f64,
    pub expected_pairwise_objective: f64,
    pub per_scenario: Vec<ScenarioReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub probability: f64,
    pub case1_objective: f64,
    pub pairwise_objective: f64,
    pub max_weekly_harvest: u64,
    pub first_week: i64,
    pub last_week: i64,
}

pub fn evaluate_schedule(
    schedule: &PlantingSchedule,
    table: &HarvestTable,
    capacity: u64,
) -> Result<ScheduleReport> {
    let profile = build_profile(table, &schedule.days)?;
    if profile != schedule.profile {
        return Err(Error::InvalidConfig(
            "schedule profile disagrees with recomputation from the table".into(),
        ));
    }
    let probabilities = table.probabilities();
    let window = &schedule.window;
    let mut per_scenario = Vec::with_capacity(profile.scenario_count());
    for s in 0..profile.scenario_count() {
        let min_load = window
            .weeks()
            .map(|w| profile.total(s, w))
            .min()
            .expect("window is non-empty");
        let loads: Vec<u64> = window.weeks().map(|w| profile.total(s, w)).collect();
        let mut pair_sum = 0.0;
        for i in 0..loads.len() {
            for j in (i + 1)..loads.len() {
                pair_sum += loads[i].abs_diff(loads[j]) as f64;
            }
        }
        let weekly = profile.weekly(s);
        per_scenario.push(ScenarioReport {
            probability: probabilities[s],
            case1_objective: capacity as f64 - min_load as f64,
            pairwise_objective: pair_sum,
            max_weekly_harvest: weekly.values().copied().max().unwrap_or(0),
            first_week: weekly.keys().next().map_or(0, |w| w.0),
            last_week: weekly.keys().next_back().map_or(0, |w| w.0),
        });
    }
    let (expected_case1, _) =
        evaluate_case1_objective(&profile, capacity, probabilities, window)?;
    let expected_pairwise = evaluate_pairwise_objective(&profile, probabilities, window)?;
    let first = profile.first_week().expect("non-empty schedule harvests");
    let last = profile.last_week().expect("non-empty schedule harvests");
    Ok(ScheduleReport {
        capacity,
        first_week: first.0,
        last_week: last.0,
        window_first_week: window.first_week().0,
        window_last_week: window.last_week().0,
        harvest_period_weeks: last.0 - first.0 + 1,
        max_required_capacity: profile.max_weekly(),
        expected_case1_objective: expected_case1,
        expected_pairwise_objective: expected_pairwise,
        per_scenario,
    })
}

/// Schedule CSV: `population,site,plant_date,expected_harvest_week`, where
/// the expected week is the probability-weighted mean harvest week across
/// scenarios.
pub fn write_schedule_csv(
    schedule: &PlantingSchedule,
    table: &HarvestTable,
    writer: impl Write,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["population", "site", "plant_date", "expected_harvest_week"])?;
    let probabilities = table.probabilities();
    for (i, &day) in schedule.days.iter().enumerate() {
        let mut expected = 0.0;
        for (s, p) in probabilities.iter().enumerate() {
            let week = table.harvest_week(i, day, s).ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "population {}: day {} is not harvestable in scenario {s}",
                    table.population_id(i),
                    day.0
                ))
            })?;
            expected += p * week.0 as f64;
        }
        w.write_record(&[
            table.population_id(i).to_string(),
            table.site().to_string(),
            day.to_date()?.to_string(),
            expected.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Weekly-profile CSV across scenarios:
/// `scenario,week,harvest_total` for every harvested week.
pub fn write_profile_csv(profile: &HarvestProfile, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["scenario", "week", "harvest_total"])?;
    for s in 0..profile.scenario_count() {
        for (week, total) in profile.weekly(s) {
            w.write_record(&[s.to_string(), week.to_string(), total.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Which solver engine to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Exact,
    Heuristic,
}

impl std::fmt::Display for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Engine::Exact => write!(f, "exact"),
            Engine::Heuristic => write!(f, "heuristic"),
        }
    }
}

/// Engine plus per-engine knobs, shared by case 2 and the window sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub engine: Engine,
    pub node_budget: u64,
    pub heuristic: HeuristicConfig,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            engine: Engine::Heuristic,
            node_budget: DEFAULT_NODE_BUDGET,
            heuristic: HeuristicConfig::default(),
        }
    }
}

/// Engine-dispatched feasibility probe for the capacity binary search.
pub(crate) fn case2_probe(
    instance: &Instance,
    options: &SolveOptions,
) -> Result<Option<Vec<DayIndex>>> {
    match options.engine {
        Engine::Exact => exact::feasible_assignment(instance, options.node_budget),
        Engine::Heuristic => heuristic::feasible_assignment(instance, options.heuristic.seed),
    }
}

impl SolveOptions {
    /// Solve the capacitated consistency problem with the configured
    /// engine and budgets.
    pub fn solve_case1(
        &self,
        table: &HarvestTable,
        capacity: u64,
        window: WindowLimit,
        populations: &[SeedPopulation],
    ) -> Result<PlantingSchedule> {
        match self.engine {
            Engine::Exact => {
                solve_case1_exact_with(table, capacity, window, populations, self.node_budget)
            }
            Engine::Heuristic => {
                solve_case1_heuristic(table, capacity, window, populations, &self.heuristic)
            }
        }
    }
}

/// Pick an engine from the decision-space size: exhaustive search is
/// reasonable only while the product of candidate counts stays small.
pub fn choose_engine(table: &HarvestTable, window: WindowLimit) -> Engine {
    let mut log_product = 0.0f64;
    for i in 0..table.population_count() {
        let start = table.window_start(i);
        let candidates = (0..table.window_len(i))
            .filter(|&off| {
                table
                    .week_vector(i, DayIndex(start.0 + off as i64))
                    .is_some_and(|ws| ws.iter().all(|w| window.contains(*w)))
            })
            .count()
            .max(1);
        log_product += (candidates as f64).ln();
    }
    if log_product <= 1e6f64.ln() {
        Engine::Exact
    } else {
        Engine::Heuristic
    }
}
