//! Mapping plantings to harvest days and weeks by GDU accumulation.
//!
//! A population planted on day t matures on the first day t' whose preceding
//! days [t, t'-1] have accumulated at least its required GDUs; it is then
//! harvested in the Sunday-Saturday week containing t'. [`HarvestTable`]
//! materializes that mapping for every (population, candidate day, scenario)
//! triple once, so the schedulers never touch raw GDU series again.
//!
//! Accumulation runs left to right, one day at a time, exactly as a naive
//! audit loop would; the table is therefore reproducible by independent
//! recomputation down to the last bit.

use rayon::prelude::*;
use serde::Serialize;

use std::io::Write;

use crate::domain::{DayIndex, SeedPopulation, SiteId, WeekIndex, WeekMembership};
use crate::error::{Error, Result};
use crate::ingest::DailyGduSeries;
use crate::rio::ScenarioSet;

/// First day `t'` within the scenario span such that GDUs over `[plant, t'-1]`
/// reach `required_gdu`. `Ok(None)` means the scenario ends before maturity
/// (unharvestable); a zero requirement is satisfied by the empty sum, so the
/// harvest lands on the planting day itself.
pub fn harvest_day(
    plant: DayIndex,
    required_gdu: f64,
    scenario: &DailyGduSeries,
) -> Result<Option<DayIndex>> {
    Ok(accumulate_to_maturity(plant, required_gdu, scenario)?.map(|(day, _)| day))
}

/// As [`harvest_day`], additionally returning the GDUs accumulated by
/// maturity (used for the overshoot diagnostic).
fn accumulate_to_maturity(
    plant: DayIndex,
    required_gdu: f64,
    scenario: &DailyGduSeries,
) -> Result<Option<(DayIndex, f64)>> {
    if !(required_gdu.is_finite() && required_gdu >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "required GDU must be finite and non-negative (got {required_gdu})"
        )));
    }
    if plant < scenario.start_day() || plant > scenario.end_day() {
        return Err(Error::InvalidConfig(format!(
            "plant day {} outside scenario span [{}, {}]",
            plant.0,
            scenario.start_day().0,
            scenario.end_day().0
        )));
    }
    if required_gdu == 0.0 {
        return Ok(Some((plant, 0.0)));
    }
    let offset = (plant.0 - scenario.start_day().0) as usize;
    let mut cumulative = 0.0;
    for (grown, gdu) in scenario.values()[offset..].iter().enumerate() {
        cumulative += gdu;
        if cumulative >= required_gdu {
            let day = DayIndex(plant.0 + grown as i64 + 1);
            // Maturity reached on the scenario's last day leaves no day left
            // to harvest on; that counts as running out of horizon.
            return Ok(if day <= scenario.end_day() {
                Some((day, cumulative))
            } else {
                None
            });
        }
    }
    Ok(None)
}

/// Harvest week and quantity for every (population, planting day, scenario)
/// triple, with unharvestable triples marked rather than dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct HarvestTable {
    site: SiteId,
    scenario_count: usize,
    probabilities: Vec<f64>,
    pops: Vec<PopulationRows>,
    literal_bound_violations: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct PopulationRows {
    id: String,
    window_start: DayIndex,
    window_len: usize,
    quantity: u64,
    /// Row-major `[day offset][scenario]`; None marks unharvestable.
    weeks: Vec<Option<WeekIndex>>,
}

/// Compute the full table. Populations are processed in parallel; the result
/// is ordered like the input and independent of thread count.
pub fn build_harvest_table(
    populations: &[SeedPopulation],
    scenarios: &ScenarioSet,
    membership: &WeekMembership,
) -> Result<HarvestTable> {
    if membership.start() > scenarios.start_day() || membership.end() < scenarios.end_day() {
        return Err(Error::InvalidConfig(format!(
            "week membership covers days [{}, {}] but scenarios span [{}, {}]",
            membership.start().0,
            membership.end().0,
            scenarios.start_day().0,
            scenarios.end_day().0
        )));
    }
    for p in populations {
        if p.site != scenarios.site() {
            return Err(Error::InvalidConfig(format!(
                "population {} belongs to site {} but scenarios describe site {}",
                p.id, p.site, scenarios.site()
            )));
        }
    }

    let per_pop: Vec<(PopulationRows, usize)> = populations
        .par_iter()
        .map(|pop| {
            let window_len = pop.window_len();
            let mut weeks = Vec::with_capacity(window_len * scenarios.len());
            let mut violations = 0usize;
            for off in 0..window_len {
                let plant = DayIndex(pop.earliest_plant.0 + off as i64);
                for scenario in scenarios.scenarios() {
                    let series = &scenario.series;
                    match accumulate_to_maturity(plant, pop.required_gdu, series)? {
                        Some((day, accumulated)) => {
                            let week = membership.week(day).ok_or_else(|| {
                                Error::InvalidConfig(format!(
                                    "week membership does not cover harvest day {}",
                                    day.0
                                ))
                            })?;
                            // Diagnostic only: the overshoot bound indexed at
                            // the planting day, which the minimal-day rule
                            // does not enforce.
                            let plant_gdu = series.get(plant).unwrap_or(0.0);
                            if accumulated - pop.required_gdu > plant_gdu {
                                violations += 1;
                            }
                            weeks.push(Some(week));
                        }
                        None => weeks.push(None),
                    }
                }
            }
            Ok((
                PopulationRows {
                    id: pop.id.clone(),
                    window_start: pop.earliest_plant,
                    window_len,
                    quantity: pop.harvest_quantity,
                    weeks,
                },
                violations,
            ))
        })
        .collect::<Result<_>>()?;

    let literal_bound_violations = per_pop.iter().map(|(_, v)| v).sum();
    Ok(HarvestTable {
        site: scenarios.site(),
        scenario_count: scenarios.len(),
        probabilities: scenarios.probabilities(),
        pops: per_pop.into_iter().map(|(rows, _)| rows).collect(),
        literal_bound_violations,
    })
}

impl HarvestTable {
    pub fn site(&self) -> SiteId {
        self.site
    }

    pub fn population_count(&self) -> usize {
        self.pops.len()
    }

    pub fn scenario_count(&self) -> usize {
        self.scenario_count
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn population_id(&self, pop: usize) -> &str {
        &self.pops[pop].id
    }

    pub fn quantity(&self, pop: usize) -> u64 {
        self.pops[pop].quantity
    }

    pub fn window_start(&self, pop: usize) -> DayIndex {
        self.pops[pop].window_start
    }

    pub fn window_len(&self, pop: usize) -> usize {
        self.pops[pop].window_len
    }

    /// Triples where accumulated-minus-required GDUs exceeded the planting
    /// day's GDUs — a bound some formulations assert but this mapping does
    /// not enforce. Non-zero counts are expected and harmless.
    pub fn literal_bound_violations(&self) -> usize {
        self.literal_bound_violations
    }

    /// Harvest week of (population, plant day, scenario); None when the day
    /// lies outside the population's window or the triple is unharvestable.
    pub fn harvest_week(&self, pop: usize, plant: DayIndex, scenario: usize) -> Option<WeekIndex> {
        let rows = &self.pops[pop];
        let off = plant.0.checked_sub(rows.window_start.0)?;
        if off < 0 || off as usize >= rows.window_len || scenario >= self.scenario_count {
            return None;
        }
        rows.weeks[off as usize * self.scenario_count + scenario]
    }

    /// Per-scenario harvest weeks of a planting day, or None unless the day
    /// is harvestable in every scenario. Days failing this test are excluded
    /// from the scheduling decision space.
    pub fn week_vector(&self, pop: usize, plant: DayIndex) -> Option<Vec<WeekIndex>> {
        let rows = &self.pops[pop];
        let off = plant.0.checked_sub(rows.window_start.0)?;
        if off < 0 || off as usize >= rows.window_len {
            return None;
        }
        let slice =
            &rows.weeks[off as usize * self.scenario_count..(off as usize + 1) * self.scenario_count];
        slice.iter().copied().collect()
    }

    /// Planting days harvestable in every scenario, ascending.
    pub fn admissible_days(&self, pop: usize) -> Vec<DayIndex> {
        let rows = &self.pops[pop];
        (0..rows.window_len)
            .filter(|&off| {
                rows.weeks[off * self.scenario_count..(off + 1) * self.scenario_count]
                    .iter()
                    .all(|w| w.is_some())
            })
            .map(|off| DayIndex(rows.window_start.0 + off as i64))
            .collect()
    }

    /// Audit dump of all harvestable triples:
    /// `population,plant_day,scenario,harvest_week,quantity`.
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        #[derive(Serialize)]
        struct Row<'a> {
            population: &'a str,
            plant_day: i64,
            scenario: usize,
            harvest_week: i64,
            quantity: u64,
        }
        let mut w = csv::Writer::from_writer(writer);
        for rows in &self.pops {
            for off in 0..rows.window_len {
                for s in 0..self.scenario_count {
                    if let Some(week) = rows.weeks[off * self.scenario_count + s] {
                        w.serialize(Row {
                            population: &rows.id,
                            plant_day: rows.window_start.0 + off as i64,
                            scenario: s,
                            harvest_week: week.0,
                            quantity: rows.quantity,
                        })?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}
