//! Harvest-window sweep: re-solve case 1 for a grid of (first, last) week
//! pairs and pick the window with the best pairwise consistency.
//!
//! Shrinking the allowed harvest window forces plantings together; the
//! pairwise objective (cheap to evaluate, expensive to optimize directly)
//! is computed on each cell's case-1 solution and the argmin cell wins.
//! Cells are independent and solved in parallel; the reduction is a
//! deterministic row-major scan, so thread scheduling cannot change the
//! selected window.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use std::io::Write;

use crate::domain::{SeedPopulation, WeekIndex};
use crate::error::{Error, Result};
use crate::harvest::HarvestTable;

use super::{
    check_population_alignment, full_table_window, PlantingSchedule, SolveOptions, WindowLimit,
};

#[derive(Debug, Clone)]
pub struct SweepConfig {
    /// Inclusive range of first-week values to try.
    pub first_weeks: (WeekIndex, WeekIndex),
    /// Inclusive range of last-week values to try.
    pub last_weeks: (WeekIndex, WeekIndex),
    pub solve: SolveOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    /// Solved; pairwise and case1 values recorded.
    Ok,
    /// No feasible schedule for this window.
    Infeasible,
    /// Exact engine ran out of node budget.
    Budget,
    /// first > last: not a window.
    Skipped,
}

impl std::fmt::Display for CellStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CellStatus::Ok => write!(f, "ok"),
            CellStatus::Infeasible => write!(f, "infeasible"),
            CellStatus::Budget => write!(f, "budget"),
            CellStatus::Skipped => write!(f, "skipped"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub first_week: WeekIndex,
    pub last_week: WeekIndex,
    pub status: CellStatus,
    /// Pairwise-consistency value of the cell's solution, when solved.
    pub pairwise: Option<f64>,
    /// Case-1 objective of the cell's solution, when solved.
    pub case1: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub best_window: WindowLimit,
    pub best_schedule: PlantingSchedule,
    /// Row-major over (first week, last week), covering the full ranges
    /// including skipped and infeasible cells.
    pub grid: Vec<SweepCell>,
}

pub fn sweep_harvest_windows(
    table: &HarvestTable,
    capacity: u64,
    populations: &[SeedPopulation],
    config: &SweepConfig,
) -> Result<SweepResult> {
    check_population_alignment(table, populations)?;
    let (f_lo, f_hi) = config.first_weeks;
    let (l_lo, l_hi) = config.last_weeks;
    if f_lo > f_hi || l_lo > l_hi {
        return Err(Error::InvalidConfig(format!(
            "sweep ranges are inverted (first {}..={}, last {}..={})",
            f_lo, f_hi, l_lo, l_hi
        )));
    }

    let cells: Vec<(WeekIndex, WeekIndex)> = (f_lo.0..=f_hi.0)
        .flat_map(|f| (l_lo.0..=l_hi.0).map(move |l| (WeekIndex(f), WeekIndex(l))))
        .collect();

    let mut solved: Vec<(SweepCell, Option<PlantingSchedule>)> = cells
        .par_iter()
        .map(|&(first, last)| {
            let mut cell = SweepCell {
                first_week: first,
                last_week: last,
                status: CellStatus::Skipped,
                pairwise: None,
                case1: None,
            };
            if first > last {
                return Ok((cell, None));
            }
            let window = WindowLimit::new(first, last)?;
            match config.solve.solve_case1(table, capacity, window, populations) {
                Ok(schedule) => {
                    cell.status = CellStatus::Ok;
                    cell.pairwise = Some(schedule.pairwise_objective);
                    cell.case1 = Some(schedule.objective_case1);
                    Ok((cell, Some(schedule)))
                }
                Err(Error::Infeasible(_)) => {
                    cell.status = CellStatus::Infeasible;
                    Ok((cell, None))
                }
                Err(Error::BudgetExhausted { .. }) => {
                    cell.status = CellStatus::Budget;
                    Ok((cell, None))
                }
                Err(other) => Err(other),
            }
        })
        .collect::<Result<_>>()?;

    // Deterministic argmin: strictly smaller pairwise wins, so the earliest
    // row-major cell keeps ties.
    let mut best: Option<(usize, f64)> = None;
    for (idx, (cell, _)) in solved.iter().enumerate() {
        if let (CellStatus::Ok, Some(v)) = (cell.status, cell.pairwise) {
            if best.is_none_or(|(_, bv)| v < bv) {
                best = Some((idx, v));
            }
        }
    }
    let Some((best_idx, _)) = best else {
        return Err(Error::Infeasible(
            "every window in the sweep grid was infeasible or over budget".into(),
        ));
    };
    let best_schedule = solved[best_idx].1.take().expect("ok cell has a schedule");
    Ok(SweepResult {
        best_window: best_schedule.window,
        best_schedule,
        grid: solved.into_iter().map(|(cell, _)| cell).collect(),
    })
}

/// Default grid: ±8 weeks around the first/last harvest weeks of an
/// unconstrained solve (the full table window), clamped to weeks the table
/// can harvest in at all.
pub fn default_sweep_config(
    table: &HarvestTable,
    capacity: u64,
    populations: &[SeedPopulation],
    solve: SolveOptions,
) -> Result<SweepConfig> {
    let span = full_table_window(table)?;
    let base = solve.solve_case1(table, capacity, span, populations)?;
    let first = base
        .profile
        .first_week()
        .expect("non-empty schedule harvests");
    let last = base
        .profile
        .last_week()
        .expect("non-empty schedule harvests");
    let clamp = |w: i64| w.clamp(span.first_week().0, span.last_week().0);
    Ok(SweepConfig {
        first_weeks: (WeekIndex(clamp(first.0 - 8)), WeekIndex(clamp(first.0 + 8))),
        last_weeks: (WeekIndex(clamp(last.0 - 8)), WeekIndex(clamp(last.0 + 8))),
        solve,
    })
}

/// Grid CSV: `first_week,last_week,pairwise_value,status`; unsolved cells leave
/// the value empty.
pub fn write_sweep_grid(grid: &[SweepCell], writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["first_week", "last_week", "pairwise_value", "status"])?;
    for cell in grid {
        w.write_record(&[
            cell.first_week.to_string(),
            cell.last_week.to_string(),
            cell.pairwise.map(|v| v.to_string()).unwrap_or_default(),
            cell.status.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
