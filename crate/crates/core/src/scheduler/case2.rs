//! Minimum-capacity scheduling by binary search over case-1 feasibility.
//!
//! The smallest weekly capacity any schedule can guarantee lies between the
//! largest single harvest quantity (one population must land somewhere) and
//! the total quantity (everything in one week). Feasibility of a candidate
//! capacity z is decided by the case-1 engine with the objective ignored;
//! with the exact engine the result is the true optimum z*, and since any
//! schedule feasible at z* with a smaller maximum load would already be
//! feasible at z*−1, the returned schedule's maximum weekly load equals z*
//! exactly. The heuristic engine yields an upper bound: the achieved maximum
//! load of the schedule it found.

use crate::domain::{DayIndex, SeedPopulation};
use crate::error::{Error, Result};
use crate::harvest::HarvestTable;

use super::{
    case2_probe, check_population_alignment, finish_schedule, Instance, PlantingSchedule,
    SolveOptions, WindowLimit,
};

/// Minimum weekly capacity and a schedule attaining it (exact engine) or an
/// achieved upper bound (heuristic engine). The returned capacity is the
/// schedule's actual maximum weekly harvest.
pub fn solve_case2(
    table: &HarvestTable,
    populations: &[SeedPopulation],
    window: WindowLimit,
    options: &SolveOptions,
) -> Result<(u64, PlantingSchedule)> {
    check_population_alignment(table, populations)?;
    // Candidate days do not depend on capacity, so the instance is built
    // once and re-capacitated per probe.
    let mut instance = Instance::build(table, u64::MAX, window)?;
    let quantities: Vec<u64> = instance.pops.iter().map(|p| p.quantity).collect();
    let mut lo = *quantities.iter().max().expect("at least one population");
    let mut hi = quantities.iter().sum::<u64>();

    let mut cached: Option<(u64, Vec<DayIndex>)> = None;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        instance.capacity = mid;
        match case2_probe(&instance, options)? {
            Some(days) => {
                hi = mid;
                cached = Some((mid, days));
            }
            None => lo = mid + 1,
        }
    }

    let days = match cached {
        Some((z, days)) if z == lo => days,
        _ => {
            instance.capacity = lo;
            case2_probe(&instance, options)?.ok_or_else(|| {
                Error::Infeasible(format!(
                    "no schedule found even at capacity {lo} within {window}"
                ))
            })?
        }
    };
    let schedule = finish_schedule(table, days, window, lo)?;
    Ok((schedule.max_capacity_used, schedule))
}
