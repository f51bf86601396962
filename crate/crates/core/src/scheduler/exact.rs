//! Exhaustive depth-first search with pruning for small instances.
//!
//! Populations are assigned in input order, candidate days ascending, so the
//! first leaf reached at any given objective value is the lexicographically
//! smallest assignment — ties need no extra bookkeeping beyond "don't
//! replace on equal". A node budget turns pathological instances into a
//! distinct budget error instead of an open-ended run.

use crate::domain::{DayIndex, SeedPopulation};
use crate::error::{Error, Result};
use crate::harvest::HarvestTable;

use super::{check_population_alignment, finish_schedule, Instance, PlantingSchedule, WindowLimit};

pub const DEFAULT_NODE_BUDGET: u64 = 10_000_000;

/// Tolerance for treating two objective values as tied (then the pairwise
/// objective, then lexicographic order decide). Distinct objective values of
/// integer-quantity instances differ by at least one probability quantum, so
/// this band only absorbs float noise.
const OBJECTIVE_TIE_EPS: f64 = 1e-9;

/// Margin added to the lower bound before pruning, so bound rounding can
/// never cut off an optimal or tying branch.
const PRUNE_MARGIN: f64 = 1e-6;

pub fn solve_case1_exact(
    table: &HarvestTable,
    capacity: u64,
    window: WindowLimit,
    populations: &[SeedPopulation],
) -> Result<PlantingSchedule> {
    solve_case1_exact_with(table, capacity, window, populations, DEFAULT_NODE_BUDGET)
}

pub fn solve_case1_exact_with(
    table: &HarvestTable,
    capacity: u64,
    window: WindowLimit,
    populations: &[SeedPopulation],
    node_budget: u64,
) -> Result<PlantingSchedule> {
    check_population_alignment(table, populations)?;
    let instance = Instance::build(table, capacity, window)?;
    let mut search = Search::new(&instance, node_budget, false);
    search.dfs(0)?;
    let Some(best) = search.best else {
        return Err(Error::Infeasible(format!(
            "no schedule fits capacity {capacity} within {window}"
        )));
    };
    let days = choice_days(&instance, &best.choice);
    finish_schedule(table, days, window, capacity)
}

/// Feasibility probe for the capacity binary search: any assignment
/// satisfying capacity and window, or None if none exists. Runs the same
/// search with objectives ignored, stopping at the first feasible leaf.
pub(crate) fn feasible_assignment(
    instance: &Instance,
    node_budget: u64,
) -> Result<Option<Vec<DayIndex>>> {
    let mut search = Search::new(instance, node_budget, true);
    search.dfs(0)?;
    Ok(search
        .best
        .map(|best| choice_days(instance, &best.choice)))
}

fn choice_days(instance: &Instance, choice: &[usize]) -> Vec<DayIndex> {
    choice
        .iter()
        .enumerate()
        .map(|(i, &ci)| instance.pops[i].candidates[ci].day)
        .collect()
}

struct Best {
    choice: Vec<usize>,
    objective: f64,
    pairwise: f64,
}

struct Search<'a> {
    instance: &'a Instance,
    budget: u64,
    nodes: u64,
    feasibility_only: bool,
    loads: Vec<u64>,
    choice: Vec<usize>,
    /// For populations from depth d on: the most quantity that could still
    /// land in each (scenario, week) cell, i.e. the sum of quantities of
    /// remaining populations having some candidate hitting that cell.
    suffix_reach: Vec<Vec<u64>>,
    /// Upper bound on any week's final minimum load: ⌊total quantity / weeks⌋.
    grand_average: u64,
    best: Option<Best>,
}

impl<'a> Search<'a> {
    fn new(instance: &'a Instance, budget: u64, feasibility_only: bool) -> Self {
        let n = instance.pops.len();
        let cells = instance.scenario_count * instance.week_count;
        let mut suffix_reach = vec![vec![0u64; cells]; n + 1];
        for d in (0..n).rev() {
            let pop = &instance.pops[d];
            let mut reach = suffix_reach[d + 1].clone();
            let mut hits = vec![false; cells];
            for cand in &pop.candidates {
                for (s, &off) in cand.week_offsets.iter().enumerate() {
                    hits[s * instance.week_count + off as usize] = true;
                }
            }
            for (cell, hit) in hits.iter().enumerate() {
                if *hit {
                    reach[cell] += pop.quantity;
                }
            }
            suffix_reach[d] = reach;
        }
        let total_quantity: u64 = instance.pops.iter().map(|p| p.quantity).sum();
        let grand_average = total_quantity / instance.week_count as u64;
        Search {
            instance,
            budget,
            nodes: 0,
            feasibility_only,
            loads: vec![0; cells],
            choice: vec![0; n],
            suffix_reach,
            grand_average,
            best: None,
        }
    }

    /// Lower bound on the objective of any completion below the current
    /// node (populations 0..depth already placed). Per scenario, the final
    /// minimum weekly load cannot exceed ⌊total/weeks⌋, nor any week's
    /// current load plus everything that could still reach that week.
    fn bound(&self, depth: usize) -> f64 {
        let inst = self.instance;
        let wc = inst.week_count;
        let reach = &self.suffix_reach[depth];
        let mut value = 0.0;
        for (s, p) in inst.probabilities.iter().enumerate() {
            let mut min_ceiling = u64::MAX;
            for w in 0..wc {
                min_ceiling = min_ceiling.min(self.loads[s * wc + w] + reach[s * wc + w]);
            }
            let min_ceiling = min_ceiling.min(self.grand_average);
            value += p * (inst.capacity as f64 - min_ceiling as f64);
        }
        value
    }

    /// Returns true when the search should stop entirely (feasibility-only
    /// mode found a leaf).
    fn dfs(&mut self, depth: usize) -> Result<bool> {
        let inst = self.instance;
        if depth == inst.pops.len() {
            self.take_leaf();
            return Ok(self.feasibility_only);
        }
        for ci in 0..inst.pops[depth].candidates.len() {
            self.nodes += 1;
            if self.nodes > self.budget {
                return Err(Error::BudgetExhausted { nodes: self.nodes });
            }
            let cand = &inst.pops[depth].candidates[ci];
            if !inst.fits(&self.loads, depth, cand) {
                continue;
            }
            inst.add_candidate(&mut self.loads, depth, cand);
            self.choice[depth] = ci;
            let prune = !self.feasibility_only
                && match &self.best {
                    Some(best) => self.bound(depth + 1) > best.objective + PRUNE_MARGIN,
                    None => false,
                };
            if !prune && self.dfs(depth + 1)? {
                return Ok(true);
            }
            let cand = &inst.pops[depth].candidates[ci];
            inst.remove_candidate(&mut self.loads, depth, cand);
        }
        Ok(false)
    }

    fn take_leaf(&mut self) {
        if self.feasibility_only {
            self.best = Some(Best {
                choice: self.choice.clone(),
                objective: 0.0,
                pairwise: 0.0,
            });
            return;
        }
        let objective = self.instance.objective_from_loads(&self.loads);
        let replace = match &self.best {
            None => true,
            Some(best) => {
                if objective < best.objective - OBJECTIVE_TIE_EPS {
                    true
                } else if (objective - best.objective).abs() <= OBJECTIVE_TIE_EPS {
                    // Tie on the primary objective: prefer strictly better
                    // pairwise consistency; on a full tie the earlier (and
                    // therefore lexicographically smaller) leaf stands.
                    self.instance.pairwise_from_loads(&self.loads) < best.pairwise
                } else {
                    false
                }
            }
        };
        if replace {
            self.best = Some(Best {
                choice: self.choice.clone(),
                objective,
                pairwise: self.instance.pairwise_from_loads(&self.loads),
            });
        }
    }
}
