//! Greedy construction + local-search heuristic for full-scale instances.
//!
//! Construction places populations in decreasing quantity order, each on the
//! candidate day whose harvest weeks are currently least loaded (in
//! expectation over scenarios). A repair phase then moves populations out of
//! over-capacity weeks: strict descent on total overflow first, and when
//! that stalls above zero, a seeded min-conflicts walk that relocates
//! populations off over-capacity weeks (sideways or uphill) and descends
//! again, keeping the best assignment seen. Improvement is a
//! first-improvement search over single-population day moves and pairwise
//! day swaps, accepting strictly better case-1 objectives or equal
//! objectives with strictly better pairwise consistency. The seed drives
//! only scan orders and walk choices, so runs are reproducible.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::SeedPopulation;
use crate::error::{Error, Result};
use crate::harvest::HarvestTable;

use super::{check_population_alignment, finish_schedule, Instance, PlantingSchedule, WindowLimit};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeuristicConfig {
    pub seed: u64,
    /// Budget of accepted improvement steps (moves + swaps).
    pub max_iterations: usize,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        HeuristicConfig {
            seed: 0,
            max_iterations: 2000,
        }
    }
}

pub fn solve_case1_heuristic(
    table: &HarvestTable,
    capacity: u64,
    window: WindowLimit,
    populations: &[SeedPopulation],
    config: &HeuristicConfig,
) -> Result<PlantingSchedule> {
    check_population_alignment(table, populations)?;
    let instance = Instance::build(table, capacity, window)?;
    let mut state = State::construct(&instance);
    if !state.repair(config.seed) {
        return Err(Error::Infeasible(format!(
            "capacity {capacity} cannot be repaired; binding weeks: {}",
            state.binding_weeks()
        )));
    }
    state.improve(config);
    finish_schedule(table, state.days(), window, capacity)
}

/// Construction + repair only — the feasibility probe for the capacity
/// binary search. `Ok(None)` means repair got stuck (which, the heuristic
/// being incomplete, does not prove infeasibility).
pub(crate) fn feasible_assignment(
    instance: &Instance,
    seed: u64,
) -> Result<Option<Vec<crate::domain::DayIndex>>> {
    let mut state = State::construct(instance);
    Ok(if state.repair(seed) {
        Some(state.days())
    } else {
        None
    })
}

/// Kicks without a new best total overflow before the repair walk gives up.
const REPAIR_PATIENCE: usize = 1500;

struct State<'a> {
    inst: &'a Instance,
    choice: Vec<usize>,
    loads: Vec<u64>,
}

impl<'a> State<'a> {
    /// Greedy insertion, heaviest populations first, each on its least
    /// loaded candidate. Candidates that stay within capacity are preferred;
    /// if none exists the overflow-minimizing one is taken for repair to fix.
    fn construct(inst: &'a Instance) -> Self {
        let n = inst.pops.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| std::cmp::Reverse(inst.pops[i].quantity));
        let mut state = State {
            inst,
            choice: vec![0; n],
            loads: vec![0; inst.scenario_count * inst.week_count],
        };
        for &i in &order {
            let candidates = &inst.pops[i].candidates;
            let mut best: Option<(bool, f64, usize)> = None;
            for (ci, cand) in candidates.iter().enumerate() {
                let fits = inst.fits(&state.loads, i, cand);
                let score = if fits {
                    cand.week_offsets
                        .iter()
                        .enumerate()
                        .map(|(s, &off)| {
                            inst.probabilities[s]
                                * state.loads[s * inst.week_count + off as usize] as f64
                        })
                        .sum()
                } else {
                    state.overflow_increase(i, cand) as f64
                };
                // A fitting candidate always beats an overflowing one;
                // within a class, lower score wins and earlier days keep
                // ties (strict comparison preserves the first minimum).
                let better = match &best {
                    None => true,
                    Some((bf, bs, _)) => (fits && !bf) || (fits == *bf && score < *bs),
                };
                if better {
                    best = Some((fits, score, ci));
                }
            }
            let (_, _, ci) = best.expect("instance populations have candidates");
            state.choice[i] = ci;
            inst.add_candidate(&mut state.loads, i, &candidates[ci]);
        }
        state
    }

    fn days(&self) -> Vec<crate::domain::DayIndex> {
        self.choice
            .iter()
            .enumerate()
            .map(|(i, &ci)| self.inst.pops[i].candidates[ci].day)
            .collect()
    }

    fn overflow_of(&self, load: u64) -> u64 {
        load.saturating_sub(self.inst.capacity)
    }

    fn total_overflow(&self) -> u64 {
        self.loads.iter().map(|&l| self.overflow_of(l)).sum()
    }

    /// Overflow added by placing candidate `cand` of population `i` on the
    /// current loads.
    fn overflow_increase(&self, i: usize, cand: &super::Candidate) -> u64 {
        let q = self.inst.pops[i].quantity;
        cand.week_offsets
            .iter()
            .enumerate()
            .map(|(s, &off)| {
                let load = self.loads[s * self.inst.week_count + off as usize];
                self.overflow_of(load + q) - self.overflow_of(load)
            })
            .sum()
    }

    /// Change in total overflow if population `i` moves from its current
    /// candidate to `to`. Only the affected weeks are touched.
    fn overflow_delta(&self, i: usize, to: usize) -> i64 {
        let inst = self.inst;
        let q = inst.pops[i].quantity;
        let from = &inst.pops[i].candidates[self.choice[i]];
        let to = &inst.pops[i].candidates[to];
        let mut delta = 0i64;
        for s in 0..inst.scenario_count {
            let w_from = s * inst.week_count + from.week_offsets[s] as usize;
            let w_to = s * inst.week_count + to.week_offsets[s] as usize;
            if w_from == w_to {
                continue;
            }
            let lf = self.loads[w_from];
            let lt = self.loads[w_to];
            delta -= (self.overflow_of(lf) - self.overflow_of(lf - q)) as i64;
            delta += (self.overflow_of(lt + q) - self.overflow_of(lt)) as i64;
        }
        delta
    }

    fn apply_move(&mut self, i: usize, to: usize) {
        let from_ci = self.choice[i];
        let inst = self.inst;
        inst.remove_candidate(&mut self.loads, i, &inst.pops[i].candidates[from_ci]);
        inst.add_candidate(&mut self.loads, i, &inst.pops[i].candidates[to]);
        self.choice[i] = to;
    }

    /// Move populations out of over-capacity weeks until the overflow hits
    /// zero. Strict descent first; when it stalls above zero, a seeded
    /// min-conflicts walk kicks populations off over-capacity weeks and
    /// descends again, keeping the best assignment seen. Returns false when
    /// the walk exhausts its patience above zero (the state is then the best
    /// assignment found, so the infeasibility report is as tight as the
    /// heuristic can make it).
    fn repair(&mut self, seed: u64) -> bool {
        if self.descend() {
            return true;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let mut best_choice = self.choice.clone();
        let mut best_overflow = self.total_overflow();
        let mut stale = 0usize;
        while stale < REPAIR_PATIENCE {
            self.kick(&mut rng);
            if self.descend() {
                return true;
            }
            let overflow = self.total_overflow();
            if overflow < best_overflow {
                best_overflow = overflow;
                best_choice.clone_from(&self.choice);
                stale = 0;
            } else {
                stale += 1;
            }
        }
        self.reset_to(&best_choice);
        false
    }

    /// First-improvement descent on total overflow. Every accepted move
    /// strictly decreases an integer potential, so this terminates; returns
    /// true when the overflow reaches zero.
    fn descend(&mut self) -> bool {
        let n = self.inst.pops.len();
        loop {
            if self.total_overflow() == 0 {
                return true;
            }
            let mut improved = false;
            'scan: for i in 0..n {
                for ci in 0..self.inst.pops[i].candidates.len() {
                    if ci == self.choice[i] {
                        continue;
                    }
                    if self.overflow_delta(i, ci) < 0 {
                        self.apply_move(i, ci);
                        improved = true;
                        break 'scan;
                    }
                }
            }
            if !improved {
                return false;
            }
        }
    }

    /// One min-conflicts step: pick a random over-capacity cell, pick a
    /// random movable population loading it, and move it to its
    /// least-overflow-increasing alternative even if that is sideways or
    /// uphill. No-op when nothing on an over-capacity cell can move.
    fn kick(&mut self, rng: &mut ChaCha8Rng) {
        let inst = self.inst;
        let overloaded: Vec<usize> = (0..self.loads.len())
            .filter(|&c| self.loads[c] > inst.capacity)
            .collect();
        if overloaded.is_empty() {
            return;
        }
        let cell = overloaded[rng.random_range(0..overloaded.len())];
        let s = cell / inst.week_count;
        let off = cell % inst.week_count;
        let movers: Vec<usize> = (0..inst.pops.len())
            .filter(|&i| {
                inst.pops[i].candidates.len() > 1
                    && inst.pops[i].candidates[self.choice[i]].week_offsets[s] as usize == off
            })
            .collect();
        if movers.is_empty() {
            return;
        }
        let i = movers[rng.random_range(0..movers.len())];
        let mut target: Option<(i64, usize)> = None;
        for ci in 0..inst.pops[i].candidates.len() {
            if ci == self.choice[i] {
                continue;
            }
            let delta = self.overflow_delta(i, ci);
            if target.is_none_or(|(best, _)| delta < best) {
                target = Some((delta, ci));
            }
        }
        if let Some((_, ci)) = target {
            self.apply_move(i, ci);
        }
    }

    /// Restore a saved assignment, rebuilding the load matrix.
    fn reset_to(&mut self, choice: &[usize]) {
        let inst = self.inst;
        self.loads.iter_mut().for_each(|l| *l = 0);
        for (i, &ci) in choice.iter().enumerate() {
            inst.add_candidate(&mut self.loads, i, &inst.pops[i].candidates[ci]);
        }
        self.choice.copy_from_slice(choice);
    }

    /// The over-capacity (scenario, week, load) cells, for error reports.
    fn binding_weeks(&self) -> String {
        let inst = self.inst;
        let mut parts = Vec::new();
        for s in 0..inst.scenario_count {
            for w in 0..inst.week_count {
                let load = self.loads[s * inst.week_count + w];
                if load > inst.capacity {
                    parts.push(format!(
                        "scenario {s} week {} loaded {load}",
                        inst.window.first_week().0 + w as i64
                    ));
                }
            }
        }
        parts.join(", ")
    }

    /// First-improvement local search over single moves and pairwise swaps,
    /// preserving capacity feasibility. Accepts strictly better objectives,
    /// or objective ties with strictly better pairwise consistency.
    fn improve(&mut self, config: &HeuristicConfig) {
        let inst = self.inst;
        let n = inst.pops.len();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut objective = inst.objective_from_loads(&self.loads);
        let mut pairwise = inst.pairwise_from_loads(&self.loads);
        let mut accepted = 0usize;
        let mut pop_order: Vec<usize> = (0..n).collect();

        loop {
            let mut improved_pass = false;

            // Single-population day moves.
            pop_order.shuffle(&mut rng);
            for &i in &pop_order {
                if accepted >= config.max_iterations {
                    return;
                }
                let current = self.choice[i];
                for ci in 0..inst.pops[i].candidates.len() {
                    if ci == current {
                        continue;
                    }
                    if let Some((obj, pw)) = self.try_state(i, ci, objective, pairwise) {
                        self.apply_move(i, ci);
                        objective = obj;
                        pairwise = pw;
                        accepted += 1;
                        improved_pass = true;
                        break;
                    }
                }
            }

            // Pairwise day swaps: i takes j's day and vice versa, when both
            // days exist in both candidate sets.
            let mut pairs: Vec<(usize, usize)> = (0..n)
                .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                .collect();
            pairs.shuffle(&mut rng);
            for (i, j) in pairs {
                if accepted >= config.max_iterations {
                    return;
                }
                let day_i = inst.pops[i].candidates[self.choice[i]].day;
                let day_j = inst.pops[j].candidates[self.choice[j]].day;
                let Ok(ci) = inst.pops[i]
                    .candidates
                    .binary_search_by_key(&day_j, |c| c.day)
                else {
                    continue;
                };
                let Ok(cj) = inst.pops[j]
                    .candidates
                    .binary_search_by_key(&day_i, |c| c.day)
                else {
                    continue;
                };
                // Apply tentatively, evaluate, revert on rejection.
                let undo_i = self.choice[i];
                let undo_j = self.choice[j];
                self.apply_move(i, ci);
                self.apply_move(j, cj);
                if self.loads_feasible() {
                    let obj = inst.objective_from_loads(&self.loads);
                    if obj < objective - 1e-9 {
                        objective = obj;
                        pairwise = inst.pairwise_from_loads(&self.loads);
                        accepted += 1;
                        improved_pass = true;
                        continue;
                    }
                    if (obj - objective).abs() <= 1e-9 {
                        let pw = inst.pairwise_from_loads(&self.loads);
                        if pw < pairwise - 1e-9 {
                            objective = obj;
                            pairwise = pw;
                            accepted += 1;
                            improved_pass = true;
                            continue;
                        }
                    }
                }
                self.apply_move(i, undo_i);
                self.apply_move(j, undo_j);
            }

            if !improved_pass {
                return;
            }
        }
    }

    /// Evaluate moving population `i` to candidate `ci`; Some((obj, pairwise))
    /// when the move is feasible and an improvement over the given state.
    fn try_state(
        &mut self,
        i: usize,
        ci: usize,
        objective: f64,
        pairwise: f64,
    ) -> Option<(f64, f64)> {
        let inst = self.inst;
        let undo = self.choice[i];
        self.apply_move(i, ci);
        let result = if self.loads_feasible() {
            let obj = inst.objective_from_loads(&self.loads);
            if obj < objective - 1e-9 {
                Some((obj, inst.pairwise_from_loads(&self.loads)))
            } else if (obj - objective).abs() <= 1e-9 {
                let pw = inst.pairwise_from_loads(&self.loads);
                if pw < pairwise - 1e-9 {
                    Some((obj, pw))
                } else {
                    None
                }
            } else {
                None
            }
        } else {
            None
        };
        self.apply_move(i, undo);
        result
    }

    fn loads_feasible(&self) -> bool {
        self.loads.iter().all(|&l| l <= self.inst.capacity)
    }
}
