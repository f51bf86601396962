//! Acceptance gate for the whole pipeline: ten quantitative criteria, one
//! test per criterion. Each test prints a single
//! `criterion N: PASS — detail` line on success (visible with
//! `cargo test --test acceptance -- --nocapture`); a failure panics with a
//! matching `criterion N: FAIL` message.

use gduplan::domain::{week_of, DayIndex, SeedPopulation, SiteId, WeekMembership};
use gduplan::forecaster::{bptt_gradient_check, cross_validate, persistence_cv, TrainConfig};
use gduplan::harvest::{build_harvest_table, HarvestTable};
use gduplan::ingest::{generate_synthetic_instance, DailyGduSeries, SyntheticSpec};
use gduplan::rio::kernel::{io_kernel, IoKernelHyper};
use gduplan::rio::{
    fit_gp, fit_gp_with, generate_scenarios, gp_posterior, residual_training_set, GpFitOptions,
    Scenario, ScenarioSet,
};
use gduplan::scheduler::{
    full_table_window, random_schedule, solve_case1_exact, solve_case1_heuristic, solve_case2,
    Engine, HeuristicConfig, SolveOptions, WindowLimit,
};
use gduplan::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn pass(criterion: usize, detail: String) {
    println!("criterion {criterion}: PASS — {detail}");
}

// ---------------------------------------------------------------------------
// Shared instance family for criteria 1–3: up to 8 populations with up to
// 6-day planting windows under up to 3 scenarios.
// ---------------------------------------------------------------------------

struct FamilyInstance {
    populations: Vec<SeedPopulation>,
    table: HarvestTable,
    capacity: u64,
}

fn family_instance(seed: u64) -> FamilyInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scenario_count = rng.random_range(1..=3);
    let p = 1.0 / scenario_count as f64;
    let scenarios: Vec<Scenario> = (0..scenario_count)
        .map(|_| Scenario {
            series: DailyGduSeries::new(
                SiteId(0),
                DayIndex(0),
                (0..120).map(|_| rng.random_range(5.0..15.0)).collect(),
            )
            .unwrap(),
            probability: p,
        })
        .collect();
    let set = ScenarioSet::new(scenarios, 0).unwrap();

    let pop_count = rng.random_range(1..=8);
    let populations: Vec<SeedPopulation> = (0..pop_count)
        .map(|i| {
            let start = rng.random_range(0..30i64);
            let width = rng.random_range(0..6i64); // window length 1..=6 days
            SeedPopulation::new(
                format!("p{i}"),
                SiteId(0),
                DayIndex(start),
                DayIndex(start + width),
                rng.random_range(50.0..250.0),
                rng.random_range(5..=30i64),
            )
            .unwrap()
        })
        .collect();

    let membership = WeekMembership::covering(set.start_day(), set.horizon()).unwrap();
    let table = build_harvest_table(&populations, &set, &membership).unwrap();

    let total: u64 = populations.iter().map(|p| p.harvest_quantity).sum();
    let max_q = populations
        .iter()
        .map(|p| p.harvest_quantity)
        .max()
        .unwrap();
    let capacity = ((total as f64 * rng.random_range(0.55..1.0)) as u64).max(max_q);
    FamilyInstance {
        populations,
        table,
        capacity,
    }
}

/// Exhaustive reference solver: enumerate every admissible assignment in
/// ascending lexicographic order and score it with the public evaluators'
/// exact accumulation order, applying the same better/tie-break update rule
/// the branch-and-bound uses. No pruning, no candidate collapsing.
fn enumerate_best(
    table: &HarvestTable,
    capacity: u64,
    window: &WindowLimit,
) -> Option<(f64, f64, Vec<DayIndex>)> {
    let n = table.population_count();
    let week_count = window.len();
    let scenario_count = table.scenario_count();
    let probabilities = table.probabilities().to_vec();

    // Candidate days with their (scenario → window-week offset) vectors.
    struct Cand {
        day: DayIndex,
        cells: Vec<usize>, // scenario * week_count + offset
    }
    let mut candidates: Vec<Vec<Cand>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut list = Vec::new();
        for day in table.admissible_days(i) {
            let weeks = table.week_vector(i, day).expect("admissible day");
            if weeks.iter().all(|w| window.contains(*w)) {
                list.push(Cand {
                    day,
                    cells: weeks
                        .iter()
                        .enumerate()
                        .map(|(s, w)| {
                            s * week_count + (w.0 - window.first_week().0) as usize
                        })
                        .collect(),
                });
            }
        }
        if list.is_empty() {
            return None;
        }
        candidates.push(list);
    }

    let quantities: Vec<u64> = (0..n).map(|i| table.quantity(i)).collect();
    let mut loads = vec![0u64; scenario_count * week_count];
    let mut idx = vec![0usize; n];
    let mut best: Option<(f64, f64, Vec<DayIndex>)> = None;

    // Mirror evaluate_case1_objective: per scenario ascending, add
    // p * (capacity - min window load); feasible iff every load fits.
    let objective = |loads: &[u64]| -> Option<f64> {
        let mut value = 0.0;
        for (s, p) in probabilities.iter().enumerate() {
            let row = &loads[s * week_count..(s + 1) * week_count];
            let mut min_load = u64::MAX;
            for &l in row {
                if l > capacity {
                    return None;
                }
                min_load = min_load.min(l);
            }
            value += p * (capacity as f64 - min_load as f64);
        }
        Some(value)
    };
    // Mirror evaluate_pairwise_objective: per scenario, sum of |l_i - l_j|
    // over ordered week pairs, probability-weighted.
    let pairwise = |loads: &[u64]| -> f64 {
        let mut value = 0.0;
        for (s, p) in probabilities.iter().enumerate() {
            let row = &loads[s * week_count..(s + 1) * week_count];
            let mut pair_sum = 0.0;
            for i in 0..row.len() {
                for j in (i + 1)..row.len() {
                    pair_sum += row[i].abs_diff(row[j]) as f64;
                }
            }
            value += p * pair_sum;
        }
        value
    };

    loop {
        for (i, &k) in idx.iter().enumerate() {
            for &cell in &candidates[i][k].cells {
                loads[cell] += quantities[i];
            }
        }
        if let Some(obj) = objective(&loads) {
            let pw = pairwise(&loads);
            let better = match &best {
                None => true,
                Some((bo, be, _)) => {
                    obj < *bo - 1e-9 || ((obj - *bo).abs() <= 1e-9 && pw < *be)
                }
            };
            if better {
                let days = idx
                    .iter()
                    .enumerate()
                    .map(|(i, &k)| candidates[i][k].day)
                    .collect();
                best = Some((obj, pw, days));
            }
        }
        for (i, &k) in idx.iter().enumerate() {
            for &cell in &candidates[i][k].cells {
                loads[cell] -= quantities[i];
            }
        }

        // Odometer, last position fastest: ascending lexicographic order.
        let mut pos = n;
        loop {
            if pos == 0 {
                return best;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < candidates[pos].len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

#[test]
fn c01_exact_solver_matches_exhaustive_enumeration() {
    let started = Instant::now();
    let mut feasible = 0usize;
    let mut infeasible = 0usize;
    for seed in 1000..1200u64 {
        let inst = family_instance(seed);
        let window = full_table_window(&inst.table).unwrap();
        let oracle = enumerate_best(&inst.table, inst.capacity, &window);
        let solved = solve_case1_exact(&inst.table, inst.capacity, window, &inst.populations);
        match (oracle, solved) {
            (Some((obj, pw, days)), Ok(schedule)) => {
                assert!(
                    schedule.objective_case1 == obj
                        && schedule.pairwise_objective == pw
                        && schedule.days == days,
                    "criterion 1: FAIL — seed {seed}: solver ({}, {}, {:?}) vs enumeration ({obj}, {pw}, {days:?})",
                    schedule.objective_case1,
                    schedule.pairwise_objective,
                    schedule.days,
                );
                feasible += 1;
            }
            (None, Err(Error::Infeasible(_))) => infeasible += 1,
            (oracle, solved) => panic!(
                "criterion 1: FAIL — seed {seed}: enumeration {:?} but solver {:?}",
                oracle.map(|o| o.0),
                solved.map(|s| s.objective_case1)
            ),
        }
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs_f64() < 60.0,
        "criterion 1: FAIL — took {elapsed:?}, limit 60 s"
    );
    pass(
        1,
        format!(
            "200 instances ({feasible} feasible, {infeasible} infeasible) matched exhaustive \
             enumeration exactly in {:.1} s",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn c02_heuristic_feasible_and_close_to_exact() {
    let mut feasible = 0usize;
    let mut within_10 = 0usize;
    let mut worst_ratio = 1.0f64;
    for seed in 1000..1200u64 {
        let inst = family_instance(seed);
        let window = full_table_window(&inst.table).unwrap();
        let exact = solve_case1_exact(&inst.table, inst.capacity, window, &inst.populations);
        let heur = solve_case1_heuristic(
            &inst.table,
            inst.capacity,
            window,
            &inst.populations,
            &HeuristicConfig::default(),
        );
        match exact {
            Err(Error::Infeasible(_)) => {
                assert!(
                    heur.is_err(),
                    "criterion 2: FAIL — seed {seed}: heuristic returned a schedule on an \
                     infeasible instance"
                );
            }
            Ok(exact) => {
                let heur = match heur {
                    Ok(h) => h,
                    Err(e) => panic!(
                        "criterion 2: FAIL — seed {seed}: heuristic infeasible on a feasible \
                         instance: {e}"
                    ),
                };
                feasible += 1;
                let (h, e) = (heur.objective_case1, exact.objective_case1);
                let ok_10 = if e > 0.0 { h <= e * 1.10 + 1e-9 } else { h <= 1e-9 };
                let ok_25 = if e > 0.0 { h <= e * 1.25 + 1e-9 } else { h <= 1e-9 };
                if e > 0.0 {
                    worst_ratio = worst_ratio.max(h / e);
                }
                if ok_10 {
                    within_10 += 1;
                }
                assert!(
                    ok_25,
                    "criterion 2: FAIL — seed {seed}: heuristic {h} vs exact {e} exceeds 25%"
                );
            }
            Err(e) => panic!("criterion 2: FAIL — seed {seed}: exact solver error {e}"),
        }
    }
    let fraction = within_10 as f64 / feasible as f64;
    assert!(
        fraction >= 0.90,
        "criterion 2: FAIL — only {within_10}/{feasible} within 10% of exact"
    );
    pass(
        2,
        format!(
            "heuristic feasible on all {feasible} feasible instances; {within_10}/{feasible} \
             within 10% (worst ratio {worst_ratio:.3})"
        ),
    );
}

#[test]
fn c03_case2_bisection_matches_brute_force() {
    let opts = SolveOptions {
        engine: Engine::Exact,
        ..SolveOptions::default()
    };
    let mut checked = 0usize;
    for seed in 2000..2080u64 {
        let inst = family_instance(seed);
        let window = full_table_window(&inst.table).unwrap();
        let (z, schedule) = solve_case2(&inst.table, &inst.populations, window, &opts).unwrap();
        assert_eq!(
            schedule.max_capacity_used, z,
            "criterion 3: FAIL — seed {seed}: schedule peak differs from z*"
        );

        // feasible(z*) ∧ infeasible(z* − 1)
        assert!(
            solve_case1_exact(&inst.table, z, window, &inst.populations).is_ok(),
            "criterion 3: FAIL — seed {seed}: z* = {z} not feasible"
        );
        assert!(
            matches!(
                solve_case1_exact(&inst.table, z - 1, window, &inst.populations),
                Err(Error::Infeasible(_))
            ),
            "criterion 3: FAIL — seed {seed}: z* - 1 = {} still feasible",
            z - 1
        );

        // Brute force: minimum over all assignments of the worst load.
        let n = inst.table.population_count();
        let candidates: Vec<Vec<DayIndex>> =
            (0..n).map(|i| inst.table.admissible_days(i)).collect();
        let mut idx = vec![0usize; n];
        let mut best = u64::MAX;
        'all: loop {
            let days: Vec<DayIndex> = idx
                .iter()
                .zip(&candidates)
                .map(|(&k, c)| c[k])
                .collect();
            let profile = gduplan::scheduler::build_profile(&inst.table, &days).unwrap();
            best = best.min(profile.max_weekly());
            let mut pos = n;
            loop {
                if pos == 0 {
                    break 'all;
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < candidates[pos].len() {
                    break;
                }
                idx[pos] = 0;
            }
        }
        assert_eq!(
            z, best,
            "criterion 3: FAIL — seed {seed}: bisection z* = {z}, brute force {best}"
        );
        checked += 1;
    }
    pass(
        3,
        format!("z* = brute-force minimum with feasible(z*) ∧ infeasible(z*−1) on {checked} instances"),
    );
}

/// Scenario series for a mild-seasonality year-round site (winter-nursery
/// climate): mean 12 GDU/day, amplitude 3, trough mid-January, noise sd 1.5.
fn seasonal_scenario(seed: u64, days: usize, amplitude: f64) -> DailyGduSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = (0..days)
        .map(|d| {
            let phase = 2.0 * std::f64::consts::PI * ((d as i64 - 105) as f64) / 365.25;
            let noise: f64 = rng.random_range(-2.6..2.6);
            (12.0 + amplitude * phase.sin() + noise).max(0.0)
        })
        .collect();
    DailyGduSeries::new(SiteId(0), DayIndex(0), values).unwrap()
}

fn seasonal_scenario_set(base_seed: u64, count: usize, days: usize, amplitude: f64) -> ScenarioSet {
    let p = 1.0 / count as f64;
    ScenarioSet::new(
        (0..count)
            .map(|s| Scenario {
                series: seasonal_scenario(base_seed * 1000 + s as u64, days, amplitude),
                probability: p,
            })
            .collect(),
        base_seed,
    )
    .unwrap()
}

/// A two-year slice of a year-round program: 500 populations whose 30-day
/// planting windows open uniformly across 730 days, quantities N(250,100)
/// rounded and floored at 1 ear, GDU requirements uniform in the synthetic
/// case-1 range.
fn year_round_populations(seed: u64) -> Vec<SeedPopulation> {
    use rand_distr::Distribution;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let quantity = rand_distr::Normal::new(250.0f64, 100.0).unwrap();
    (0..500)
        .map(|i| {
            let earliest = rng.random_range(0..=700i64);
            let q = quantity.sample(&mut rng).round().max(1.0) as i64;
            SeedPopulation::new(
                format!("p{i:04}"),
                SiteId(0),
                DayIndex(earliest),
                DayIndex(earliest + 29),
                rng.random_range(250.0..900.0),
                q,
            )
            .unwrap()
        })
        .collect()
}

#[test]
fn c04_optimized_peak_at_most_half_of_random_baseline() {
    let started = Instant::now();
    let mut optimized_sum = 0.0f64;
    let mut baseline_sum = 0.0f64;
    for seed in 0..10u64 {
        let populations = year_round_populations(seed);
        let set = seasonal_scenario_set(seed + 1, 3, 930, 3.0);
        let membership = WeekMembership::covering(set.start_day(), set.horizon()).unwrap();
        let table = build_harvest_table(&populations, &set, &membership).unwrap();
        let window = full_table_window(&table).unwrap();

        let total: u64 = populations.iter().map(|p| p.harvest_quantity).sum();
        let baseline = random_schedule(&table, total, seed).unwrap();
        baseline_sum += baseline.max_capacity_used as f64;

        let opts = SolveOptions {
            engine: Engine::Heuristic,
            heuristic: HeuristicConfig {
                seed,
                ..HeuristicConfig::default()
            },
            ..SolveOptions::default()
        };
        let (z, _) = solve_case2(&table, &populations, window, &opts).unwrap();
        optimized_sum += z as f64;
    }
    let ratio = optimized_sum / baseline_sum;
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs_f64() < 600.0,
        "criterion 4: FAIL — took {elapsed:?}, limit 10 min"
    );
    assert!(
        ratio <= 0.50,
        "criterion 4: FAIL — optimized peak is {:.1}% of the random baseline (mean optimized \
         {:.0}, mean baseline {:.0}), above the 50% gate",
        ratio * 100.0,
        optimized_sum / 10.0,
        baseline_sum / 10.0
    );
    pass(
        4,
        format!(
            "optimized max weekly harvest averaged {:.0} vs random baseline {:.0} \
             ({:.1}%, gate 50%) over 10 seeds in {:.0} s",
            optimized_sum / 10.0,
            baseline_sum / 10.0,
            ratio * 100.0,
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn c05_analytic_gradients_match_finite_differences() {
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let report = bptt_gradient_check(seed).unwrap();
        worst = worst.max(report.relative_error);
        assert!(
            report.relative_error <= 1e-3,
            "criterion 5: FAIL — seed {seed}: relative error {} above 1e-3 \
             ({} parameters)",
            report.relative_error,
            report.param_count
        );
    }
    pass(
        5,
        format!("20 random configurations, worst relative gradient error {worst:.2e} (gate 1e-3)"),
    );
}

#[test]
fn c06_forecaster_beats_persistence_and_fits_noiseless_data() {
    // Noisy synthetic data: the trained model must beat persistence.
    let noisy = generate_synthetic_instance(&SyntheticSpec::case1_defaults(1, 3))
        .unwrap()
        .history;
    let cfg = TrainConfig {
        epochs: 30,
        patience: 8,
        rng_seed: 3,
        ..TrainConfig::default()
    };
    let model_cv = cross_validate(&noisy, &cfg).unwrap();
    let persistence = persistence_cv(&noisy).unwrap();
    assert!(
        model_cv.rmse < persistence.rmse,
        "criterion 6: FAIL — model rmse {:.4} not below persistence {:.4}",
        model_cv.rmse,
        persistence.rmse
    );

    // Noiseless seasonal data: R² above 0.9.
    let clean_spec = SyntheticSpec {
        gdu_noise_sd: 0.0,
        ..SyntheticSpec::case1_defaults(1, 4)
    };
    let clean = generate_synthetic_instance(&clean_spec).unwrap().history;
    let clean_cv = cross_validate(&clean, &cfg).unwrap();
    assert!(
        clean_cv.r2 > 0.9,
        "criterion 6: FAIL — noiseless R² {:.4} not above 0.9",
        clean_cv.r2
    );
    pass(
        6,
        format!(
            "CV rmse {:.3} < persistence {:.3}; noiseless R² {:.4} (gate 0.9)",
            model_cv.rmse, persistence.rmse, clean_cv.r2
        ),
    );
}

#[test]
fn c07_gp_posterior_matches_dense_inverse_oracle() {
    let hyper = IoKernelHyper {
        sigma_in: 1.3,
        len_in: 0.9,
        sigma_out: 0.7,
        len_out: 1.4,
        noise_sd: 0.0,
    };
    let mut worst_mean = 0.0f64;
    let mut worst_var = 0.0f64;
    for (round, &m) in [3usize, 5, 10, 25, 50].iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(round as u64 + 7);
        let features: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let predictions: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
        let residuals: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();

        let noise_sd = 0.3;
        let opts = GpFitOptions {
            hyper: Some(hyper),
            noise_sd: Some(noise_sd),
            ..GpFitOptions::default()
        };
        let gp = fit_gp_with(&features, &predictions, &residuals, &opts).unwrap();

        // Dense oracle: K + σ²I inverted by Gauss-Jordan elimination.
        let mut k = vec![vec![0.0f64; m]; m];
        for i in 0..m {
            for j in 0..m {
                k[i][j] = io_kernel(
                    &features[i],
                    predictions[i],
                    &features[j],
                    predictions[j],
                    &hyper,
                )
                .unwrap();
                if i == j {
                    k[i][j] += noise_sd * noise_sd;
                }
            }
        }
        let k_inv = dense_inverse(&k);

        let prior = hyper.prior_variance();
        for _ in 0..20 {
            let g: Vec<f64> = (0..3).map(|_| rng.random_range(-2.5..2.5)).collect();
            let y = rng.random_range(-2.5..2.5);
            let (mean, var) = gp_posterior(&gp, &g, y).unwrap();

            let k_star: Vec<f64> = (0..m)
                .map(|i| io_kernel(&features[i], predictions[i], &g, y, &hyper).unwrap())
                .collect();
            let alpha: Vec<f64> = (0..m)
                .map(|i| (0..m).map(|j| k_inv[i][j] * residuals[j]).sum())
                .collect();
            let oracle_mean: f64 = k_star.iter().zip(&alpha).map(|(a, b)| a * b).sum();
            let kk: Vec<f64> = (0..m)
                .map(|i| (0..m).map(|j| k_inv[i][j] * k_star[j]).sum())
                .collect();
            let oracle_var = prior - k_star.iter().zip(&kk).map(|(a, b)| a * b).sum::<f64>();

            worst_mean = worst_mean.max((mean - oracle_mean).abs());
            worst_var = worst_var.max((var - oracle_var.max(0.0)).abs());
            assert!(
                (mean - oracle_mean).abs() <= 1e-10,
                "criterion 7: FAIL — m = {m}: posterior mean off by {}",
                (mean - oracle_mean).abs()
            );
            assert!(
                (var - oracle_var.max(0.0)).abs() <= 1e-10,
                "criterion 7: FAIL — m = {m}: posterior variance off by {}",
                (var - oracle_var.max(0.0)).abs()
            );
            assert!(
                var <= prior + 1e-12,
                "criterion 7: FAIL — m = {m}: variance {var} exceeds prior {prior}"
            );
        }

        // Noise-free fit interpolates its own training points.
        let clean_opts = GpFitOptions {
            hyper: Some(hyper),
            noise_sd: Some(0.0),
            ..GpFitOptions::default()
        };
        let clean = fit_gp_with(&features, &predictions, &residuals, &clean_opts).unwrap();
        for i in 0..m {
            let (mean, _) = gp_posterior(&clean, &features[i], predictions[i]).unwrap();
            assert!(
                (mean - residuals[i]).abs() <= 1e-6,
                "criterion 7: FAIL — m = {m}: interpolation off by {} at point {i}",
                (mean - residuals[i]).abs()
            );
        }
    }
    pass(
        7,
        format!(
            "dense-inverse agreement within {worst_mean:.1e} (mean) / {worst_var:.1e} (variance), \
             gate 1e-10; noise-free interpolation within 1e-6; variance never above prior"
        ),
    );
}

#[test]
fn c08_rollouts_are_fast_bounded_and_diverse() {
    let history = generate_synthetic_instance(&SyntheticSpec::case1_defaults(1, 5))
        .unwrap()
        .history;
    let cfg = TrainConfig {
        epochs: 3,
        patience: 0,
        rng_seed: 5,
        ..TrainConfig::default()
    };
    let model = gduplan::forecaster::train(&history, &cfg).unwrap();
    let (features, predictions, residuals) = residual_training_set(&model, &history).unwrap();
    let gp = fit_gp(&features, &predictions, &residuals).unwrap();

    let started = Instant::now();
    let set = generate_scenarios(&model, &gp, &history, 25, 730, 5).unwrap();
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs_f64() < 300.0,
        "criterion 8: FAIL — generation took {elapsed:?}, limit 5 min"
    );

    let hist_max = history.values().iter().copied().fold(0.0f64, f64::max);
    let bound = 1.5 * hist_max;
    let mut out_of_range = 0usize;
    for scenario in set.scenarios() {
        for &v in scenario.series.values() {
            if !(0.0..=bound).contains(&v) {
                out_of_range += 1;
            }
        }
    }
    assert_eq!(
        out_of_range, 0,
        "criterion 8: FAIL — {out_of_range} values outside [0, {bound:.1}]"
    );

    let mut min_var = f64::INFINITY;
    for day_off in 100..730usize {
        let values: Vec<f64> = set
            .scenarios()
            .iter()
            .map(|s| s.series.values()[day_off])
            .collect();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let var =
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64;
        min_var = min_var.min(var);
        assert!(
            var > 0.0,
            "criterion 8: FAIL — zero cross-scenario variance at day offset {day_off}"
        );
    }
    pass(
        8,
        format!(
            "25 scenarios x 730 days in {:.1} s; all values in [0, {bound:.1}]; \
             min cross-scenario variance beyond day 100 is {min_var:.3}",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn c09_harvest_table_matches_naive_recomputation() {
    let set = seasonal_scenario_set(7, 3, 400, 9.0);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let populations: Vec<SeedPopulation> = (0..40)
        .map(|i| {
            let start = rng.random_range(0..200i64);
            SeedPopulation::new(
                format!("p{i}"),
                SiteId(0),
                DayIndex(start),
                DayIndex(start + 9),
                rng.random_range(0.0..2000.0),
                rng.random_range(1..=400i64),
            )
            .unwrap()
        })
        .collect();
    let membership = WeekMembership::covering(set.start_day(), set.horizon()).unwrap();
    let table = build_harvest_table(&populations, &set, &membership).unwrap();

    let mut triples = 0usize;
    for (i, pop) in populations.iter().enumerate() {
        for off in 0..table.window_len(i) {
            let plant = DayIndex(table.window_start(i).0 + off as i64);
            for (s, scenario) in set.scenarios().iter().enumerate() {
                // Naive recomputation: march forward summing daily GDUs
                // until the requirement is met, then take that day's week.
                let values = scenario.series.values();
                let start_idx = (plant.0 - set.start_day().0) as usize;
                let mut cumulative = 0.0f64;
                let mut naive = None;
                if pop.required_gdu == 0.0 {
                    naive = Some(week_of(plant).unwrap());
                } else {
                    for (grown, &v) in values[start_idx..].iter().enumerate() {
                        cumulative += v;
                        if cumulative >= pop.required_gdu {
                            let day = DayIndex(plant.0 + grown as i64 + 1);
                            if day <= set.end_day() {
                                naive = Some(week_of(day).unwrap());
                            }
                            break;
                        }
                    }
                }
                assert_eq!(
                    table.harvest_week(i, plant, s),
                    naive,
                    "criterion 9: FAIL — population {i}, plant {plant:?}, scenario {s}"
                );
                triples += 1;
            }
        }
    }
    assert!(
        triples >= 1000,
        "criterion 9: FAIL — only {triples} triples checked"
    );
    pass(
        9,
        format!("{triples} (population, day, scenario) triples matched naive recomputation exactly"),
    );
}

#[test]
fn c10_pipeline_runs_are_byte_identical() {
    fn run(args: &[String]) {
        let out = std::process::Command::new(env!("CARGO_BIN_EXE_gduplan"))
            .args(args)
            .output()
            .expect("spawn gduplan");
        assert!(
            out.status.success(),
            "criterion 10: FAIL — gduplan {args:?}:\n{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    // Identical commands both times — including the output directory, so
    // even the manifests (which record consumed input paths) must match.
    let pipeline = || {
        let o = out.display().to_string();
        let s = |v: &[&str]| -> Vec<String> { v.iter().map(|s| s.to_string()).collect() };
        run(&s(&["synth", "--populations", "30", "--seed", "11", "--out", &o]));
        let history = out.join("history.csv").display().to_string();
        run(&s(&[
            "forecast", "train", "--history", &history, "--epochs", "2", "--seed", "11",
            "--out", &o,
        ]));
        let model = out.join("model.json").display().to_string();
        run(&s(&[
            "scenarios", "generate", "--model", &model, "--history", &history, "--count", "3",
            "--horizon", "560", "--gp-max-points", "250", "--seed", "11", "--out", &o,
        ]));
        let scenarios = out.join("scenarios.csv").display().to_string();
        let populations = out.join("populations.csv").display().to_string();
        let total: u64 = {
            let bytes = std::fs::read(out.join("populations.csv")).unwrap();
            gduplan::ingest::parse_populations(std::io::Cursor::new(bytes), &Default::default())
                .unwrap()
                .iter()
                .map(|p| p.harvest_quantity)
                .sum()
        };
        run(&s(&[
            "schedule", "--mode", "case1", "--scenarios", &scenarios, "--populations",
            &populations, "--capacity", &total.to_string(), "--seed", "11", "--out", &o,
        ]));
    };

    let compared = [
        "history.csv",
        "populations.csv",
        "model.json",
        "scenarios.csv",
        "scenarios.json",
        "schedule.csv",
        "harvest_profile.csv",
        "report.json",
        "manifest.json",
    ];
    pipeline();
    let first: Vec<Vec<u8>> = compared
        .iter()
        .map(|name| std::fs::read(out.join(name)).unwrap())
        .collect();
    pipeline();
    for (name, left) in compared.iter().zip(&first) {
        let right = std::fs::read(out.join(name)).unwrap();
        assert_eq!(
            left, &right,
            "criterion 10: FAIL — {name} differs between identical runs"
        );
    }
    pass(
        10,
        format!(
            "two full pipeline runs produced byte-identical artifacts ({} files compared)",
            compared.len()
        ),
    );
}

/// Gauss-Jordan inverse for the dense GP oracle.
fn dense_inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut wide = row.clone();
            wide.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            wide
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        let p = m[col][col];
        for v in m[col].iter_mut() {
            *v /= p;
        }
        for row in 0..n {
            if row != col {
                let f = m[row][col];
                for k in 0..2 * n {
                    m[row][k] -= f * m[col][k];
                }
            }
        }
    }
    m.into_iter().map(|row| row[n..].to_vec()).collect()
}
