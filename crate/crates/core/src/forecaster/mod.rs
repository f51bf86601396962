//! Training, evaluation, and persistence for the next-day GDU forecaster.
//!
//! Training is plain mini-batch Adam on mean absolute error over z-scored
//! windows, with optional early stopping against a held-out tail of the
//! training span. Evaluation is time-wise cross-validation: calendar
//! half-year test blocks, each trained on everything before it, so no fold
//! ever sees the future. A predict-yesterday persistence baseline runs on
//! the same folds for comparison.

mod adam;
mod lstm;

pub use adam::{AdamConfig, AdamState};
pub use lstm::{ForecastModel, LstmParams, DENSE, HIDDEN, WINDOW};

use std::io::{Read, Write};

use chrono::Datelike;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::DayIndex;
use crate::error::{Error, Result};
use crate::ingest::DailyGduSeries;

use lstm::ForwardCache;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub window: usize,
    pub hidden: usize,
    pub dense: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Trailing fraction of the training samples held out for early
    /// stopping. Ignored when `patience` is 0.
    pub validation_fraction: f64,
    /// Consecutive epochs without validation improvement before stopping.
    /// 0 disables early stopping.
    pub patience: usize,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            window: WINDOW,
            hidden: HIDDEN,
            dense: DENSE,
            epochs: 200,
            batch_size: 32,
            adam: AdamConfig::default(),
            validation_fraction: 0.1,
            patience: 20,
            rng_seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.adam.validate()?;
        if self.window == 0 || self.hidden == 0 || self.dense == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig(
                "window, hidden, dense, and batch_size must all be at least 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::InvalidConfig(format!(
                "validation_fraction must be in [0, 1), got {}",
                self.validation_fraction
            )));
        }
        Ok(())
    }
}

/// Population mean and standard deviation used for z-scoring. A constant
/// series gets scale 1 so normalization stays invertible.
fn zscore(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let scale = var.sqrt();
    (mean, if scale > 1e-12 { scale } else { 1.0 })
}

/// Uniform init in +-1/sqrt(fan_in) per matrix, forget-gate bias 1 so cell
/// memory starts open, all other biases 0.
fn init_model(cfg: &TrainConfig, mean: f64, scale: f64, rng: &mut ChaCha8Rng) -> ForecastModel {
    let mut model = ForecastModel::zeros(1, cfg.hidden, cfg.dense, cfg.window);
    let gate_bound = 1.0 / ((cfg.hidden + 1) as f64).sqrt();
    let dense_bound = 1.0 / (cfg.hidden as f64).sqrt();
    let out_bound = 1.0 / (cfg.dense as f64).sqrt();
    for w in [
        &mut model.lstm.w_f,
        &mut model.lstm.w_i,
        &mut model.lstm.w_c,
        &mut model.lstm.w_o,
    ] {
        for v in w.iter_mut() {
            *v = rng.random_range(-gate_bound..gate_bound);
        }
    }
    for v in model.dense_w.iter_mut() {
        *v = rng.random_range(-dense_bound..dense_bound);
    }
    for v in model.out_w.iter_mut() {
        *v = rng.random_range(-out_bound..out_bound);
    }
    model.lstm.b_f.fill(1.0);
    model.input_mean = mean;
    model.input_scale = scale;
    model
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    /// Mean absolute error (normalized units) per epoch over the training
    /// split, measured as the batches were optimized.
    pub epoch_train_mae: Vec<f64>,
    /// Validation MAE per completed epoch; empty with early stopping off.
    pub epoch_val_mae: Vec<f64>,
    /// Epoch count actually run if early stopping fired.
    pub stopped_early_at: Option<usize>,
}

pub fn train(history: &DailyGduSeries, cfg: &TrainConfig) -> Result<ForecastModel> {
    Ok(train_with_trace(history, cfg)?.0)
}

pub fn train_with_trace(
    history: &DailyGduSeries,
    cfg: &TrainConfig,
) -> Result<(ForecastModel, TrainTrace)> {
    cfg.validate()?;
    let values = history.values();
    if values.len() < cfg.window + 2 {
        return Err(Error::InsufficientHistory {
            what: "forecaster training",
            needed: cfg.window + 2,
            got: values.len(),
        });
    }
    let (mean, scale) = zscore(values);
    let norm: Vec<f64> = values.iter().map(|v| (v - mean) / scale).collect();
    let samples = norm.len() - cfg.window;

    let mut val_count = if cfg.patience > 0 {
        ((samples as f64) * cfg.validation_fraction).floor() as usize
    } else {
        0
    };
    if val_count >= samples {
        val_count = samples - 1;
    }
    let train_count = samples - val_count;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut model = init_model(cfg, mean, scale, &mut rng);
    let mut theta = model.flatten();
    let mut adam_state = AdamState::new(theta.len());
    let mut grads = vec![0.0; theta.len()];
    let mut cache = ForwardCache::new(cfg.window, cfg.hidden, cfg.dense);

    let mut order: Vec<usize> = (0..train_count).collect();
    let mut trace = TrainTrace {
        epoch_train_mae: Vec::with_capacity(cfg.epochs),
        epoch_val_mae: Vec::new(),
        stopped_early_at: None,
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut bad_epochs = 0usize;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut abs_err_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grads.fill(0.0);
            let inv = 1.0 / batch.len() as f64;
            for &i in batch {
                let xs = &norm[i..i + cfg.window];
                model.forward_cached(xs, &mut cache);
                let r = cache.y - norm[i + cfg.window];
                abs_err_sum += r.abs();
                // d|r|/dy: sign(r), with the kink at 0 mapped to 0.
                let dy = if r == 0.0 { 0.0 } else { r.signum() * inv };
                model.backward(xs, &cache, dy, &mut grads);
            }
            adam_state.apply(&cfg.adam, &mut theta, &grads)?;
            model.assign_from_flat(&theta);
        }
        trace.epoch_train_mae.push(abs_err_sum / train_count as f64);

        if val_count > 0 {
            let mut val_sum = 0.0;
            for i in train_count..samples {
                let xs = &norm[i..i + cfg.window];
                model.forward_cached(xs, &mut cache);
                val_sum += (cache.y - norm[i + cfg.window]).abs();
            }
            let val_mae = val_sum / val_count as f64;
            trace.epoch_val_mae.push(val_mae);
            if best.as_ref().is_none_or(|(b, _)| val_mae < *b) {
                best = Some((val_mae, theta.clone()));
                bad_epochs = 0;
            } else {
                bad_epochs += 1;
                if bad_epochs >= cfg.patience {
                    trace.stopped_early_at = Some(epoch + 1);
                    break;
                }
            }
        }
    }

    if let Some((_, best_theta)) = best {
        model.assign_from_flat(&best_theta);
    }
    Ok((model, trace))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rmse: f64,
    /// Relative RMSE: rmse divided by the mean observation.
    pub rrmse: f64,
    /// Coefficient of determination, 1 - SS_res/SS_tot.
    pub r2: f64,
}

pub fn accuracy_metrics(predictions: &[f64], observations: &[f64]) -> Result<Metrics> {
    if predictions.len() != observations.len() {
        return Err(Error::ShapeMismatch {
            what: "accuracy metrics inputs",
            expected: observations.len(),
            got: predictions.len(),
        });
    }
    if observations.len() < 2 {
        return Err(Error::InvalidConfig(
            "accuracy metrics need at least 2 points".into(),
        ));
    }
    let n = observations.len() as f64;
    let ss_res: f64 = predictions
        .iter()
        .zip(observations)
        .map(|(p, o)| (p - o) * (p - o))
        .sum();
    let rmse = (ss_res / n).sqrt();
    let mean_obs = observations.iter().sum::<f64>() / n;
    if mean_obs.abs() < 1e-12 {
        return Err(Error::MetricUndefined(
            "rrmse (mean of observations is zero)".into(),
        ));
    }
    let ss_tot: f64 = observations
        .iter()
        .map(|o| (o - mean_obs) * (o - mean_obs))
        .sum();
    if ss_tot < 1e-12 {
        return Err(Error::MetricUndefined(
            "r2 (observations have zero variance)".into(),
        ));
    }
    Ok(Metrics {
        rmse,
        rrmse: rmse / mean_obs,
        r2: 1.0 - ss_res / ss_tot,
    })
}

/// One cross-validation test block: a calendar half-year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSpan {
    pub start: DayIndex,
    pub days: usize,
}

/// The last five calendar half-years (January-June / July-December) fully
/// covered by the history, oldest first. Each fold trains on everything
/// strictly before its block.
pub fn half_year_folds(history: &DailyGduSeries) -> Result<Vec<FoldSpan>> {
    let start_date = history.start_day().to_date()?;
    let end_date = history.end_day().to_date()?;
    let mut blocks = Vec::new();
    for year in start_date.year()..=end_date.year() {
        for (m_start, m_end, d_end) in [(1, 6, 30), (7, 12, 31)] {
            let block_start = chrono::NaiveDate::from_ymd_opt(year, m_start, 1).unwrap();
            let block_end = chrono::NaiveDate::from_ymd_opt(year, m_end, d_end).unwrap();
            // Strictly-later start so the first fold has training data.
            if block_start > start_date && block_end <= end_date {
                blocks.push(FoldSpan {
                    start: DayIndex::from_date(block_start),
                    days: (block_end - block_start).num_days() as usize + 1,
                });
            }
        }
    }
    if blocks.len() < 5 {
        return Err(Error::InsufficientHistory {
            what: "time-wise cross-validation",
            needed: 2191,
            got: history.len(),
        });
    }
    Ok(blocks.split_off(blocks.len() - 5))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub test_start: DayIndex,
    pub test_days: usize,
    pub rmse: f64,
    pub rrmse: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    /// Pooled over every fold's predictions.
    pub rmse: f64,
    pub rrmse: f64,
    pub r2: f64,
    pub folds: Vec<FoldMetrics>,
}

/// Time-wise CV skeleton shared by the real forecaster, the persistence
/// baseline, and tests that inject synthetic predictors. `make` receives
/// the training prefix and returns a one-step predictor over raw windows.
pub fn cv_with_predictor<F>(
    history: &DailyGduSeries,
    window: usize,
    mut make: F,
) -> Result<AccuracyReport>
where
    F: FnMut(&DailyGduSeries) -> Result<Box<dyn Fn(&[f64]) -> f64>>,
{
    let folds = half_year_folds(history)?;
    let values = history.values();
    let mut all_preds = Vec::new();
    let mut all_obs = Vec::new();
    let mut fold_metrics = Vec::with_capacity(folds.len());
    for (k, fold) in folds.iter().enumerate() {
        let prefix_len = (fold.start.0 - history.start_day().0) as usize;
        if prefix_len < window + 2 {
            return Err(Error::InsufficientHistory {
                what: "cross-validation training prefix",
                needed: window + 2,
                got: prefix_len,
            });
        }
        let train_series = DailyGduSeries::new(
            history.site(),
            history.start_day(),
            values[..prefix_len].to_vec(),
        )?;
        let predict = make(&train_series)?;
        let mut preds = Vec::with_capacity(fold.days);
        let mut obs = Vec::with_capacity(fold.days);
        for off in 0..fold.days {
            let target = prefix_len + off;
            preds.push(predict(&values[target - window..target]));
            obs.push(values[target]);
        }
        let m = accuracy_metrics(&preds, &obs)?;
        fold_metrics.push(FoldMetrics {
            fold: k + 1,
            test_start: fold.start,
            test_days: fold.days,
            rmse: m.rmse,
            rrmse: m.rrmse,
            r2: m.r2,
        });
        all_preds.extend_from_slice(&preds);
        all_obs.extend_from_slice(&obs);
    }
    let overall = accuracy_metrics(&all_preds, &all_obs)?;
    Ok(AccuracyReport {
        rmse: overall.rmse,
        rrmse: overall.rrmse,
        r2: overall.r2,
        folds: fold_metrics,
    })
}

/// Train-and-test over the five half-year folds.
pub fn cross_validate(history: &DailyGduSeries, cfg: &TrainConfig) -> Result<AccuracyReport> {
    cv_with_predictor(history, cfg.window, |train_series| {
        let model = train(train_series, cfg)?;
        Ok(Box::new(move |w: &[f64]| {
            model.forward(w).expect("window length matches").0
        }))
    })
}

/// Predict-yesterday baseline on the same folds.
pub fn persistence_cv(history: &DailyGduSeries) -> Result<AccuracyReport> {
    cv_with_predictor(history, 1, |_| Ok(Box::new(|w: &[f64]| w[0])))
}

const MODEL_FORMAT: &str = "gduplan-forecaster";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: ForecastModel,
}

pub fn save_model(model: &ForecastModel, mut writer: impl Write) -> Result<()> {
    let file = ModelFile {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        model: model.clone(),
    };
    serde_json::to_writer_pretty(&mut writer, &file)?;
    writer.write_all(b"\n")?;
    Ok(())
}

pub fn load_model(reader: impl Read) -> Result<ForecastModel> {
    let file: ModelFile = serde_json::from_reader(reader)?;
    if file.format != MODEL_FORMAT {
        return Err(Error::ModelFormat(format!(
            "expected format {MODEL_FORMAT:?}, found {:?}",
            file.format
        )));
    }
    if file.version != MODEL_VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported version {} (supported: {MODEL_VERSION})",
            file.version
        )));
    }
    let m = &file.model;
    let gate = m.lstm.hidden_size * (m.lstm.hidden_size + m.lstm.input_size);
    let dims_ok = m.window >= 1
        && m.lstm.input_size == 1
        && [&m.lstm.w_f, &m.lstm.w_i, &m.lstm.w_c, &m.lstm.w_o]
            .iter()
            .all(|w| w.len() == gate)
        && [&m.lstm.b_f, &m.lstm.b_i, &m.lstm.b_c, &m.lstm.b_o]
            .iter()
            .all(|b| b.len() == m.lstm.hidden_size)
        && m.dense_w.len() == m.dense_b.len() * m.lstm.hidden_size
        && m.out_w.len() == m.dense_b.len()
        && m.input_scale > 0.0;
    if !dims_ok {
        return Err(Error::ModelFormat(
            "inconsistent parameter dimensions".into(),
        ));
    }
    Ok(file.model)
}

/// Result of one backpropagation-vs-finite-difference comparison.
#[derive(Debug, Clone, Copy)]
pub struct GradCheckReport {
    /// l2-norm ratio ||g_bptt - g_fd|| / max(||g_bptt||, ||g_fd||).
    pub relative_error: f64,
    pub param_count: usize,
    /// Batches redrawn because a sample sat within 1e-4 of the MAE kink or
    /// a ReLU pre-activation kink, where finite differences are meaningless.
    pub resamples: usize,
}

/// Check the fused training backward pass against central finite
/// differences on a randomly shaped small network and batch.
pub fn bptt_gradient_check(seed: u64) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hidden = rng.random_range(2..=6);
    let window = rng.random_range(3..=8);
    let dense = rng.random_range(2..=5);
    let batch = rng.random_range(2..=4usize);
    let cfg = TrainConfig {
        window,
        hidden,
        dense,
        ..TrainConfig::default()
    };
    let mut model = init_model(&cfg, 0.0, 1.0, &mut rng);
    let mut cache = ForwardCache::new(window, hidden, dense);

    let mut resamples = 0;
    loop {
        let xs: Vec<Vec<f64>> = (0..batch)
            .map(|_| (0..window).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let ts: Vec<f64> = (0..batch).map(|_| rng.random_range(-2.0..2.0)).collect();

        // Kink guard: stay clear of |r| = 0 and ReLU pre-activation zeros.
        let mut near_kink = false;
        for (x, t) in xs.iter().zip(&ts) {
            model.forward_cached(x, &mut cache);
            if (cache.y - t).abs() < 1e-4
                || cache.dense_pre.iter().any(|z| z.abs() < 1e-4)
            {
                near_kink = true;
                break;
            }
        }
        if near_kink {
            resamples += 1;
            if resamples > 100 {
                return Err(Error::InvalidConfig(
                    "gradient check could not find a kink-free batch".into(),
                ));
            }
            continue;
        }

        let mut theta = model.flatten();
        let inv = 1.0 / batch as f64;
        let mut analytic = vec![0.0; theta.len()];
        for (x, t) in xs.iter().zip(&ts) {
            model.forward_cached(x, &mut cache);
            let r = cache.y - t;
            model.backward(x, &cache, r.signum() * inv, &mut analytic);
        }

        let mut loss_at = |theta_probe: &[f64], model: &mut ForecastModel| {
            model.assign_from_flat(theta_probe);
            let mut sum = 0.0;
            for (x, t) in xs.iter().zip(&ts) {
                model.forward_cached(x, &mut cache);
                sum += (cache.y - t).abs();
            }
            sum * inv
        };
        let mut numeric = vec![0.0; theta.len()];
        for j in 0..theta.len() {
            let h = 1e-5 * theta[j].abs().max(1.0);
            let orig = theta[j];
            theta[j] = orig + h;
            let up = loss_at(&theta, &mut model);
            theta[j] = orig - h;
            let down = loss_at(&theta, &mut model);
            theta[j] = orig;
            numeric[j] = (up - down) / (2.0 * h);
        }
        model.assign_from_flat(&theta);

        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let diff: Vec<f64> = analytic
            .iter()
            .zip(&numeric)
            .map(|(a, b)| a - b)
            .collect();
        let denom = norm(&analytic).max(norm(&numeric)).max(1e-12);
        return Ok(GradCheckReport {
            relative_error: norm(&diff) / denom,
            param_count: theta.len(),
            resamples,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::SiteId;
    use crate::ingest::{generate_synthetic_instance, SyntheticSpec};

    fn series(values: Vec<f64>) -> DailyGduSeries {
        DailyGduSeries::new(SiteId(0), DayIndex(-(values.len() as i64)), values).unwrap()
    }

    #[test]
    fn cell_step_at_zero_state_with_zero_weights() {
        let p = LstmParams::zeros(1, 4);
        let (h, c) = p.step(&[0.0], &[0.0; 4], &[0.0; 4]).unwrap();
        assert_eq!(h, vec![0.0; 4]);
        assert_eq!(c, vec![0.0; 4]);
    }

    #[test]
    fn cell_step_halves_previous_cell_state_when_weights_are_zero() {
        // All gates sit at sigmoid(0) = 0.5 and the candidate at tanh(0) = 0,
        // so c = 0.5 * c_prev and h = 0.5 * tanh(c).
        let p = LstmParams::zeros(2, 3);
        let c_prev = [0.8, -1.2, 0.0];
        let (h, c) = p.step(&[3.0, -1.0], &[0.1, 0.2, 0.3], &c_prev).unwrap();
        for r in 0..3 {
            assert!((c[r] - 0.5 * c_prev[r]).abs() < 1e-15);
            assert!((h[r] - 0.5 * (0.5 * c_prev[r]).tanh()).abs() < 1e-15);
        }
    }

    #[test]
    fn cell_rejects_mismatched_shapes() {
        let p = LstmParams::zeros(1, 4);
        assert!(p.step(&[0.0, 1.0], &[0.0; 4], &[0.0; 4]).is_err());
        assert!(p.step(&[0.0], &[0.0; 3], &[0.0; 4]).is_err());
    }

    #[test]
    fn cell_jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (input, hidden) = (3, 4);
        let cfg = TrainConfig {
            hidden,
            dense: 2,
            window: 2,
            ..TrainConfig::default()
        };
        let mut template = init_model(&cfg, 0.0, 1.0, &mut rng);
        // init_model builds input-size-1 cells; widen by re-sampling.
        template.lstm = {
            let mut p = LstmParams::zeros(input, hidden);
            for w in [&mut p.w_f, &mut p.w_i, &mut p.w_c, &mut p.w_o] {
                for v in w.iter_mut() {
                    *v = rng.random_range(-0.5..0.5);
                }
            }
            p.b_f.fill(1.0);
            p
        };
        let p = &template.lstm;
        let x: Vec<f64> = (0..input).map(|_| rng.random_range(-1.0..1.0)).collect();
        let h_prev: Vec<f64> = (0..hidden).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c_prev: Vec<f64> = (0..hidden).map(|_| rng.random_range(-1.0..1.0)).collect();

        // Analytic rows of dh/dx via vector-Jacobian products.
        let mut analytic = vec![vec![0.0; input]; hidden];
        for j in 0..hidden {
            let mut dh = vec![0.0; hidden];
            dh[j] = 1.0;
            let (dx, _, _) = p
                .step_vjp(&x, &h_prev, &c_prev, &dh, &vec![0.0; hidden])
                .unwrap();
            analytic[j] = dx;
        }
        let fd = 1e-6;
        for k in 0..input {
            let mut xp = x.clone();
            xp[k] += fd;
            let (h_up, _) = p.step(&xp, &h_prev, &c_prev).unwrap();
            xp[k] = x[k] - fd;
            let (h_down, _) = p.step(&xp, &h_prev, &c_prev).unwrap();
            for j in 0..hidden {
                let numeric = (h_up[j] - h_down[j]) / (2.0 * fd);
                let denom = numeric.abs().max(analytic[j][k].abs()).max(1e-8);
                assert!(
                    ((analytic[j][k] - numeric) / denom).abs() < 1e-3,
                    "dh[{j}]/dx[{k}]: analytic {} vs fd {numeric}",
                    analytic[j][k]
                );
            }
        }
    }

    #[test]
    fn forward_with_zero_weights_returns_the_mean() {
        let mut model = ForecastModel::zeros(1, 5, 4, 6);
        model.input_mean = 11.0;
        model.input_scale = 3.0;
        let (y, g) = model.forward(&[10.0, 12.0, 9.0, 14.0, 11.0, 8.0]).unwrap();
        // Zero head on top of zero hidden state predicts 0 normalized.
        assert_eq!(y, 11.0);
        assert_eq!(g, vec![0.0; 5]);
        assert!(model.forward(&[1.0; 5]).is_err(), "wrong window length");
    }

    #[test]
    fn constant_series_gives_identical_features_everywhere() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = TrainConfig {
            window: 5,
            hidden: 6,
            dense: 4,
            ..TrainConfig::default()
        };
        let model = init_model(&cfg, 7.0, 1.0, &mut rng);
        let (y1, g1) = model.forward(&[7.0; 5]).unwrap();
        let (y2, g2) = model.forward(&[7.0; 5]).unwrap();
        assert_eq!(y1, y2);
        assert_eq!(g1, g2);
    }

    #[test]
    fn bptt_matches_finite_differences_on_small_configs() {
        for seed in [1, 2, 3] {
            let report = bptt_gradient_check(seed).unwrap();
            assert!(
                report.relative_error < 1e-3,
                "seed {seed}: relative error {}",
                report.relative_error
            );
        }
    }

    #[test]
    fn zero_epochs_returns_the_initialized_model_deterministically() {
        let hist = series((0..80).map(|d| 10.0 + (d as f64 * 0.3).sin()).collect());
        let cfg = TrainConfig {
            window: 8,
            hidden: 4,
            dense: 3,
            epochs: 0,
            ..TrainConfig::default()
        };
        let a = train(&hist, &cfg).unwrap();
        let b = train(&hist, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.flatten().iter().any(|v| *v != 0.0), "initialized, not zero");
    }

    #[test]
    fn identical_seeds_produce_identical_parameters() {
        let hist = series(
            (0..160)
                .map(|d| 12.0 + 6.0 * (d as f64 * 0.11).sin())
                .collect(),
        );
        let cfg = TrainConfig {
            window: 10,
            hidden: 5,
            dense: 4,
            epochs: 4,
            batch_size: 8,
            rng_seed: 77,
            ..TrainConfig::default()
        };
        let a = train(&hist, &cfg).unwrap();
        let b = train(&hist, &cfg).unwrap();
        assert_eq!(a.flatten(), b.flatten());
        let cfg_other = TrainConfig {
            rng_seed: 78,
            ..cfg
        };
        assert_ne!(a.flatten(), train(&hist, &cfg_other).unwrap().flatten());
    }

    #[test]
    fn full_batch_loss_decreases_monotonically_on_a_noiseless_linear_trend() {
        let hist = series((0..120).map(|d| 5.0 + 0.05 * d as f64).collect());
        let cfg = TrainConfig {
            window: 10,
            hidden: 6,
            dense: 4,
            epochs: 20,
            batch_size: 1024, // full batch: one update per epoch
            patience: 0,
            rng_seed: 11,
            ..TrainConfig::default()
        };
        let (_, trace) = train_with_trace(&hist, &cfg).unwrap();
        assert_eq!(trace.epoch_train_mae.len(), 20);
        for pair in trace.epoch_train_mae.windows(2) {
            assert!(
                pair[1] <= pair[0] + 1e-12,
                "loss went up: {:?}",
                trace.epoch_train_mae
            );
        }
    }

    #[test]
    fn too_short_history_is_rejected() {
        let hist = series(vec![1.0; 12]);
        let cfg = TrainConfig {
            window: 30,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train(&hist, &cfg),
            Err(Error::InsufficientHistory { .. })
        ));
    }

    #[test]
    fn toy_model_beats_persistence_on_a_noiseless_sinusoid() {
        // 60-day period sampled daily: persistence lags by a full step and
        // pays for it; the trained model only has to track the curve.
        let n = 360usize;
        let hist = series(
            (0..n)
                .map(|d| 10.0 + 8.0 * (2.0 * std::f64::consts::PI * d as f64 / 60.0).sin())
                .collect(),
        );
        let cfg = TrainConfig {
            window: 12,
            hidden: 8,
            dense: 8,
            epochs: 120,
            batch_size: 16,
            patience: 0,
            rng_seed: 5,
            ..TrainConfig::default()
        };
        let model = train(&hist, &cfg).unwrap();
        let values = hist.values();
        let test_start = 300;
        let mut model_se = 0.0;
        let mut persist_se = 0.0;
        for t in test_start..n {
            let (pred, _) = model.forward(&values[t - 12..t]).unwrap();
            model_se += (pred - values[t]).powi(2);
            persist_se += (values[t - 1] - values[t]).powi(2);
        }
        let model_rmse = (model_se / (n - test_start) as f64).sqrt();
        let persist_rmse = (persist_se / (n - test_start) as f64).sqrt();
        assert!(
            model_rmse < persist_rmse,
            "model {model_rmse} vs persistence {persist_rmse}"
        );
    }

    #[test]
    fn metrics_on_hand_checked_values() {
        let m = accuracy_metrics(&[1.0, 3.0], &[1.0, 3.0]).unwrap();
        assert_eq!((m.rmse, m.rrmse, m.r2), (0.0, 0.0, 1.0));

        let m = accuracy_metrics(&[2.0, 2.0], &[1.0, 3.0]).unwrap();
        assert!((m.rmse - 1.0).abs() < 1e-15);
        assert!((m.rrmse - 0.5).abs() < 1e-15);
        assert!(m.r2.abs() < 1e-15, "constant-mean prediction has r2 = 0");

        assert!(matches!(
            accuracy_metrics(&[1.0, -1.0], &[1.0, -1.0]),
            Err(Error::MetricUndefined(_))
        ));
        assert!(matches!(
            accuracy_metrics(&[1.0, 1.0], &[2.0, 2.0]),
            Err(Error::MetricUndefined(_))
        ));
        assert!(accuracy_metrics(&[1.0], &[1.0]).is_err());
        assert!(accuracy_metrics(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn half_year_folds_on_the_standard_history() {
        let spec = SyntheticSpec::case1_defaults(1, 1);
        let inst = generate_synthetic_instance(&spec).unwrap();
        let folds = half_year_folds(&inst.history).unwrap();
        let expect = [
            ("2017-07-01", 184),
            ("2018-01-01", 181),
            ("2018-07-01", 184),
            ("2019-01-01", 181),
            ("2019-07-01", 184),
        ];
        assert_eq!(folds.len(), 5);
        for (fold, (date, days)) in folds.iter().zip(expect) {
            assert_eq!(fold.start.to_date().unwrap().to_string(), date);
            assert_eq!(fold.days, days);
        }
        // Folds tile contiguously: each starts right after the previous ends.
        for pair in folds.windows(2) {
            assert_eq!(pair[0].start.0 + pair[0].days as i64, pair[1].start.0);
        }
    }

    #[test]
    fn short_history_cannot_be_cross_validated() {
        let hist = series(vec![5.0; 400]);
        assert!(matches!(
            half_year_folds(&hist),
            Err(Error::InsufficientHistory { .. })
        ));
    }

    #[test]
    fn perfect_oracle_scores_zero_rmse_and_unit_r2_on_every_fold() {
        // Linear series: the next value is exactly 2*last - second_to_last,
        // so a two-point extrapolator is a perfect oracle.
        let start = DayIndex::from_date(chrono::NaiveDate::from_ymd_opt(2013, 1, 1).unwrap());
        let n = (DayIndex(-1).0 - start.0 + 1) as usize;
        let hist = DailyGduSeries::new(
            SiteId(0),
            start,
            (0..n).map(|d| 100.0 + 0.01 * d as f64).collect(),
        )
        .unwrap();
        let report = cv_with_predictor(&hist, 2, |_| {
            Ok(Box::new(|w: &[f64]| 2.0 * w[1] - w[0]))
        })
        .unwrap();
        assert!(report.rmse < 1e-9, "rmse {}", report.rmse);
        assert_eq!(report.folds.len(), 5);
        for f in &report.folds {
            assert!(f.rmse < 1e-9);
            assert!((f.r2 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn model_json_round_trips_and_rejects_bad_versions() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cfg = TrainConfig {
            window: 6,
            hidden: 4,
            dense: 3,
            ..TrainConfig::default()
        };
        let model = init_model(&cfg, 10.0, 2.0, &mut rng);
        let mut buf = Vec::new();
        save_model(&model, &mut buf).unwrap();
        let loaded = load_model(buf.as_slice()).unwrap();
        assert_eq!(model, loaded);

        let mut buf2 = Vec::new();
        save_model(&model, &mut buf2).unwrap();
        assert_eq!(buf, buf2, "serialization is byte-stable");

        let tampered = String::from_utf8(buf).unwrap().replace(
            "\"version\": 1",
            "\"version\": 9",
        );
        let err = load_model(tampered.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::ModelFormat(_)), "{err}");
    }

    #[test]
    fn normalization_round_trips() {
        let values = vec![3.5, 0.0, 19.25, 7.125, 4.0];
        let (mean, scale) = zscore(&values);
        for v in values {
            let back = ((v - mean) / scale) * scale + mean;
            assert!((back - v).abs() < 1e-12);
        }
        let (mean, scale) = zscore(&[4.0, 4.0, 4.0]);
        assert_eq!((mean, scale), (4.0, 1.0), "constant series keeps scale 1");
    }
}
