//! Pretraining on PB0 output and fine-tuning on observations with a
//! density-inversion penalty.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::lstm::SequenceRegressor;
use super::normalizer::{FeatureNormalizer, N_DRIVERS};
use super::PgdlModel;
use crate::error::{MtlError, Result};
use crate::lakesim::{
    water_density_derivative, water_density_unchecked, DriverSeries, LakeAttributes, ObservationSet,
    TemperatureField,
};
use crate::mtl::DEPTH_MATCH_TOLERANCE;
use crate::seed::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    /// plain gradient descent
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// weight of the density-inversion penalty (fine-tuning only)
    pub physics_lambda: f64,
    /// days per training window; windows overlap by half
    pub seq_len: usize,
    /// visit windows in a seeded random order each epoch
    pub shuffle_windows: bool,
    pub clip_norm: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            epochs: 30,
            physics_lambda: 1.0,
            seq_len: 200,
            shuffle_windows: true,
            clip_norm: 1.0,
            optimizer: Optimizer::Adam,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(MtlError::Config("learning rate must be positive".into()));
        }
        if self.seq_len < 2 {
            return Err(MtlError::Config("sequence length must be at least 2".into()));
        }
        if !(self.physics_lambda >= 0.0) {
            return Err(MtlError::Config("physics penalty weight must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// data MSE over all windows before the first update
    pub initial_mse: f64,
    /// mean data MSE seen during each epoch
    pub epoch_mse: Vec<f64>,
    /// mean penalty seen during each epoch
    pub epoch_penalty: Vec<f64>,
}

impl TrainReport {
    pub fn final_mse(&self) -> f64 {
        self.epoch_mse.last().copied().unwrap_or(self.initial_mse)
    }
}

/// Half-overlapping `[start, end)` windows covering `n_days`.
pub fn sequence_windows(n_days: usize, seq_len: usize) -> Vec<(usize, usize)> {
    if n_days <= seq_len {
        return vec![(0, n_days)];
    }
    let stride = (seq_len / 2).max(1);
    let mut out = Vec::new();
    let mut s = 0;
    while s + seq_len <= n_days {
        out.push((s, s + seq_len));
        s += stride;
    }
    if out.last().is_some_and(|w| w.1 < n_days) {
        out.push((n_days - seq_len, n_days));
    }
    out
}

/// Mean over (date, adjacent depth pair) of `max(0, rho(upper) - rho(lower))`.
/// `temps` is depth-major with `n_steps` columns; depths ascend.
pub fn physics_penalty(temps: &[f64], n_depths: usize, n_steps: usize) -> f64 {
    penalty_and_grad(temps, n_depths, n_steps, None)
}

fn penalty_and_grad(temps: &[f64], n_depths: usize, n_steps: usize, mut grad: Option<(&mut [f64], f64)>) -> f64 {
    if n_depths < 2 || n_steps == 0 {
        return 0.0;
    }
    let count = (n_steps * (n_depths - 1)) as f64;
    let mut total = 0.0;
    for d in 0..n_depths - 1 {
        for t in 0..n_steps {
            let up = temps[d * n_steps + t];
            let down = temps[(d + 1) * n_steps + t];
            let diff = water_density_unchecked(up) - water_density_unchecked(down);
            if diff > 0.0 {
                total += diff;
                if let Some((g, scale)) = grad.as_mut() {
                    g[d * n_steps + t] += *scale * water_density_derivative(up) / count;
                    g[(d + 1) * n_steps + t] -= *scale * water_density_derivative(down) / count;
                }
            }
        }
    }
    total / count
}

/// Adjacent depth pairs whose upper density exceeds the lower one.
pub fn count_inversions(field: &TemperatureField, days: impl IntoIterator<Item = usize>) -> usize {
    let mut n = 0;
    for t in days {
        for d in 0..field.n_depths().saturating_sub(1) {
            if water_density_unchecked(field.get(d, t)) > water_density_unchecked(field.get(d + 1, t)) + 1e-9 {
                n += 1;
            }
        }
    }
    n
}

/// One window's training problem.
pub struct WindowProblem<'a> {
    pub drivers: &'a [[f64; N_DRIVERS]],
    /// normalized depths, ascending
    pub depths: &'a [f64],
    /// `(depth index, step, target)`
    pub targets: &'a [(usize, usize, f64)],
    pub physics_lambda: f64,
}

pub struct Objective {
    pub loss: f64,
    pub mse: f64,
    pub penalty: f64,
    pub grad: Vec<f64>,
}

/// Data MSE plus weighted physics penalty, with its gradient.
pub fn window_objective(model: &SequenceRegressor, p: &WindowProblem<'_>) -> Objective {
    let tape = model.forward_tape(p.drivers, p.depths);
    let n_steps = p.drivers.len();
    let mut d_out = vec![0.0; tape.outputs.len()];
    let mut mse = 0.0;
    if !p.targets.is_empty() {
        let n = p.targets.len() as f64;
        for &(d, t, v) in p.targets {
            let e = tape.outputs[d * n_steps + t] - v;
            mse += e * e;
            d_out[d * n_steps + t] += 2.0 * e / n;
        }
        mse /= n;
    }
    let penalty = if p.physics_lambda > 0.0 {
        penalty_and_grad(&tape.outputs, p.depths.len(), n_steps, Some((&mut d_out, p.physics_lambda)))
    } else {
        0.0
    };
    let grad = model.backward(p.drivers, p.depths, &tape, &d_out);
    Objective {
        loss: mse + p.physics_lambda * penalty,
        mse,
        penalty,
        grad,
    }
}

struct OptimizerState {
    kind: Optimizer,
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl OptimizerState {
    fn new(kind: Optimizer, lr: f64, n: usize) -> Self {
        OptimizerState { kind, lr, m: vec![0.0; n], v: vec![0.0; n], step: 0 }
    }

    fn apply(&mut self, params: &mut [f64], grad: &[f64]) {
        match self.kind {
            Optimizer::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= self.lr * g;
                }
            }
            Optimizer::Adam => {
                const B1: f64 = 0.9;
                const B2: f64 = 0.999;
                self.step += 1;
                let c1 = 1.0 - B1.powi(self.step);
                let c2 = 1.0 - B2.powi(self.step);
                for i in 0..params.len() {
                    self.m[i] = B1 * self.m[i] + (1.0 - B1) * grad[i];
                    self.v[i] = B2 * self.v[i] + (1.0 - B2) * grad[i] * grad[i];
                    params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + 1e-8);
                }
            }
        }
    }
}

fn clip(grad: &mut [f64], max_norm: f64) {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if max_norm > 0.0 && norm > max_norm {
        let s = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
}

struct Prepared {
    drivers: Vec<[f64; N_DRIVERS]>,
    depths: Vec<f64>,
    windows: Vec<(usize, usize)>,
    targets: Vec<Vec<(usize, usize, f64)>>,
}

fn fit(model: &mut SequenceRegressor, prep: &Prepared, lambda: f64, config: &TrainConfig) -> Result<TrainReport> {
    let problem = |w: usize| {
        let (s, e) = prep.windows[w];
        WindowProblem {
            drivers: &prep.drivers[s..e],
            depths: &prep.depths,
            targets: &prep.targets[w],
            physics_lambda: lambda,
        }
    };
    // unlabeled windows only matter through the physics term
    let active: Vec<usize> =
        (0..prep.windows.len()).filter(|&w| lambda > 0.0 || !prep.targets[w].is_empty()).collect();
    let mut report = TrainReport::default();
    if config.epochs == 0 || active.iter().all(|&w| prep.targets[w].is_empty()) {
        return Ok(report);
    }
    let weight = |w: usize| prep.targets[w].len() as f64;
    let total_targets: f64 = active.iter().map(|&w| weight(w)).sum::<f64>().max(1.0);
    report.initial_mse = active
        .iter()
        .map(|&w| {
            let p = problem(w);
            let out = model.forward(p.drivers, p.depths);
            let n_steps = p.drivers.len();
            p.targets.iter().map(|&(d, t, v)| (out[d * n_steps + t] - v).powi(2)).sum::<f64>()
        })
        .sum::<f64>()
        / total_targets;

    let mut opt = OptimizerState::new(config.optimizer, config.learning_rate, model.param_count());
    let mut order = active.clone();
    for epoch in 0..config.epochs {
        if config.shuffle_windows {
            order.shuffle(&mut rng_for(config.seed, "window-order", &epoch.to_string()));
        }
        let (mut mse_sum, mut pen_sum) = (0.0, 0.0);
        for &w in &order {
            let mut obj = window_objective(model, &problem(w));
            if !obj.loss.is_finite() || obj.grad.iter().any(|g| !g.is_finite()) {
                return Err(MtlError::TrainingDiverged { epoch });
            }
            mse_sum += obj.mse * weight(w);
            pen_sum += obj.penalty;
            clip(&mut obj.grad, config.clip_norm);
            opt.apply(model.params_mut(), &obj.grad);
        }
        report.epoch_mse.push(mse_sum / total_targets);
        report.epoch_penalty.push(pen_sum / order.len() as f64);
    }
    Ok(report)
}

fn check_grid(lake: &LakeAttributes, field_depths: &[f64]) -> Result<()> {
    if let Some(d) = field_depths.iter().find(|d| **d > lake.max_depth + 1e-9) {
        return Err(MtlError::DepthOutOfRange {
            lake_id: lake.lake_id.to_string(),
            depth: *d,
            max_depth: lake.max_depth,
        });
    }
    Ok(())
}

/// Fit the model to PB0 temperatures at every grid depth and date.
pub fn pretrain(
    model: &mut PgdlModel,
    lake: &LakeAttributes,
    drivers: &DriverSeries,
    pb0: &TemperatureField,
    config: &TrainConfig,
) -> Result<TrainReport> {
    config.validate()?;
    check_grid(lake, pb0.depths())?;
    if pb0.start() != drivers.start || pb0.n_dates() < drivers.len() {
        return Err(MtlError::Data(format!("PB0 field does not cover the drivers of lake {}", lake.lake_id)));
    }
    let windows = sequence_windows(drivers.len(), config.seq_len);
    let n_depths = pb0.n_depths();
    let targets = windows
        .iter()
        .map(|&(s, e)| {
            let mut v = Vec::with_capacity(n_depths * (e - s));
            for d in 0..n_depths {
                for t in s..e {
                    v.push((d, t - s, pb0.get(d, t)));
                }
            }
            v
        })
        .collect();
    let prep = Prepared {
        drivers: model.normalizer.drivers(drivers),
        depths: model.normalizer.depths(pb0.depths()),
        windows,
        targets,
    };
    fit(&mut model.regressor, &prep, 0.0, config)
}

/// Fine-tune on observations. The penalty is evaluated on the full depth
/// grid for every day of each window that contains observations.
pub fn train(
    model: &mut PgdlModel,
    lake: &LakeAttributes,
    drivers: &DriverSeries,
    obs: &ObservationSet,
    config: &TrainConfig,
) -> Result<TrainReport> {
    config.validate()?;
    if obs.is_empty() {
        return Err(MtlError::NoData(format!("no observations to train lake {}", lake.lake_id)));
    }
    obs.validate_for(lake)?;
    let lambda = config.physics_lambda;
    let grid = lake.depth_grid();
    // depth rows fed to the network: the full grid when the penalty needs it,
    // otherwise only the observed grid depths
    let rows: Vec<usize> = if lambda > 0.0 {
        (0..grid.len()).collect()
    } else {
        let mut used: Vec<usize> = obs
            .records()
            .iter()
            .filter_map(|r| nearest(&grid, r.depth))
            .collect();
        used.sort_unstable();
        used.dedup();
        used
    };
    let row_of = |grid_idx: usize| rows.binary_search(&grid_idx).ok();
    let windows = sequence_windows(drivers.len(), config.seq_len);
    let mut targets = vec![Vec::new(); windows.len()];
    for r in obs.records() {
        let (Some(t), Some(k)) = (drivers.day_index(r.date), nearest(&grid, r.depth)) else { continue };
        let Some(row) = row_of(k) else { continue };
        // assign each observation to the window whose output covers it at inference
        let w = inference_window(&windows, t);
        targets[w].push((row, t - windows[w].0, r.temp));
    }
    if targets.iter().all(|t| t.is_empty()) {
        return Err(MtlError::NoOverlap);
    }
    let depths_m: Vec<f64> = rows.iter().map(|&k| grid[k]).collect();
    let prep = Prepared {
        drivers: model.normalizer.drivers(drivers),
        depths: model.normalizer.depths(&depths_m),
        windows,
        targets,
    };
    fit(&mut model.regressor, &prep, lambda, config)
}

fn nearest(grid: &[f64], depth: f64) -> Option<usize> {
    let k = (depth / crate::lakesim::GRID_SPACING).round();
    if k < 0.0 {
        return None;
    }
    let k = k as usize;
    (k < grid.len() && (grid[k] - depth).abs() <= DEPTH_MATCH_TOLERANCE).then_some(k)
}

/// The window whose prediction is used for day `t`.
fn inference_window(windows: &[(usize, usize)], t: usize) -> usize {
    let mut covered = 0;
    for (i, &(_, e)) in windows.iter().enumerate() {
        if t >= covered && t < e {
            return i;
        }
        covered = covered.max(e);
    }
    windows.len() - 1
}

/// Predict temperatures at `depths` for every driver date.
pub fn predict(model: &PgdlModel, lake: &LakeAttributes, drivers: &DriverSeries, depths: &[f64]) -> Result<TemperatureField> {
    check_grid(lake, depths)?;
    let x = model.normalizer.drivers(drivers);
    let dn = model.normalizer.depths(depths);
    let n_days = drivers.len();
    let mut temps = vec![0.0; depths.len() * n_days];
    let mut covered = 0;
    for (s, e) in sequence_windows(n_days, model.seq_len) {
        let out = model.regressor.forward(&x[s..e], &dn);
        let len = e - s;
        for d in 0..depths.len() {
            for t in covered.max(s)..e {
                temps[d * n_days + t] = out[d * len + (t - s)];
            }
        }
        covered = covered.max(e);
    }
    TemperatureField::new(depths.to_vec(), drivers.start, n_days, temps)
}

impl PgdlModel {
    pub fn new(regressor: SequenceRegressor, normalizer: FeatureNormalizer, seq_len: usize) -> Self {
        PgdlModel { regressor, normalizer, seq_len }
    }
}
