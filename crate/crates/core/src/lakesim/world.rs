//! Hidden "true" lake behaviour for synthetic experiments: per-lake
//! parameters that vary with depth, and noisy observations drawn from the
//! resulting temperatures.

use chrono::Datelike;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{simulate, DriverSeries, LakeAttributes, Observation, ObservationSet, SimParams, TemperatureField};
use crate::error::{MtlError, Result};
use crate::seed::rng_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TruthConfig {
    /// depth (m) mapped to the low end of the parameter trends
    pub shallow_depth: f64,
    /// depth (m) mapped to the high end of the parameter trends
    pub deep_depth: f64,
    /// parameter = base + slope * depth_position + N(0, sd)
    pub sw: (f64, f64, f64),
    pub momentum: (f64, f64, f64),
    pub deep_mix: (f64, f64, f64),
    /// log-normal spread of true clarity around the catalogued value
    pub clarity_log_sd: f64,
    /// place depths linearly rather than logarithmically between the anchors
    pub linear_depth: bool,
}

impl Default for TruthConfig {
    fn default() -> Self {
        TruthConfig {
            shallow_depth: 2.0,
            deep_depth: 40.0,
            sw: (0.85, 0.3, 0.05),
            momentum: (0.7, 0.6, 0.08),
            deep_mix: (0.2, 0.6, 0.05),
            clarity_log_sd: 0.15,
            linear_depth: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObservationDesign {
    /// first and last day of year eligible for sampling
    pub season: (u32, u32),
    /// days between sampling visits
    pub interval_days: usize,
    /// spacing of measured depths (m), starting at the surface
    pub depth_step: f64,
    /// measurement noise standard deviation (degC)
    pub noise_sd: f64,
}

impl Default for ObservationDesign {
    fn default() -> Self {
        ObservationDesign { season: (91, 334), interval_days: 4, depth_step: 1.0, noise_sd: 0.25 }
    }
}

/// The unobservable behaviour of one synthetic lake.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LakeTruth {
    pub params: SimParams,
    pub clarity: f64,
}

/// Position of a depth between the shallow and deep anchors, on a log scale
/// unless `linear_depth` is set.
fn depth_position(max_depth: f64, config: &TruthConfig) -> f64 {
    if config.linear_depth {
        return ((max_depth - config.shallow_depth) / (config.deep_depth - config.shallow_depth)).clamp(0.0, 1.0);
    }
    let span = config.deep_depth.ln() - config.shallow_depth.ln();
    ((max_depth.ln() - config.shallow_depth.ln()) / span).clamp(0.0, 1.0)
}

/// Draw the hidden parameters of `lake`; deterministic per (seed, lake id).
pub fn lake_truth(lake: &LakeAttributes, seed: u64, config: &TruthConfig) -> LakeTruth {
    let mut rng = rng_for(seed, "truth", lake.lake_id.as_str());
    let pos = depth_position(lake.max_depth, config);
    let mut draw = |(base, slope, sd): (f64, f64, f64)| {
        let z: f64 = Normal::new(0.0, sd.max(0.0)).expect("finite sd").sample(&mut rng);
        base + slope * pos + z
    };
    let sw = draw(config.sw).max(0.3);
    let momentum = draw(config.momentum).max(0.2);
    let deep_mix = draw(config.deep_mix).clamp(0.0, 1.0);
    let z: f64 = Normal::new(0.0, config.clarity_log_sd.max(0.0)).expect("finite sd").sample(&mut rng);
    LakeTruth { params: SimParams::new(sw, momentum, deep_mix), clarity: lake.clarity * z.exp() }
}

/// Temperatures produced by the hidden parameters.
pub fn true_field(lake: &LakeAttributes, drivers: &DriverSeries, truth: &LakeTruth) -> Result<TemperatureField> {
    let mut hidden = lake.clone();
    hidden.clarity = truth.clarity;
    simulate(&hidden, drivers, &truth.params)
}

/// Noisy profiles sampled from `field` on a regular schedule.
pub fn sample_observations(
    field: &TemperatureField,
    lake: &LakeAttributes,
    seed: u64,
    design: &ObservationDesign,
) -> Result<ObservationSet> {
    if design.interval_days == 0 || !(design.depth_step > 0.0) {
        return Err(MtlError::Config("observation interval and depth step must be positive".into()));
    }
    let mut rng = rng_for(seed, "observations", lake.lake_id.as_str());
    let noise = Normal::new(0.0, design.noise_sd.max(0.0)).map_err(|e| MtlError::Config(e.to_string()))?;
    let offset = rng.random_range(0..design.interval_days);
    let mut records = Vec::new();
    let (first, last) = design.season;
    let mut next_visit = 0usize;
    for day in 0..field.n_dates() {
        let date = field.date(day);
        let doy = date.ordinal();
        if doy < first || doy > last {
            continue;
        }
        if day < next_visit || (day + offset) % design.interval_days != 0 {
            continue;
        }
        next_visit = day + 1;
        let mut depth = 0.0;
        while depth <= lake.max_depth + 1e-9 {
            if let Some(k) = field.nearest_depth(depth, 1e-9) {
                records.push(Observation { date, depth, temp: field.get(k, day) + noise.sample(&mut rng) });
            }
            depth += design.depth_step;
        }
    }
    ObservationSet::new(records)
}
