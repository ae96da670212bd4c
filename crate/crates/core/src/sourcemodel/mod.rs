//! Recurrent source models (PGDL) and the common interface shared with
//! calibrated process-based sources.

mod lstm;
mod normalizer;
mod train;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use lstm::{SequenceRegressor, Tape};
pub use normalizer::{fit_normalizer, FeatureNormalizer, N_DRIVERS, N_INPUTS, SD_FLOOR};
pub use train::{
    count_inversions, physics_penalty, predict, pretrain, sequence_windows, train, window_objective, Objective,
    Optimizer, TrainConfig, TrainReport, WindowProblem,
};

use crate::error::{MtlError, Result};
use crate::lakesim::{simulate, DriverSeries, LakeAttributes, ObservationSet, SimParams, TemperatureField};

/// Recurrent model plus the input scaling it was trained with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgdlModel {
    pub regressor: SequenceRegressor,
    pub normalizer: FeatureNormalizer,
    /// inference window length in days
    pub seq_len: usize,
}

impl PgdlModel {
    /// Fresh network whose output starts at the mean PB0 temperature.
    pub fn initialize(normalizer: FeatureNormalizer, hidden: usize, seed: u64, seq_len: usize, pb0: &TemperatureField) -> Self {
        let mut regressor = SequenceRegressor::new(hidden, seed);
        let t = pb0.temps();
        if !t.is_empty() {
            regressor.set_output_bias(t.iter().sum::<f64>() / t.len() as f64);
        }
        PgdlModel::new(regressor, normalizer, seq_len)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let model: PgdlModel = serde_json::from_str(&text)?;
        if model.regressor.params().len() != SequenceRegressor::param_count_for(model.regressor.hidden()) {
            return Err(MtlError::Shape {
                expected: SequenceRegressor::param_count_for(model.regressor.hidden()),
                got: model.regressor.params().len(),
            });
        }
        Ok(model)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PgdlConfig {
    pub hidden: usize,
    pub pretrain: TrainConfig,
    pub finetune: TrainConfig,
}

impl Default for PgdlConfig {
    fn default() -> Self {
        PgdlConfig {
            hidden: 16,
            pretrain: TrainConfig { epochs: 30, physics_lambda: 0.0, ..TrainConfig::default() },
            finetune: TrainConfig { epochs: 30, ..TrainConfig::default() },
        }
    }
}

/// Reports from both training phases.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PgdlFit {
    pub pretrain: TrainReport,
    pub finetune: TrainReport,
}

/// Pretrain on `pb0` then fine-tune on `obs`.
pub fn fit_pgdl(
    lake: &LakeAttributes,
    drivers: &DriverSeries,
    obs: &ObservationSet,
    pb0: &TemperatureField,
    normalizer: &FeatureNormalizer,
    config: &PgdlConfig,
    seed: u64,
) -> Result<(PgdlModel, PgdlFit)> {
    let init_seed = crate::seed::derive_seed(seed, "pgdl-init", lake.lake_id.as_str());
    let mut model = PgdlModel::initialize(normalizer.clone(), config.hidden, init_seed, config.pretrain.seq_len, pb0);
    let pre_cfg = TrainConfig { seed: crate::seed::derive_seed(seed, "pgdl-pretrain", lake.lake_id.as_str()), ..config.pretrain.clone() };
    let pretrain_report = pretrain(&mut model, lake, drivers, pb0, &pre_cfg)?;
    let fine_cfg = TrainConfig { seed: crate::seed::derive_seed(seed, "pgdl-finetune", lake.lake_id.as_str()), ..config.finetune.clone() };
    let finetune_report = train(&mut model, lake, drivers, obs, &fine_cfg)?;
    Ok((model, PgdlFit { pretrain: pretrain_report, finetune: finetune_report }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Pb,
    Pgdl,
}

impl SourceKind {
    pub fn label(self) -> &'static str {
        match self {
            SourceKind::Pb => "PB",
            SourceKind::Pgdl => "PGDL",
        }
    }
}

impl std::str::FromStr for SourceKind {
    type Err = MtlError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pb" => Ok(SourceKind::Pb),
            "pgdl" => Ok(SourceKind::Pgdl),
            other => Err(MtlError::Parse(format!("unknown source kind {other:?}"))),
        }
    }
}

/// A trained source model of either kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SourceModel {
    Pb { params: SimParams },
    Pgdl { model: Box<PgdlModel> },
}

impl SourceModel {
    pub fn kind(&self) -> SourceKind {
        match self {
            SourceModel::Pb { .. } => SourceKind::Pb,
            SourceModel::Pgdl { .. } => SourceKind::Pgdl,
        }
    }
}

/// Run a source model on a target lake's geometry and drivers. The output
/// covers the target's depth grid, or `depths` when given.
pub fn transfer_apply(
    source: &SourceModel,
    target: &LakeAttributes,
    drivers: &DriverSeries,
    depths: Option<&[f64]>,
) -> Result<TemperatureField> {
    match source {
        SourceModel::Pb { params } => {
            let field = simulate(target, drivers, params)?;
            match depths {
                None => Ok(field),
                Some(ds) => {
                    let idx = ds
                        .iter()
                        .map(|d| {
                            field.nearest_depth(*d, 1e-9).ok_or_else(|| MtlError::DepthOutOfRange {
                                lake_id: target.lake_id.to_string(),
                                depth: *d,
                                max_depth: target.max_depth,
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Ok(field.select_depths(&idx))
                }
            }
        }
        SourceModel::Pgdl { model } => {
            let grid;
            let ds = match depths {
                Some(ds) => ds,
                None => {
                    grid = target.depth_grid();
                    &grid
                }
            };
            predict(model, target, drivers, ds)
        }
    }
}
