//! In-memory construction of the synthetic world and the source models.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::error::Result;
use crate::lakesim::{
    calibrate_with, lake_truth, sample_observations, simulate, synth_drivers_with, synth_population, true_field,
    LakeAttributes, ObservationDesign, PopulationConfig, SimParams,
};
use crate::metafeatures::LakeBundle;
use crate::mtl::{LakeEntry, SourceLake};
use crate::seed::derive_seed;
use crate::sourcemodel::{fit_normalizer, fit_pgdl, FeatureNormalizer, SourceModel};

/// Which population a synthetic lake belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Source,
    Target,
    Expand,
}

impl Role {
    pub fn prefix(self) -> &'static str {
        match self {
            Role::Source => "src",
            Role::Target => "tgt",
            Role::Expand => "exp",
        }
    }
}

/// Lakes, drivers and observations of one synthetic population, without
/// PB0 fields.
pub fn synth_bundles(cfg: &RunConfig, role: Role, n: usize) -> Result<Vec<LakeBundle>> {
    let pop_cfg = PopulationConfig { id_prefix: role.prefix().into(), ..cfg.world.population.clone() };
    let lakes = synth_population(n, cfg.seed, &pop_cfg)?;
    let design: &ObservationDesign = match role {
        Role::Source => &cfg.world.source_observations,
        Role::Target | Role::Expand => &cfg.world.target_observations,
    };
    lakes
        .into_par_iter()
        .map(|lake| {
            let drivers = synth_drivers_with(&lake, cfg.n_days(), cfg.seed, &cfg.world.drivers)?;
            let truth = lake_truth(&lake, cfg.seed, &cfg.world.truth);
            let field = true_field(&lake, &drivers, &truth)?;
            let observations = sample_observations(&field, &lake, cfg.seed, design)?;
            Ok(LakeBundle { attributes: lake, drivers, pb0_field: None, observations })
        })
        .collect()
}

/// Fill in each bundle's PB0 field.
pub fn attach_pb0(bundles: &mut [LakeBundle]) -> Result<()> {
    bundles.par_iter_mut().try_for_each(|b| {
        b.pb0_field = Some(simulate(&b.attributes, &b.drivers, &SimParams::default())?);
        Ok(())
    })
}

/// Per-lake outcome of source training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceFit {
    pub lake_id: String,
    pub pb0_rmse: f64,
    pub pb_rmse: f64,
    pub params: SimParams,
    pub pgdl_pretrain_mse: f64,
    pub pgdl_finetune_mse: f64,
}

/// Normalizer fitted across all source lakes.
pub fn source_normalizer(bundles: &[LakeBundle]) -> Result<FeatureNormalizer> {
    let pairs: Vec<(&LakeAttributes, &crate::lakesim::DriverSeries)> =
        bundles.iter().map(|b| (&b.attributes, &b.drivers)).collect();
    fit_normalizer(&pairs)
}

/// Calibrate PB and train PGDL for every source bundle (PB0 fields must be
/// attached). Output follows the input order.
pub fn train_sources(
    bundles: &[LakeBundle],
    normalizer: &FeatureNormalizer,
    cfg: &RunConfig,
) -> Result<Vec<(SourceLake, SourceFit)>> {
    bundles
        .par_iter()
        .map(|b| {
            let pb0 = b.pb0_field.as_ref().ok_or_else(|| {
                crate::error::MtlError::IncompleteBundle(b.attributes.lake_id.to_string())
            })?;
            let cal = calibrate_with(&b.attributes, &b.drivers, &b.observations, &cfg.calibration)?;
            let (model, fit) = fit_pgdl(&b.attributes, &b.drivers, &b.observations, pb0, normalizer, &cfg.pgdl, cfg.seed)?;
            let summary = SourceFit {
                lake_id: b.attributes.lake_id.to_string(),
                pb0_rmse: cal.pb0_rmse,
                pb_rmse: cal.rmse,
                params: cal.params,
                pgdl_pretrain_mse: fit.pretrain.final_mse(),
                pgdl_finetune_mse: fit.finetune.final_mse(),
            };
            let source = SourceLake {
                entry: LakeEntry::new(b.clone())?,
                pb: Some(SourceModel::Pb { params: cal.params }),
                pgdl: Some(SourceModel::Pgdl { model: Box::new(model) }),
            };
            Ok((source, summary))
        })
        .collect()
}

/// Stable sub-seed for a pipeline stage.
pub fn stage_seed(cfg: &RunConfig, stage: &str) -> u64 {
    derive_seed(cfg.seed, "stage", stage)
}

/// Lakes with observations; targets without any are dropped from evaluation.
pub fn observed(bundles: Vec<LakeBundle>) -> Vec<LakeBundle> {
    bundles.into_iter().filter(|b| !b.observations.is_empty()).collect()
}

