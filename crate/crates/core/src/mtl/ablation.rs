//! Effect of the physics penalty: models fine-tuned with and without it,
//! compared on dates held out from training.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::matrix::LakeEntry;
use crate::error::{MtlError, Result};
use crate::seed::derive_seed;
use crate::sourcemodel::{count_inversions, predict, pretrain, train, FeatureNormalizer, PgdlConfig, PgdlModel, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyRow {
    pub lake_id: String,
    pub lambda: f64,
    /// inverted adjacent-depth pairs summed over held-out days
    pub inversions: usize,
    pub heldout_rmse: f64,
}

/// For each lake: pretrain once, fine-tune a copy per `lambdas` entry on the
/// later profiles, and score the held-out leading `test_fraction` of the
/// record. Rows are ordered by lake id, then by `lambdas` order.
pub fn penalty_ablation(
    lakes: &[LakeEntry],
    normalizer: &FeatureNormalizer,
    config: &PgdlConfig,
    lambdas: &[f64],
    test_fraction: f64,
    seed: u64,
) -> Result<Vec<PenaltyRow>> {
    let mut order: Vec<&LakeEntry> = lakes.iter().collect();
    order.sort_by(|a, b| a.id().cmp(b.id()));
    let per_lake = order
        .par_iter()
        .map(|lake| {
            let b = &lake.bundle;
            let id = lake.id();
            let pb0 = b.pb0_field.as_ref().ok_or_else(|| MtlError::IncompleteBundle(id.to_string()))?;
            let dates = b.observations.profile_dates();
            let n_test = ((dates.len() as f64) * test_fraction).ceil() as usize;
            if n_test == 0 || n_test >= dates.len() {
                return Err(MtlError::NoData(format!("lake {id} has too few profiles to split")));
            }
            let cutoff = dates[n_test - 1];
            let train_obs = b.observations.filter_dates(|d| d > cutoff);
            let test_obs = b.observations.filter_dates(|d| d <= cutoff);
            let held_days: Vec<usize> = (0..b.drivers.len()).filter(|&t| b.drivers.date(t) <= cutoff).collect();
            let mut base = PgdlModel::initialize(
                normalizer.clone(),
                config.hidden,
                derive_seed(seed, "ablation-init", id),
                config.pretrain.seq_len,
                pb0,
            );
            let pre = TrainConfig { seed: derive_seed(seed, "ablation-pretrain", id), ..config.pretrain.clone() };
            pretrain(&mut base, &b.attributes, &b.drivers, pb0, &pre)?;
            let grid = b.attributes.depth_grid();
            lambdas
                .iter()
                .map(|&lambda| {
                    let mut m = base.clone();
                    let fine = TrainConfig {
                        physics_lambda: lambda,
                        seed: derive_seed(seed, "ablation-finetune", id),
                        ..config.finetune.clone()
                    };
                    train(&mut m, &b.attributes, &b.drivers, &train_obs, &fine)?;
                    let field = predict(&m, &b.attributes, &b.drivers, &grid)?;
                    Ok(PenaltyRow {
                        lake_id: id.to_string(),
                        lambda,
                        inversions: count_inversions(&field, held_days.iter().copied()),
                        heldout_rmse: super::metrics::rmse(&field, &test_obs)?,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_lake.into_iter().flatten().collect())
}
