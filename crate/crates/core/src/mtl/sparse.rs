//! Experiment 2: PGDL models trained on a lake's own sparse observations.

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::evaluate::EvalPoints;
use super::matrix::LakeEntry;
use super::metrics::{median, Quartiles};
use crate::error::{MtlError, Result};
use crate::sourcemodel::{pretrain, predict, train, FeatureNormalizer, PgdlConfig, PgdlModel, TrainConfig};
use crate::seed::{derive_seed, rng_for};

/// Profile counts used as sparsification treatments.
pub const PROFILE_COUNTS: [usize; 12] = [1, 2, 5, 10, 15, 20, 25, 30, 35, 40, 45, 50];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Exp2Config {
    pub profile_counts: Vec<usize>,
    /// models trained per lake and treatment
    pub draws: usize,
    /// leading share of profile dates held out for testing
    pub test_fraction: f64,
    pub pgdl: PgdlConfig,
    pub seed: u64,
}

impl Default for Exp2Config {
    fn default() -> Self {
        Exp2Config {
            profile_counts: PROFILE_COUNTS.to_vec(),
            draws: 5,
            test_fraction: 1.0 / 3.0,
            pgdl: PgdlConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp2Draw {
    pub lake_id: String,
    pub profiles: usize,
    pub draw: usize,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp2LakeMedian {
    pub lake_id: String,
    pub profiles: usize,
    pub median_rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp2Treatment {
    pub profiles: usize,
    pub rmse: Option<Quartiles>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp2Report {
    pub draws: Vec<Exp2Draw>,
    pub lake_medians: Vec<Exp2LakeMedian>,
    pub treatments: Vec<Exp2Treatment>,
    /// (lake, treatment) combinations skipped for lack of profiles
    pub excluded: Vec<(String, usize)>,
    /// ids of the lakes evaluated
    pub lakes: Vec<String>,
}

struct Prepared<'a> {
    lake: &'a LakeEntry,
    test: EvalPoints,
    pool: Vec<chrono::NaiveDate>,
    pretrained: PgdlModel,
}

fn prepare<'a>(lake: &'a LakeEntry, normalizer: &FeatureNormalizer, cfg: &Exp2Config) -> Result<Prepared<'a>> {
    let points = lake.points()?;
    let dates = lake.bundle.observations.profile_dates();
    let n_test = ((dates.len() as f64) * cfg.test_fraction).ceil() as usize;
    if n_test == 0 || n_test >= dates.len() {
        return Err(MtlError::NoData(format!("lake {} has too few profiles to split", lake.id())));
    }
    let cutoff = dates[n_test - 1];
    let (test, _) = points.filter_dates(|d| d <= cutoff);
    let pool = dates[n_test..].to_vec();
    let pb0 = lake
        .bundle
        .pb0_field
        .as_ref()
        .ok_or_else(|| MtlError::IncompleteBundle(format!("lake {} has no PB0 field", lake.id())))?;
    let id = lake.id();
    let mut model = PgdlModel::initialize(
        normalizer.clone(),
        cfg.pgdl.hidden,
        derive_seed(cfg.seed, "exp2-init", id),
        cfg.pgdl.pretrain.seq_len,
        pb0,
    );
    let pre = TrainConfig { seed: derive_seed(cfg.seed, "exp2-pretrain", id), ..cfg.pgdl.pretrain.clone() };
    pretrain(&mut model, &lake.bundle.attributes, &lake.bundle.drivers, pb0, &pre)?;
    Ok(Prepared { lake, test, pool, pretrained: model })
}

fn run_draw(p: &Prepared<'_>, profiles: usize, draw: usize, cfg: &Exp2Config) -> Result<f64> {
    let id = p.lake.id();
    let key = format!("{id}/{profiles}/{draw}");
    let mut rng = rng_for(cfg.seed, "exp2-dates", &key);
    let mut chosen: Vec<chrono::NaiveDate> = sample(&mut rng, p.pool.len(), profiles).into_iter().map(|i| p.pool[i]).collect();
    chosen.sort_unstable();
    let obs = p.lake.bundle.observations.filter_dates(|d| chosen.binary_search(&d).is_ok());
    let mut model = p.pretrained.clone();
    let fine = TrainConfig { seed: derive_seed(cfg.seed, "exp2-finetune", &key), ..cfg.pgdl.finetune.clone() };
    let b = &p.lake.bundle;
    train(&mut model, &b.attributes, &b.drivers, &obs, &fine)?;
    let field = predict(&model, &b.attributes, &b.drivers, &p.test.depths)?;
    Ok(p.test.rmse(&p.test.sample(&field)?))
}

/// Train `draws` models per lake and profile count on randomly chosen
/// sampling dates after the test period, and score them on the test period.
pub fn experiment2(lakes: &[LakeEntry], normalizer: &FeatureNormalizer, cfg: &Exp2Config) -> Result<Exp2Report> {
    if cfg.draws == 0 || cfg.profile_counts.is_empty() {
        return Err(MtlError::Config("experiment 2 needs at least one treatment and one draw".into()));
    }
    let mut order: Vec<&LakeEntry> = lakes.iter().collect();
    order.sort_by(|a, b| a.id().cmp(b.id()));
    let prepared = order.par_iter().map(|l| prepare(l, normalizer, cfg)).collect::<Result<Vec<_>>>()?;
    let mut units = Vec::new();
    let mut excluded = Vec::new();
    for (li, p) in prepared.iter().enumerate() {
        for &n in &cfg.profile_counts {
            if p.pool.len() < n {
                log::info!("lake {} has {} training profiles; skipping the {n}-profile treatment", p.lake.id(), p.pool.len());
                excluded.push((p.lake.id().to_string(), n));
                continue;
            }
            for d in 0..cfg.draws {
                units.push((li, n, d));
            }
        }
    }
    let scores = units
        .par_iter()
        .map(|&(li, n, d)| run_draw(&prepared[li], n, d, cfg))
        .collect::<Result<Vec<_>>>()?;
    let draws: Vec<Exp2Draw> = units
        .iter()
        .zip(&scores)
        .map(|(&(li, n, d), &rmse)| Exp2Draw { lake_id: prepared[li].lake.id().to_string(), profiles: n, draw: d, rmse })
        .collect();
    let mut lake_medians = Vec::new();
    for p in &prepared {
        for &n in &cfg.profile_counts {
            let v: Vec<f64> = draws.iter().filter(|d| d.lake_id == p.lake.id() && d.profiles == n).map(|d| d.rmse).collect();
            if let Some(m) = median(&v) {
                lake_medians.push(Exp2LakeMedian { lake_id: p.lake.id().to_string(), profiles: n, median_rmse: m });
            }
        }
    }
    let treatments = cfg
        .profile_counts
        .iter()
        .map(|&n| {
            let v: Vec<f64> = lake_medians.iter().filter(|m| m.profiles == n).map(|m| m.median_rmse).collect();
            Exp2Treatment { profiles: n, rmse: Quartiles::of(&v) }
        })
        .collect();
    Ok(Exp2Report {
        draws,
        lake_medians,
        treatments,
        excluded,
        lakes: prepared.iter().map(|p| p.lake.id().to_string()).collect(),
    })
}

impl Exp2Report {
    pub fn median_at(&self, profiles: usize) -> Option<f64> {
        self.treatments.iter().find(|t| t.profiles == profiles).and_then(|t| t.rmse.map(|q| q.median))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn treatment_grid() {
        assert_eq!(PROFILE_COUNTS, [1, 2, 5, 10, 15, 20, 25, 30, 35, 40, 45, 50]);
        let c = Exp2Config::default();
        assert_eq!(c.draws, 5);
        assert!((c.test_fraction - 1.0 / 3.0).abs() < 1e-15);
    }
}
