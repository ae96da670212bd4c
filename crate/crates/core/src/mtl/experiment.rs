//! Experiment 1 (transfer to unmonitored targets) and ensemble-size tuning.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::evaluate::{canonical_mean, transfer_points, EvalPoints};
use super::matrix::{LakeEntry, SourceLake, TransferMatrix};
use super::metamodel::{rank_sources, Metamodel, RankedSources};
use super::metrics::{median, spearman, Quartiles};
use crate::error::{MtlError, Result};
use crate::metafeatures::{FeatureCatalog, LakeProfile};
use crate::seed::rng_for;
use crate::sourcemodel::SourceKind;

/// Ensemble sizes searched by default.
pub const ENSEMBLE_SIZE_GRID: [usize; 9] = [2, 3, 4, 5, 6, 7, 8, 9, 10];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Exp1Config {
    pub ensemble_size: usize,
    /// ranks reported individually (1..=max_rank)
    pub max_rank: usize,
    pub random_draws: usize,
    pub seed: u64,
}

impl Default for Exp1Config {
    fn default() -> Self {
        Exp1Config { ensemble_size: 9, max_rank: 9, random_draws: 100, seed: 0 }
    }
}

/// One family's outcome on one target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyResult {
    pub top_source: String,
    /// realized rmse of the rank-1 source
    pub mtl_rmse: f64,
    /// realized rmse at predicted ranks 1..=max_rank
    pub rank_rmse: Vec<f64>,
    pub ensemble_rmse: f64,
    pub meta_rmse: f64,
    pub spearman: Option<f64>,
    /// median realized rmse over uniformly drawn sources
    pub random_median: f64,
    /// lowest realized rmse among all sources
    pub best_rmse: f64,
    pub mtl_deep_rmse: Option<f64>,
    pub ensemble_deep_rmse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    pub target_id: String,
    pub family: SourceKind,
    pub source_id: String,
    pub rank: usize,
    pub predicted_rmse: f64,
    pub realized_rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp1Row {
    pub target_id: String,
    pub max_depth: f64,
    pub n_obs: usize,
    pub pb0_rmse: f64,
    pub pb0_deep_rmse: Option<f64>,
    pub pb: Option<FamilyResult>,
    pub pgdl: Option<FamilyResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp1Report {
    pub ensemble_size: usize,
    pub rows: Vec<Exp1Row>,
    pub pairs: Vec<PairResult>,
}

fn family_result(
    family: SourceKind,
    metamodel: &Metamodel,
    target: &LakeEntry,
    points: &EvalPoints,
    sources: &[SourceLake],
    source_profiles: &[&LakeProfile],
    catalog: &FeatureCatalog,
    cfg: &Exp1Config,
) -> Result<(FamilyResult, Vec<PairResult>)> {
    let ranked = rank_sources(metamodel, &target.profile, source_profiles, catalog)?;
    let by_id = |id: &str| sources.iter().find(|s| s.id() == id).expect("ranked ids come from the sources");
    let preds = ranked
        .sources
        .iter()
        .map(|r| transfer_points(by_id(&r.source_id).model(family)?, &target.bundle, points))
        .collect::<Result<Vec<_>>>()?;
    let realized: Vec<f64> = preds.iter().map(|p| points.rmse(p)).collect();
    let predicted: Vec<f64> = ranked.sources.iter().map(|r| r.predicted_rmse).collect();
    let n_ens = cfg.ensemble_size.min(preds.len()).max(1);
    let members: Vec<&[f64]> = preds[..n_ens].iter().map(Vec::as_slice).collect();
    let ens = canonical_mean(&members)?;
    let meta_rmse = super::metrics::rmse_values(&predicted, &realized)?;
    let mut rng = rng_for(cfg.seed, "random-source", &format!("{}/{}", family.label(), target.id()));
    let draws: Vec<f64> = (0..cfg.random_draws.max(1)).map(|_| realized[rng.random_range(0..realized.len())]).collect();
    let result = FamilyResult {
        top_source: ranked.sources[0].source_id.clone(),
        mtl_rmse: realized[0],
        rank_rmse: realized.iter().take(cfg.max_rank).copied().collect(),
        ensemble_rmse: points.rmse(&ens),
        meta_rmse,
        spearman: spearman(&predicted, &realized).ok(),
        random_median: median(&draws).expect("non-empty draws"),
        best_rmse: realized.iter().copied().fold(f64::INFINITY, f64::min),
        mtl_deep_rmse: points.deep_rmse(&preds[0]),
        ensemble_deep_rmse: points.deep_rmse(&ens),
    };
    let pairs = ranked_pairs(&ranked, family, &realized);
    Ok((result, pairs))
}

fn ranked_pairs(ranked: &RankedSources, family: SourceKind, realized: &[f64]) -> Vec<PairResult> {
    let mut pairs: Vec<PairResult> = ranked
        .sources
        .iter()
        .zip(realized)
        .map(|(r, &realized_rmse)| PairResult {
            target_id: ranked.target_id.clone(),
            family,
            source_id: r.source_id.clone(),
            rank: r.rank,
            predicted_rmse: r.predicted_rmse,
            realized_rmse,
        })
        .collect();
    pairs.sort_by(|a, b| a.source_id.cmp(&b.source_id));
    pairs
}

/// Rank sources for every target with each available metamodel and score
/// the choices against the target's observations.
pub fn experiment1(
    sources: &[SourceLake],
    targets: &[LakeEntry],
    pb_meta: Option<&Metamodel>,
    pgdl_meta: Option<&Metamodel>,
    catalog: &FeatureCatalog,
    cfg: &Exp1Config,
) -> Result<Exp1Report> {
    if sources.len() < 2 {
        return Err(MtlError::IncompleteSources("experiment needs at least two sources".into()));
    }
    let profiles: Vec<&LakeProfile> = sources.iter().map(|s| &s.entry.profile).collect();
    let mut order: Vec<&LakeEntry> = targets.iter().collect();
    order.sort_by(|a, b| a.id().cmp(b.id()));
    let results = order
        .par_iter()
        .map(|t| {
            let points = t.points()?;
            let pb0 = t
                .bundle
                .pb0_field
                .as_ref()
                .ok_or_else(|| MtlError::IncompleteBundle(format!("lake {} has no PB0 field", t.id())))?;
            let pb0_pred = points.sample(pb0)?;
            let mut pairs = Vec::new();
            let mut run = |family, meta: Option<&Metamodel>| -> Result<Option<FamilyResult>> {
                let Some(m) = meta else { return Ok(None) };
                let (r, p) = family_result(family, m, t, points, sources, &profiles, catalog, cfg)?;
                pairs.extend(p);
                Ok(Some(r))
            };
            let pb = run(SourceKind::Pb, pb_meta)?;
            let pgdl = run(SourceKind::Pgdl, pgdl_meta)?;
            let row = Exp1Row {
                target_id: t.id().to_string(),
                max_depth: t.bundle.attributes.max_depth,
                n_obs: points.len(),
                pb0_rmse: points.rmse(&pb0_pred),
                pb0_deep_rmse: points.deep_rmse(&pb0_pred),
                pb,
                pgdl,
            };
            Ok((row, pairs))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(results.len());
    let mut pairs = Vec::new();
    for (r, p) in results {
        rows.push(r);
        pairs.extend(p);
    }
    Ok(Exp1Report { ensemble_size: cfg.ensemble_size, rows, pairs })
}

/// Summary statistics of one method across targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub rmse: Option<Quartiles>,
    /// targets where the method's rmse is below PB0's
    pub beats_pb0: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySummary {
    pub family: SourceKind,
    pub median_spearman: Option<f64>,
    pub median_meta_rmse: Option<f64>,
    /// share of targets where rank-1 beats the random-draw median
    pub beats_random_fraction: f64,
    pub median_best_rmse: Option<f64>,
    pub rank_medians: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp1Summary {
    pub n_targets: usize,
    pub ensemble_size: usize,
    pub methods: Vec<MethodSummary>,
    pub families: Vec<FamilySummary>,
    /// published medians (degC) of the same methods, for comparison
    pub reference_medians: Vec<(String, f64)>,
}

impl Exp1Report {
    /// Realized rmse per target of a method column.
    pub fn column(&self, method: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter_map(|r| match method {
                "PB0" => Some(r.pb0_rmse),
                "PB-MTL" => r.pb.as_ref().map(|f| f.mtl_rmse),
                "PGDL-MTL" => r.pgdl.as_ref().map(|f| f.mtl_rmse),
                "PGDL-MTL-ensemble" => r.pgdl.as_ref().map(|f| f.ensemble_rmse),
                "PB-MTL-ensemble" => r.pb.as_ref().map(|f| f.ensemble_rmse),
                _ => None,
            })
            .collect()
    }

    pub fn summary(&self) -> Exp1Summary {
        let pb0 = self.column("PB0");
        let mut methods = Vec::new();
        for m in ["PB0", "PB-MTL", "PGDL-MTL", "PGDL-MTL-ensemble"] {
            let col = self.column(m);
            if col.is_empty() {
                continue;
            }
            let beats = self
                .rows
                .iter()
                .zip(&pb0)
                .filter(|(r, p0)| {
                    let v = match m {
                        "PB-MTL" => r.pb.as_ref().map(|f| f.mtl_rmse),
                        "PGDL-MTL" => r.pgdl.as_ref().map(|f| f.mtl_rmse),
                        "PGDL-MTL-ensemble" => r.pgdl.as_ref().map(|f| f.ensemble_rmse),
                        _ => None,
                    };
                    v.is_some_and(|v| v < **p0)
                })
                .count();
            methods.push(MethodSummary { method: m.to_string(), rmse: Quartiles::of(&col), beats_pb0: beats });
        }
        let mut families = Vec::new();
        for fam in [SourceKind::Pb, SourceKind::Pgdl] {
            let res: Vec<&FamilyResult> = self
                .rows
                .iter()
                .filter_map(|r| if fam == SourceKind::Pb { r.pb.as_ref() } else { r.pgdl.as_ref() })
                .collect();
            if res.is_empty() {
                continue;
            }
            let sp: Vec<f64> = res.iter().filter_map(|f| f.spearman).collect();
            let meta: Vec<f64> = res.iter().map(|f| f.meta_rmse).collect();
            let best: Vec<f64> = res.iter().map(|f| f.best_rmse).collect();
            let max_rank = res.iter().map(|f| f.rank_rmse.len()).max().unwrap_or(0);
            let rank_medians = (0..max_rank)
                .map(|k| median(&res.iter().filter_map(|f| f.rank_rmse.get(k).copied()).collect::<Vec<_>>()))
                .collect();
            let wins = res.iter().filter(|f| f.mtl_rmse < f.random_median).count();
            families.push(FamilySummary {
                family: fam,
                median_spearman: median(&sp),
                median_meta_rmse: median(&meta),
                beats_random_fraction: wins as f64 / res.len() as f64,
                median_best_rmse: median(&best),
                rank_medians,
            });
        }
        Exp1Summary {
            n_targets: self.rows.len(),
            ensemble_size: self.ensemble_size,
            methods,
            families,
            reference_medians: vec![
                ("PB0".into(), 2.52),
                ("PB-MTL".into(), 2.42),
                ("PGDL-MTL".into(), 2.16),
                ("PGDL-MTL-ensemble".into(), 1.88),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleSizeConfig {
    pub candidates: Vec<usize>,
    /// source lakes held out per fold
    pub holdout: usize,
    pub seed: u64,
}

impl Default for EnsembleSizeConfig {
    fn default() -> Self {
        EnsembleSizeConfig { candidates: ENSEMBLE_SIZE_GRID.to_vec(), holdout: 5, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSizeResult {
    pub best: usize,
    /// (n, mean rmse over held-out lakes)
    pub table: Vec<(usize, f64)>,
    pub folds: usize,
}

/// Cross-validate the ensemble size: hold out groups of source lakes,
/// refit the metamodel without them, and score top-n ensembles on each
/// held-out lake. Ties prefer the smaller n.
pub fn tune_ensemble_size(
    sources: &[SourceLake],
    matrix: &TransferMatrix,
    metamodel: &Metamodel,
    catalog: &FeatureCatalog,
    cfg: &EnsembleSizeConfig,
) -> Result<EnsembleSizeResult> {
    if sources.len() < 10 {
        return Err(MtlError::Config(format!("ensemble-size tuning needs at least 10 sources, got {}", sources.len())));
    }
    let mut candidates = cfg.candidates.clone();
    candidates.sort_unstable();
    candidates.dedup();
    if candidates.is_empty() || candidates[0] == 0 || cfg.holdout == 0 {
        return Err(MtlError::Config("ensemble sizes and holdout must be positive".into()));
    }
    let family = matrix.family;
    let mut ids: Vec<&str> = sources.iter().map(|s| s.id()).collect();
    ids.sort_unstable();
    ids.shuffle(&mut rng_for(cfg.seed, "ensemble-size-folds", ""));
    let folds: Vec<Vec<&str>> = ids.chunks(cfg.holdout).map(<[&str]>::to_vec).collect();
    let max_n = *candidates.last().expect("non-empty");
    let per_fold = folds
        .par_iter()
        .map(|held| {
            let is_held = |id: &str| held.contains(&id);
            let mm = metamodel.refit(matrix, |r| !is_held(&r.source_id) && !is_held(&r.target_id))?;
            let pool: Vec<&SourceLake> = sources.iter().filter(|s| !is_held(s.id())).collect();
            let profiles: Vec<&LakeProfile> = pool.iter().map(|s| &s.entry.profile).collect();
            let mut held_sorted = held.clone();
            held_sorted.sort_unstable();
            held_sorted
                .iter()
                .map(|h| {
                    let lake = sources.iter().find(|s| s.id() == *h).expect("held id is a source");
                    let points = lake.entry.points()?;
                    let ranked = rank_sources(&mm, &lake.entry.profile, &profiles, catalog)?;
                    let preds = ranked
                        .top(max_n)
                        .map(|r| {
                            let s = pool.iter().find(|s| s.id() == r.source_id).expect("ranked from pool");
                            transfer_points(s.model(family)?, &lake.entry.bundle, points)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    candidates
                        .iter()
                        .map(|&n| {
                            let members: Vec<&[f64]> = preds.iter().take(n).map(Vec::as_slice).collect();
                            Ok(points.rmse(&canonical_mean(&members)?))
                        })
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let all: Vec<&Vec<f64>> = per_fold.iter().flatten().collect();
    let table: Vec<(usize, f64)> = candidates
        .iter()
        .enumerate()
        .map(|(c, &n)| (n, all.iter().map(|v| v[c]).sum::<f64>() / all.len() as f64))
        .collect();
    let best = table
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .expect("non-empty table")
        .0;
    Ok(EnsembleSizeResult { best, table, folds: folds.len() })
}
