use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit, mse, FitConfig, Matrix};
use crate::error::{MtlError, Result};
use crate::seed::rng_for;

/// Validation row sets for `k` contiguous folds over a seeded shuffle.
pub fn kfold_indices(rows: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || rows < k {
        return Err(MtlError::Fold { rows, k });
    }
    let mut order: Vec<usize> = (0..rows).collect();
    order.shuffle(&mut rng_for(seed, "kfold", &k.to_string()));
    let (base, extra) = (rows / k, rows % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        let mut idx = order[start..start + len].to_vec();
        idx.sort_unstable();
        folds.push(idx);
        start += len;
    }
    Ok(folds)
}

fn complement(rows: usize, held: &[usize]) -> Vec<usize> {
    let mut mask = vec![true; rows];
    for &i in held {
        mask[i] = false;
    }
    (0..rows).filter(|&i| mask[i]).collect()
}

fn subset(y: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| y[i]).collect()
}

/// Per-fold validation MSE for every tree count in `counts`, from one fit per fold.
fn fold_scores(x: &Matrix, y: &[f64], k: usize, config: &FitConfig, counts: &[usize]) -> Result<Vec<Vec<f64>>> {
    let folds = kfold_indices(x.rows(), k, config.seed)?;
    let max_trees = counts.iter().copied().max().unwrap_or(0);
    let cfg = FitConfig { n_estimators: max_trees, ..config.clone() };
    folds
        .par_iter()
        .map(|held| {
            let train = complement(x.rows(), held);
            let model = fit(&x.select_rows(&train), &subset(y, &train), &cfg)?;
            let xv = x.select_rows(held);
            let yv = subset(y, held);
            Ok(model.staged_predict(&xv, counts)?.iter().map(|p| mse(p, &yv)).collect())
        })
        .collect()
}

/// Mean validation MSE over `k` folds.
pub fn kfold_cv(x: &Matrix, y: &[f64], k: usize, config: &FitConfig) -> Result<f64> {
    let per_fold = fold_scores(x, y, k, config, &[config.n_estimators])?;
    Ok(per_fold.iter().map(|s| s[0]).sum::<f64>() / k as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TuningGrid {
    pub learning_rates: Vec<f64>,
    pub n_estimators: Vec<usize>,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub folds: usize,
    pub seed: u64,
}

impl Default for TuningGrid {
    fn default() -> Self {
        TuningGrid::desk()
    }
}

impl TuningGrid {
    /// Learning rates {0.05, 0.10}, 1000 to 6000 trees in steps of 100, 24 folds.
    pub fn paper() -> Self {
        TuningGrid {
            learning_rates: vec![0.05, 0.10],
            n_estimators: (10..=60).map(|h| h * 100).collect(),
            max_depth: 3,
            min_samples_leaf: 5,
            folds: 24,
            seed: 0,
        }
    }

    pub fn desk() -> Self {
        TuningGrid {
            learning_rates: vec![0.05, 0.10],
            n_estimators: vec![50, 100, 200],
            max_depth: 3,
            min_samples_leaf: 5,
            folds: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScore {
    pub learning_rate: f64,
    pub n_estimators: usize,
    pub cv_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best: FitConfig,
    pub scores: Vec<GridScore>,
}

/// Exhaustive grid search by k-fold CV; ties prefer fewer trees, then the
/// lower learning rate.
pub fn tune(x: &Matrix, y: &[f64], grid: &TuningGrid) -> Result<TuneResult> {
    if grid.learning_rates.is_empty() || grid.n_estimators.is_empty() {
        return Err(MtlError::Config("empty tuning grid".into()));
    }
    let mut scores = Vec::new();
    for &lr in &grid.learning_rates {
        let cfg = FitConfig {
            n_estimators: 0,
            learning_rate: lr,
            max_depth: grid.max_depth,
            min_samples_leaf: grid.min_samples_leaf,
            seed: grid.seed,
        };
        let per_fold = fold_scores(x, y, grid.folds, &cfg, &grid.n_estimators)?;
        for (c, &n) in grid.n_estimators.iter().enumerate() {
            let cv_mse = per_fold.iter().map(|f| f[c]).sum::<f64>() / grid.folds as f64;
            scores.push(GridScore { learning_rate: lr, n_estimators: n, cv_mse });
        }
    }
    let best = scores
        .iter()
        .min_by(|a, b| {
            a.cv_mse
                .total_cmp(&b.cv_mse)
                .then(a.n_estimators.cmp(&b.n_estimators))
                .then(a.learning_rate.total_cmp(&b.learning_rate))
        })
        .expect("non-empty grid");
    Ok(TuneResult {
        best: FitConfig {
            n_estimators: best.n_estimators,
            learning_rate: best.learning_rate,
            max_depth: grid.max_depth,
            min_samples_leaf: grid.min_samples_leaf,
            seed: grid.seed,
        },
        scores,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RfecvConfig {
    /// model used both to rank features and to score each subset
    pub fit: FitConfig,
    pub folds: usize,
}

impl Default for RfecvConfig {
    fn default() -> Self {
        RfecvConfig { fit: FitConfig { n_estimators: 100, ..FitConfig::default() }, folds: 5 }
    }
}

impl RfecvConfig {
    /// 3000 trees and 24 folds.
    pub fn paper() -> Self {
        RfecvConfig { fit: FitConfig { n_estimators: 3000, ..FitConfig::default() }, folds: 24 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfecvResult {
    /// selected column indices, ascending
    pub selected: Vec<usize>,
    /// (subset size, CV MSE) for every size visited, largest first
    pub curve: Vec<(usize, f64)>,
    /// columns in the order they were removed
    pub eliminated: Vec<usize>,
}

/// Recursive feature elimination, one feature per step, keeping the subset
/// with the lowest CV error (ties go to the smaller subset).
pub fn rfecv(x: &Matrix, y: &[f64], config: &RfecvConfig) -> Result<RfecvResult> {
    if x.cols() < 2 {
        return Err(MtlError::TrivialSelection(x.cols()));
    }
    let mut current: Vec<usize> = (0..x.cols()).collect();
    let mut curve = Vec::new();
    let mut eliminated = Vec::new();
    let mut best: (f64, Vec<usize>) = (f64::INFINITY, current.clone());
    loop {
        let sub = x.select_cols(&current);
        let score = kfold_cv(&sub, y, config.folds, &config.fit)?;
        curve.push((current.len(), score));
        if score <= best.0 {
            best = (score, current.clone());
        }
        if current.len() == 1 {
            break;
        }
        let weights = fit(&sub, y, &config.fit)?.feature_importance().weights;
        // weakest feature; among equal weights the later column goes first
        let mut drop = 0;
        for (i, w) in weights.iter().enumerate() {
            if *w <= weights[drop] {
                drop = i;
            }
        }
        eliminated.push(current.remove(drop));
    }
    Ok(RfecvResult { selected: best.1, curve, eliminated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn data(seed: u64, rows: usize, cols: usize, informative: bool) -> (Matrix, Vec<f64>) {
        let mut rng = rng_for(seed, "cv-test", "");
        let v: Vec<f64> = (0..rows * cols).map(|_| rng.random::<f64>()).collect();
        let x = Matrix::new(rows, cols, v).unwrap();
        let y = (0..rows)
            .map(|i| {
                let noise = rng.random::<f64>();
                if informative { 4.0 * x.get(i, 0) + 0.1 * noise } else { noise }
            })
            .collect();
        (x, y)
    }

    #[test]
    fn folds_partition_rows() {
        let f = kfold_indices(10, 3, 1).unwrap();
        assert_eq!(f.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 3, 3]);
        let mut all: Vec<usize> = f.concat();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(f, kfold_indices(10, 3, 1).unwrap());
        assert_eq!(kfold_indices(7, 7, 1).unwrap().len(), 7);
        assert!(matches!(kfold_indices(3, 4, 1), Err(MtlError::Fold { .. })));
    }

    #[test]
    fn learnable_data_cv_close_to_training_error() {
        let (x, y) = data(1, 200, 2, true);
        let cfg = FitConfig { n_estimators: 100, ..FitConfig::default() };
        let cv = kfold_cv(&x, &y, 5, &cfg).unwrap();
        let m = fit(&x, &y, &cfg).unwrap();
        let train = mse(&m.predict_batch(&x).unwrap(), &y);
        let var = mse(&vec![y.iter().sum::<f64>() / y.len() as f64; y.len()], &y);
        assert!(cv < 0.05 * var, "cv {cv} var {var}");
        assert!(cv >= train);
        assert_eq!(cv, kfold_cv(&x, &y, 5, &cfg).unwrap());
    }

    #[test]
    fn tune_returns_grid_minimum() {
        let (x, y) = data(2, 120, 3, true);
        let r = tune(&x, &y, &TuningGrid::desk()).unwrap();
        assert_eq!(r.scores.len(), 6);
        let min = r.scores.iter().map(|s| s.cv_mse).fold(f64::INFINITY, f64::min);
        let chosen = r
            .scores
            .iter()
            .find(|s| s.learning_rate == r.best.learning_rate && s.n_estimators == r.best.n_estimators)
            .unwrap();
        assert_eq!(chosen.cv_mse, min);
        // staged scores equal an independent fit at each tree count
        let direct = kfold_cv(&x, &y, 5, &FitConfig { n_estimators: 50, learning_rate: 0.1, ..FitConfig::default() }).unwrap();
        let staged = r.scores.iter().find(|s| s.learning_rate == 0.1 && s.n_estimators == 50).unwrap().cv_mse;
        assert_eq!(direct, staged);
    }

    #[test]
    fn single_point_grid() {
        let (x, y) = data(3, 40, 2, true);
        let grid = TuningGrid { learning_rates: vec![0.1], n_estimators: vec![20], ..TuningGrid::desk() };
        let r = tune(&x, &y, &grid).unwrap();
        assert_eq!((r.best.learning_rate, r.best.n_estimators), (0.1, 20));
        let empty = TuningGrid { learning_rates: vec![], ..TuningGrid::desk() };
        assert!(matches!(tune(&x, &y, &empty), Err(MtlError::Config(_))));
    }

    #[test]
    fn paper_grid_values() {
        let g = TuningGrid::paper();
        assert_eq!(g.learning_rates, vec![0.05, 0.10]);
        assert_eq!(g.n_estimators.first(), Some(&1000));
        assert_eq!(g.n_estimators.last(), Some(&6000));
        assert_eq!(g.n_estimators.len(), 51);
        assert!(g.n_estimators.windows(2).all(|w| w[1] - w[0] == 100));
        assert_eq!(g.folds, 24);
        assert_eq!(RfecvConfig::paper().fit.n_estimators, 3000);
    }

    fn small_rfecv() -> RfecvConfig {
        RfecvConfig { fit: FitConfig { n_estimators: 30, ..FitConfig::default() }, folds: 4 }
    }

    #[test]
    fn rfecv_keeps_the_informative_feature() {
        let (x, y) = data(5, 150, 10, true);
        let r = rfecv(&x, &y, &small_rfecv()).unwrap();
        assert!(r.selected.contains(&0), "{r:?}");
        assert_eq!(r.curve.len(), 10);
        assert_eq!(r.eliminated.len(), 9);
        assert!(!r.eliminated.contains(&0), "informative feature outlives the noise");
    }

    #[test]
    fn rfecv_selection_minimizes_recorded_curve() {
        let (x, y) = data(6, 100, 5, false);
        let r = rfecv(&x, &y, &small_rfecv()).unwrap();
        let min = r.curve.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
        let smallest_at_min = r.curve.iter().filter(|c| c.1 == min).map(|c| c.0).min().unwrap();
        assert_eq!(r.selected.len(), smallest_at_min);
        assert!(matches!(rfecv(&x.select_cols(&[0]), &y, &small_rfecv()), Err(MtlError::TrivialSelection(_))));
    }

    #[test]
    fn rfecv_with_duplicated_feature_keeps_one() {
        let (x0, y) = data(7, 120, 1, true);
        let x = x0.select_cols(&[0, 0]);
        let r = rfecv(&x, &y, &small_rfecv()).unwrap();
        assert!(!r.selected.is_empty());
    }
}
