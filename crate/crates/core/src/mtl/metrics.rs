//! Evaluation metrics: RMSE against observations, Spearman rank correlation,
//! and order statistics for report summaries.

use serde::{Deserialize, Serialize};

use crate::error::{MtlError, Result};
use crate::lakesim::{ObservationSet, TemperatureField, GRID_SPACING};

/// Observations match the nearest grid depth within half a grid step.
pub const DEPTH_MATCH_TOLERANCE: f64 = GRID_SPACING / 2.0;

/// Paired (prediction, observation) values for every observation that lands
/// on the field's dates and depth grid.
pub fn matched_pairs(pred: &TemperatureField, obs: &ObservationSet) -> Vec<(f64, f64)> {
    obs.records()
        .iter()
        .filter_map(|r| {
            let day = pred.day_index(r.date)?;
            let k = pred.nearest_depth(r.depth, DEPTH_MATCH_TOLERANCE)?;
            Some((pred.get(k, day), r.temp))
        })
        .collect()
}

/// Root mean squared error of `pred` at the observed (date, depth) points.
pub fn rmse(pred: &TemperatureField, obs: &ObservationSet) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for r in obs.records() {
        let Some(day) = pred.day_index(r.date) else { continue };
        let Some(k) = pred.nearest_depth(r.depth, DEPTH_MATCH_TOLERANCE) else { continue };
        let e = pred.get(k, day) - r.temp;
        sum += e * e;
        n += 1;
    }
    if n == 0 {
        return Err(MtlError::NoOverlap);
    }
    Ok((sum / n as f64).sqrt())
}

pub fn rmse_values(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(MtlError::Shape { expected: truth.len(), got: pred.len() });
    }
    if pred.is_empty() {
        return Err(MtlError::NoOverlap);
    }
    let sum: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((sum / pred.len() as f64).sqrt())
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Spearman rank correlation: Pearson correlation of average ranks.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(MtlError::Shape { expected: a.len(), got: b.len() });
    }
    if a.len() < 3 {
        return Err(MtlError::UndefinedCorrelation(format!("need at least 3 pairs, got {}", a.len())));
    }
    pearson(&average_ranks(a), &average_ranks(b))
        .ok_or_else(|| MtlError::UndefinedCorrelation("constant input vector".into()))
}

/// Linear-interpolated quantile of unsorted data (q in [0, 1]).
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (pos - lo as f64) * (v[hi] - v[lo]))
}

pub fn median(values: &[f64]) -> Option<f64> {
    quantile(values, 0.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub lower: f64,
    pub median: f64,
    pub upper: f64,
    pub n: usize,
}

impl Quartiles {
    pub fn of(values: &[f64]) -> Option<Quartiles> {
        Some(Quartiles {
            lower: quantile(values, 0.25)?,
            median: quantile(values, 0.5)?,
            upper: quantile(values, 0.75)?,
            n: values.len(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lakesim::Observation;
    use chrono::NaiveDate;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn day(i: i64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2010, 1, 1).unwrap() + chrono::Duration::days(i)
    }

    #[test]
    fn rmse_closed_forms() {
        let field = TemperatureField::new(vec![0.0, 0.5], day(0), 1, vec![0.0, 0.0]).unwrap();
        let obs = ObservationSet::new(vec![
            Observation { date: day(0), depth: 0.0, temp: 3.0 },
            Observation { date: day(0), depth: 0.5, temp: 4.0 },
        ])
        .unwrap();
        assert!((rmse(&field, &obs).unwrap() - 12.5f64.sqrt()).abs() < 1e-12);
        let exact = TemperatureField::new(vec![0.0, 0.5], day(0), 1, vec![3.0, 4.0]).unwrap();
        assert_eq!(rmse(&exact, &obs).unwrap(), 0.0);
    }

    #[test]
    fn rmse_requires_overlap() {
        let field = TemperatureField::new(vec![0.0], day(0), 1, vec![0.0]).unwrap();
        let obs = ObservationSet::new(vec![Observation { date: day(5), depth: 0.0, temp: 3.0 }]).unwrap();
        assert!(matches!(rmse(&field, &obs), Err(MtlError::NoOverlap)));
    }

    #[test]
    fn rmse_matches_reordered_summation() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let depths: Vec<f64> = (0..10).map(|k| k as f64 * 0.5).collect();
        let n_days = 50;
        let temps: Vec<f64> = (0..depths.len() * n_days).map(|_| rng.random_range(0.0..25.0)).collect();
        let field = TemperatureField::new(depths.clone(), day(0), n_days, temps).unwrap();
        let mut recs = Vec::new();
        for t in (0..n_days).step_by(3) {
            for k in (0..depths.len()).step_by(2) {
                recs.push(Observation { date: day(t as i64), depth: depths[k] + 0.1, temp: rng.random_range(0.0..25.0) });
            }
        }
        let obs = ObservationSet::new(recs.clone()).unwrap();
        // independent: reversed order, explicit index arithmetic
        let mut sum = 0.0;
        for r in recs.iter().rev() {
            let t = (r.date - day(0)).num_days() as usize;
            let k = ((r.depth / 0.5).round()) as usize;
            sum += (field.temps()[k * n_days + t] - r.temp).powi(2);
        }
        let oracle = (sum / recs.len() as f64).sqrt();
        assert!((rmse(&field, &obs).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn spearman_closed_forms() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert!((spearman(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let rev = [5.0, 4.0, 3.0, 2.0, 1.0];
        assert!((spearman(&a, &rev).unwrap() + 1.0).abs() < 1e-12);
        let b = [1.0, 3.0, 2.0, 5.0, 4.0];
        // 1 - 6 * sum(d^2) / (n (n^2 - 1)) with sum(d^2) = 4
        let classic = 1.0 - 6.0 * 4.0 / (5.0 * 24.0);
        assert!((spearman(&a, &b).unwrap() - classic).abs() < 1e-12);
        assert!((classic - 0.8).abs() < 1e-12);
    }

    #[test]
    fn tied_ranks_are_averaged() {
        let v = [10.0, 20.0, 20.0, 30.0, 30.0, 30.0];
        assert_eq!(average_ranks(&v), vec![1.0, 2.5, 2.5, 5.0, 5.0, 5.0]);
    }

    #[test]
    fn spearman_rejects_constant_and_short() {
        assert!(matches!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(MtlError::UndefinedCorrelation(_))));
        assert!(spearman(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn quartiles_interpolate() {
        let q = Quartiles::of(&[4.0, 1.0, 3.0, 2.0, 5.0]).unwrap();
        assert_eq!((q.lower, q.median, q.upper), (2.0, 3.0, 4.0));
        assert_eq!(median(&[1.0, 2.0]), Some(1.5));
    }

    proptest! {
        #[test]
        fn spearman_bounded_and_symmetric(a in prop::collection::vec(-10.0f64..10.0, 3..30), seed in 0u64..1000) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let b: Vec<f64> = a.iter().map(|_| rng.random_range(-5.0..5.0)).collect();
            if let (Ok(r1), Ok(r2)) = (spearman(&a, &b), spearman(&b, &a)) {
                prop_assert!((-1.0..=1.0).contains(&r1));
                prop_assert!((r1 - r2).abs() < 1e-12);
            }
        }
    }
}
