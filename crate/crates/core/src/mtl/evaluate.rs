//! Observation-aligned predictions: every transfer is scored only at a
//! target's observed (date, depth) points, so those values are all that
//! need to be kept.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::metrics::DEPTH_MATCH_TOLERANCE;
use crate::error::{MtlError, Result};
use crate::lakesim::{LakeAttributes, ObservationSet, TemperatureField};
use crate::metafeatures::LakeBundle;
use crate::sourcemodel::{transfer_apply, SourceModel};

/// Share of max depth at or below which observations count as deep water.
pub const DEEP_WATER_FRACTION: f64 = 0.75;

/// A target's observations that fall on its driver dates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPoints {
    /// distinct observed depths, ascending
    pub depths: Vec<f64>,
    /// (index into `depths`, day index, date)
    pub cells: Vec<(usize, usize, NaiveDate)>,
    pub observed: Vec<f64>,
    pub deep: Vec<bool>,
}

impl EvalPoints {
    pub fn new(bundle: &LakeBundle) -> Result<Self> {
        Self::from_observations(&bundle.attributes, &bundle.observations, |d| bundle.drivers.day_index(d))
    }

    fn from_observations(
        lake: &LakeAttributes,
        obs: &ObservationSet,
        day_index: impl Fn(NaiveDate) -> Option<usize>,
    ) -> Result<Self> {
        obs.validate_for(lake)?;
        let depths = obs.depths();
        let mut cells = Vec::new();
        let mut observed = Vec::new();
        let mut deep = Vec::new();
        for r in obs.records() {
            let Some(day) = day_index(r.date) else { continue };
            let k = depths.partition_point(|d| *d < r.depth);
            cells.push((k, day, r.date));
            observed.push(r.temp);
            deep.push(r.depth >= DEEP_WATER_FRACTION * lake.max_depth);
        }
        if cells.is_empty() {
            return Err(MtlError::NoOverlap);
        }
        Ok(EvalPoints { depths, cells, observed, deep })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Values of `field` at every point; the field must cover the points.
    pub fn sample(&self, field: &TemperatureField) -> Result<Vec<f64>> {
        let rows = self
            .depths
            .iter()
            .map(|d| field.nearest_depth(*d, DEPTH_MATCH_TOLERANCE).ok_or(MtlError::NoOverlap))
            .collect::<Result<Vec<_>>>()?;
        self.cells
            .iter()
            .map(|&(k, day, _)| if day < field.n_dates() { Ok(field.get(rows[k], day)) } else { Err(MtlError::NoOverlap) })
            .collect()
    }

    pub fn rmse(&self, pred: &[f64]) -> f64 {
        let s: f64 = pred.iter().zip(&self.observed).map(|(p, o)| (p - o) * (p - o)).sum();
        (s / self.observed.len() as f64).sqrt()
    }

    /// RMSE over deep-water points, if any.
    pub fn deep_rmse(&self, pred: &[f64]) -> Option<f64> {
        let (mut s, mut n) = (0.0, 0usize);
        for ((p, o), d) in pred.iter().zip(&self.observed).zip(&self.deep) {
            if *d {
                s += (p - o) * (p - o);
                n += 1;
            }
        }
        (n > 0).then(|| (s / n as f64).sqrt())
    }

    /// Points whose date satisfies `keep`, with a mapping back to this set.
    pub fn filter_dates(&self, keep: impl Fn(NaiveDate) -> bool) -> (EvalPoints, Vec<usize>) {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(self.cells[i].2)).collect();
        let sub = EvalPoints {
            depths: self.depths.clone(),
            cells: idx.iter().map(|&i| self.cells[i]).collect(),
            observed: idx.iter().map(|&i| self.observed[i]).collect(),
            deep: idx.iter().map(|&i| self.deep[i]).collect(),
        };
        (sub, idx)
    }
}

/// Run `model` on the target and keep its values at the target's points.
pub fn transfer_points(model: &SourceModel, target: &LakeBundle, points: &EvalPoints) -> Result<Vec<f64>> {
    let field = transfer_apply(model, &target.attributes, &target.drivers, Some(&points.depths))?;
    points.sample(&field)
}

/// Elementwise mean of equally long members. Each cell's values are summed
/// in sorted order, so the result does not depend on member order.
pub fn canonical_mean(members: &[&[f64]]) -> Result<Vec<f64>> {
    let first = members.first().ok_or_else(|| MtlError::Config("ensemble needs at least one member".into()))?;
    let n = first.len();
    if let Some(m) = members.iter().find(|m| m.len() != n) {
        return Err(MtlError::Shape { expected: n, got: m.len() });
    }
    let mut buf = vec![0.0; members.len()];
    Ok((0..n)
        .map(|i| {
            for (b, m) in buf.iter_mut().zip(members) {
                *b = m[i];
            }
            buf.sort_by(f64::total_cmp);
            buf.iter().sum::<f64>() / members.len() as f64
        })
        .collect())
}

/// Unweighted cellwise average of member fields on a shared grid.
pub fn ensemble_predict(members: &[TemperatureField]) -> Result<TemperatureField> {
    let first = members.first().ok_or_else(|| MtlError::Config("ensemble needs at least one member".into()))?;
    for m in members {
        if m.depths() != first.depths() || m.start() != first.start() || m.n_dates() != first.n_dates() {
            return Err(MtlError::Shape { expected: first.temps().len(), got: m.temps().len() });
        }
    }
    let slices: Vec<&[f64]> = members.iter().map(|m| m.temps()).collect();
    TemperatureField::new(first.depths().to_vec(), first.start(), first.n_dates(), canonical_mean(&slices)?)
}
