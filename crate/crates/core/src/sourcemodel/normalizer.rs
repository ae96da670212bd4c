use serde::{Deserialize, Serialize};

use crate::error::{MtlError, Result};
use crate::lakesim::{DriverSeries, DriverVar, LakeAttributes};

pub const N_DRIVERS: usize = 7;
/// Seven drivers plus depth.
pub const N_INPUTS: usize = N_DRIVERS + 1;
pub const SD_FLOOR: f64 = 1e-6;

/// Global per-input mean and standard deviation (drivers then depth).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureNormalizer {
    pub mean: [f64; N_INPUTS],
    pub sd: [f64; N_INPUTS],
}

impl FeatureNormalizer {
    pub fn identity() -> Self {
        FeatureNormalizer {
            mean: [0.0; N_INPUTS],
            sd: [1.0; N_INPUTS],
        }
    }

    #[inline]
    pub fn apply(&self, input: usize, value: f64) -> f64 {
        (value - self.mean[input]) / self.sd[input]
    }

    #[inline]
    pub fn invert(&self, input: usize, value: f64) -> f64 {
        value * self.sd[input] + self.mean[input]
    }

    /// Normalized driver rows, one per day.
    pub fn drivers(&self, drivers: &DriverSeries) -> Vec<[f64; N_DRIVERS]> {
        let series: Vec<&[f64]> = DriverVar::ALL.iter().map(|v| drivers.series(*v)).collect();
        (0..drivers.len())
            .map(|t| {
                let mut row = [0.0; N_DRIVERS];
                for (j, s) in series.iter().enumerate() {
                    row[j] = self.apply(j, s[t]);
                }
                row
            })
            .collect()
    }

    pub fn depths(&self, depths: &[f64]) -> Vec<f64> {
        depths.iter().map(|d| self.apply(N_DRIVERS, *d)).collect()
    }
}

/// Pool every source lake's drivers (and grid depths) into global statistics.
pub fn fit_normalizer(sources: &[(&LakeAttributes, &DriverSeries)]) -> Result<FeatureNormalizer> {
    if sources.is_empty() {
        return Err(MtlError::NoData("no source drivers for the normalizer".into()));
    }
    let mut sum = [0.0; N_INPUTS];
    let mut count = [0usize; N_INPUTS];
    for (lake, drivers) in sources {
        for (j, var) in DriverVar::ALL.iter().enumerate() {
            let s = drivers.series(*var);
            sum[j] += s.iter().sum::<f64>();
            count[j] += s.len();
        }
        let grid = lake.depth_grid();
        sum[N_DRIVERS] += grid.iter().sum::<f64>();
        count[N_DRIVERS] += grid.len();
    }
    if count.contains(&0) {
        return Err(MtlError::NoData("empty driver series".into()));
    }
    let mut mean = [0.0; N_INPUTS];
    for j in 0..N_INPUTS {
        mean[j] = sum[j] / count[j] as f64;
    }
    let mut ss = [0.0; N_INPUTS];
    for (lake, drivers) in sources {
        for (j, var) in DriverVar::ALL.iter().enumerate() {
            ss[j] += drivers.series(*var).iter().map(|v| (v - mean[j]).powi(2)).sum::<f64>();
        }
        ss[N_DRIVERS] += lake.depth_grid().iter().map(|v| (v - mean[N_DRIVERS]).powi(2)).sum::<f64>();
    }
    let mut sd = [0.0; N_INPUTS];
    for j in 0..N_INPUTS {
        sd[j] = (ss[j] / count[j] as f64).sqrt().max(SD_FLOOR);
    }
    Ok(FeatureNormalizer { mean, sd })
}
