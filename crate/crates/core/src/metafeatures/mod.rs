//! Source-target meta-features: lake attribute differences, PB0
//! stratification statistics, source observation statistics, and
//! meteorological differences.

mod table;

use serde::{Deserialize, Serialize};

pub use table::{read_feature_table, write_feature_table, FeatureRow, FeatureTable};

use crate::error::{MtlError, Result};
use crate::lakesim::{
    season_of, stratification_fraction, DriverSeries, DriverVar, LakeAttributes, ObservationSet, TemperatureField,
};

pub const CATALOG_VERSION: &str = "mtl-catalog-1";
/// Guard for percent-difference denominators.
pub const PERCENT_EPS: f64 = 1e-9;
/// Lathrop index used when the index is undefined (area at most 1 ha).
pub const LATHROP_SENTINEL: f64 = 1000.0;

const SEASON_LABELS: [&str; 4] = ["Winter", "Spring", "Summer", "Autumn"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Category {
    LakeAttribute,
    Pb0Simulation,
    SourceObservation,
    Meteorological,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureKind {
    /// source minus target; antisymmetric
    Difference,
    /// (source - target) / max(|target|, eps)
    PercentDifference,
    /// |source - target|
    AbsDifference,
    /// statistic of the source lake alone
    SourceStat,
    /// 0/1 indicator
    Flag,
    /// source quantity minus a different target quantity
    CrossDifference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub label: String,
    pub category: Category,
    pub kind: FeatureKind,
}

/// Ordered feature names for one catalog version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureCatalog {
    pub version: String,
    pub features: Vec<FeatureSpec>,
}

impl Default for FeatureCatalog {
    fn default() -> Self {
        use Category::*;
        use FeatureKind::*;
        let mut f = Vec::new();
        let mut push = |name: String, label: String, category, kind| f.push(FeatureSpec { name, label, category, kind });
        for (key, label) in [
            ("max_depth", "Max Depth"),
            ("surface_area", "Surface Area"),
            ("sqrt_surface_area", "Square Root Surface Area"),
            ("clarity", "Clarity"),
            ("latitude", "Latitude"),
        ] {
            push(format!("{key}_diff"), format!("{label} Difference"), LakeAttribute, Difference);
            push(format!("{key}_pct_diff"), format!("{label} Percent Difference"), LakeAttribute, PercentDifference);
        }
        push("lathrop_diff".into(), "Lathrop Stratification Difference".into(), LakeAttribute, Difference);
        push("lathrop_undefined".into(), "Lathrop Index Undefined".into(), LakeAttribute, Flag);
        push("strat_pct_diff".into(), "GLM Stratification Percent Difference".into(), Pb0Simulation, Difference);
        push("strat_abs_diff".into(), "GLM Stratification Absolute Difference".into(), Pb0Simulation, AbsDifference);
        push("obs_count".into(), "Number of Source Temperature Observations".into(), SourceObservation, SourceStat);
        for s in SEASON_LABELS {
            push(
                format!("obs_count_{}", s.to_lowercase()),
                format!("Number of {s} Source Observations"),
                SourceObservation,
                SourceStat,
            );
        }
        push("obs_mean_depth".into(), "Mean Source Observation Depth".into(), SourceObservation, SourceStat);
        push("obs_mean_temp".into(), "Mean Source Observation Temperature".into(), SourceObservation, SourceStat);
        push("obs_skew_temp".into(), "Skew Source Observation Temperature".into(), SourceObservation, SourceStat);
        push("obs_kurtosis_temp".into(), "Kurtosis Source Observation Temperature".into(), SourceObservation, SourceStat);
        push(
            "obs_temp_minus_target_air".into(),
            "Source Observation Temp and Target Air Temp Difference".into(),
            SourceObservation,
            CrossDifference,
        );
        for var in DriverVar::ALL {
            let (k, l) = (var.key(), var.label());
            push(format!("{k}_mean_diff"), format!("Mean {l} Difference"), Meteorological, Difference);
            push(format!("{k}_sd_diff"), format!("SD {l} Difference"), Meteorological, Difference);
            for s in SEASON_LABELS {
                push(
                    format!("{k}_{}_mean_diff", s.to_lowercase()),
                    format!("Mean {s} {l} Difference"),
                    Meteorological,
                    Difference,
                );
            }
        }
        FeatureCatalog { version: CATALOG_VERSION.into(), features: f }
    }
}

impl FeatureCatalog {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn names(&self) -> Vec<&str> {
        self.features.iter().map(|f| f.name.as_str()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    /// Names must be unique and the version must be one this crate computes.
    pub fn validate(&self) -> Result<()> {
        let mut names = self.names();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(MtlError::Config("duplicate feature names in catalog".into()));
        }
        if self.version != CATALOG_VERSION || *self != FeatureCatalog::default() {
            return Err(MtlError::Config(format!("unsupported feature catalog {}", self.version)));
        }
        Ok(())
    }
}

/// Everything known about one lake.
#[derive(Debug, Clone, PartialEq)]
pub struct LakeBundle {
    pub attributes: LakeAttributes,
    pub drivers: DriverSeries,
    pub pb0_field: Option<TemperatureField>,
    /// empty for target lakes
    pub observations: ObservationSet,
}

/// Moments of the source observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationStats {
    pub count: f64,
    pub season_counts: [f64; 4],
    pub mean_depth: f64,
    pub mean_temp: f64,
    /// m3 / m2^1.5 with population moments
    pub skew_temp: f64,
    /// m4 / m2^2 - 3 with population moments
    pub kurtosis_temp: f64,
}

pub fn source_observation_stats(obs: &ObservationSet) -> Result<ObservationStats> {
    if obs.is_empty() {
        return Err(MtlError::NoData("source lake has no observations".into()));
    }
    let r = obs.records();
    let n = r.len() as f64;
    let mut season_counts = [0.0; 4];
    for o in r {
        season_counts[season_of(o.date)] += 1.0;
    }
    let mean_depth = r.iter().map(|o| o.depth).sum::<f64>() / n;
    let mean_temp = r.iter().map(|o| o.temp).sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for o in r {
        let d = o.temp - mean_temp;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let (skew_temp, kurtosis_temp) = if m2 > 1e-12 { (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0) } else { (0.0, 0.0) };
    Ok(ObservationStats { count: n, season_counts, mean_depth, mean_temp, skew_temp, kurtosis_temp })
}

/// `(max_depth - 0.1) / log10(area in hectares)`.
pub fn lathrop_index(attrs: &LakeAttributes) -> Result<f64> {
    let area_ha = attrs.surface_area / 1e4;
    if area_ha <= 1.0 {
        return Err(MtlError::LathropUndefined { area_ha });
    }
    Ok((attrs.max_depth - 0.1) / area_ha.log10())
}

/// Per-driver annual mean, SD, and DJF/MAM/JJA/SON means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriverStats {
    pub mean: f64,
    pub sd: f64,
    pub season_means: [f64; 4],
}

pub fn driver_stats(drivers: &DriverSeries, var: DriverVar) -> DriverStats {
    let x = drivers.series(var);
    if x.is_empty() {
        return DriverStats { mean: 0.0, sd: 0.0, season_means: [0.0; 4] };
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let mut sums = [0.0; 4];
    let mut counts = [0usize; 4];
    for (date, v) in drivers.dates().zip(x) {
        let s = season_of(date);
        sums[s] += v;
        counts[s] += 1;
    }
    let season_means = std::array::from_fn(|s| if counts[s] > 0 { sums[s] / counts[s] as f64 } else { 0.0 });
    DriverStats { mean, sd, season_means }
}

/// Per-lake quantities reused across every pair the lake takes part in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LakeProfile {
    pub lake_id: String,
    /// max depth, area, sqrt area, clarity, latitude
    pub attributes: [f64; 5],
    pub lathrop: Option<f64>,
    pub stratification: f64,
    pub observations: Option<ObservationStats>,
    pub drivers: [DriverStats; 7],
}

impl LakeProfile {
    pub fn of(bundle: &LakeBundle) -> Result<Self> {
        let a = &bundle.attributes;
        let pb0 = bundle
            .pb0_field
            .as_ref()
            .ok_or_else(|| MtlError::IncompleteBundle(format!("lake {} has no PB0 field", a.lake_id)))?;
        let observations = if bundle.observations.is_empty() {
            None
        } else {
            Some(source_observation_stats(&bundle.observations)?)
        };
        Ok(LakeProfile {
            lake_id: a.lake_id.to_string(),
            attributes: [a.max_depth, a.surface_area, a.surface_area.sqrt(), a.clarity, a.latitude],
            lathrop: lathrop_index(a).ok(),
            stratification: stratification_fraction(pb0)?,
            observations,
            drivers: DriverVar::ALL.map(|v| driver_stats(&bundle.drivers, v)),
        })
    }
}

fn pct(s: f64, t: f64) -> f64 {
    (s - t) / t.abs().max(PERCENT_EPS)
}

/// Feature values for `source -> target` in catalog order.
pub fn pair_features(source: &LakeProfile, target: &LakeProfile, catalog: &FeatureCatalog) -> Result<Vec<f64>> {
    if catalog.version != CATALOG_VERSION || catalog.len() != FeatureCatalog::default().len() {
        return Err(MtlError::Config(format!("unsupported feature catalog {}", catalog.version)));
    }
    let obs = source
        .observations
        .ok_or_else(|| MtlError::NoData(format!("source lake {} has no observations", source.lake_id)))?;
    let mut v = Vec::with_capacity(catalog.len());
    for k in 0..5 {
        v.push(source.attributes[k] - target.attributes[k]);
        v.push(pct(source.attributes[k], target.attributes[k]));
    }
    let ls = source.lathrop.unwrap_or(LATHROP_SENTINEL);
    let lt = target.lathrop.unwrap_or(LATHROP_SENTINEL);
    v.push(ls - lt);
    v.push(if source.lathrop.is_none() || target.lathrop.is_none() { 1.0 } else { 0.0 });
    let ds = source.stratification - target.stratification;
    v.push(100.0 * ds);
    v.push(ds.abs());
    v.push(obs.count);
    v.extend_from_slice(&obs.season_counts);
    v.push(obs.mean_depth);
    v.push(obs.mean_temp);
    v.push(obs.skew_temp);
    v.push(obs.kurtosis_temp);
    v.push(obs.mean_temp - target.drivers[DriverVar::AirTemp as usize].mean);
    for (s, t) in source.drivers.iter().zip(&target.drivers) {
        v.push(s.mean - t.mean);
        v.push(s.sd - t.sd);
        for q in 0..4 {
            v.push(s.season_means[q] - t.season_means[q]);
        }
    }
    debug_assert_eq!(v.len(), catalog.len());
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(MtlError::Data(format!("non-finite feature {}", catalog.features[i].name)));
    }
    Ok(v)
}

/// Feature vector for one pair, computed from full bundles.
pub fn compute_pair_features(source: &LakeBundle, target: &LakeBundle, catalog: &FeatureCatalog) -> Result<Vec<f64>> {
    pair_features(&LakeProfile::of(source)?, &LakeProfile::of(target)?, catalog)
}
