//! Synthetic lake populations, meteorological drivers, and a 1-D vertical
//! thermal model used both uncalibrated (PB0) and calibrated (PB).

mod calibrate;
mod density;
mod population;
mod simulate;
mod world;

pub use calibrate::{calibrate, calibrate_with, Calibration, CalibrationConfig};
pub use density::{water_density, water_density_derivative, water_density_unchecked};
pub use population::{
    synth_drivers, synth_drivers_with, synth_population, DriverConfig, PopulationConfig, VarModel,
};
pub use simulate::{
    overturn, simulate, simulate_with, stratification_fraction, stratification_fraction_with,
    InitialState, SimOptions,
};
pub use world::{lake_truth, sample_observations, true_field, LakeTruth, ObservationDesign, TruthConfig};

use std::fmt;

use chrono::{Datelike, Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{MtlError, Result};

/// Vertical spacing of the simulation grid, in meters.
pub const GRID_SPACING: f64 = 0.5;
/// Lowest temperature any model state may take (ice-capped floor).
pub const ICE_FLOOR: f64 = -0.5;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LakeId(pub String);

impl LakeId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LakeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for LakeId {
    fn from(s: &str) -> Self {
        LakeId(s.to_string())
    }
}

impl From<String> for LakeId {
    fn from(s: String) -> Self {
        LakeId(s)
    }
}

/// Static per-lake descriptors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LakeAttributes {
    pub lake_id: LakeId,
    /// meters
    pub max_depth: f64,
    /// square meters
    pub surface_area: f64,
    /// light extinction coefficient, 1/m
    pub clarity: f64,
    /// degrees north
    pub latitude: f64,
}

impl LakeAttributes {
    pub fn new(
        lake_id: impl Into<LakeId>,
        max_depth: f64,
        surface_area: f64,
        clarity: f64,
        latitude: f64,
    ) -> Result<Self> {
        let lake = LakeAttributes {
            lake_id: lake_id.into(),
            max_depth,
            surface_area,
            clarity,
            latitude,
        };
        lake.validate()?;
        Ok(lake)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| {
            Err(MtlError::Data(format!(
                "lake {}: {what} = {v} out of range",
                self.lake_id
            )))
        };
        if !(self.max_depth.is_finite() && self.max_depth > 0.0) {
            return bad("max_depth", self.max_depth);
        }
        if !(self.surface_area.is_finite() && self.surface_area > 0.0) {
            return bad("surface_area", self.surface_area);
        }
        if !(self.clarity.is_finite() && self.clarity > 0.0) {
            return bad("clarity", self.clarity);
        }
        if !(35.0..=55.0).contains(&self.latitude) {
            return bad("latitude", self.latitude);
        }
        Ok(())
    }

    /// Depths of the 0.5 m simulation grid, surface first.
    pub fn depth_grid(&self) -> Vec<f64> {
        depth_grid(self.max_depth)
    }
}

pub fn depth_grid(max_depth: f64) -> Vec<f64> {
    let n = (max_depth / GRID_SPACING + 1e-9).floor() as usize + 1;
    (0..n).map(|k| k as f64 * GRID_SPACING).collect()
}

/// The seven meteorological drivers, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DriverVar {
    Shortwave,
    Longwave,
    AirTemp,
    RelHumidity,
    WindSpeed,
    Rain,
    Snow,
}

impl DriverVar {
    pub const ALL: [DriverVar; 7] = [
        DriverVar::Shortwave,
        DriverVar::Longwave,
        DriverVar::AirTemp,
        DriverVar::RelHumidity,
        DriverVar::WindSpeed,
        DriverVar::Rain,
        DriverVar::Snow,
    ];

    pub fn key(self) -> &'static str {
        match self {
            DriverVar::Shortwave => "shortwave",
            DriverVar::Longwave => "longwave",
            DriverVar::AirTemp => "airtemp",
            DriverVar::RelHumidity => "relhum",
            DriverVar::WindSpeed => "wind",
            DriverVar::Rain => "rain",
            DriverVar::Snow => "snow",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            DriverVar::Shortwave => "Shortwave",
            DriverVar::Longwave => "Longwave",
            DriverVar::AirTemp => "Air Temperature",
            DriverVar::RelHumidity => "Relative Humidity",
            DriverVar::WindSpeed => "Wind Speed",
            DriverVar::Rain => "Rain",
            DriverVar::Snow => "Snow",
        }
    }
}

/// Daily meteorological forcing for one lake.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriverSeries {
    pub start: NaiveDate,
    /// W/m^2
    pub shortwave: Vec<f64>,
    /// W/m^2
    pub longwave: Vec<f64>,
    /// degC
    pub air_temp: Vec<f64>,
    /// percent
    pub rel_humidity: Vec<f64>,
    /// m/s
    pub wind_speed: Vec<f64>,
    /// m/day
    pub rain: Vec<f64>,
    /// m/day
    pub snow: Vec<f64>,
}

impl DriverSeries {
    pub fn len(&self) -> usize {
        self.air_temp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.air_temp.is_empty()
    }

    pub fn date(&self, day: usize) -> NaiveDate {
        self.start + Duration::days(day as i64)
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        (0..self.len()).map(|d| self.date(d))
    }

    pub fn day_index(&self, date: NaiveDate) -> Option<usize> {
        let idx = (date - self.start).num_days();
        (idx >= 0 && (idx as usize) < self.len()).then_some(idx as usize)
    }

    pub fn series(&self, var: DriverVar) -> &[f64] {
        match var {
            DriverVar::Shortwave => &self.shortwave,
            DriverVar::Longwave => &self.longwave,
            DriverVar::AirTemp => &self.air_temp,
            DriverVar::RelHumidity => &self.rel_humidity,
            DriverVar::WindSpeed => &self.wind_speed,
            DriverVar::Rain => &self.rain,
            DriverVar::Snow => &self.snow,
        }
    }

    pub fn series_mut(&mut self, var: DriverVar) -> &mut Vec<f64> {
        match var {
            DriverVar::Shortwave => &mut self.shortwave,
            DriverVar::Longwave => &mut self.longwave,
            DriverVar::AirTemp => &mut self.air_temp,
            DriverVar::RelHumidity => &mut self.rel_humidity,
            DriverVar::WindSpeed => &mut self.wind_speed,
            DriverVar::Rain => &mut self.rain,
            DriverVar::Snow => &mut self.snow,
        }
    }

    /// An all-zero series of the given length.
    pub fn zeros(start: NaiveDate, n_days: usize) -> Self {
        DriverSeries {
            start,
            shortwave: vec![0.0; n_days],
            longwave: vec![0.0; n_days],
            air_temp: vec![0.0; n_days],
            rel_humidity: vec![0.0; n_days],
            wind_speed: vec![0.0; n_days],
            rain: vec![0.0; n_days],
            snow: vec![0.0; n_days],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        for var in DriverVar::ALL {
            let s = self.series(var);
            if s.len() != n {
                return Err(MtlError::Shape {
                    expected: n,
                    got: s.len(),
                });
            }
            let (lo, hi) = match var {
                DriverVar::AirTemp => (f64::NEG_INFINITY, f64::INFINITY),
                DriverVar::RelHumidity => (0.0, 100.0),
                _ => (0.0, f64::INFINITY),
            };
            if let Some(i) = s.iter().position(|v| !v.is_finite() || *v < lo || *v > hi) {
                return Err(MtlError::Data(format!(
                    "driver {} out of bounds on {}: {}",
                    var.key(),
                    self.date(i),
                    s[i]
                )));
            }
        }
        Ok(())
    }

    /// Restrict to the leading `n_days`.
    pub fn truncated(&self, n_days: usize) -> Self {
        let mut out = self.clone();
        for var in DriverVar::ALL {
            out.series_mut(var).truncate(n_days);
        }
        out
    }
}

/// Three calibration parameters of the thermal model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub sw_factor: f64,
    pub momentum_coeff: f64,
    pub deep_mix_eff: f64,
}

impl Default for SimParams {
    /// The uncalibrated (PB0) parameterization.
    fn default() -> Self {
        SimParams {
            sw_factor: 1.0,
            momentum_coeff: 1.0,
            deep_mix_eff: 0.5,
        }
    }
}

impl SimParams {
    pub fn new(sw_factor: f64, momentum_coeff: f64, deep_mix_eff: f64) -> Self {
        SimParams {
            sw_factor,
            momentum_coeff,
            deep_mix_eff,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sw_factor.is_finite() && self.sw_factor > 0.0)
            || !(self.momentum_coeff.is_finite() && self.momentum_coeff > 0.0)
            || !(0.0..=1.0).contains(&self.deep_mix_eff)
        {
            return Err(MtlError::Config(format!("invalid simulation parameters {self:?}")));
        }
        Ok(())
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.sw_factor, self.momentum_coeff, self.deep_mix_eff]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        SimParams::new(a[0], a[1], a[2])
    }
}

/// Temperature on a (depth x date) grid, stored depth-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureField {
    depths: Vec<f64>,
    start: NaiveDate,
    n_dates: usize,
    temps: Vec<f64>,
}

impl TemperatureField {
    pub fn new(depths: Vec<f64>, start: NaiveDate, n_dates: usize, temps: Vec<f64>) -> Result<Self> {
        if depths.is_empty() {
            return Err(MtlError::Data("temperature field without depths".into()));
        }
        if depths.windows(2).any(|w| w[1] <= w[0]) || depths[0] < 0.0 {
            return Err(MtlError::Data("field depths must be non-negative and strictly increasing".into()));
        }
        if temps.len() != depths.len() * n_dates {
            return Err(MtlError::Shape {
                expected: depths.len() * n_dates,
                got: temps.len(),
            });
        }
        if let Some(v) = temps.iter().find(|v| !v.is_finite()) {
            return Err(MtlError::Data(format!("non-finite temperature {v}")));
        }
        Ok(TemperatureField {
            depths,
            start,
            n_dates,
            temps,
        })
    }

    pub(crate) fn from_parts_unchecked(
        depths: Vec<f64>,
        start: NaiveDate,
        n_dates: usize,
        temps: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(temps.len(), depths.len() * n_dates);
        TemperatureField {
            depths,
            start,
            n_dates,
            temps,
        }
    }

    pub fn depths(&self) -> &[f64] {
        &self.depths
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    pub fn n_dates(&self) -> usize {
        self.n_dates
    }

    pub fn n_depths(&self) -> usize {
        self.depths.len()
    }

    pub fn temps(&self) -> &[f64] {
        &self.temps
    }

    pub fn date(&self, day: usize) -> NaiveDate {
        self.start + Duration::days(day as i64)
    }

    pub fn day_index(&self, date: NaiveDate) -> Option<usize> {
        let idx = (date - self.start).num_days();
        (idx >= 0 && (idx as usize) < self.n_dates).then_some(idx as usize)
    }

    #[inline]
    pub fn get(&self, depth_idx: usize, day: usize) -> f64 {
        self.temps[depth_idx * self.n_dates + day]
    }

    /// Time series at one depth.
    pub fn at_depth(&self, depth_idx: usize) -> &[f64] {
        &self.temps[depth_idx * self.n_dates..(depth_idx + 1) * self.n_dates]
    }

    /// Index of the grid depth nearest `depth`, if within `tol` meters.
    pub fn nearest_depth(&self, depth: f64, tol: f64) -> Option<usize> {
        let pos = self.depths.partition_point(|d| *d < depth);
        let mut best: Option<(usize, f64)> = None;
        for idx in [pos.wrapping_sub(1), pos] {
            if let Some(d) = self.depths.get(idx) {
                let dist = (d - depth).abs();
                if dist <= tol && best.is_none_or(|(_, b)| dist < b) {
                    best = Some((idx, dist));
                }
            }
        }
        best.map(|(i, _)| i)
    }

    /// Same dates, a subset of depths (by index).
    pub fn select_depths(&self, idx: &[usize]) -> Self {
        let mut temps = Vec::with_capacity(idx.len() * self.n_dates);
        for &i in idx {
            temps.extend_from_slice(self.at_depth(i));
        }
        TemperatureField::from_parts_unchecked(
            idx.iter().map(|&i| self.depths[i]).collect(),
            self.start,
            self.n_dates,
            temps,
        )
    }
}

/// One in-situ temperature measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub date: NaiveDate,
    pub depth: f64,
    pub temp: f64,
}

/// Observations sorted by (date, depth) without duplicates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    records: Vec<Observation>,
}

impl ObservationSet {
    pub fn new(mut records: Vec<Observation>) -> Result<Self> {
        if let Some(r) = records
            .iter()
            .find(|r| !r.temp.is_finite() || !r.depth.is_finite() || r.depth < 0.0)
        {
            return Err(MtlError::Data(format!("invalid observation {r:?}")));
        }
        records.sort_by(|a, b| a.date.cmp(&b.date).then(a.depth.total_cmp(&b.depth)));
        if let Some(w) = records
            .windows(2)
            .find(|w| w[0].date == w[1].date && w[0].depth == w[1].depth)
        {
            return Err(MtlError::Data(format!(
                "duplicate observation on {} at {} m",
                w[0].date, w[0].depth
            )));
        }
        Ok(ObservationSet { records })
    }

    pub fn empty() -> Self {
        ObservationSet::default()
    }

    pub fn records(&self) -> &[Observation] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Unique sampling dates ("profiles"), ascending.
    pub fn profile_dates(&self) -> Vec<NaiveDate> {
        let mut dates: Vec<NaiveDate> = self.records.iter().map(|r| r.date).collect();
        dates.dedup();
        dates
    }

    pub fn validate_for(&self, lake: &LakeAttributes) -> Result<()> {
        if let Some(r) = self.records.iter().find(|r| r.depth > lake.max_depth + 1e-9) {
            return Err(MtlError::DepthOutOfRange {
                lake_id: lake.lake_id.to_string(),
                depth: r.depth,
                max_depth: lake.max_depth,
            });
        }
        Ok(())
    }

    /// Observations whose date satisfies `keep`.
    pub fn filter_dates(&self, mut keep: impl FnMut(NaiveDate) -> bool) -> Self {
        ObservationSet {
            records: self.records.iter().filter(|r| keep(r.date)).copied().collect(),
        }
    }

    /// Distinct observed depths, ascending.
    pub fn depths(&self) -> Vec<f64> {
        let mut d: Vec<f64> = self.records.iter().map(|r| r.depth).collect();
        d.sort_by(f64::total_cmp);
        d.dedup();
        d
    }
}

/// Meteorological season (DJF/MAM/JJA/SON) of a date: 0 = winter .. 3 = autumn.
pub fn season_of(date: NaiveDate) -> usize {
    match date.month() {
        12 | 1 | 2 => 0,
        3..=5 => 1,
        6..=8 => 2,
        _ => 3,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    #[test]
    fn grid_spacing_and_bounds() {
        let g = depth_grid(4.2);
        assert_eq!(g.len(), 9);
        assert_eq!(g[0], 0.0);
        assert_eq!(*g.last().unwrap(), 4.0);
        assert_eq!(depth_grid(4.0).len(), 9);
    }

    #[test]
    fn attributes_reject_bad_values() {
        assert!(LakeAttributes::new("a", 0.0, 1e5, 0.5, 45.0).is_err());
        assert!(LakeAttributes::new("a", 5.0, -1.0, 0.5, 45.0).is_err());
        assert!(LakeAttributes::new("a", 5.0, 1e5, 0.0, 45.0).is_err());
        assert!(LakeAttributes::new("a", 5.0, 1e5, 0.5, 60.0).is_err());
        assert!(LakeAttributes::new("a", 5.0, 1e5, 0.5, 45.0).is_ok());
    }

    #[test]
    fn observations_sorted_and_deduplicated() {
        let obs = ObservationSet::new(vec![
            Observation { date: d(2010, 6, 2), depth: 1.0, temp: 10.0 },
            Observation { date: d(2010, 6, 1), depth: 2.0, temp: 11.0 },
            Observation { date: d(2010, 6, 1), depth: 0.0, temp: 12.0 },
        ])
        .unwrap();
        assert_eq!(obs.records()[0].depth, 0.0);
        assert_eq!(obs.profile_dates(), vec![d(2010, 6, 1), d(2010, 6, 2)]);
        let dup = ObservationSet::new(vec![
            Observation { date: d(2010, 6, 1), depth: 1.0, temp: 10.0 },
            Observation { date: d(2010, 6, 1), depth: 1.0, temp: 11.0 },
        ]);
        assert!(dup.is_err());
    }

    #[test]
    fn observation_depth_checked_against_lake() {
        let lake = LakeAttributes::new("a", 3.0, 1e5, 0.5, 45.0).unwrap();
        let obs = ObservationSet::new(vec![Observation { date: d(2010, 6, 1), depth: 3.5, temp: 10.0 }]).unwrap();
        assert!(matches!(obs.validate_for(&lake), Err(MtlError::DepthOutOfRange { .. })));
    }

    #[test]
    fn nearest_depth_respects_tolerance() {
        let f = TemperatureField::new(vec![0.0, 0.5, 1.0], d(2010, 1, 1), 1, vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(f.nearest_depth(0.6, 0.25), Some(1));
        assert_eq!(f.nearest_depth(0.74, 0.25), Some(1));
        assert_eq!(f.nearest_depth(1.3, 0.25), None);
        assert_eq!(f.nearest_depth(-0.1, 0.25), Some(0));
    }

    #[test]
    fn seasons_are_calendar_quarters() {
        assert_eq!(season_of(d(2010, 12, 5)), 0);
        assert_eq!(season_of(d(2010, 2, 28)), 0);
        assert_eq!(season_of(d(2010, 4, 1)), 1);
        assert_eq!(season_of(d(2010, 7, 1)), 2);
        assert_eq!(season_of(d(2010, 10, 1)), 3);
    }
}
