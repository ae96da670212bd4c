use std::f64::consts::PI;

use chrono::{Datelike, NaiveDate};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{DriverSeries, DriverVar, LakeAttributes, LakeId};
use crate::error::{MtlError, Result};
use crate::seed::rng_for;

/// Sampling ranges for a synthetic population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PopulationConfig {
    /// meters, sampled log-uniformly
    pub depth_range: (f64, f64),
    /// square meters, sampled log-uniformly
    pub area_range: (f64, f64),
    /// 1/m, sampled log-uniformly
    pub clarity_range: (f64, f64),
    /// degrees, sampled uniformly
    pub latitude_range: (f64, f64),
    pub id_prefix: String,
}

impl Default for PopulationConfig {
    fn default() -> Self {
        PopulationConfig {
            depth_range: (2.0, 40.0),
            area_range: (1e4, 1e7),
            clarity_range: (0.3, 2.0),
            latitude_range: (42.0, 48.0),
            id_prefix: "lake".into(),
        }
    }
}

fn log_uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    let u: f64 = rng.random();
    (lo.ln() + u * (hi.ln() - lo.ln())).exp().clamp(lo, hi)
}

/// Draw `n` lakes. Deterministic for a fixed seed and config.
pub fn synth_population(n: usize, seed: u64, config: &PopulationConfig) -> Result<Vec<LakeAttributes>> {
    if n < 2 {
        return Err(MtlError::InvalidPopulation(format!("need at least 2 lakes, got {n}")));
    }
    let ranges_ok = |(lo, hi): (f64, f64)| lo > 0.0 && hi >= lo && hi.is_finite();
    if !ranges_ok(config.depth_range) || !ranges_ok(config.area_range) || !ranges_ok(config.clarity_range) {
        return Err(MtlError::InvalidPopulation("sampling ranges must be positive and ordered".into()));
    }
    let (lat_lo, lat_hi) = config.latitude_range;
    if !(35.0..=55.0).contains(&lat_lo) || !(35.0..=55.0).contains(&lat_hi) || lat_hi < lat_lo {
        return Err(MtlError::InvalidPopulation("latitude range must lie within [35, 55]".into()));
    }
    let mut rng = rng_for(seed, "population", &config.id_prefix);
    (0..n)
        .map(|i| {
            let max_depth = log_uniform(&mut rng, config.depth_range);
            let surface_area = log_uniform(&mut rng, config.area_range);
            let clarity = log_uniform(&mut rng, config.clarity_range);
            let latitude = lat_lo + rng.random::<f64>() * (lat_hi - lat_lo);
            LakeAttributes::new(
                LakeId(format!("{}_{:04}", config.id_prefix, i)),
                max_depth,
                surface_area,
                clarity,
                latitude,
            )
        })
        .collect()
}

/// Seasonal sinusoid plus AR(1) noise for one driver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarModel {
    pub mean: f64,
    /// change of the mean per degree latitude above 45 N
    pub lat_slope: f64,
    pub amplitude: f64,
    /// day of year of the seasonal peak
    pub peak_doy: f64,
    pub ar: f64,
    /// stationary standard deviation of the noise
    pub noise_sd: f64,
    /// fraction of noise variance shared by every lake in the region
    pub regional_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DriverConfig {
    pub start: NaiveDate,
    pub shortwave: VarModel,
    pub longwave: VarModel,
    pub air_temp: VarModel,
    pub rel_humidity: VarModel,
    pub wind_speed: VarModel,
    /// total precipitation, split into rain or snow by air temperature
    pub precipitation: VarModel,
}

impl Default for DriverConfig {
    fn default() -> Self {
        let vm = |mean, lat_slope, amplitude, peak_doy, ar, noise_sd, regional_share| VarModel {
            mean,
            lat_slope,
            amplitude,
            peak_doy,
            ar,
            noise_sd,
            regional_share,
        };
        DriverConfig {
            start: NaiveDate::from_ymd_opt(2010, 1, 1).expect("valid date"),
            shortwave: vm(170.0, -3.0, 120.0, 172.0, 0.3, 45.0, 0.6),
            longwave: vm(300.0, -1.5, 45.0, 200.0, 0.5, 20.0, 0.6),
            air_temp: vm(8.0, -0.6, 14.0, 200.0, 0.7, 3.0, 0.7),
            rel_humidity: vm(72.0, 0.2, 5.0, 15.0, 0.5, 8.0, 0.5),
            wind_speed: vm(4.0, 0.05, 0.8, 100.0, 0.4, 1.5, 0.5),
            precipitation: vm(0.0015, 0.0, 0.0008, 180.0, 0.2, 0.004, 0.6),
        }
    }
}

impl DriverConfig {
    fn model(&self, var: DriverVar) -> &VarModel {
        match var {
            DriverVar::Shortwave => &self.shortwave,
            DriverVar::Longwave => &self.longwave,
            DriverVar::AirTemp => &self.air_temp,
            DriverVar::RelHumidity => &self.rel_humidity,
            DriverVar::WindSpeed => &self.wind_speed,
            DriverVar::Rain | DriverVar::Snow => &self.precipitation,
        }
    }
}

fn ar1_series(rng: &mut impl Rng, n: usize, ar: f64) -> Vec<f64> {
    let innov = (1.0 - ar * ar).max(0.0).sqrt();
    let mut e: f64 = rng.sample(StandardNormal);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(e);
        let z: f64 = StandardNormal.sample(rng);
        e = ar * e + innov * z;
    }
    out
}

fn generate(var_key: &str, m: &VarModel, lake: &LakeAttributes, start: NaiveDate, n_days: usize, seed: u64) -> Vec<f64> {
    let regional = ar1_series(&mut rng_for(seed, "regional-driver", var_key), n_days, m.ar);
    let local = ar1_series(
        &mut rng_for(seed, "local-driver", &format!("{}/{}", lake.lake_id, var_key)),
        n_days,
        m.ar,
    );
    let (wr, wl) = (m.regional_share.sqrt(), (1.0 - m.regional_share).max(0.0).sqrt());
    let mean = m.mean + m.lat_slope * (lake.latitude - 45.0);
    let doy0 = start.ordinal0() as f64;
    (0..n_days)
        .map(|i| {
            let doy = doy0 + i as f64;
            let seasonal = m.amplitude * (2.0 * PI * (doy - m.peak_doy) / 365.25).cos();
            mean + seasonal + m.noise_sd * (wr * regional[i] + wl * local[i])
        })
        .collect()
}

/// Synthetic daily forcing for `lake`, deterministic per (lake id, seed).
pub fn synth_drivers(lake: &LakeAttributes, n_days: usize, seed: u64) -> Result<DriverSeries> {
    synth_drivers_with(lake, n_days, seed, &DriverConfig::default())
}

pub fn synth_drivers_with(
    lake: &LakeAttributes,
    n_days: usize,
    seed: u64,
    config: &DriverConfig,
) -> Result<DriverSeries> {
    if n_days < 365 {
        return Err(MtlError::SeriesTooShort { days: n_days, min: 365 });
    }
    let gen = |var: DriverVar| generate(var.key(), config.model(var), lake, config.start, n_days, seed);
    let shortwave: Vec<f64> = gen(DriverVar::Shortwave).into_iter().map(|v| v.max(0.0)).collect();
    let longwave: Vec<f64> = gen(DriverVar::Longwave).into_iter().map(|v| v.max(0.0)).collect();
    let air_temp = gen(DriverVar::AirTemp);
    let rel_humidity: Vec<f64> = gen(DriverVar::RelHumidity)
        .into_iter()
        .map(|v| v.clamp(0.0, 100.0))
        .collect();
    let wind_speed: Vec<f64> = gen(DriverVar::WindSpeed).into_iter().map(|v| v.max(0.0)).collect();
    let precip = generate("precipitation", &config.precipitation, lake, config.start, n_days, seed);
    let mut rain = vec![0.0; n_days];
    let mut snow = vec![0.0; n_days];
    for i in 0..n_days {
        let p = precip[i].max(0.0);
        if air_temp[i] > 0.0 {
            rain[i] = p;
        } else {
            snow[i] = p;
        }
    }
    let series = DriverSeries {
        start: config.start,
        shortwave,
        longwave,
        air_temp,
        rel_humidity,
        wind_speed,
        rain,
        snow,
    };
    series.validate()?;
    Ok(series)
}
