//! Daily explicit 1-D thermal model: surface heat exchange, shortwave
//! absorption with Beer-Lambert attenuation, convective overturn, wind-driven
//! surface mixing limited by a potential-energy budget, and hypolimnetic
//! diffusion.

use super::density::water_density_unchecked as rho;
use super::{depth_grid, DriverSeries, LakeAttributes, SimParams, TemperatureField, GRID_SPACING, ICE_FLOOR};
use crate::error::{MtlError, Result};

const DAY_SECONDS: f64 = 86_400.0;
/// volumetric heat capacity of water, J/(m^3 K)
const RHO_CP: f64 = 4.186e6;
const STEFAN_BOLTZMANN: f64 = 5.670_374e-8;
const EMISSIVITY: f64 = 0.97;
const ALBEDO: f64 = 0.07;
const GRAVITY: f64 = 9.81;
const RHO_AIR: f64 = 1.2;
const DRAG: f64 = 1.3e-3;
const LATENT_FUSION: f64 = 3.34e5;
/// molecular diffusivity of heat, m^2/s
const K_MOLECULAR: f64 = 1.4e-7;
/// hypolimnetic eddy diffusivity at full mixing efficiency, m^2/s
const K_HYPOLIMNION: f64 = 4.0e-6;
/// fraction of wind power delivered as mixing energy (scaled by the momentum coefficient)
const WIND_MIX_EFFICIENCY: f64 = 1.5;
/// surface heat flux is spread over at least this many layers (1 m)
const MIN_SURFACE_LAYERS: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Uniform(f64),
    /// one value per grid depth
    Profile(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub initial: InitialState,
    /// disable to zero all surface heat and radiation fluxes
    pub surface_fluxes: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            initial: InitialState::Uniform(4.0),
            surface_fluxes: true,
        }
    }
}

pub fn simulate(lake: &LakeAttributes, drivers: &DriverSeries, params: &SimParams) -> Result<TemperatureField> {
    simulate_with(lake, drivers, params, &SimOptions::default())
}

fn saturation_vapor_pressure(t: f64) -> f64 {
    6.112 * (17.67 * t / (t + 243.5)).exp()
}

/// Net non-solar surface heat flux into the lake, W/m^2.
fn surface_heat_flux(ts: f64, drivers: &DriverSeries, day: usize) -> f64 {
    let ta = drivers.air_temp[day];
    let wind = drivers.wind_speed[day];
    let lw_in = EMISSIVITY * drivers.longwave[day];
    let lw_out = EMISSIVITY * STEFAN_BOLTZMANN * (ts + 273.15).powi(4);
    let sensible = 1.5 * (3.0 + 2.0 * wind) * (ta - ts);
    let e_air = drivers.rel_humidity[day] / 100.0 * saturation_vapor_pressure(ta);
    let latent = (2.0 + 2.5 * wind) * (e_air - saturation_vapor_pressure(ts));
    let rain = drivers.rain[day] * RHO_CP * (ta - ts) / DAY_SECONDS;
    let snow_melt = drivers.snow[day] * 1000.0 * LATENT_FUSION / DAY_SECONDS;
    lw_in - lw_out + sensible + latent + rain - snow_melt
}

/// Fraction of surface shortwave absorbed in each layer; the bottom layer
/// takes everything that reaches the sediment.
fn shortwave_fractions(n: usize, extinction: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let top = (-extinction * k as f64 * GRID_SPACING).exp();
        let bottom = if k + 1 == n {
            0.0
        } else {
            (-extinction * (k + 1) as f64 * GRID_SPACING).exp()
        };
        out.push(top - bottom);
    }
    out
}

/// Mix every density inversion to neutrality (pool-adjacent-violators on
/// layer density). Heat is conserved because layers have equal thickness.
pub fn overturn(t: &mut [f64]) {
    let mut segs: Vec<(usize, f64, f64)> = Vec::with_capacity(t.len()); // (len, temp, density)
    for &v in t.iter() {
        segs.push((1, v, rho(v)));
        while segs.len() >= 2 {
            let (lb, tb, rb) = segs[segs.len() - 1];
            let (la, ta, ra) = segs[segs.len() - 2];
            if ra > rb {
                let len = la + lb;
                let temp = (ta * la as f64 + tb * lb as f64) / len as f64;
                segs.pop();
                *segs.last_mut().expect("two segments") = (len, temp, rho(temp));
            } else {
                break;
            }
        }
    }
    let mut k = 0;
    for (len, temp, _) in segs {
        for v in &mut t[k..k + len] {
            *v = temp;
        }
        k += len;
    }
}

/// Deepen the surface mixed layer while the potential energy needed to
/// homogenize it stays within `energy` (J/m^2). Returns the mixed layer count.
fn wind_mix(t: &mut [f64], energy: f64) -> usize {
    let n = t.len();
    let z = |k: usize| (k as f64 + 0.5) * GRID_SPACING;
    let mut sum_t = t[0];
    let mut sum_rho_z = rho(t[0]) * z(0);
    let mut sum_z = z(0);
    let mut mixed = 0;
    for m in 1..n {
        sum_t += t[m];
        sum_rho_z += rho(t[m]) * z(m);
        sum_z += z(m);
        let mean = sum_t / (m + 1) as f64;
        let delta_pe = GRAVITY * GRID_SPACING * (sum_rho_z - rho(mean) * sum_z);
        if delta_pe <= energy {
            mixed = m;
        } else {
            break;
        }
    }
    if mixed > 0 {
        let mean = t[..=mixed].iter().sum::<f64>() / (mixed + 1) as f64;
        for v in &mut t[..=mixed] {
            *v = mean;
        }
    }
    mixed + 1
}

/// Explicit flux-form diffusion with zero-flux boundaries, sub-stepped for stability.
fn diffuse(t: &mut [f64], flux: &mut Vec<f64>, diffusivity: f64) {
    let n = t.len();
    if n < 2 {
        return;
    }
    let r = diffusivity * DAY_SECONDS / (GRID_SPACING * GRID_SPACING);
    let steps = (r / 0.45).ceil().max(1.0) as usize;
    let r_sub = r / steps as f64;
    flux.resize(n - 1, 0.0);
    for _ in 0..steps {
        for k in 0..n - 1 {
            flux[k] = r_sub * (t[k + 1] - t[k]);
        }
        t[0] += flux[0];
        for k in 1..n - 1 {
            t[k] += flux[k] - flux[k - 1];
        }
        t[n - 1] -= flux[n - 2];
    }
}

pub fn simulate_with(
    lake: &LakeAttributes,
    drivers: &DriverSeries,
    params: &SimParams,
    options: &SimOptions,
) -> Result<TemperatureField> {
    lake.validate()?;
    params.validate()?;
    let depths = depth_grid(lake.max_depth);
    let n = depths.len();
    let n_days = drivers.len();
    let mut t = match &options.initial {
        InitialState::Uniform(v) => vec![*v; n],
        InitialState::Profile(p) => {
            if p.len() != n {
                return Err(MtlError::Shape { expected: n, got: p.len() });
            }
            p.clone()
        }
    };
    let sw_frac = shortwave_fractions(n, lake.clarity);
    let fetch = (lake.surface_area.sqrt() / 1000.0).sqrt();
    let diffusivity = K_MOLECULAR + params.deep_mix_eff * K_HYPOLIMNION;
    let layer_heat = RHO_CP * GRID_SPACING;
    let mut flux = Vec::with_capacity(n);
    let mut temps = vec![0.0; n * n_days];
    let mut mixed_layers = MIN_SURFACE_LAYERS.min(n);

    for day in 0..n_days {
        if options.surface_fluxes {
            let q = surface_heat_flux(t[0], drivers, day);
            let m = mixed_layers.max(MIN_SURFACE_LAYERS).min(n);
            let dt_surface = q * DAY_SECONDS / (layer_heat * m as f64);
            for v in &mut t[..m] {
                *v += dt_surface;
            }
            let sw = params.sw_factor * drivers.shortwave[day] * (1.0 - ALBEDO) * DAY_SECONDS / layer_heat;
            for (v, f) in t.iter_mut().zip(&sw_frac) {
                *v += sw * f;
            }
            if t.iter().any(|v| !v.is_finite()) {
                return Err(MtlError::SimulationDiverged { date: drivers.date(day) });
            }
            for v in t.iter_mut() {
                *v = v.max(ICE_FLOOR);
            }
        }
        overturn(&mut t);
        let u_star_cubed = (RHO_AIR * DRAG / 1000.0).powf(1.5) * drivers.wind_speed[day].powi(3);
        let energy = params.momentum_coeff * WIND_MIX_EFFICIENCY * 1000.0 * u_star_cubed * DAY_SECONDS * fetch;
        mixed_layers = wind_mix(&mut t, energy);
        diffuse(&mut t, &mut flux, diffusivity);
        overturn(&mut t);
        if t.iter().any(|v| !v.is_finite()) {
            return Err(MtlError::SimulationDiverged { date: drivers.date(day) });
        }
        for (k, v) in t.iter().enumerate() {
            temps[k * n_days + day] = *v;
        }
    }
    Ok(TemperatureField::from_parts_unchecked(depths, drivers.start, n_days, temps))
}

/// Fraction of dates whose surface-bottom temperature contrast exceeds 1 degC.
pub fn stratification_fraction(field: &TemperatureField) -> Result<f64> {
    stratification_fraction_with(field, 1.0)
}

pub fn stratification_fraction_with(field: &TemperatureField, threshold: f64) -> Result<f64> {
    if field.n_depths() < 2 {
        return Err(MtlError::InsufficientDepths(field.n_depths()));
    }
    if field.n_dates() == 0 {
        return Ok(0.0);
    }
    let surface = field.at_depth(0);
    let bottom = field.at_depth(field.n_depths() - 1);
    let stratified = surface
        .iter()
        .zip(bottom)
        .filter(|(s, b)| (*s - *b).abs() > threshold)
        .count();
    Ok(stratified as f64 / field.n_dates() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lakesim::{synth_drivers, water_density_unchecked};
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn start() -> NaiveDate {
        NaiveDate::from_ymd_opt(2010, 1, 1).unwrap()
    }

    fn lake(depth: f64) -> LakeAttributes {
        LakeAttributes::new("l", depth, 1e6, 0.6, 45.0).unwrap()
    }

    #[test]
    fn no_forcing_keeps_uniform_column() {
        let drivers = DriverSeries::zeros(start(), 30);
        let opts = SimOptions {
            initial: InitialState::Uniform(10.0),
            surface_fluxes: false,
        };
        let f = simulate_with(&lake(8.0), &drivers, &SimParams::default(), &opts).unwrap();
        assert!(f.temps().iter().all(|v| *v == 10.0));
    }

    #[test]
    fn deeper_lake_stratifies_at_least_as_often() {
        let shallow = lake(4.0);
        let deep = LakeAttributes { max_depth: 30.0, ..shallow.clone() };
        let drivers = synth_drivers(&shallow, 730, 11).unwrap();
        let fs = simulate(&shallow, &drivers, &SimParams::default()).unwrap();
        let fd = simulate(&deep, &drivers, &SimParams::default()).unwrap();
        let s = stratification_fraction(&fs).unwrap();
        let d = stratification_fraction(&fd).unwrap();
        assert!(d >= s, "deep {d} shallow {s}");
        assert!(d > 0.2, "deep lake should stratify in summer: {d}");
    }

    #[test]
    fn simulated_temperatures_are_plausible() {
        let l = lake(12.0);
        let drivers = synth_drivers(&l, 730, 4).unwrap();
        let f = simulate(&l, &drivers, &SimParams::default()).unwrap();
        let surf = f.at_depth(0);
        let max = surf.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = surf.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max > 18.0 && max < 35.0, "summer max {max}");
        assert!(min >= ICE_FLOOR && min < 4.0, "winter min {min}");
    }

    #[test]
    fn no_inversions_after_each_day() {
        let l = lake(15.0);
        let drivers = synth_drivers(&l, 400, 9).unwrap();
        let f = simulate(&l, &drivers, &SimParams::new(1.3, 0.7, 0.2)).unwrap();
        for day in 0..f.n_dates() {
            for k in 0..f.n_depths() - 1 {
                let up = water_density_unchecked(f.get(k, day));
                let down = water_density_unchecked(f.get(k + 1, day));
                assert!(up <= down + 1e-6, "inversion day {day} depth {k}");
            }
        }
    }

    #[test]
    fn stratification_fraction_cases() {
        let iso = TemperatureField::new(vec![0.0, 1.0], start(), 3, vec![5.0; 6]).unwrap();
        assert_eq!(stratification_fraction(&iso).unwrap(), 0.0);
        let strat = TemperatureField::new(vec![0.0, 1.0], start(), 2, vec![25.0, 25.0, 8.0, 8.0]).unwrap();
        assert_eq!(stratification_fraction(&strat).unwrap(), 1.0);
        let one = TemperatureField::new(vec![0.0], start(), 2, vec![1.0, 2.0]).unwrap();
        assert!(matches!(stratification_fraction(&one), Err(MtlError::InsufficientDepths(1))));
    }

    #[test]
    fn stratification_fraction_recount() {
        // surface, mid, bottom over 7 dates; count qualifying dates by hand
        let surface = [10.0, 12.0, 11.5, 20.0, 4.0, 4.0, 6.0];
        let bottom = [10.0, 10.5, 10.6, 8.0, 5.5, 4.9, 4.0];
        let mut temps = surface.to_vec();
        temps.extend_from_slice(&[7.0; 7]);
        temps.extend_from_slice(&bottom);
        let f = TemperatureField::new(vec![0.0, 1.0, 2.0], start(), 7, temps).unwrap();
        let mut count = 0;
        for i in 0..7 {
            if (surface[i] - bottom[i]).abs() > 1.0 {
                count += 1;
            }
        }
        assert_eq!(count, 4);
        assert_eq!(stratification_fraction(&f).unwrap(), count as f64 / 7.0);
    }

    #[test]
    fn divergence_is_reported_with_date() {
        let l = lake(3.0);
        let mut drivers = DriverSeries::zeros(start(), 5);
        drivers.air_temp[2] = f64::NAN;
        let err = simulate(&l, &drivers, &SimParams::default()).unwrap_err();
        match err {
            MtlError::SimulationDiverged { date } => assert_eq!(date, start() + chrono::Duration::days(2)),
            other => panic!("unexpected {other}"),
        }
    }

    proptest! {
        #[test]
        fn overturn_leaves_stable_column(profile in prop::collection::vec(-0.5f64..30.0, 2..40)) {
            let mut t = profile.clone();
            let before: f64 = t.iter().sum();
            overturn(&mut t);
            for w in t.windows(2) {
                prop_assert!(water_density_unchecked(w[0]) <= water_density_unchecked(w[1]) + 1e-6);
            }
            let after: f64 = t.iter().sum();
            prop_assert!((before - after).abs() < 1e-9 * profile.len() as f64);
        }

        #[test]
        fn zero_forcing_conserves_column_mean(
            profile in prop::collection::vec(0.0f64..25.0, 9),
            wind in 0.0f64..10.0,
            deep in 0.0f64..1.0,
        ) {
            let l = lake(4.0);
            let mut drivers = DriverSeries::zeros(start(), 3);
            drivers.wind_speed = vec![wind; 3];
            let opts = SimOptions { initial: InitialState::Profile(profile.clone()), surface_fluxes: false };
            let f = simulate_with(&l, &drivers, &SimParams::new(1.0, 1.0, deep), &opts).unwrap();
            let mut prev = profile.iter().sum::<f64>() / profile.len() as f64;
            for day in 0..3 {
                let mean = (0..f.n_depths()).map(|k| f.get(k, day)).sum::<f64>() / f.n_depths() as f64;
                prop_assert!((mean - prev).abs() < 1e-9, "day {} drift {}", day, mean - prev);
                prev = mean;
            }
        }
    }
}
