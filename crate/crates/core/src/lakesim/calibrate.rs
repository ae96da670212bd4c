use serde::{Deserialize, Serialize};

use super::{simulate, DriverSeries, LakeAttributes, ObservationSet, SimParams};
use crate::error::{MtlError, Result};
use crate::mtl::rmse;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationConfig {
    /// maximum simplex iterations
    pub max_iterations: usize,
    /// initial simplex step per parameter
    pub initial_step: [f64; 3],
    pub lower: [f64; 3],
    pub upper: [f64; 3],
    /// stop once the simplex objective spread falls below this
    pub f_tolerance: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            max_iterations: 200,
            initial_step: [0.25, 0.3, 0.25],
            lower: [0.2, 0.05, 0.0],
            upper: [3.0, 5.0, 1.0],
            f_tolerance: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub params: SimParams,
    pub rmse: f64,
    /// objective at the uncalibrated defaults
    pub pb0_rmse: f64,
    pub iterations: usize,
    pub evaluations: usize,
}

pub fn calibrate(lake: &LakeAttributes, drivers: &DriverSeries, obs: &ObservationSet) -> Result<Calibration> {
    calibrate_with(lake, drivers, obs, &CalibrationConfig::default())
}

/// Nelder-Mead over the three simulation parameters, started at the PB0
/// defaults. The returned parameters are the best point ever evaluated, so
/// their RMSE never exceeds the PB0 RMSE.
pub fn calibrate_with(
    lake: &LakeAttributes,
    drivers: &DriverSeries,
    obs: &ObservationSet,
    config: &CalibrationConfig,
) -> Result<Calibration> {
    if obs.is_empty() {
        return Err(MtlError::NoData(format!("no observations to calibrate lake {}", lake.lake_id)));
    }
    let clamp = |x: [f64; 3]| -> [f64; 3] {
        let mut out = x;
        for i in 0..3 {
            out[i] = x[i].clamp(config.lower[i], config.upper[i]);
        }
        out
    };
    let mut evaluations = 0usize;
    let mut best: Option<([f64; 3], f64)> = None;
    let mut objective = |x: [f64; 3]| -> Result<f64> {
        let p = clamp(x);
        evaluations += 1;
        let field = simulate(lake, drivers, &SimParams::from_array(p))?;
        let f = rmse(&field, obs)?;
        if best.is_none_or(|(_, b)| f < b) {
            best = Some((p, f));
        }
        Ok(f)
    };

    let x0 = SimParams::default().to_array();
    let pb0_rmse = objective(x0)?;
    let mut simplex: Vec<([f64; 3], f64)> = vec![(x0, pb0_rmse)];
    for i in 0..3 {
        let mut x = x0;
        x[i] += config.initial_step[i];
        let x = clamp(x);
        simplex.push((x, objective(x)?));
    }

    let mut iterations = 0;
    while iterations < config.max_iterations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex[3].1 - simplex[0].1 < config.f_tolerance {
            break;
        }
        iterations += 1;
        let mut centroid = [0.0; 3];
        for (x, _) in &simplex[..3] {
            for i in 0..3 {
                centroid[i] += x[i] / 3.0;
            }
        }
        let along = |coef: f64| -> [f64; 3] {
            let worst = simplex[3].0;
            let mut out = [0.0; 3];
            for i in 0..3 {
                out[i] = centroid[i] + coef * (worst[i] - centroid[i]);
            }
            clamp(out)
        };
        let xr = along(-1.0);
        let fr = objective(xr)?;
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = objective(xe)?;
            simplex[3] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[2].1 {
            simplex[3] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[3].1 {
                let xc = along(-0.5);
                (xc, objective(xc)?)
            } else {
                let xc = along(0.5);
                (xc, objective(xc)?)
            };
            if fc < fr.min(simplex[3].1) {
                simplex[3] = (xc, fc);
            } else {
                let x_best = simplex[0].0;
                for v in simplex.iter_mut().skip(1) {
                    let mut x = [0.0; 3];
                    for i in 0..3 {
                        x[i] = x_best[i] + 0.5 * (v.0[i] - x_best[i]);
                    }
                    let x = clamp(x);
                    *v = (x, objective(x)?);
                }
            }
        }
    }

    let (p, f) = best.expect("defaults were evaluated");
    Ok(Calibration {
        params: SimParams::from_array(p),
        rmse: f,
        pb0_rmse,
        iterations,
        evaluations,
    })
}
