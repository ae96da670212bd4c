use crate::error::{MtlError, Result};

const T_MAX_DENSITY: f64 = 3.9863;
const A: f64 = 288.9414;
const C: f64 = 68.12963;
const K: f64 = 508929.2;

/// Fresh-water density (kg/m^3) for temperatures in [-0.5, 40] degC.
pub fn water_density(temp: f64) -> Result<f64> {
    if !(-0.5..=40.0).contains(&temp) {
        return Err(MtlError::DensityDomain(temp));
    }
    Ok(water_density_unchecked(temp))
}

/// The density polynomial without the domain check; used inside the
/// simulator and the physics penalty where inputs can stray slightly.
#[inline]
pub fn water_density_unchecked(temp: f64) -> f64 {
    let b = temp - T_MAX_DENSITY;
    1000.0 * (1.0 - (temp + A) * b * b / (K * (temp + C)))
}

/// d(rho)/dT of [`water_density_unchecked`].
#[inline]
pub fn water_density_derivative(temp: f64) -> f64 {
    let a = temp + A;
    let b = temp - T_MAX_DENSITY;
    let c = temp + C;
    let num = (b * b + 2.0 * a * b) * c - a * b * b;
    -1000.0 * num / (K * c * c)
}
