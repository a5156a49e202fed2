//! Spectral winding number of the decoupled-chain bands around a reference
//! energy, accumulated as the total change of `arg(E(k) - E_0)` over one
//! Brillouin zone.

use super::SpectralError;
use crate::model::pbc_dispersion;
use faer::c64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Minimum number of momentum samples accepted by the winding and loop
/// routines.
pub const MIN_K_SAMPLES: usize = 1000;
/// Closest approach to the curve below which the winding is undefined.
pub const ON_CURVE_TOLERANCE: f64 = 1e-9;
/// Largest accepted distance of the accumulated winding from an integer.
pub const INTEGRALITY_TOLERANCE: f64 = 1e-3;

/// `Upper` is `E_+`, `Lower` is `E_-`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Upper,
    Lower,
}

impl Branch {
    pub fn energy(self, k: f64, v: f64, gamma: f64) -> c64 {
        let (minus, plus) = pbc_dispersion(k, v, gamma);
        match self {
            Branch::Upper => plus,
            Branch::Lower => minus,
        }
    }
}

impl std::str::FromStr for Branch {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "upper" | "plus" | "+" => Ok(Branch::Upper),
            "lower" | "minus" | "-" => Ok(Branch::Lower),
            other => Err(format!("unknown branch '{other}' (expected upper or lower)")),
        }
    }
}

/// Uniform momentum grid `k_i = -π + 2π i / K`, `i = 0..K`.
pub fn k_grid(k_samples: usize) -> impl Iterator<Item = f64> {
    (0..k_samples).map(move |i| -PI + 2.0 * PI * i as f64 / k_samples as f64)
}

/// Winding before rounding: `(1/2π) Σ_i arg[(E(k_{i+1}) - E_0) / (E(k_i) - E_0)]`
/// over the closed grid.
pub fn winding_value(
    e0: c64,
    v: f64,
    gamma: f64,
    branch: Branch,
    k_samples: usize,
) -> Result<f64, SpectralError> {
    if k_samples < MIN_K_SAMPLES {
        return Err(SpectralError::TooFewSamples { got: k_samples, min: MIN_K_SAMPLES });
    }
    let shifted: Vec<c64> = k_grid(k_samples).map(|k| branch.energy(k, v, gamma) - e0).collect();
    let closest = shifted.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    if closest < ON_CURVE_TOLERANCE {
        return Err(SpectralError::PointOnCurve { distance: closest });
    }
    let total: f64 = shifted
        .iter()
        .zip(shifted.iter().cycle().skip(1))
        .map(|(&a, &b)| (b / a).arg())
        .sum();
    Ok(total / (2.0 * PI))
}

/// Integer winding of `branch` around `e0`.
pub fn winding_number(
    e0: c64,
    v: f64,
    gamma: f64,
    branch: Branch,
    k_samples: usize,
) -> Result<i32, SpectralError> {
    let value = winding_value(e0, v, gamma, branch, k_samples)?;
    let rounded = value.round();
    let residual = (value - rounded).abs();
    if residual > INTEGRALITY_TOLERANCE {
        return Err(SpectralError::NonIntegerWinding { value });
    }
    if residual > 1e-6 {
        log::warn!("winding {value} is {residual:.2e} from an integer; consider more k samples");
    }
    Ok(rounded as i32)
}
