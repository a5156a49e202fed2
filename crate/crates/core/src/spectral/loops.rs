//! Periodic-boundary loop geometry: the upper and lower band curves and the
//! Bloch line on which they overlap.

use super::winding::{k_grid, Branch, MIN_K_SAMPLES};
use super::{dense_eigen, geometry, SpectralError};
use crate::model::{bloch_matrix, branches_real_split, pbc_dispersion};
use faer::c64;
use serde::{Deserialize, Serialize};

/// Two bands belong to the Bloch line at `k` when their imaginary parts agree
/// to this tolerance.
pub const BLOCH_LINE_TOLERANCE: f64 = 1e-9;

/// Bloch line: the momentum interval on which the upper and lower bands lie
/// on a common horizontal line of the complex plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlochLine {
    pub k_min: f64,
    pub k_max: f64,
    /// Imaginary part shared by both bands on the line.
    pub im: f64,
    pub re_min: f64,
    pub re_max: f64,
    /// Number of momentum samples found on the line.
    pub samples: usize,
}

impl BlochLine {
    pub fn k_length(&self) -> f64 {
        self.k_max - self.k_min
    }

    /// Extent of the line in the complex plane.
    pub fn length(&self) -> f64 {
        self.re_max - self.re_min
    }

    pub fn is_point(&self) -> bool {
        self.k_length() == 0.0
    }

    pub fn distance(&self, e: c64) -> f64 {
        geometry::distance_to_segment(e, c64::new(self.re_min, self.im), c64::new(self.re_max, self.im))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopGeometry {
    pub v: f64,
    pub gamma: f64,
    pub delta: f64,
    pub k_samples: usize,
    /// Closed polyline, `k_samples + 1` points (last equals first).
    pub upper_loop: Vec<c64>,
    pub lower_loop: Vec<c64>,
    pub bloch_line: Option<BlochLine>,
}

impl LoopGeometry {
    pub fn polyline(&self, branch: Branch) -> &[c64] {
        match branch {
            Branch::Upper => &self.upper_loop,
            Branch::Lower => &self.lower_loop,
        }
    }

    /// Centroid of the area enclosed by a loop. Where a band runs back and
    /// forth along the Bloch line the mean of the samples can leave the
    /// loop; the area centroid cannot be dragged by such spurs.
    pub fn centroid(&self, branch: Branch) -> c64 {
        let poly = self.polyline(branch);
        geometry::area_centroid(&poly[..poly.len() - 1])
    }

    /// Distance from `e` to the nearest sampled point of either loop.
    pub fn distance_to_nearest_point(&self, e: c64) -> f64 {
        geometry::distance_to_points(e, &self.upper_loop)
            .min(geometry::distance_to_points(e, &self.lower_loop))
    }

    /// Smallest gap `|E_upper(k) - E_lower(k)|` over the grid.
    pub fn min_branch_separation(&self) -> f64 {
        self.upper_loop
            .iter()
            .zip(&self.lower_loop)
            .map(|(a, b)| (a - b).norm())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn bloch_line_length(&self) -> f64 {
        self.bloch_line.as_ref().map_or(0.0, BlochLine::length)
    }
}

/// Upper and lower band energies at one momentum.
fn bands_at(k: f64, v: f64, gamma: f64, delta: f64) -> Result<(c64, c64), SpectralError> {
    if delta == 0.0 {
        let (minus, plus) = pbc_dispersion(k, v, gamma);
        return Ok((plus, minus));
    }
    coupled_bands_at(k, v, gamma, delta)
}

/// Picks, from the four numerical Bloch bands, the pair continuously
/// connected to chain `A`'s `E_+` and `E_-` as `Δ → 0`.
///
/// Each eigenvector factorizes into a cell part (odd/even, an eigenvector of
/// the decoupled-chain matrix with eigenvalue `μ`) and a chain part (A/B).
/// The branch is read off `μ` with the same principal-root rule as
/// [`pbc_dispersion`]; within a branch the A-heavier band is kept.
fn coupled_bands_at(k: f64, v: f64, gamma: f64, delta: f64) -> Result<(c64, c64), SpectralError> {
    let h = bloch_matrix(k, gamma, delta, v);
    let (values, vectors) = dense_eigen(&h)?;
    let fwd = c64::new(1.0 + k.cos(), k.sin());
    let shift = c64::new(0.0, 0.5 * v);

    struct Band {
        energy: c64,
        weight_a: f64,
        upper: bool,
    }
    let bands: Vec<Band> = (0..4)
        .map(|m| {
            let x: Vec<c64> = (0..4).map(|r| vectors[(r, m)]).collect();
            let wa = x[0].norm_sqr() + x[1].norm_sqr();
            let wb = x[2].norm_sqr() + x[3].norm_sqr();
            let (odd, even) = if wa >= wb { (x[0], x[1]) } else { (x[2], x[3]) };
            let mu = if even.norm() >= odd.norm() {
                fwd * odd / even
            } else {
                c64::new(0.0, -v) + fwd.conj() * even / odd
            };
            let root = mu + shift;
            let upper = root.re > 1e-12 || (root.re >= -1e-12 && root.im >= 0.0);
            Band { energy: values[m], weight_a: wa / (wa + wb), upper }
        })
        .collect();

    let mut upper: Vec<&Band> = bands.iter().filter(|b| b.upper).collect();
    let mut lower: Vec<&Band> = bands.iter().filter(|b| !b.upper).collect();
    if upper.len() != 2 {
        // Near an exceptional point the root sign is not resolvable; fall
        // back to ordering by imaginary part.
        let mut sorted: Vec<&Band> = bands.iter().collect();
        sorted.sort_by(|a, b| b.energy.im.total_cmp(&a.energy.im));
        lower = sorted.split_off(2);
        upper = sorted;
    }
    let pick = |pair: &[&Band]| -> c64 {
        let (a, b) = (pair[0], pair[1]);
        if (a.weight_a - b.weight_a).abs() > 1e-9 {
            if a.weight_a > b.weight_a { a.energy } else { b.energy }
        } else if a.energy.re >= b.energy.re {
            a.energy
        } else {
            b.energy
        }
    };
    Ok((pick(&upper), pick(&lower)))
}

/// Samples both loops and locates the Bloch line.
///
/// The Bloch line is the set of `k` where the two bands have equal imaginary
/// parts. For the decoupled chains this is exactly where the discriminant
/// `2 - V²/4 + 2cos k` is nonnegative, an interval centred on `k = 0`; the
/// point `k = 0` is always probed in addition to the grid so that the
/// degenerate single-point line at `V = 4` is found for any `k_samples`.
pub fn loop_geometry(
    v: f64,
    gamma: f64,
    delta: f64,
    k_samples: usize,
) -> Result<LoopGeometry, SpectralError> {
    if k_samples < MIN_K_SAMPLES {
        return Err(SpectralError::TooFewSamples { got: k_samples, min: MIN_K_SAMPLES });
    }
    let mut upper_loop = Vec::with_capacity(k_samples + 1);
    let mut lower_loop = Vec::with_capacity(k_samples + 1);
    let mut on_line: Vec<(f64, c64, c64)> = Vec::new();
    let mut saw_zero = false;
    for k in k_grid(k_samples) {
        let (up, lo) = bands_at(k, v, gamma, delta)?;
        upper_loop.push(up);
        lower_loop.push(lo);
        if k == 0.0 {
            saw_zero = true;
        }
        if same_line(k, up, lo, v, delta) {
            on_line.push((k, up, lo));
        }
    }
    if !saw_zero {
        let (up, lo) = bands_at(0.0, v, gamma, delta)?;
        if same_line(0.0, up, lo, v, delta) {
            on_line.push((0.0, up, lo));
        }
    }
    upper_loop.push(upper_loop[0]);
    lower_loop.push(lower_loop[0]);

    let bloch_line = if on_line.is_empty() {
        None
    } else {
        let k_min = on_line.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let k_max = on_line.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        let res = on_line.iter().flat_map(|p| [p.1.re, p.2.re]);
        let re_min = res.clone().fold(f64::INFINITY, f64::min);
        let re_max = res.fold(f64::NEG_INFINITY, f64::max);
        let centre = on_line
            .iter()
            .min_by(|a, b| a.0.abs().total_cmp(&b.0.abs()))
            .expect("nonempty");
        let im = 0.5 * (centre.1.im + centre.2.im);
        Some(BlochLine { k_min, k_max, im, re_min, re_max, samples: on_line.len() })
    };
    Ok(LoopGeometry { v, gamma, delta, k_samples, upper_loop, lower_loop, bloch_line })
}

fn same_line(k: f64, up: c64, lo: c64, v: f64, delta: f64) -> bool {
    if delta == 0.0 {
        // Analytic branches: equal imaginary parts exactly when the
        // (snapped) discriminant is nonnegative.
        branches_real_split(k, v)
    } else {
        (up.im - lo.im).abs() < BLOCH_LINE_TOLERANCE
    }
}
