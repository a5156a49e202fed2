//! Complex spectra of the lattice: dense diagonalization, periodic loops,
//! winding numbers and the classification of open-boundary eigenstates.

pub mod geometry;
pub mod loops;
pub mod winding;

pub use loops::{loop_geometry, BlochLine, LoopGeometry};
pub use winding::{winding_number, winding_value, Branch};

use crate::model::{build_obc_hamiltonian, ComplexMatrix, LatticeParams, StateVector};
use faer::{c64, Mat};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest accepted `‖HΨ - EΨ‖ / ‖H‖_F` for a returned eigenpair.
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;
/// Distance below which an eigenvalue is treated as lying on a curve.
pub const SNAP_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("eigensolver did not converge on a {dim}x{dim} matrix (Frobenius norm {norm:.3e})")]
    NoConvergence { dim: usize, norm: f64 },
    #[error(
        "eigenpairs of the {dim}x{dim} matrix are inaccurate: relative residual {residual:.3e} exceeds {RESIDUAL_TOLERANCE:e}"
    )]
    InaccurateEigenpairs { dim: usize, residual: f64 },
    #[error("matrix is {rows}x{cols}, expected a square matrix of dimension {expected}")]
    DimensionMismatch { rows: usize, cols: usize, expected: usize },
    #[error("{got} momentum samples requested, at least {min} required")]
    TooFewSamples { got: usize, min: usize },
    #[error("reference energy lies on the band curve (distance {distance:.3e})")]
    PointOnCurve { distance: f64 },
    #[error("accumulated winding {value} is not close to an integer; increase k samples")]
    NonIntegerWinding { value: f64 },
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Obc,
    Pbc,
}

/// Eigenvalues and normalized right eigenvectors, sorted by imaginary part
/// descending, then real part ascending.
#[derive(Debug, Clone)]
pub struct SpectrumResult {
    pub eigenvalues: Vec<c64>,
    vectors: Mat<c64>,
    pub params: LatticeParams,
    pub boundary: Boundary,
    /// Largest relative residual over all eigenpairs.
    pub max_residual: f64,
}

impl SpectrumResult {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Columns are the eigenvectors, unit 2-norm, in eigenvalue order.
    pub fn eigenvector_matrix(&self) -> faer::MatRef<'_, c64> {
        self.vectors.as_ref()
    }

    pub fn eigenvector(&self, m: usize) -> StateVector {
        let col: Vec<c64> = (0..self.vectors.nrows()).map(|r| self.vectors[(r, m)]).collect();
        StateVector::from_flat(&col, 0.0)
    }

    pub fn eigenvectors(&self) -> Vec<StateVector> {
        (0..self.len()).map(|m| self.eigenvector(m)).collect()
    }
}

pub(crate) fn frobenius(h: &ComplexMatrix) -> f64 {
    h.norm_l2()
}

/// Unsorted eigenvalues and eigenvectors of a general complex matrix.
pub(crate) fn dense_eigen(h: &ComplexMatrix) -> Result<(Vec<c64>, Mat<c64>), SpectralError> {
    let evd = h
        .eigen()
        .map_err(|_| SpectralError::NoConvergence { dim: h.nrows(), norm: frobenius(h) })?;
    let values = evd.S().column_vector();
    let values: Vec<c64> = (0..h.nrows()).map(|i| values[i]).collect();
    Ok((values, evd.U().to_owned()))
}

/// Full non-Hermitian eigendecomposition of `h`.
pub fn diagonalize(
    h: &ComplexMatrix,
    params: &LatticeParams,
    boundary: Boundary,
) -> Result<SpectrumResult, SpectralError> {
    let dim = h.nrows();
    if h.ncols() != dim || (boundary == Boundary::Obc && dim != params.dim()) {
        return Err(SpectralError::DimensionMismatch {
            rows: h.nrows(),
            cols: h.ncols(),
            expected: params.dim(),
        });
    }
    let (values, raw) = dense_eigen(h)?;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        values[b].im.total_cmp(&values[a].im).then(values[a].re.total_cmp(&values[b].re))
    });
    let eigenvalues: Vec<c64> = order.iter().map(|&m| values[m]).collect();
    let mut vectors = Mat::<c64>::zeros(dim, dim);
    for (col, &m) in order.iter().enumerate() {
        let norm = (0..dim).map(|r| raw[(r, m)].norm_sqr()).sum::<f64>().sqrt();
        for r in 0..dim {
            vectors[(r, col)] = raw[(r, m)] / norm;
        }
    }

    let scale = frobenius(h).max(f64::MIN_POSITIVE);
    let hv = h * &vectors;
    let mut max_residual = 0.0f64;
    for (col, &e) in eigenvalues.iter().enumerate() {
        let res = (0..dim)
            .map(|r| (hv[(r, col)] - e * vectors[(r, col)]).norm_sqr())
            .sum::<f64>()
            .sqrt();
        max_residual = max_residual.max(res / scale);
    }
    if max_residual > RESIDUAL_TOLERANCE {
        return Err(SpectralError::InaccurateEigenpairs { dim, residual: max_residual });
    }
    Ok(SpectrumResult { eigenvalues, vectors, params: *params, boundary, max_residual })
}

/// Open-boundary spectrum of the lattice model.
pub fn obc_spectrum(params: &LatticeParams) -> Result<SpectrumResult, SpectralError> {
    diagonalize(&build_obc_hamiltonian(params), params, Boundary::Obc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateLabel {
    /// Inside a periodic loop with uncoupled chains.
    Skin,
    /// On the Bloch line.
    Extended,
    /// Inside a periodic loop with coupled chains.
    Sfl,
    /// Outside both loops.
    BulkExtendedBySize,
    /// Too close to a loop edge to call.
    BoundaryAmbiguous,
}

impl StateLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            StateLabel::Skin => "skin",
            StateLabel::Extended => "extended",
            StateLabel::Sfl => "sfl",
            StateLabel::BulkExtendedBySize => "bulk-extended-by-size",
            StateLabel::BoundaryAmbiguous => "boundary-ambiguous",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
    None,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
            Side::None => "none",
        }
    }

    fn from_center(center: Option<f64>, n: usize) -> Self {
        match center {
            None => Side::None,
            Some(c) if c < 0.5 * n as f64 => Side::Left,
            Some(_) => Side::Right,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateClassification {
    pub label: StateLabel,
    pub side_a: Side,
    pub side_b: Side,
    /// `Σ_j j (|ψ_j^A|² + |ψ_j^B|²) / N` for the normalized state.
    pub com_ratio: f64,
    /// Centre of mass on chain A alone (1-based), if it carries weight.
    pub center_a: Option<f64>,
    pub center_b: Option<f64>,
}

fn chain_center(density: &[f64]) -> Option<f64> {
    let total: f64 = density.iter().sum();
    if total <= f64::MIN_POSITIVE {
        return None;
    }
    Some(density.iter().enumerate().map(|(i, d)| (i + 1) as f64 * d).sum::<f64>() / total)
}

/// `⟨j⟩/N` of a state normalized over both chains.
pub fn com_ratio(state: &StateVector) -> f64 {
    let n = state.n();
    let weighted: f64 = state
        .density_a()
        .iter()
        .zip(state.density_b())
        .enumerate()
        .map(|(i, (a, b))| (i + 1) as f64 * (a + b))
        .sum();
    weighted / state.power() / n as f64
}

/// Labels each eigenstate by where its eigenvalue sits relative to the
/// periodic loops, and records on which edge each chain's weight sits.
pub fn classify_states(spec: &SpectrumResult, loops: &LoopGeometry) -> Vec<StateClassification> {
    let n = spec.params.n();
    let interior_label =
        if spec.params.delta() == 0.0 { StateLabel::Skin } else { StateLabel::Sfl };
    spec.eigenvalues
        .iter()
        .enumerate()
        .map(|(m, &e)| {
            let on_line = loops.bloch_line.as_ref().is_some_and(|l| l.distance(e) < SNAP_TOLERANCE);
            let near_edge = geometry::distance_to_polyline(e, &loops.upper_loop) < SNAP_TOLERANCE
                || geometry::distance_to_polyline(e, &loops.lower_loop) < SNAP_TOLERANCE;
            let label = if on_line {
                StateLabel::Extended
            } else if near_edge {
                log::warn!("eigenvalue {e} lies within {SNAP_TOLERANCE:e} of a loop edge");
                StateLabel::BoundaryAmbiguous
            } else if geometry::point_in_polygon(e, &loops.upper_loop)
                || geometry::point_in_polygon(e, &loops.lower_loop)
            {
                interior_label
            } else {
                StateLabel::BulkExtendedBySize
            };
            let state = spec.eigenvector(m);
            let center_a = chain_center(&state.density_a());
            let center_b = chain_center(&state.density_b());
            StateClassification {
                label,
                side_a: Side::from_center(center_a, n),
                side_b: Side::from_center(center_b, n),
                com_ratio: com_ratio(&state),
                center_a,
                center_b,
            }
        })
        .collect()
}

/// Which eigenstate `sfl_scaling` follows across sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateSelector {
    /// Most negative `Im E` (fastest decaying).
    MostNegativeImaginary,
    /// Smallest `|Im E|` (slowest decaying).
    SmallestAbsImaginary,
}

impl std::str::FromStr for StateSelector {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "most-negative-imaginary" | "lowest" => Ok(Self::MostNegativeImaginary),
            "smallest-abs-imaginary" | "slowest" => Ok(Self::SmallestAbsImaginary),
            other => Err(format!(
                "unknown selector '{other}' (expected most-negative-imaginary or smallest-abs-imaginary)"
            )),
        }
    }
}

impl SpectrumResult {
    pub fn select(&self, selector: StateSelector) -> usize {
        // Sorted by Im descending: the ends of the list are the candidates.
        match selector {
            StateSelector::MostNegativeImaginary => self.len() - 1,
            StateSelector::SmallestAbsImaginary => (0..self.len())
                .min_by(|&a, &b| {
                    self.eigenvalues[a].im.abs().total_cmp(&self.eigenvalues[b].im.abs())
                })
                .expect("nonempty spectrum"),
        }
    }
}

/// `(N, ⟨j⟩/N)` of the selected eigenstate for each lattice size.
pub fn sfl_scaling(
    template: &LatticeParams,
    n_values: &[usize],
    selector: StateSelector,
) -> Result<Vec<(usize, f64)>, SpectralError> {
    n_values
        .iter()
        .map(|&n| {
            let spec = obc_spectrum(&template.with_n(n)?)?;
            let m = spec.select(selector);
            Ok((n, com_ratio(&spec.eigenvector(m))))
        })
        .collect()
}

/// Largest distance from an open-boundary eigenvalue to the nearest sampled
/// point of the periodic loops.
pub fn max_distance_to_loops(eigenvalues: &[c64], loops: &LoopGeometry) -> f64 {
    eigenvalues.iter().map(|&e| loops.distance_to_nearest_point(e)).fold(0.0, f64::max)
}
