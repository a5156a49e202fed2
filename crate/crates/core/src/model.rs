//! Hamiltonians of the coupled lossy two-chain lattice.
//!
//! Two chains `A` and `B` of `N` sites each. Within a chain, sites `j` and
//! `j ± 1` are coupled with strength 1, and sites `j` and `j ± 2` with
//! `±iγ` on chain `A` and `∓iγ` on chain `B`. Every odd site (1-based) of
//! both chains carries a loss rate `V`, and site `j` of `A` couples to site
//! `j` of `B` with strength `Δ`. Writing the equations of motion as
//! `i dψ/dt = H ψ`, the open-boundary Hamiltonian has the block form
//!
//! ```text
//! H = [ H_AA   Δ·I ]
//!     [ Δ·I   H_BB ]
//! ```
//!
//! State vectors use the flat layout `[ψ_1^A … ψ_N^A, ψ_1^B … ψ_N^B]`.
//! All user-facing site indices are 1-based.

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Dense complex operator. Indexing is `(row, col)` over the flat layout.
pub type ComplexMatrix = Mat<c64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("lattice size n = {0} is too small: next-to-nearest couplings need n >= 4")]
    TooFewSites(usize),
    #[error("loss rate v = {0} must be finite and nonnegative")]
    InvalidLoss(f64),
    #[error("parameter {name} = {value} must be finite")]
    NonFinite { name: &'static str, value: f64 },
    #[error("momentum k = {0} is outside [-pi, pi)")]
    MomentumOutOfRange(f64),
}

/// Model parameters: sites per chain, next-to-nearest coupling `gamma`,
/// inter-chain coupling `delta` and loss rate `v` on odd sites.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct LatticeParams {
    n: usize,
    gamma: f64,
    delta: f64,
    v: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    n: usize,
    gamma: f64,
    delta: f64,
    v: f64,
}

impl TryFrom<RawParams> for LatticeParams {
    type Error = ModelError;
    fn try_from(raw: RawParams) -> Result<Self, Self::Error> {
        LatticeParams::new(raw.n, raw.gamma, raw.delta, raw.v)
    }
}

impl From<LatticeParams> for RawParams {
    fn from(p: LatticeParams) -> Self {
        RawParams { n: p.n, gamma: p.gamma, delta: p.delta, v: p.v }
    }
}

impl LatticeParams {
    pub fn new(n: usize, gamma: f64, delta: f64, v: f64) -> Result<Self, ModelError> {
        if n < 4 {
            return Err(ModelError::TooFewSites(n));
        }
        if !gamma.is_finite() {
            return Err(ModelError::NonFinite { name: "gamma", value: gamma });
        }
        if !delta.is_finite() {
            return Err(ModelError::NonFinite { name: "delta", value: delta });
        }
        if !v.is_finite() || v < 0.0 {
            return Err(ModelError::InvalidLoss(v));
        }
        Ok(Self { n, gamma, delta, v })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    /// Dimension of the full operator, `2N`.
    pub fn dim(&self) -> usize {
        2 * self.n
    }

    pub fn with_n(&self, n: usize) -> Result<Self, ModelError> {
        Self::new(n, self.gamma, self.delta, self.v)
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self, ModelError> {
        Self::new(self.n, gamma, self.delta, self.v)
    }

    pub fn with_delta(&self, delta: f64) -> Result<Self, ModelError> {
        Self::new(self.n, self.gamma, delta, self.v)
    }

    pub fn with_v(&self, v: f64) -> Result<Self, ModelError> {
        Self::new(self.n, self.gamma, self.delta, v)
    }

    /// Loss rate at 1-based site `j` (same on both chains).
    pub fn loss_at(&self, j: usize) -> f64 {
        if j % 2 == 1 {
            self.v
        } else {
            0.0
        }
    }

    /// `V_j` for `j = 1..=N`, stored at index `j - 1`.
    pub fn loss_pattern(&self) -> Vec<f64> {
        (1..=self.n).map(|j| self.loss_at(j)).collect()
    }

    /// Loss rates over the flat `2N` layout.
    pub fn flat_losses(&self) -> Vec<f64> {
        let pattern = self.loss_pattern();
        pattern.iter().chain(pattern.iter()).copied().collect()
    }

    /// Number of lossy sites per chain, `ceil(N / 2)`.
    pub fn lossy_sites(&self) -> usize {
        self.n.div_ceil(2)
    }
}

/// Sublattice label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Chain {
    A,
    B,
}

/// Flat index of 1-based site `j` on `chain` for a lattice of `n` sites.
pub fn flat_index(n: usize, chain: Chain, j: usize) -> usize {
    debug_assert!((1..=n).contains(&j));
    match chain {
        Chain::A => j - 1,
        Chain::B => n + j - 1,
    }
}

/// Amplitudes on both chains at a given time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub amps_a: Vec<c64>,
    pub amps_b: Vec<c64>,
    pub time: f64,
}

impl StateVector {
    pub fn from_flat(flat: &[c64], time: f64) -> Self {
        assert!(flat.len() % 2 == 0, "flat state must have even length");
        let n = flat.len() / 2;
        Self { amps_a: flat[..n].to_vec(), amps_b: flat[n..].to_vec(), time }
    }

    pub fn to_flat(&self) -> Vec<c64> {
        self.amps_a.iter().chain(self.amps_b.iter()).copied().collect()
    }

    pub fn n(&self) -> usize {
        self.amps_a.len()
    }

    /// `ψ_j^A = ψ_j^B = δ_{j,S}/√2` at `t = 0`.
    pub fn localized(n: usize, site: usize) -> Self {
        assert!((1..=n).contains(&site), "site {site} outside 1..={n}");
        let mut amps_a = vec![c64::new(0.0, 0.0); n];
        let mut amps_b = amps_a.clone();
        let amp = c64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        amps_a[site - 1] = amp;
        amps_b[site - 1] = amp;
        Self { amps_a, amps_b, time: 0.0 }
    }

    pub fn power_a(&self) -> f64 {
        self.amps_a.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn power_b(&self) -> f64 {
        self.amps_b.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Total power `I = Σ_j |ψ_j^A|² + |ψ_j^B|²`.
    pub fn power(&self) -> f64 {
        self.power_a() + self.power_b()
    }

    pub fn density_a(&self) -> Vec<f64> {
        self.amps_a.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn density_b(&self) -> Vec<f64> {
        self.amps_b.iter().map(|z| z.norm_sqr()).collect()
    }
}

/// Open-boundary Hamiltonian with independent next-to-nearest coefficients:
/// `H_AA[j, j+2] = i·nnn_a`, `H_BB[j, j+2] = i·nnn_b` (and the negatives on
/// the backward couplings). The lattice model itself uses
/// `nnn_a = γ`, `nnn_b = -γ`.
pub(crate) fn obc_hamiltonian_with(
    params: &LatticeParams,
    nnn_a: f64,
    nnn_b: f64,
) -> ComplexMatrix {
    let n = params.n();
    let zero = c64::new(0.0, 0.0);
    let mut h = Mat::<c64>::zeros(2 * n, 2 * n);
    for (offset, nnn) in [(0, nnn_a), (n, nnn_b)] {
        for i in 0..n {
            let r = offset + i;
            let loss = params.loss_at(i + 1);
            h[(r, r)] = if loss != 0.0 { c64::new(0.0, -loss) } else { zero };
            if i + 1 < n {
                h[(r, r + 1)] = c64::new(1.0, 0.0);
                h[(r + 1, r)] = c64::new(1.0, 0.0);
            }
            if i + 2 < n && nnn != 0.0 {
                h[(r, r + 2)] = c64::new(0.0, nnn);
                h[(r + 2, r)] = c64::new(0.0, -nnn);
            }
        }
    }
    if params.delta() != 0.0 {
        for i in 0..n {
            h[(i, n + i)] = c64::new(params.delta(), 0.0);
            h[(n + i, i)] = c64::new(params.delta(), 0.0);
        }
    }
    h
}

/// Real-space Hamiltonian under open boundaries, dimension `2N`.
pub fn build_obc_hamiltonian(params: &LatticeParams) -> ComplexMatrix {
    obc_hamiltonian_with(params, params.gamma(), -params.gamma())
}

/// Four-band Bloch Hamiltonian on the two-site unit cell.
///
/// Basis order: A-odd, A-even, B-odd, B-even. Hopping into the next unit
/// cell carries `e^{+ik}`, which makes the eigenvalues of the A block
/// equal to [`pbc_dispersion`] at the same `k`.
pub fn bloch_hamiltonian(k: f64, params: &LatticeParams) -> Result<ComplexMatrix, ModelError> {
    if !(-PI..PI).contains(&k) {
        return Err(ModelError::MomentumOutOfRange(k));
    }
    Ok(bloch_matrix(k, params.gamma(), params.delta(), params.v()))
}

/// Unchecked Bloch matrix; `k` may lie anywhere (the matrix is 2π-periodic).
pub(crate) fn bloch_matrix(k: f64, gamma: f64, delta: f64, v: f64) -> ComplexMatrix {
    let nnn = -2.0 * gamma * k.sin();
    let fwd = c64::new(1.0 + k.cos(), k.sin());
    let bwd = fwd.conj();
    let mut h = Mat::<c64>::zeros(4, 4);
    for (offset, sign) in [(0usize, 1.0), (2usize, -1.0)] {
        h[(offset, offset)] = c64::new(sign * nnn, -v);
        h[(offset + 1, offset + 1)] = c64::new(sign * nnn, 0.0);
        h[(offset, offset + 1)] = bwd;
        h[(offset + 1, offset)] = fwd;
    }
    for i in 0..2 {
        h[(i, i + 2)] = c64::new(delta, 0.0);
        h[(i + 2, i)] = c64::new(delta, 0.0);
    }
    h
}

/// Discriminant `2 - V²/4 + 2 cos k`, snapped to zero inside its own
/// rounding error so the branch point is not smeared into a spurious
/// `O(√ε)` imaginary part.
fn discriminant(k: f64, v: f64) -> f64 {
    let quarter_v2 = 0.25 * v * v;
    let disc = 2.0 - quarter_v2 + 2.0 * k.cos();
    let scale = 4.0 + quarter_v2;
    if disc.abs() <= 4.0 * f64::EPSILON * scale {
        0.0
    } else {
        disc
    }
}

/// Principal square root of a real number: nonnegative imaginary part when
/// the argument is negative.
fn principal_sqrt(x: f64) -> c64 {
    if x >= 0.0 {
        c64::new(x.sqrt(), 0.0)
    } else {
        c64::new(0.0, (-x).sqrt())
    }
}

/// Decoupled-chain periodic spectrum `(E_-(k), E_+(k))` with
/// `E_∓(k) = -2γ sin k - iV/2 ∓ sqrt(2 - V²/4 + 2 cos k)`.
pub fn pbc_dispersion(k: f64, v: f64, gamma: f64) -> (c64, c64) {
    let base = c64::new(-2.0 * gamma * k.sin(), -0.5 * v);
    let root = principal_sqrt(discriminant(k, v));
    (base - root, base + root)
}

/// Whether both branches share the same imaginary part `-V/2` at `k`.
pub(crate) fn branches_real_split(k: f64, v: f64) -> bool {
    discriminant(k, v) >= 0.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn params(n: usize, gamma: f64, delta: f64, v: f64) -> LatticeParams {
        LatticeParams::new(n, gamma, delta, v).unwrap()
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert_eq!(LatticeParams::new(3, 0.5, 0.05, 4.0), Err(ModelError::TooFewSites(3)));
        assert!(matches!(LatticeParams::new(10, 0.5, 0.05, -1.0), Err(ModelError::InvalidLoss(_))));
        assert!(matches!(
            LatticeParams::new(10, f64::NAN, 0.05, 1.0),
            Err(ModelError::NonFinite { name: "gamma", .. })
        ));
    }

    #[test]
    fn loss_pattern_is_odd_sites_only() {
        let p = params(7, 0.5, 0.05, 4.0);
        assert_eq!(p.loss_pattern(), vec![4.0, 0.0, 4.0, 0.0, 4.0, 0.0, 4.0]);
        assert_eq!(p.lossy_sites(), 4);
        assert_eq!(params(8, 0.5, 0.05, 4.0).lossy_sites(), 4);
    }

    #[test]
    fn coefficient_read_off_n4() {
        let h = build_obc_hamiltonian(&params(4, 0.5, 0.05, 4.0));
        let n = 4;
        // 1-based (j, j') -> 0-based
        assert_eq!(h[(0, 2)], c64::new(0.0, 0.5));
        assert_eq!(h[(2, 0)], c64::new(0.0, -0.5));
        assert_eq!(h[(0, 0)], c64::new(0.0, -4.0));
        assert_eq!(h[(1, 1)], c64::new(0.0, 0.0));
        assert_eq!(h[(1, n + 1)], c64::new(0.05, 0.0));
        assert_eq!(h[(0, 1)], c64::new(1.0, 0.0));
        // chain B carries the opposite next-to-nearest sign
        assert_eq!(h[(n, n + 2)], c64::new(0.0, -0.5));
        assert_eq!(h[(n + 2, n)], c64::new(0.0, 0.5));
        // nothing beyond the open edges
        assert_eq!(h[(0, 3)], c64::new(0.0, 0.0));
        assert_eq!(h[(3, 1 + n)], c64::new(0.0, 0.0));
    }

    #[test]
    fn hermitian_limit_is_two_real_chains() {
        let n = 6;
        let h = build_obc_hamiltonian(&params(n, 0.0, 0.0, 0.0));
        for r in 0..2 * n {
            for c in 0..2 * n {
                let expected = if r / n == c / n && r.abs_diff(c) == 1 { 1.0 } else { 0.0 };
                assert_eq!(h[(r, c)], c64::new(expected, 0.0), "entry ({r}, {c})");
            }
        }
    }

    #[test]
    fn trace_counts_lossy_sites() {
        for n in [4, 5, 10, 11] {
            let p = params(n, 0.3, 0.1, 2.5);
            let h = build_obc_hamiltonian(&p);
            let trace: c64 = (0..2 * n).map(|i| h[(i, i)]).sum();
            let expected = -2.5 * 2.0 * n.div_ceil(2) as f64;
            assert_eq!(trace.re, 0.0);
            assert_abs_diff_eq!(trace.im, expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn bloch_point_at_critical_loss() {
        for gamma in [0.0, 0.5, 1.3] {
            let (em, ep) = pbc_dispersion(0.0, 4.0, gamma);
            assert_eq!(em, ep);
            assert_eq!(em.im, -2.0);
            assert_eq!(em.re.abs(), 0.0);
        }
    }

    #[test]
    fn hermitian_limit_dispersion() {
        let (em, ep) = pbc_dispersion(PI / 3.0, 0.0, 0.0);
        let root3 = 3f64.sqrt();
        assert_abs_diff_eq!(em.re, -root3, epsilon = 1e-14);
        assert_abs_diff_eq!(ep.re, root3, epsilon = 1e-14);
        assert_eq!(em.im, 0.0);
        assert_eq!(ep.im, 0.0);
    }

    #[test]
    fn branch_convention_puts_minus_branch_below() {
        // V = 5: the discriminant is negative for every k.
        for i in 0..64 {
            let k = -PI + 2.0 * PI * i as f64 / 64.0;
            let (em, ep) = pbc_dispersion(k, 5.0, 0.5);
            assert!(em.im < ep.im);
        }
    }

    #[test]
    fn bloch_momentum_is_range_checked() {
        let p = params(10, 0.5, 0.05, 4.0);
        assert!(bloch_hamiltonian(-PI, &p).is_ok());
        assert_eq!(bloch_hamiltonian(PI, &p), Err(ModelError::MomentumOutOfRange(PI)));
    }

    #[test]
    fn bloch_at_k0_has_no_gamma_diagonal() {
        let p = params(10, 0.9, 0.0, 3.0);
        let h = bloch_hamiltonian(0.0, &p).unwrap();
        assert_eq!(h[(0, 0)].re, 0.0);
        assert_eq!(h[(1, 1)].re, 0.0);
        assert_eq!(h[(2, 2)].re, 0.0);
        assert_eq!(h[(0, 1)], c64::new(2.0, 0.0));
    }

    #[test]
    fn localized_initial_state_has_unit_power() {
        let s = StateVector::localized(61, 30);
        assert_abs_diff_eq!(s.power(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.power_a(), 0.5, epsilon = 1e-15);
        assert_eq!(StateVector::from_flat(&s.to_flat(), 0.0), s);
    }

    #[test]
    fn serde_rejects_invalid_params() {
        let ok: LatticeParams =
            serde_json::from_str(r#"{"n":20,"gamma":0.5,"delta":0.05,"v":4.0}"#).unwrap();
        assert_eq!(ok, params(20, 0.5, 0.05, 4.0));
        assert!(serde_json::from_str::<LatticeParams>(r#"{"n":2,"gamma":0.5,"delta":0.05,"v":4.0}"#)
            .is_err());
    }
}
