//! Dissipative evolution `i dψ/dt = Hψ` from a single-site excitation, and
//! the local decay probabilities `P_j = 2 V_j ∫_0^∞ |ψ_j|² dt`.
//!
//! Two independent propagation routes are provided. The spectral route
//! expands the state in right eigenvectors, `ψ(t) = R e^{-iΛt} R⁻¹ ψ(0)`,
//! and evaluates the time integrals in closed form. The adaptive route
//! integrates the equations of motion with an embedded Runge–Kutta pair.
//! Either one is the oracle for the other.

pub mod integrator;
mod propagator;
pub mod symmetry;

pub use integrator::Tolerances;
pub use propagator::SpectralPropagator;
pub use symmetry::{symmetry_probe, SymmetryReport, SymmetryVariant};

use crate::model::{build_obc_hamiltonian, ComplexMatrix, LatticeParams, StateVector};
use crate::spectral::SpectralError;
use faer::c64;
use integrator::{Dopri5, IntegratorError};
use serde::{Deserialize, Serialize};
use std::time::Instant;
use thiserror::Error;

/// Edge-burst ratios above this value count as a burst.
pub const BURST_THRESHOLD: f64 = 10.0;
pub const DEFAULT_TAIL_EPSILON: f64 = 1e-6;
pub const DEFAULT_SAMPLING_DT: f64 = 0.01;
/// Longest simulated time before an automatic horizon gives up.
pub const DEFAULT_HARD_CAP: f64 = 1e5;
/// Largest `|ΣP - 1|` accepted from the closed form before falling back to
/// quadrature.
pub const CLOSED_FORM_SUM_TOLERANCE: f64 = 1e-10;
/// Pairs closer than this in `|E_m - conj(E_n)|` make the closed form unsafe.
pub const DEGENERACY_GAP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("start site {site} is invalid for n = {n}: the start site must be even (a lossless site) and lie in [2, n-1]")]
    InvalidStartSite { site: usize, n: usize },
    #[error("invalid evolution setting: {0}")]
    InvalidSetting(String),
    #[error("no decay: the loss rate is zero, so local decay probabilities are undefined")]
    NoDecay,
    #[error("spectral degeneracy hazard: |E_m - conj(E_n)| = {gap:.3e} for a contributing pair")]
    DegeneracyHazard { gap: f64 },
    #[error("eigenbasis too ill-conditioned for the closed form (condition {condition:.3e}, sum defect {sum_defect:.3e})")]
    IllConditioned { condition: f64, sum_defect: f64 },
    #[error("automatic horizon did not converge: power {power:.3e} remains at t = {t}")]
    NonConvergentHorizon { t: f64, power: f64 },
    #[error("wall-clock limit exceeded at t = {t}")]
    Timeout { t: f64 },
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Integrator(#[from] IntegratorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "t_max")]
pub enum Horizon {
    Fixed(f64),
    /// Run until the remaining power drops below the tail epsilon.
    Auto,
}

impl std::str::FromStr for Horizon {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "auto" {
            return Ok(Horizon::Auto);
        }
        s.parse::<f64>()
            .map(Horizon::Fixed)
            .map_err(|_| format!("invalid horizon '{s}' (expected a number or 'auto')"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionSpec {
    pub params: LatticeParams,
    /// 1-based, even, in `[2, N-1]`.
    pub start_site: usize,
    pub horizon: Horizon,
    pub tail_epsilon: f64,
    pub sampling_dt: f64,
    pub hard_cap: f64,
    pub tolerances: Tolerances,
}

impl EvolutionSpec {
    pub fn new(params: LatticeParams, start_site: usize) -> Result<Self, DynamicsError> {
        let spec = Self {
            params,
            start_site,
            horizon: Horizon::Auto,
            tail_epsilon: DEFAULT_TAIL_EPSILON,
            sampling_dt: DEFAULT_SAMPLING_DT,
            hard_cap: DEFAULT_HARD_CAP,
            tolerances: Tolerances::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_horizon(mut self, horizon: Horizon) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_tail_epsilon(mut self, eps: f64) -> Self {
        self.tail_epsilon = eps;
        self
    }

    pub fn with_sampling_dt(mut self, dt: f64) -> Self {
        self.sampling_dt = dt;
        self
    }

    pub fn with_params(mut self, params: LatticeParams) -> Self {
        self.params = params;
        self
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        validate_start_site(self.start_site, self.params.n())?;
        if !(self.tail_epsilon > 0.0 && self.tail_epsilon < 1.0) {
            return Err(DynamicsError::InvalidSetting(format!(
                "tail epsilon {} must lie in (0, 1)",
                self.tail_epsilon
            )));
        }
        if !(self.sampling_dt > 0.0 && self.sampling_dt.is_finite()) {
            return Err(DynamicsError::InvalidSetting(format!(
                "sampling dt {} must be positive",
                self.sampling_dt
            )));
        }
        if let Horizon::Fixed(t) = self.horizon {
            if !(t > 0.0 && t.is_finite()) {
                return Err(DynamicsError::InvalidSetting(format!("t_max {t} must be positive")));
            }
        }
        if !(self.hard_cap > 0.0) {
            return Err(DynamicsError::InvalidSetting("hard cap must be positive".into()));
        }
        Ok(())
    }

    pub fn initial_state(&self) -> StateVector {
        StateVector::localized(self.params.n(), self.start_site)
    }
}

pub fn validate_start_site(site: usize, n: usize) -> Result<(), DynamicsError> {
    if site % 2 != 0 || site < 2 || site + 1 > n {
        return Err(DynamicsError::InvalidStartSite { site, n });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Eigenbasis propagator.
    Spectral,
    /// Dormand–Prince 5(4).
    Adaptive,
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "spectral" => Ok(Method::Spectral),
            "adaptive" => Ok(Method::Adaptive),
            other => Err(format!("unknown method '{other}' (expected spectral or adaptive)")),
        }
    }
}

/// States on a uniform time grid `t_k = k·dt` (the last sample may be
/// shorter when a fixed horizon is not a multiple of `dt`).
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub params: LatticeParams,
    pub states: Vec<StateVector>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.time).collect()
    }

    pub fn powers(&self) -> Vec<f64> {
        self.states.iter().map(StateVector::power).collect()
    }

    pub fn final_power(&self) -> f64 {
        self.states.last().map_or(0.0, StateVector::power)
    }
}

/// Sparse view of `-iH` used as the right-hand side of the integrator.
pub(crate) struct Generator {
    entries: Vec<(usize, usize, c64)>,
    dim: usize,
}

impl Generator {
    pub(crate) fn new(h: &ComplexMatrix) -> Self {
        let minus_i = c64::new(0.0, -1.0);
        let mut entries = Vec::new();
        for r in 0..h.nrows() {
            for c in 0..h.ncols() {
                let z = h[(r, c)];
                if z != c64::new(0.0, 0.0) {
                    entries.push((r, c, minus_i * z));
                }
            }
        }
        Self { entries, dim: h.nrows() }
    }

    pub(crate) fn apply(&self, y: &[c64], dy: &mut [c64]) {
        dy[..self.dim].fill(c64::new(0.0, 0.0));
        for &(r, c, z) in &self.entries {
            dy[r] += z * y[c];
        }
    }
}

fn sample_times(spec: &EvolutionSpec) -> impl FnMut(usize) -> Option<f64> + '_ {
    move |k| {
        let t = k as f64 * spec.sampling_dt;
        match spec.horizon {
            Horizon::Fixed(t_max) => {
                if t < t_max - 1e-12 * t_max {
                    Some(t)
                } else if (k as f64 - 1.0) * spec.sampling_dt < t_max - 1e-12 * t_max {
                    Some(t_max)
                } else {
                    None
                }
            }
            Horizon::Auto => Some(t),
        }
    }
}

/// Drives a sampler over the time grid until the horizon is met.
fn sample_trajectory(
    spec: &EvolutionSpec,
    mut state_at: impl FnMut(f64) -> Result<Vec<c64>, DynamicsError>,
) -> Result<Vec<StateVector>, DynamicsError> {
    let mut next = sample_times(spec);
    let mut states = Vec::new();
    let mut k = 0;
    while let Some(t) = next(k) {
        let state = StateVector::from_flat(&state_at(t)?, t);
        let power = state.power();
        states.push(state);
        if spec.horizon == Horizon::Auto {
            if power < spec.tail_epsilon {
                break;
            }
            if t >= spec.hard_cap {
                return Err(DynamicsError::NonConvergentHorizon { t, power });
            }
        }
        k += 1;
    }
    Ok(states)
}

pub(crate) fn evolve_operator(
    h: &ComplexMatrix,
    spec: &EvolutionSpec,
    method: Method,
) -> Result<Vec<StateVector>, DynamicsError> {
    if spec.horizon == Horizon::Auto && spec.params.v() == 0.0 {
        // Without loss the power is conserved exactly and never reaches the tail.
        return Err(DynamicsError::NonConvergentHorizon { t: spec.hard_cap, power: 1.0 });
    }
    let psi0 = spec.initial_state().to_flat();
    match method {
        Method::Spectral => {
            let prop = SpectralPropagator::new(h, &psi0)?;
            if prop.condition() > 1e8 {
                log::warn!(
                    "eigenvector condition {:.2e}: spectral propagation may be inaccurate",
                    prop.condition()
                );
            }
            sample_trajectory(spec, |t| Ok(prop.state_at(t)))
        }
        Method::Adaptive => {
            let gen = Generator::new(h);
            let mut stepper =
                Dopri5::new(|_, y: &[c64], dy: &mut [c64]| gen.apply(y, dy), 0.0, psi0, spec.tolerances);
            sample_trajectory(spec, |t| {
                stepper.advance_to(t)?;
                Ok(stepper.y().to_vec())
            })
        }
    }
}

/// Time evolution of the lattice model from `ψ_S^A = ψ_S^B = 1/√2`.
pub fn evolve(spec: &EvolutionSpec, method: Method) -> Result<Trajectory, DynamicsError> {
    spec.validate()?;
    let h = build_obc_hamiltonian(&spec.params);
    let states = evolve_operator(&h, spec, method)?;
    Ok(Trajectory { params: spec.params, states })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayMethod {
    /// Eigenbasis closed form.
    ClosedForm,
    /// Adaptive integration of the accumulated densities.
    Quadrature,
    /// Trapezoid rule along a sampled trajectory.
    Trapezoid,
}

/// Local decay probabilities and edge-burst diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayProfile {
    pub params: LatticeParams,
    pub start_site: usize,
    /// `P_j^A` at index `j - 1`.
    pub p_a: Vec<f64>,
    pub p_b: Vec<f64>,
    /// Power not yet dissipated when the integration stopped.
    pub residual: f64,
    /// `P_N^A / P_min^A`.
    pub ratio_a: f64,
    /// `P_1^B / P_min^B`.
    pub ratio_b: f64,
    /// Minimum of `P_j^A` over odd `j` in `[S+1, N]`.
    pub p_min_a: f64,
    /// Minimum of `P_j^B` over odd `j` in `[1, S-1]`.
    pub p_min_b: f64,
    pub argmin_a: usize,
    pub argmin_b: usize,
    pub method: DecayMethod,
}

impl DecayProfile {
    pub(crate) fn new(
        params: LatticeParams,
        start_site: usize,
        p_a: Vec<f64>,
        p_b: Vec<f64>,
        residual: f64,
        method: DecayMethod,
    ) -> Self {
        let n = params.n();
        let argmin = |p: &[f64], lo: usize, hi: usize| -> (usize, f64) {
            (lo..=hi)
                .filter(|j| j % 2 == 1)
                .map(|j| (j, p[j - 1]))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap_or((0, f64::NAN))
        };
        let (argmin_a, p_min_a) = argmin(&p_a, start_site + 1, n);
        let (argmin_b, p_min_b) = argmin(&p_b, 1, start_site - 1);
        let ratio_a = p_a[n - 1] / p_min_a;
        let ratio_b = p_b[0] / p_min_b;
        Self {
            params,
            start_site,
            p_a,
            p_b,
            residual,
            ratio_a,
            ratio_b,
            p_min_a,
            p_min_b,
            argmin_a,
            argmin_b,
            method,
        }
    }

    /// `P_N^A`.
    pub fn edge_a(&self) -> f64 {
        self.p_a[self.params.n() - 1]
    }

    /// `P_1^B`.
    pub fn edge_b(&self) -> f64 {
        self.p_b[0]
    }

    pub fn total(&self) -> f64 {
        self.p_a.iter().chain(&self.p_b).sum()
    }

    /// `|ΣP + residual - 1|`.
    pub fn sum_defect(&self) -> f64 {
        (self.total() + self.residual - 1.0).abs()
    }

    pub fn burst_a(&self) -> bool {
        self.ratio_a > BURST_THRESHOLD
    }

    pub fn burst_b(&self) -> bool {
        self.ratio_b > BURST_THRESHOLD
    }
}

/// Splits flat per-site values back into the two chains.
fn split_chains(flat: Vec<f64>, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = flat;
    let b = a.split_off(n);
    (a, b)
}

/// Closed-form decay probabilities for an arbitrary operator.
pub(crate) fn closed_form_decay(
    h: &ComplexMatrix,
    losses: &[f64],
    psi0: &[c64],
) -> Result<Vec<f64>, DynamicsError> {
    let prop = SpectralPropagator::new(h, psi0)?;
    let p = prop.decay_integrals(losses)?;
    let total: f64 = p.iter().sum();
    let sum_defect = (total - 1.0).abs();
    let negative = p.iter().any(|&x| x < -1e-12);
    if sum_defect > CLOSED_FORM_SUM_TOLERANCE || negative {
        return Err(DynamicsError::IllConditioned { condition: prop.condition(), sum_defect });
    }
    Ok(p)
}

/// Adaptive integration of `q_j = ∫|ψ_j|²` alongside `ψ`, until the power
/// drops below `tail_epsilon`. Returns the flat `P_j` and the residual power.
pub(crate) fn quadrature_decay(
    h: &ComplexMatrix,
    losses: &[f64],
    psi0: &[c64],
    spec: &EvolutionSpec,
    deadline: Option<Instant>,
) -> Result<(Vec<f64>, f64), DynamicsError> {
    let dim = psi0.len();
    let lossy: Vec<usize> = (0..dim).filter(|&i| losses[i] > 0.0).collect();
    let gen = Generator::new(h);
    let mut y0 = psi0.to_vec();
    y0.extend(std::iter::repeat_n(c64::new(0.0, 0.0), lossy.len()));
    let rhs = |_: f64, y: &[c64], dy: &mut [c64]| {
        gen.apply(&y[..dim], &mut dy[..dim]);
        for (slot, &i) in lossy.iter().enumerate() {
            dy[dim + slot] = c64::new(y[i].norm_sqr(), 0.0);
        }
    };
    let mut stepper = Dopri5::new(rhs, 0.0, y0, spec.tolerances);
    let chunk = 1.0;
    let power = |y: &[c64]| y[..dim].iter().map(|z| z.norm_sqr()).sum::<f64>();
    loop {
        let t = stepper.t() + chunk;
        stepper.advance_to(t)?;
        let p = power(stepper.y());
        if p < spec.tail_epsilon {
            break;
        }
        if t >= spec.hard_cap {
            return Err(DynamicsError::NonConvergentHorizon { t, power: p });
        }
        if deadline.is_some_and(|d| Instant::now() > d) {
            return Err(DynamicsError::Timeout { t });
        }
    }
    let y = stepper.y();
    let mut flat = vec![0.0; dim];
    for (slot, &i) in lossy.iter().enumerate() {
        flat[i] = 2.0 * losses[i] * y[dim + slot].re;
    }
    Ok((flat, power(y)))
}

/// Closed form first, quadrature when the eigenbasis cannot be trusted.
pub(crate) fn decay_for_operator(
    h: &ComplexMatrix,
    params: &LatticeParams,
    spec: &EvolutionSpec,
    deadline: Option<Instant>,
) -> Result<DecayProfile, DynamicsError> {
    if params.v() == 0.0 {
        return Err(DynamicsError::NoDecay);
    }
    let losses = params.flat_losses();
    let psi0 = spec.initial_state().to_flat();
    let n = params.n();
    match closed_form_decay(h, &losses, &psi0) {
        Ok(flat) => {
            let (p_a, p_b) = split_chains(flat, n);
            Ok(DecayProfile::new(*params, spec.start_site, p_a, p_b, 0.0, DecayMethod::ClosedForm))
        }
        Err(
            err @ (DynamicsError::DegeneracyHazard { .. }
            | DynamicsError::IllConditioned { .. }
            | DynamicsError::Spectral(_)),
        ) => {
            log::info!("closed form rejected ({err}); falling back to quadrature");
            let (flat, residual) = quadrature_decay(h, &losses, &psi0, spec, deadline)?;
            let (p_a, p_b) = split_chains(flat, n);
            Ok(DecayProfile::new(*params, spec.start_site, p_a, p_b, residual, DecayMethod::Quadrature))
        }
        Err(other) => Err(other),
    }
}

/// Local decay probabilities of the lattice model.
pub fn decay_profile(spec: &EvolutionSpec) -> Result<DecayProfile, DynamicsError> {
    decay_profile_with_deadline(spec, None)
}

pub fn decay_profile_with_deadline(
    spec: &EvolutionSpec,
    deadline: Option<Instant>,
) -> Result<DecayProfile, DynamicsError> {
    spec.validate()?;
    let h = build_obc_hamiltonian(&spec.params);
    decay_for_operator(&h, &spec.params, spec, deadline)
}

/// Decay probabilities by the trapezoid rule along a sampled trajectory.
/// The residual is the power left at the last sample.
pub fn decay_profile_trapezoid(
    trajectory: &Trajectory,
    start_site: usize,
) -> Result<DecayProfile, DynamicsError> {
    let params = trajectory.params;
    if params.v() == 0.0 {
        return Err(DynamicsError::NoDecay);
    }
    validate_start_site(start_site, params.n())?;
    let losses = params.flat_losses();
    let mut acc = vec![0.0; losses.len()];
    for pair in trajectory.states.windows(2) {
        let dt = pair[1].time - pair[0].time;
        let (a, b) = (pair[0].to_flat(), pair[1].to_flat());
        for (i, slot) in acc.iter_mut().enumerate() {
            if losses[i] > 0.0 {
                *slot += 0.5 * dt * (a[i].norm_sqr() + b[i].norm_sqr());
            }
        }
    }
    let flat: Vec<f64> = acc.iter().zip(&losses).map(|(q, v)| 2.0 * v * q).collect();
    let (p_a, p_b) = split_chains(flat, params.n());
    Ok(DecayProfile::new(
        params,
        start_site,
        p_a,
        p_b,
        trajectory.final_power(),
        DecayMethod::Trapezoid,
    ))
}

/// Largest violation of `dI/dt = -Σ_j 2V_j |ψ_j|²` over interior samples,
/// with `dI/dt` from centred differences.
pub fn power_balance_check(trajectory: &Trajectory) -> f64 {
    let losses = trajectory.params.flat_losses();
    let powers = trajectory.powers();
    let times = trajectory.times();
    let mut worst = 0.0f64;
    for k in 1..trajectory.states.len().saturating_sub(1) {
        let didt = (powers[k + 1] - powers[k - 1]) / (times[k + 1] - times[k - 1]);
        let flat = trajectory.states[k].to_flat();
        let loss: f64 = flat.iter().zip(&losses).map(|(z, v)| 2.0 * v * z.norm_sqr()).sum();
        worst = worst.max((didt + loss).abs());
    }
    worst
}
