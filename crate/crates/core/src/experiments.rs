//! Parameter sweeps and the figure presets built on them.

use crate::dynamics::{decay_profile_with_deadline, DynamicsError, EvolutionSpec};
use crate::model::{LatticeParams, ModelError};
use crate::output::{self, OutputDir};
use crate::spectral::{
    classify_states, loop_geometry, obc_spectrum, sfl_scaling, SpectralError, StateSelector,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use std::str::FromStr;
use std::time::{Duration, Instant};
use thiserror::Error;

pub const DEFAULT_WALL_LIMIT_S: f64 = 300.0;
pub const DEFAULT_K_SAMPLES: usize = 4001;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error("worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("writing output: {0}")]
    Io(#[from] std::io::Error),
}

macro_rules! string_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(format!(
                        "unknown {} '{}' (expected one of: {})",
                        stringify!($name).to_lowercase(),
                        other,
                        [$($text),+].join(", ")
                    )),
                }
            }
        }

        impl Serialize for $name {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(self.as_str())
            }
        }
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    V,
    Delta,
    Gamma,
    N,
}

string_enum!(Axis { V => "v", Delta => "delta", Gamma => "gamma", N => "n" });

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    /// `P_N^A`.
    PEdgeA,
    /// `P_1^B`.
    PEdgeB,
    RatioA,
    RatioB,
    BlochLineLength,
    /// `-max Im E` of the open-boundary spectrum.
    ImaginaryGap,
}

string_enum!(Observable {
    PEdgeA => "p_edge_a",
    PEdgeB => "p_edge_b",
    RatioA => "ratio_a",
    RatioB => "ratio_b",
    BlochLineLength => "bloch_line_length",
    ImaginaryGap => "imaginary_gap",
});

impl Observable {
    fn is_spectral(self) -> bool {
        matches!(self, Observable::BlochLineLength | Observable::ImaginaryGap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase", tag = "policy", content = "site")]
pub enum StartSitePolicy {
    Fixed(usize),
    /// `(N-1)/2` rounded to the nearest even site.
    Centered,
}

/// Nearest even site to `(N-1)/2`, ties resolved downwards, kept inside
/// `[2, N-1]`.
pub fn centered_start_site(n: usize) -> usize {
    let twice = n.saturating_sub(1);
    // Candidates 2m and 2m + 2 around x = twice / 2, compared in units of 1/2.
    let low = (twice / 4) * 2;
    let high = low + 2;
    let site = if 2 * high - twice < twice - 2 * low { high } else { low };
    site.clamp(2, n.saturating_sub(1).max(2))
}

/// `start, start + step, …` up to `stop` inclusive. Points are snapped to
/// twelve decimals so that `0.15` comes out as `0.15`.
pub fn grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let count = ((stop - start) / step).round() as usize;
    (0..=count).map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSpec {
    pub base: EvolutionSpec,
    pub axis: Axis,
    pub values: Vec<f64>,
    pub observable: Observable,
    pub start_policy: StartSitePolicy,
    /// Momentum samples for spectral observables.
    pub k_samples: usize,
    pub wall_limit_s: f64,
}

impl SweepSpec {
    pub fn new(base: EvolutionSpec, axis: Axis, values: Vec<f64>, observable: Observable) -> Self {
        Self {
            start_policy: StartSitePolicy::Fixed(base.start_site),
            base,
            axis,
            values,
            observable,
            k_samples: DEFAULT_K_SAMPLES,
            wall_limit_s: DEFAULT_WALL_LIMIT_S,
        }
    }

    pub fn with_start_policy(mut self, policy: StartSitePolicy) -> Self {
        self.start_policy = policy;
        self
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.values.is_empty() {
            return Err(ExperimentError::InvalidSweep("values must be nonempty".into()));
        }
        if self.values.iter().any(|x| !x.is_finite()) {
            return Err(ExperimentError::InvalidSweep("values must be finite".into()));
        }
        let increasing = self.values.windows(2).all(|w| w[1] > w[0]);
        let decreasing = self.values.windows(2).all(|w| w[1] < w[0]);
        if !(increasing || decreasing) {
            return Err(ExperimentError::InvalidSweep("values must be strictly monotone".into()));
        }
        if self.axis == Axis::N && self.values.iter().any(|x| x.fract() != 0.0 || *x < 1.0) {
            return Err(ExperimentError::InvalidSweep("lattice sizes must be positive integers".into()));
        }
        if !(self.wall_limit_s > 0.0) {
            return Err(ExperimentError::InvalidSweep("wall limit must be positive".into()));
        }
        Ok(())
    }

    fn params_at(&self, value: f64) -> Result<LatticeParams, ModelError> {
        let p = &self.base.params;
        match self.axis {
            Axis::V => p.with_v(value),
            Axis::Delta => p.with_delta(value),
            Axis::Gamma => p.with_gamma(value),
            Axis::N => p.with_n(value as usize),
        }
    }

    fn start_site_for(&self, n: usize) -> usize {
        match self.start_policy {
            StartSitePolicy::Fixed(s) => s,
            StartSitePolicy::Centered => centered_start_site(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub axis_value: f64,
    pub observable_value: f64,
    pub residual: f64,
    pub wall_time: f64,
    /// `ok`, `residual-over-budget`, `no-decay`, `timeout`, or `error: …`.
    pub status: String,
    pub start_site: usize,
}

fn run_point(spec: &SweepSpec, value: f64) -> SweepRecord {
    let started = Instant::now();
    let limit = Duration::from_secs_f64(spec.wall_limit_s);
    let mut record = SweepRecord {
        axis_value: value,
        observable_value: f64::NAN,
        residual: f64::NAN,
        wall_time: 0.0,
        status: String::new(),
        start_site: 0,
    };
    let outcome = (|| -> Result<(f64, f64, &'static str), ExperimentError> {
        let params = spec.params_at(value)?;
        record.start_site = spec.start_site_for(params.n());
        if spec.observable.is_spectral() {
            return match spec.observable {
                Observable::BlochLineLength => {
                    let loops = loop_geometry(params.v(), params.gamma(), params.delta(), spec.k_samples)?;
                    Ok((loops.bloch_line_length(), 0.0, "ok"))
                }
                _ => {
                    let s = obc_spectrum(&params)?;
                    let top = s.eigenvalues.iter().map(|e| e.im).fold(f64::NEG_INFINITY, f64::max);
                    Ok((-top, s.max_residual, "ok"))
                }
            };
        }
        let evo = EvolutionSpec { params, start_site: record.start_site, ..spec.base.clone() };
        evo.validate()?;
        if params.v() == 0.0 {
            // Nothing is dissipated: every P_j vanishes and all power remains.
            let value = match spec.observable {
                Observable::PEdgeA | Observable::PEdgeB => 0.0,
                _ => f64::NAN,
            };
            return Ok((value, 1.0, "no-decay"));
        }
        let profile = decay_profile_with_deadline(&evo, Some(started + limit))?;
        let value = match spec.observable {
            Observable::PEdgeA => profile.edge_a(),
            Observable::PEdgeB => profile.edge_b(),
            Observable::RatioA => profile.ratio_a,
            Observable::RatioB => profile.ratio_b,
            _ => unreachable!(),
        };
        let status = if profile.residual <= evo.tail_epsilon { "ok" } else { "residual-over-budget" };
        Ok((value, profile.residual, status))
    })();
    record.wall_time = started.elapsed().as_secs_f64();
    match outcome {
        Ok((value, residual, status)) => {
            record.observable_value = value;
            record.residual = residual;
            record.status = if started.elapsed() > limit { "timeout".into() } else { status.into() };
        }
        Err(ExperimentError::Dynamics(DynamicsError::Timeout { .. })) => record.status = "timeout".into(),
        Err(e) => record.status = format!("error: {e}").replace(',', ";"),
    }
    log::info!(
        "{}={} {}={} ({:.2}s, {})",
        spec.axis.as_str(),
        value,
        spec.observable.as_str(),
        record.observable_value,
        record.wall_time,
        record.status
    );
    record
}

/// One record per axis value, in the order of `spec.values`. `jobs = None`
/// uses one worker per logical core.
pub fn run_sweep(spec: &SweepSpec, jobs: Option<usize>) -> Result<Vec<SweepRecord>, ExperimentError> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| ExperimentError::Pool(e.to_string()))?;
    Ok(pool.install(|| spec.values.par_iter().map(|&v| run_point(spec, v)).collect()))
}

/// Index of the largest finite observable value.
pub fn argmax(records: &[SweepRecord]) -> Option<usize> {
    records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.observable_value.is_finite())
        .max_by(|a, b| a.1.observable_value.total_cmp(&b.1.observable_value))
        .map(|(i, _)| i)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Fig1b,
    Fig1c,
    Fig2a,
    Fig2b,
    Fig3a,
    Fig3b,
    Fig3c,
    Fig3d,
    Fig3aInset,
    Fig3bInset,
}

string_enum!(Figure {
    Fig1b => "fig1b",
    Fig1c => "fig1c",
    Fig2a => "fig2a",
    Fig2b => "fig2b",
    Fig3a => "fig3a",
    Fig3b => "fig3b",
    Fig3c => "fig3c",
    Fig3d => "fig3d",
    Fig3aInset => "fig3a_inset",
    Fig3bInset => "fig3b_inset",
});

pub const FIG3_N: usize = 61;
pub const FIG3_START: usize = 30;
pub const FIG3B_INSET_SIZES: [usize; 6] = [41, 81, 161, 321, 641, 1241];
pub const FIG2B_SIZES: [usize; 4] = [20, 40, 80, 160];

/// Lattice of the edge-burst figures: `N = 61`, `γ = 0.5`, `Δ = 0.05`, `V = 4`.
pub fn fig3_params() -> LatticeParams {
    LatticeParams::new(FIG3_N, 0.5, 0.05, 4.0).expect("valid preset")
}

pub fn fig3_spec() -> EvolutionSpec {
    EvolutionSpec::new(fig3_params(), FIG3_START).expect("valid preset")
}

/// The sweep behind a sweep-type figure, or `None` for the other panels.
pub fn figure_sweep(figure: Figure) -> Option<SweepSpec> {
    let base = fig3_spec();
    let sweep = match figure {
        Figure::Fig3aInset => SweepSpec::new(base, Axis::V, grid(0.0, 8.0, 0.25), Observable::PEdgeA),
        Figure::Fig3c => SweepSpec::new(base, Axis::Delta, grid(0.0, 0.5, 0.025), Observable::PEdgeA),
        Figure::Fig3d => SweepSpec::new(base, Axis::Gamma, grid(0.0, 1.5, 0.05), Observable::PEdgeA),
        Figure::Fig3bInset => SweepSpec::new(
            base,
            Axis::N,
            FIG3B_INSET_SIZES.iter().map(|&n| n as f64).collect(),
            Observable::PEdgeB,
        )
        .with_start_policy(StartSitePolicy::Centered),
        _ => return None,
    };
    Some(sweep)
}

#[derive(Debug, Clone, Copy)]
pub struct ReproduceOptions {
    pub jobs: Option<usize>,
    pub k_samples: usize,
    pub wall_limit_s: f64,
}

impl Default for ReproduceOptions {
    fn default() -> Self {
        Self { jobs: None, k_samples: DEFAULT_K_SAMPLES, wall_limit_s: DEFAULT_WALL_LIMIT_S }
    }
}

fn write_spectra(out: &mut OutputDir, v: f64, k_samples: usize) -> Result<Value, ExperimentError> {
    let mut summary = serde_json::Map::new();
    let loops = loop_geometry(v, 0.5, 0.05, k_samples)?;
    out.write("pbc_loops.csv", &output::loops_csv(&loops))?;
    for n in [20, 70] {
        let params = LatticeParams::new(n, 0.5, 0.05, v)?;
        let spectrum = obc_spectrum(&params)?;
        let classes = classify_states(&spectrum, &loops);
        out.write(&format!("spectrum_n{n}.csv"), &output::spectrum_csv(&spectrum, &classes))?;
        let distance = crate::spectral::max_distance_to_loops(&spectrum.eigenvalues, &loops);
        summary.insert(format!("max_distance_to_pbc_n{n}"), json!(distance));
    }
    summary.insert("bloch_line_length".into(), json!(loops.bloch_line_length()));
    Ok(Value::Object(summary))
}

/// Runs a figure preset and writes its tables plus a `<figure>.json`
/// sidecar; returns the sidecar contents.
pub fn reproduce(figure: Figure, out: &mut OutputDir, opts: &ReproduceOptions) -> Result<Value, ExperimentError> {
    let summary = match figure {
        Figure::Fig1b => write_spectra(out, 2.0, opts.k_samples)?,
        Figure::Fig1c => write_spectra(out, 4.0, opts.k_samples)?,
        Figure::Fig2a => {
            let params = LatticeParams::new(20, 0.5, 0.05, 4.0)?;
            let spectrum = obc_spectrum(&params)?;
            let loops = loop_geometry(4.0, 0.5, 0.05, opts.k_samples)?;
            let classes = classify_states(&spectrum, &loops);
            out.write("spectrum_n20.csv", &output::spectrum_csv(&spectrum, &classes))?;
            out.write("modes_n20.csv", &output::modes_csv(&spectrum))?;
            let left = classes.iter().filter(|c| c.side_a == crate::spectral::Side::Left).count();
            json!({ "states": classes.len(), "left_in_a": left, "right_in_a": classes.len() - left })
        }
        Figure::Fig2b => {
            let mut table = String::from("v,n,com_ratio\n");
            let mut summary = serde_json::Map::new();
            for v in [2.0, 4.0] {
                let template = LatticeParams::new(FIG2B_SIZES[0], 0.5, 0.05, v)?;
                let rows = sfl_scaling(&template, &FIG2B_SIZES, StateSelector::MostNegativeImaginary)?;
                table.push_str(output::scaling_csv(v, &rows).split_once('\n').expect("header").1);
                let (lo, hi) = rows
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, r)| (lo.min(r), hi.max(r)));
                summary.insert(format!("spread_v{v}"), json!(hi - lo));
            }
            out.write("sfl_scaling.csv", &table)?;
            Value::Object(summary)
        }
        Figure::Fig3a | Figure::Fig3b => {
            let profile = crate::dynamics::decay_profile(&fig3_spec())?;
            out.write("decay.csv", &output::decay_csv(&profile))?;
            output::decay_sidecar(&profile)
        }
        Figure::Fig3c | Figure::Fig3d | Figure::Fig3aInset | Figure::Fig3bInset => {
            let mut sweep = figure_sweep(figure).expect("sweep figure");
            sweep.k_samples = opts.k_samples;
            sweep.wall_limit_s = opts.wall_limit_s;
            let records = run_sweep(&sweep, opts.jobs)?;
            out.write("sweep.csv", &output::sweep_csv(&sweep, &records))?;
            let best = argmax(&records).map(|i| records[i].axis_value);
            json!({ "sweep": sweep, "argmax": best, "records": records })
        }
    };
    let sidecar = json!({ "figure": figure.as_str(), "summary": summary });
    out.write(&format!("{}.json", figure.as_str()), &output::to_json(&sidecar))?;
    Ok(sidecar)
}
