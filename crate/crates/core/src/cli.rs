//! Command-line front end.
//!
//! Settings come from three layers: built-in defaults, an optional
//! `--config` file, and flags, with later layers winning. The merged settings
//! are written into every manifest so a run can be repeated with
//! `--config manifest.json`.

use crate::dynamics::{
    self, decay_profile, evolve, power_balance_check, DynamicsError, EvolutionSpec, Horizon, Method,
    Tolerances,
};
use crate::experiments::{
    self, centered_start_site, reproduce, run_sweep, Axis, ExperimentError, Figure, Observable,
    ReproduceOptions, StartSitePolicy, SweepSpec,
};
use crate::model::{LatticeParams, ModelError};
use crate::output::{self, Manifest, OutputDir};
use crate::spectral::{
    classify_states, loop_geometry, obc_spectrum, sfl_scaling, winding_value, Branch, SpectralError,
    StateSelector,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use faer::c64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

pub const EXIT_COMPUTE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const OUT_DIR_ENV: &str = "NHLAT_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "nhlat", version, about = "Coupled lossy chains: spectra, winding, decay and edge burst")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Sites per chain.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub gamma: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub delta: Option<f64>,
    /// Loss rate on odd sites.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub v: Option<f64>,
    /// 1-based even site excited initially (default: nearest even site to (N-1)/2).
    #[arg(long, global = true)]
    pub start_site: Option<usize>,
    /// Evolution horizon: a time or `auto`.
    #[arg(long, global = true)]
    pub t_max: Option<String>,
    #[arg(long, global = true)]
    pub tail_eps: Option<f64>,
    #[arg(long, global = true)]
    pub sampling_dt: Option<f64>,
    #[arg(long, global = true)]
    pub k_samples: Option<usize>,
    /// Output directory (falls back to $NHLAT_OUT_DIR, then `out`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Key-value settings file (TOML) or a manifest written by an earlier run.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for sweeps (default: logical cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Open-boundary spectrum with state labels, plus the periodic loops.
    Spectrum,
    /// Eigenstate densities; with --sizes, the localization-centre scaling table.
    Modes {
        #[arg(long)]
        selector: Option<String>,
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
    },
    /// Winding number of one periodic band around a reference energy.
    Winding {
        /// Reference energy, e.g. `-0.1-0.4i`.
        #[arg(long, allow_hyphen_values = true)]
        e0: Option<String>,
        #[arg(long)]
        branch: Option<String>,
    },
    /// Time evolution from the single-site initial state.
    Evolve {
        #[arg(long)]
        method: Option<String>,
    },
    /// Local decay probabilities and edge-burst ratios.
    Decay,
    /// Observable along one parameter axis.
    Sweep {
        #[arg(long)]
        axis: Option<String>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Option<Vec<f64>>,
        /// `start:stop:step`, an alternative to --values.
        #[arg(long)]
        range: Option<String>,
        #[arg(long)]
        observable: Option<String>,
        /// `fixed` or `centered`.
        #[arg(long)]
        start_policy: Option<String>,
        /// Per-point wall-clock limit in seconds.
        #[arg(long)]
        wall_limit: Option<f64>,
    },
    /// Regenerate the data behind a figure panel.
    Reproduce { figure: Option<String> },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Modes { .. } => "modes",
            Command::Winding { .. } => "winding",
            Command::Evolve { .. } => "evolve",
            Command::Decay => "decay",
            Command::Sweep { .. } => "sweep",
            Command::Reproduce { .. } => "reproduce",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HorizonValue {
    Time(f64),
    Text(String),
}

/// Every setting the CLI understands, as read from a config file and as
/// recorded in manifests.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start_site: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<HorizonValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampling_dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hard_cap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rtol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub atol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e0: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub branch: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selector: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axis: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observable: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start_policy: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_limit: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub figure: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Compute(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Compute(_) => EXIT_COMPUTE,
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<SpectralError> for CliError {
    fn from(e: SpectralError) -> Self {
        match e {
            SpectralError::TooFewSamples { .. } | SpectralError::PointOnCurve { .. } => {
                CliError::Usage(e.to_string())
            }
            SpectralError::Model(m) => m.into(),
            other => CliError::Compute(other.to_string()),
        }
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::InvalidStartSite { .. } | DynamicsError::InvalidSetting(_) | DynamicsError::Model(_) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Compute(other.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::InvalidSweep(_) => CliError::Usage(e.to_string()),
            ExperimentError::Model(m) => m.into(),
            ExperimentError::Spectral(s) => s.into(),
            ExperimentError::Dynamics(d) => d.into(),
            other => CliError::Compute(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Compute(format!("writing output: {e}"))
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Parses `a+bi`, `a-bi`, `a`, `bi`, `i` and `-i`.
pub fn parse_complex(text: &str) -> Result<c64, String> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || format!("invalid complex number '{text}' (expected a+bi)");
    let Some(body) = s.strip_suffix('i') else {
        return s.parse::<f64>().map(|re| c64::new(re, 0.0)).map_err(|_| bad());
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| matches!(bytes[i], b'+' | b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(i) => (&body[..i], &body[i..]),
        None => ("", body),
    };
    let re = if re.is_empty() { 0.0 } else { re.parse::<f64>().map_err(|_| bad())? };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        x => x.parse::<f64>().map_err(|_| bad())?,
    };
    Ok(c64::new(re, im))
}

fn parse_range(text: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<f64> = text
        .split(':')
        .map(str::parse::<f64>)
        .collect::<Result<_, _>>()
        .map_err(|_| usage(format!("invalid range '{text}' (expected start:stop:step)")))?;
    match parts[..] {
        [start, stop, step] if step > 0.0 && stop >= start => Ok(experiments::grid(start, stop, step)),
        _ => Err(usage(format!("invalid range '{text}': need start <= stop and step > 0"))),
    }
}

/// Reads a TOML settings file, or the `config` object of a JSON manifest.
pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    if let Ok(Value::Object(map)) = serde_json::from_str::<Value>(&text) {
        let inner = map.get("config").cloned().unwrap_or(Value::Object(map));
        return serde_json::from_value(inner)
            .map_err(|e| usage(format!("invalid config {}: {e}", path.display())));
    }
    toml::from_str(&text).map_err(|e| usage(format!("invalid config {}: {e}", path.display())))
}

/// Overlays command-line flags on the file settings.
pub fn merge(cli: &Cli, file: RunConfig) -> Result<RunConfig, CliError> {
    let c = &cli.common;
    let mut cfg = file;
    cfg.command = Some(cli.command.name().to_string());
    macro_rules! overlay {
        ($($field:ident),*) => { $(if c.$field.is_some() { cfg.$field = c.$field.clone(); })* };
    }
    overlay!(n, gamma, delta, v, start_site, tail_eps, sampling_dt, k_samples, format, jobs);
    if let Some(t) = &c.t_max {
        cfg.t_max = Some(match t.parse::<f64>() {
            Ok(x) => HorizonValue::Time(x),
            Err(_) => HorizonValue::Text(t.clone()),
        });
    }
    match &cli.command {
        Command::Spectrum | Command::Decay => {}
        Command::Modes { selector, sizes } => {
            if selector.is_some() {
                cfg.selector = selector.clone();
            }
            if sizes.is_some() {
                cfg.sizes = sizes.clone();
            }
        }
        Command::Winding { e0, branch } => {
            if e0.is_some() {
                cfg.e0 = e0.clone();
            }
            if branch.is_some() {
                cfg.branch = branch.clone();
            }
        }
        Command::Evolve { method } => {
            if method.is_some() {
                cfg.method = method.clone();
            }
        }
        Command::Sweep { axis, values, range, observable, start_policy, wall_limit } => {
            if axis.is_some() {
                cfg.axis = axis.clone();
            }
            if let Some(r) = range {
                cfg.values = Some(parse_range(r)?);
            }
            if values.is_some() {
                cfg.values = values.clone();
            }
            if observable.is_some() {
                cfg.observable = observable.clone();
            }
            if start_policy.is_some() {
                cfg.start_policy = start_policy.clone();
            }
            if wall_limit.is_some() {
                cfg.wall_limit = *wall_limit;
            }
        }
        Command::Reproduce { figure } => {
            if figure.is_some() {
                cfg.figure = figure.clone();
            }
        }
    }
    Ok(cfg)
}

impl RunConfig {
    pub fn params(&self) -> Result<LatticeParams, CliError> {
        Ok(LatticeParams::new(
            self.n.unwrap_or(experiments::FIG3_N),
            self.gamma.unwrap_or(0.5),
            self.delta.unwrap_or(0.05),
            self.v.unwrap_or(4.0),
        )?)
    }

    pub fn k_samples(&self) -> usize {
        self.k_samples.unwrap_or(experiments::DEFAULT_K_SAMPLES)
    }

    pub fn horizon(&self) -> Result<Horizon, CliError> {
        match &self.t_max {
            None => Ok(Horizon::Auto),
            Some(HorizonValue::Time(t)) => Ok(Horizon::Fixed(*t)),
            Some(HorizonValue::Text(s)) => s.parse().map_err(usage),
        }
    }

    pub fn evolution(&self, params: LatticeParams) -> Result<EvolutionSpec, CliError> {
        let defaults = Tolerances::default();
        let spec = EvolutionSpec {
            params,
            start_site: self.start_site.unwrap_or_else(|| centered_start_site(params.n())),
            horizon: self.horizon()?,
            tail_epsilon: self.tail_eps.unwrap_or(dynamics::DEFAULT_TAIL_EPSILON),
            sampling_dt: self.sampling_dt.unwrap_or(dynamics::DEFAULT_SAMPLING_DT),
            hard_cap: self.hard_cap.unwrap_or(dynamics::DEFAULT_HARD_CAP),
            tolerances: Tolerances {
                rtol: self.rtol.unwrap_or(defaults.rtol),
                atol: self.atol.unwrap_or(defaults.atol),
            },
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn parse_field<T: std::str::FromStr<Err = String>>(value: &Option<String>, default: T) -> Result<T, CliError> {
    value.as_deref().map_or(Ok(default), |s| s.parse().map_err(usage))
}

fn write_table(out: &mut OutputDir, stem: &str, csv: &str, format: Format) -> Result<(), CliError> {
    match format {
        Format::Csv => out.write(&format!("{stem}.csv"), csv)?,
        Format::Json => out.write(&format!("{stem}.json"), &output::to_json(&output::csv_to_json(csv)))?,
    };
    Ok(())
}

/// Runs a parsed invocation. Standard output receives the one-line summary.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let started = Instant::now();
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let file = match &cli.common.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    let cfg = merge(&cli, file)?;
    let out_root = cli
        .common
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let format = cfg.format.unwrap_or(Format::Csv);
    let params = cfg.params()?;

    let summary: Value;
    let mut dir;
    match &cli.command {
        Command::Spectrum => {
            let k = cfg.k_samples();
            let loops = loop_geometry(params.v(), params.gamma(), params.delta(), k)?;
            dir = OutputDir::create(&out_root)?;
            let spectrum = obc_spectrum(&params)?;
            let classes = classify_states(&spectrum, &loops);
            write_table(&mut dir, "spectrum", &output::spectrum_csv(&spectrum, &classes), format)?;
            write_table(&mut dir, "pbc_loops", &output::loops_csv(&loops), format)?;
            summary = json!({ "states": spectrum.len(), "max_residual": spectrum.max_residual });
        }
        Command::Modes { .. } => {
            let selector = parse_field(&cfg.selector, StateSelector::MostNegativeImaginary)?;
            dir = OutputDir::create(&out_root)?;
            let spectrum = obc_spectrum(&params)?;
            write_table(&mut dir, "modes", &output::modes_csv(&spectrum), format)?;
            let m = spectrum.select(selector);
            let mut s = json!({
                "selected_index": m,
                "selected_energy": [spectrum.eigenvalues[m].re, spectrum.eigenvalues[m].im],
                "com_ratio": crate::spectral::com_ratio(&spectrum.eigenvector(m)),
            });
            if let Some(sizes) = &cfg.sizes {
                let rows = sfl_scaling(&params, sizes, selector)?;
                write_table(&mut dir, "scaling", &output::scaling_csv(params.v(), &rows), format)?;
                s["scaling"] = json!(rows);
            }
            summary = s;
        }
        Command::Winding { .. } => {
            let e0 = parse_complex(cfg.e0.as_deref().ok_or_else(|| usage("winding needs --e0"))?)
                .map_err(usage)?;
            let branch: Branch = parse_field(&cfg.branch, Branch::Upper)?;
            let value = winding_value(e0, params.v(), params.gamma(), branch, cfg.k_samples())?;
            let rounded = value.round();
            if (value - rounded).abs() > crate::spectral::winding::INTEGRALITY_TOLERANCE {
                return Err(CliError::Compute(
                    SpectralError::NonIntegerWinding { value }.to_string(),
                ));
            }
            println!("{}", rounded as i64);
            return Ok(());
        }
        Command::Evolve { .. } => {
            let method: Method = parse_field(&cfg.method, Method::Spectral)?;
            let spec = cfg.evolution(params)?;
            dir = OutputDir::create(&out_root)?;
            let traj = evolve(&spec, method)?;
            write_table(&mut dir, "trajectory", &output::trajectory_csv(&traj), format)?;
            let defect = power_balance_check(&traj);
            println!("final_power={} power_balance_defect={}", traj.final_power(), defect);
            summary = json!({
                "samples": traj.states.len(),
                "final_power": traj.final_power(),
                "power_balance_defect": defect,
                "start_site": spec.start_site,
            });
        }
        Command::Decay => {
            let spec = cfg.evolution(params)?;
            dir = OutputDir::create(&out_root)?;
            let profile = decay_profile(&spec)?;
            let table = output::decay_csv(&profile);
            let sidecar = output::decay_sidecar(&profile);
            match format {
                Format::Csv => {
                    dir.write("decay.csv", &table)?;
                    dir.write("decay.json", &output::to_json(&sidecar))?;
                }
                Format::Json => {
                    let mut merged = sidecar.clone();
                    merged["table"] = output::csv_to_json(&table);
                    dir.write("decay.json", &output::to_json(&merged))?;
                }
            }
            println!(
                "ratio_a={} ratio_b={} residual={}",
                profile.ratio_a, profile.ratio_b, profile.residual
            );
            summary = sidecar;
        }
        Command::Sweep { .. } => {
            let axis: Axis = parse_field(&cfg.axis, Axis::V)?;
            let observable: Observable = parse_field(&cfg.observable, Observable::PEdgeA)?;
            let values = cfg.values.clone().ok_or_else(|| usage("sweep needs --values or --range"))?;
            let base = cfg.evolution(params)?;
            let start_site = base.start_site;
            let policy = match cfg.start_policy.as_deref() {
                None if axis == Axis::N && cfg.start_site.is_none() => StartSitePolicy::Centered,
                None | Some("fixed") => StartSitePolicy::Fixed(start_site),
                Some("centered") => StartSitePolicy::Centered,
                Some(other) => return Err(usage(format!("unknown start policy '{other}' (expected fixed or centered)"))),
            };
            let mut sweep = SweepSpec::new(base, axis, values, observable).with_start_policy(policy);
            sweep.k_samples = cfg.k_samples();
            if let Some(w) = cfg.wall_limit {
                sweep.wall_limit_s = w;
            }
            sweep.validate()?;
            dir = OutputDir::create(&out_root)?;
            let records = run_sweep(&sweep, cfg.jobs)?;
            write_table(&mut dir, "sweep", &output::sweep_csv(&sweep, &records), format)?;
            let best = experiments::argmax(&records).map(|i| records[i].axis_value);
            summary = json!({ "argmax": best, "records": records });
            dir.write("sweep.json", &output::to_json(&json!({ "sweep": sweep, "summary": summary })))?;
        }
        Command::Reproduce { .. } => {
            let figure: Figure = cfg
                .figure
                .as_deref()
                .ok_or_else(|| usage(format!("reproduce needs a figure id ({})", figure_names())))?
                .parse()
                .map_err(usage)?;
            dir = OutputDir::create(&out_root.join(figure.as_str()))?;
            let opts = ReproduceOptions {
                jobs: cfg.jobs,
                k_samples: cfg.k_samples(),
                wall_limit_s: cfg.wall_limit.unwrap_or(experiments::DEFAULT_WALL_LIMIT_S),
            };
            summary = reproduce(figure, &mut dir, &opts)?;
        }
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: std::env::args().collect::<Vec<_>>().join(" "),
        config: serde_json::to_value(&cfg).expect("serializable config"),
        outputs: dir.written().to_vec(),
        started_unix,
        summary,
        duration_s: started.elapsed().as_secs_f64(),
    };
    dir.write("manifest.json", &output::to_json(&manifest))?;
    eprintln!("wrote {} files to {}", dir.written().len(), dir.root().display());
    Ok(())
}

fn figure_names() -> String {
    Figure::ALL.iter().map(|f| f.as_str()).collect::<Vec<_>>().join(", ")
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
