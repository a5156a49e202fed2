//! Table and sidecar writers. Every float goes through [`fmt_f64`] so that
//! repeated runs give byte-identical files.

use crate::dynamics::{DecayProfile, Trajectory};
use crate::experiments::{SweepRecord, SweepSpec};
use crate::model::LatticeParams;
use crate::spectral::{LoopGeometry, SpectrumResult, StateClassification};
use serde::Serialize;
use serde_json::{json, Value};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

pub fn params_header(params: &LatticeParams) -> String {
    format!(
        "# n={} gamma={} delta={} v={}\n",
        params.n(),
        fmt_f64(params.gamma()),
        fmt_f64(params.delta()),
        fmt_f64(params.v())
    )
}

pub fn spectrum_csv(spectrum: &SpectrumResult, classes: &[StateClassification]) -> String {
    let mut out = params_header(&spectrum.params);
    out.push_str("index,re_e,im_e,label,side_a,side_b,com_ratio\n");
    for (i, (e, c)) in spectrum.eigenvalues.iter().zip(classes).enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            i,
            fmt_f64(e.re),
            fmt_f64(e.im),
            c.label.as_str(),
            c.side_a.as_str(),
            c.side_b.as_str(),
            fmt_f64(c.com_ratio)
        );
    }
    out
}

/// Site densities of every eigenstate in long format.
pub fn modes_csv(spectrum: &SpectrumResult) -> String {
    let mut out = params_header(&spectrum.params);
    out.push_str("index,j,density_a,density_b\n");
    for (i, state) in spectrum.eigenvectors().iter().enumerate() {
        let (da, db) = (state.density_a(), state.density_b());
        for j in 0..da.len() {
            let _ = writeln!(out, "{},{},{},{}", i, j + 1, fmt_f64(da[j]), fmt_f64(db[j]));
        }
    }
    out
}

/// Closed PBC loop polylines, one row per sample.
pub fn loops_csv(loops: &LoopGeometry) -> String {
    let mut out = format!(
        "# gamma={} delta={} v={} k_samples={}\n",
        fmt_f64(loops.gamma),
        fmt_f64(loops.delta),
        fmt_f64(loops.v),
        loops.k_samples
    );
    out.push_str("branch,k,re_e,im_e\n");
    let k_samples = loops.k_samples;
    for (name, line) in [("upper", &loops.upper_loop), ("lower", &loops.lower_loop)] {
        for (i, e) in line.iter().enumerate() {
            let k = -std::f64::consts::PI + 2.0 * std::f64::consts::PI * i as f64 / k_samples as f64;
            let _ = writeln!(out, "{name},{},{},{}", fmt_f64(k), fmt_f64(e.re), fmt_f64(e.im));
        }
    }
    out
}

pub fn decay_csv(profile: &DecayProfile) -> String {
    let mut out = params_header(&profile.params);
    out.push_str("j,p_a,p_b\n");
    for (j, (a, b)) in profile.p_a.iter().zip(&profile.p_b).enumerate() {
        let _ = writeln!(out, "{},{},{}", j + 1, fmt_f64(*a), fmt_f64(*b));
    }
    out
}

pub fn decay_sidecar(profile: &DecayProfile) -> Value {
    json!({
        "residual": profile.residual,
        "ratio_a": profile.ratio_a,
        "ratio_b": profile.ratio_b,
        "p_min_a": profile.p_min_a,
        "p_min_b": profile.p_min_b,
        "argmin_a": profile.argmin_a,
        "argmin_b": profile.argmin_b,
        "p_edge_a": profile.edge_a(),
        "p_edge_b": profile.edge_b(),
        "burst_a": profile.burst_a(),
        "burst_b": profile.burst_b(),
        "start_site": profile.start_site,
        "method": profile.method,
        "params": profile.params,
    })
}

/// Total and per-chain power on the sampling grid.
pub fn trajectory_csv(trajectory: &Trajectory) -> String {
    let mut out = params_header(&trajectory.params);
    out.push_str("t,power,power_a,power_b\n");
    for s in &trajectory.states {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt_f64(s.time),
            fmt_f64(s.power()),
            fmt_f64(s.power_a()),
            fmt_f64(s.power_b())
        );
    }
    out
}

pub fn sweep_csv(spec: &SweepSpec, records: &[SweepRecord]) -> String {
    let mut out = params_header(&spec.base.params);
    out.push_str("axis,value,observable,residual,status,start_site\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            spec.axis.as_str(),
            fmt_f64(r.axis_value),
            fmt_f64(r.observable_value),
            fmt_f64(r.residual),
            r.status,
            r.start_site
        );
    }
    out
}

/// `(N, ⟨j⟩/N)` table of the scale-free localization check.
pub fn scaling_csv(v: f64, rows: &[(usize, f64)]) -> String {
    let mut out = String::from("v,n,com_ratio\n");
    for (n, r) in rows {
        let _ = writeln!(out, "{},{},{}", fmt_f64(v), n, fmt_f64(*r));
    }
    out
}

/// The JSON rendering of a table produced by this module: the header comment
/// (if any), the column names and one object per row, with numeric cells as
/// numbers.
pub fn csv_to_json(csv: &str) -> Value {
    let mut lines = csv.lines();
    let mut header = None;
    let mut columns = lines.next().unwrap_or_default();
    if let Some(comment) = columns.strip_prefix("# ") {
        header = Some(comment.to_string());
        columns = lines.next().unwrap_or_default();
    }
    let names: Vec<&str> = columns.split(',').collect();
    let rows: Vec<Value> = lines
        .map(|line| {
            let cells = line.split(',').zip(&names).map(|(cell, name)| {
                let value = match cell.parse::<f64>() {
                    Ok(x) if x.is_finite() => json!(x),
                    _ => json!(cell),
                };
                (name.to_string(), value)
            });
            Value::Object(cells.collect())
        })
        .collect();
    json!({ "header": header, "columns": names, "rows": rows })
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

/// Run record written next to every set of outputs.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    /// Settings that reproduce the run when passed back through `--config`.
    pub config: Value,
    pub outputs: Vec<String>,
    /// Headline numbers of the run.
    pub summary: Value,
    pub started_unix: u64,
    pub duration_s: f64,
}

/// Collects written files under one directory.
pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, contents: &str) -> std::io::Result<PathBuf> {
        let path = self.root.join(name);
        std::fs::write(&path, contents)?;
        self.written.push(name.to_string());
        Ok(path)
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }
}
