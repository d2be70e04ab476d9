//! Convergence study driver: mesh sweeps, error tables, rate fits and the
//! plot-ready files written for each run.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::{error_norms, solve_backus, MeshSolution, NodalField, SolveOptions};
use crate::mesh::{build_square_mesh, TriMesh};
use crate::potentials::Potential3D;
use crate::trace::{make_trace, TraceData};

pub const DEFAULT_H_SEQUENCE: [f64; 4] = [0.2, 0.1, 0.05, 0.025];

/// Largest error for which a rate fit is still meaningful; below it the
/// solution is exact up to round-off.
const EXACT_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum Instance {
    U0,
    U1,
    U0PlusU1,
    Affine,
    Custom { name: String, potential: Potential3D },
}

impl Instance {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "u0" => Some(Instance::U0),
            "u1" => Some(Instance::U1),
            "u0+u1" => Some(Instance::U0PlusU1),
            "affine" => Some(Instance::Affine),
            _ => None,
        }
    }

    pub fn label(&self) -> &str {
        match self {
            Instance::U0 => "u0",
            Instance::U1 => "u1",
            Instance::U0PlusU1 => "u0+u1",
            Instance::Affine => "affine",
            Instance::Custom { name, .. } => name,
        }
    }

    pub fn potential(&self) -> Potential3D {
        match self {
            Instance::U0 => Potential3D::u0(),
            Instance::U1 => Potential3D::u1(),
            Instance::U0PlusU1 => Potential3D::u0_plus_u1(),
            Instance::Affine => Potential3D::affine(),
            Instance::Custom { potential, .. } => potential.clone(),
        }
    }
}

impl fmt::Display for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub instance: Instance,
    pub h_sequence: Vec<f64>,
    pub options: SolveOptions,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn new(instance: Instance, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            instance,
            h_sequence: DEFAULT_H_SEQUENCE.to_vec(),
            options: SolveOptions::default(),
            out_dir: out_dir.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.h_sequence.is_empty() {
            return Err(Error::Argument("empty h sequence".into()));
        }
        if self.h_sequence.iter().any(|&h| !(h > 0.0 && h <= 1.0)) {
            return Err(Error::Argument(format!(
                "h values must lie in (0, 1]: {:?}",
                self.h_sequence
            )));
        }
        if self.h_sequence.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Argument(format!(
                "h sequence must be strictly decreasing: {:?}",
                self.h_sequence
            )));
        }
        self.options.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    /// Requested maximum edge length.
    pub h: f64,
    /// Longest edge of the mesh actually built for `h`.
    pub h_actual: f64,
    pub l2: f64,
    pub h1: f64,
    pub iterations: usize,
    pub clamp_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub instance: String,
    pub rows: Vec<ConvergenceRow>,
    /// Fitted against `h_actual`. `None` when the errors are at round-off
    /// level or fewer than two rows exist.
    pub rate_l2: Option<f64>,
    pub rate_h1: Option<f64>,
    /// Same fits against the requested `h`.
    pub rate_l2_nominal: Option<f64>,
    pub rate_h1_nominal: Option<f64>,
    pub rate_fit: &'static str,
    pub options: SolveOptions,
    pub failure: Option<String>,
}

/// Least-squares slope of `log(err)` against `log(h)`.
pub fn fit_rate(hs: &[f64], errs: &[f64]) -> Result<f64> {
    if hs.len() != errs.len() || hs.len() < 2 {
        return Err(Error::Argument(format!(
            "need at least two (h, error) pairs, got {} and {}",
            hs.len(),
            errs.len()
        )));
    }
    if hs.iter().chain(errs).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::Argument("rate fit needs positive finite inputs".into()));
    }
    let n = hs.len() as f64;
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Argument("rate fit needs at least two distinct h values".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

fn optional_rate(
    rows: &[ConvergenceRow],
    size: impl Fn(&ConvergenceRow) -> f64,
    error: impl Fn(&ConvergenceRow) -> f64,
) -> Option<f64> {
    let errs: Vec<f64> = rows.iter().map(&error).collect();
    if rows.len() < 2 || errs.iter().all(|&e| e <= EXACT_THRESHOLD) {
        return None;
    }
    let hs: Vec<f64> = rows.iter().map(size).collect();
    fit_rate(&hs, &errs).ok()
}

pub fn report_from_rows(
    instance: &str,
    rows: Vec<ConvergenceRow>,
    options: SolveOptions,
    failure: Option<String>,
) -> ConvergenceReport {
    ConvergenceReport {
        instance: instance.to_string(),
        rate_l2: optional_rate(&rows, |r| r.h_actual, |r| r.l2),
        rate_h1: optional_rate(&rows, |r| r.h_actual, |r| r.h1),
        rate_l2_nominal: optional_rate(&rows, |r| r.h, |r| r.l2),
        rate_h1_nominal: optional_rate(&rows, |r| r.h, |r| r.h1),
        rows,
        rate_fit: "least-squares slope of log(error) vs log(h_actual) over all rows",
        options,
        failure,
    }
}

/// Meshes, trace data and per-mesh solutions of a sweep.
pub struct Sweep {
    pub data: TraceData,
    pub meshes: Vec<TriMesh>,
    pub solutions: Vec<MeshSolution>,
    pub failure: Option<String>,
}

pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Sweep> {
    cfg.validate()?;
    let data = make_trace(&cfg.instance.potential())?;
    let meshes = cfg
        .h_sequence
        .iter()
        .map(|&h| build_square_mesh(h))
        .collect::<Result<Vec<_>>>()?;
    match solve_backus(&data, &meshes, &cfg.options) {
        Ok(solutions) => Ok(Sweep {
            data,
            meshes,
            solutions,
            failure: None,
        }),
        Err(Error::NonConvergence(nc)) => {
            let failure = format!("solver failed at h = {}: {}", cfg.h_sequence[nc.level], nc.reason);
            Ok(Sweep {
                data,
                meshes,
                solutions: nc.completed,
                failure: Some(failure),
            })
        }
        Err(e) => Err(e),
    }
}

/// Runs the sweep, computes errors and rates, and writes
/// `<label>_convergence.csv`, `<label>_report.json` and `<label>_loglog.dat`
/// into the configured output directory.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    let sweep = run_sweep(cfg)?;
    let mut rows = Vec::with_capacity(sweep.solutions.len());
    for (k, sol) in sweep.solutions.iter().enumerate() {
        let e = error_norms(&sweep.meshes[k], &sol.field, &sweep.data)?;
        rows.push(ConvergenceRow {
            h: cfg.h_sequence[k],
            h_actual: sweep.meshes[k].h_max_actual(),
            l2: e.l2,
            h1: e.h1,
            iterations: sol.diagnostics.iterations,
            clamp_count: sol.diagnostics.clamp_count,
        });
    }
    let report = report_from_rows(cfg.instance.label(), rows, cfg.options, sweep.failure);
    write_report_files(&report, &cfg.out_dir)?;
    Ok(report)
}

pub struct ReportPaths {
    pub csv: PathBuf,
    pub json: PathBuf,
    pub loglog: PathBuf,
}

pub fn report_paths(label: &str, dir: &Path) -> ReportPaths {
    ReportPaths {
        csv: dir.join(format!("{label}_convergence.csv")),
        json: dir.join(format!("{label}_report.json")),
        loglog: dir.join(format!("{label}_loglog.dat")),
    }
}

pub fn write_report_files(report: &ConvergenceReport, dir: &Path) -> Result<ReportPaths> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = report_paths(&report.instance, dir);

    let mut csv = String::from("h,l2,h1,iterations,clamp_count\n");
    for r in &report.rows {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.h, r.l2, r.h1, r.iterations, r.clamp_count
        ));
    }
    write_file(&paths.csv, csv.as_bytes())?;

    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    write_file(&paths.json, json.as_bytes())?;

    let mut dat = String::from("# log10(h) log10(L2) log10(H1)\n");
    for r in &report.rows {
        dat.push_str(&format!("{} {} {}\n", r.h.log10(), r.l2.log10(), r.h1.log10()));
    }
    write_file(&paths.loglog, dat.as_bytes())?;
    Ok(paths)
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

/// Parses a table written by [`write_report_files`]. The realised edge
/// length is not stored in the table and is recomputed from `h`.
pub fn read_convergence_csv(path: &Path) -> Result<Vec<ConvergenceRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some("h,l2,h1,iterations,clamp_count") {
        return Err(Error::Data(format!("{} has an unexpected header", path.display())));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            let bad = || Error::Data(format!("malformed row '{line}' in {}", path.display()));
            if f.len() != 5 {
                return Err(bad());
            }
            let h: f64 = f[0].parse().map_err(|_| bad())?;
            Ok(ConvergenceRow {
                h,
                h_actual: build_square_mesh(h)?.h_max_actual(),
                l2: f[1].parse().map_err(|_| bad())?,
                h1: f[2].parse().map_err(|_| bad())?,
                iterations: f[3].parse().map_err(|_| bad())?,
                clamp_count: f[4].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

/// Diagnostics of a single-mesh solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub instance: String,
    pub mesh_h: f64,
    pub iterations: usize,
    pub final_update_norm: f64,
    pub final_residual_norm: f64,
    pub clamp_count: usize,
    pub l2_error: f64,
    pub h1_error: f64,
    pub ellipticity_warning: bool,
}

pub struct SingleSolve {
    pub report: SolveReport,
    pub mesh: TriMesh,
    pub field: NodalField,
    pub data: TraceData,
}

pub fn solve_single(instance: &Instance, h: f64, opts: &SolveOptions) -> Result<SingleSolve> {
    let data = make_trace(&instance.potential())?;
    let mesh = build_square_mesh(h)?;
    let mut sols = solve_backus(&data, std::slice::from_ref(&mesh), opts)?;
    let sol = sols.pop().expect("one mesh in, one solution out");
    let e = error_norms(&mesh, &sol.field, &data)?;
    let d = &sol.diagnostics;
    Ok(SingleSolve {
        report: SolveReport {
            instance: instance.label().to_string(),
            mesh_h: h,
            iterations: d.iterations,
            final_update_norm: d.final_update_norm,
            final_residual_norm: d.final_residual_norm,
            clamp_count: d.clamp_count,
            l2_error: e.l2,
            h1_error: e.h1,
            ellipticity_warning: d.ellipticity_warning,
        },
        mesh,
        field: sol.field,
        data,
    })
}

/// Per-node CSV `x,y,u_h,u_exact,abs_err`.
pub fn write_solution_csv<W: Write>(mesh: &TriMesh, field: &NodalField, data: &TraceData, mut out: W) -> Result<()> {
    let io = |e| Error::io("<solution csv>", e);
    writeln!(out, "x,y,u_h,u_exact,abs_err").map_err(io)?;
    for (k, x) in mesh.nodes().iter().enumerate() {
        let exact = data.u_exact(x)?;
        let uh = field.values[k];
        writeln!(out, "{},{},{},{},{}", x[0], x[1], uh, exact, (uh - exact).abs()).map_err(io)?;
    }
    Ok(())
}
