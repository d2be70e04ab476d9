//! Command-line front end.
//!
//! Exit status: 0 on success, 1 on data or input errors, 2 when the solver
//! fails, 64 on usage errors.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::fem::SolveOptions;
use crate::harness::{
    run_convergence, solve_single, write_file, write_solution_csv, ExperimentConfig, Instance, DEFAULT_H_SEQUENCE,
};
use crate::potentials::{PoleSet2D, Potential3D};
use crate::source_count::{estimate_count, BoundaryCurve};
use crate::trace::{check_admissible, make_trace, write_grid_csv};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

pub const OUT_DIR_ENV: &str = "BACKUS_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "backus",
    version,
    about = "Recover harmonic potentials from augmented field-magnitude data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one instance on one mesh and print diagnostics.
    Solve {
        #[command(flatten)]
        common: CommonArgs,
        /// Target maximum edge length.
        #[arg(long)]
        hmax: Option<f64>,
    },
    /// Run the mesh-refinement sweep and write the error table, report and log-log data.
    Convergence {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated, strictly decreasing edge lengths.
        #[arg(long, value_delimiter = ',')]
        h_sequence: Option<Vec<f64>>,
    },
    /// Write p, q, sigma and the exact trace on an n x n lattice.
    DumpData {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 41)]
        n: usize,
    },
    /// Estimate the pole count of a planar potential inside a circle.
    CountSources {
        /// Pole configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        radius: f64,
        /// Circle center as `cx,cy` (use `--center=-1,0` for negative values).
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.0])]
        center: Vec<f64>,
        /// Number of trapezoid nodes.
        #[arg(short = 'M', default_value_t = 256)]
        quadrature_points: usize,
    },
    /// Print the admissibility report of an instance's data.
    Check {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 41)]
        grid: usize,
    },
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// u0, u1, u0+u1, affine, or custom (with --potential).
    #[arg(long)]
    instance: Option<String>,
    /// Potential description (JSON) for a custom instance.
    #[arg(long)]
    potential: Option<PathBuf>,
    /// Experiment configuration (JSON); flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    newton_tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    ellipticity_floor: Option<f64>,
    #[arg(long)]
    no_line_search: bool,
}

/// Experiment configuration file. Every field is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub instance: Option<String>,
    pub potential: Option<Potential3D>,
    pub h_sequence: Option<Vec<f64>>,
    pub hmax: Option<f64>,
    pub options: Option<SolveOptions>,
    pub out_dir: Option<PathBuf>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

struct Resolved {
    instance: Instance,
    options: SolveOptions,
    out_dir: PathBuf,
    file: ConfigFile,
}

impl CommonArgs {
    fn resolve(&self) -> Result<Resolved> {
        let file: ConfigFile = match &self.config {
            Some(p) => read_json(p)?,
            None => ConfigFile::default(),
        };
        let name = self.instance.clone().or_else(|| file.instance.clone());
        let potential = match &self.potential {
            Some(p) => Some((
                read_json::<Potential3D>(p)?,
                p.file_stem().map(|s| s.to_string_lossy().into_owned()),
            )),
            None => file.potential.clone().map(|p| (p, None)),
        };
        let instance = match (name.as_deref(), potential) {
            (Some(n), None) => Instance::parse(n)
                .ok_or_else(|| Error::Argument(format!("unknown instance '{n}' (need --potential for custom)")))?,
            (n, Some((potential, stem))) => Instance::Custom {
                name: n
                    .filter(|n| *n != "custom")
                    .map(str::to_string)
                    .or(stem)
                    .unwrap_or_else(|| "custom".into()),
                potential,
            },
            (None, None) => return Err(Error::Argument("no instance given".into())),
        };
        let mut options = file.options.unwrap_or_default();
        if let Some(v) = self.newton_tol {
            options.newton_tol = v;
        }
        if let Some(v) = self.max_iters {
            options.max_iters = v;
        }
        if let Some(v) = self.ellipticity_floor {
            options.ellipticity_floor = v;
        }
        if self.no_line_search {
            options.line_search = false;
        }
        options.validate()?;
        let out_dir = self
            .out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .or_else(|| file.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from("."));
        Ok(Resolved {
            instance,
            options,
            out_dir,
            file,
        })
    }
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NonConvergence(_) | Error::Solver(_) | Error::Assembly(_) => EXIT_SOLVER,
        _ => EXIT_DATA,
    }
}

/// Parses `args` (program name first) and runs the subcommand.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(command: Command) -> Result<i32> {
    match command {
        Command::Solve { common, hmax } => {
            let r = common.resolve()?;
            let h = hmax
                .or(r.file.hmax)
                .ok_or_else(|| Error::Argument("solve needs --hmax".into()))?;
            let single = solve_single(&r.instance, h, &r.options)?;
            fs::create_dir_all(&r.out_dir).map_err(|e| Error::io(&r.out_dir, e))?;
            let stem = format!("{}_h{}", r.instance.label(), h);
            let mut csv = Vec::new();
            write_solution_csv(&single.mesh, &single.field, &single.data, &mut csv)?;
            write_file(&r.out_dir.join(format!("{stem}_solution.csv")), &csv)?;
            let mut json = serde_json::to_string_pretty(&single.report)?;
            json.push('\n');
            write_file(&r.out_dir.join(format!("{stem}_diagnostics.json")), json.as_bytes())?;
            print!("{json}");
            Ok(EXIT_OK)
        }
        Command::Convergence { common, h_sequence } => {
            let r = common.resolve()?;
            let cfg = ExperimentConfig {
                instance: r.instance,
                h_sequence: h_sequence
                    .or(r.file.h_sequence)
                    .unwrap_or_else(|| DEFAULT_H_SEQUENCE.to_vec()),
                options: r.options,
                out_dir: r.out_dir,
            };
            let report = run_convergence(&cfg)?;
            print_json(&report)?;
            if let Some(f) = &report.failure {
                eprintln!("error: {f}");
                return Ok(EXIT_SOLVER);
            }
            Ok(EXIT_OK)
        }
        Command::DumpData { common, n } => {
            let r = common.resolve()?;
            let data = make_trace(&r.instance.potential())?;
            fs::create_dir_all(&r.out_dir).map_err(|e| Error::io(&r.out_dir, e))?;
            let path = r.out_dir.join(format!("{}_grid.csv", r.instance.label()));
            let mut buf = Vec::new();
            write_grid_csv(&data, n, &mut buf)?;
            write_file(&path, &buf)?;
            println!("{}", path.display());
            Ok(EXIT_OK)
        }
        Command::CountSources {
            config,
            radius,
            center,
            quadrature_points,
        } => {
            let center: [f64; 2] = center
                .try_into()
                .map_err(|c: Vec<f64>| Error::Argument(format!("--center needs two values, got {}", c.len())))?;
            let poles: PoleSet2D = read_json(&config)?;
            let curve = BoundaryCurve::circle(center, radius, quadrature_points)?;
            print_json(&estimate_count(&poles, &curve)?)?;
            Ok(EXIT_OK)
        }
        Command::Check { common, grid } => {
            let r = common.resolve()?;
            let report = check_admissible(&make_trace(&r.instance.potential())?, grid)?;
            print_json(&report)?;
            Ok(if report.admissible { EXIT_OK } else { EXIT_DATA })
        }
    }
}
