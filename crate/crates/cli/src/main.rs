//! `qsurf`: information matrices, Chernoff exponents and sweeps for the
//! three-emitter crack model, written as CSV or JSON tables.

mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use qsurf::output::{Cell, Table};
use qsurf::quadrature::QuadratureGrid;
use qsurf::sweep::{
    mode_contrib_table, point_table, sweep_table, PointKind, QfimPath, Scale, Settings, SweepSpec, Task, Variable,
};

use config::FileConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepVar {
    Dx,
    Dz,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QfimPathArg {
    Reduced,
    General,
    Oracle,
}

#[derive(Parser)]
#[command(name = "qsurf", version, about = "Precision limits for imaging a surface crack of three incoherent emitters")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON file with defaults for any flag (keys are the long flag names)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Dimensionless k·z_R; observables do not depend on it [default: 100]
    #[arg(long, global = true)]
    kzr: Option<f64>,
    /// Highest total Hermite–Gauss order j + l sorted [default: 10]
    #[arg(long, global = true)]
    modes_max_order: Option<usize>,
    /// Relative tolerance of the image-plane quadrature [default: 1e-10]
    #[arg(long, global = true)]
    quad_tol: Option<f64>,
    /// Detected photons N in the Cramér–Rao bounds [default: 1]
    #[arg(long, global = true)]
    photons: Option<f64>,
    /// Add the unsorted remainder channel to the mode-sorting FIM [default: false]
    #[arg(long, global = true)]
    fim_remainder: Option<bool>,
    /// Add the unsorted remainder channel to the mode-sorting Chernoff exponent [default: true]
    #[arg(long, global = true)]
    chernoff_remainder: Option<bool>,
    /// Output format [default: csv]
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Write to this file instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value = "warn")]
    log_level: log::LevelFilter,
}

#[derive(Args, Default)]
struct PointArgs {
    /// Crack width δx
    #[arg(long)]
    dx: Option<f64>,
    /// Crack depth δz
    #[arg(long)]
    dz: Option<f64>,
    /// Report over the emitter displacements (δx₁, δx₂, δz₃) instead of (δx, δz)
    #[arg(long)]
    raw: bool,
}

#[derive(Args, Default)]
struct SweepArgs {
    /// Swept parameter
    #[arg(long, value_enum)]
    var: Option<SweepVar>,
    #[arg(long)]
    from: Option<f64>,
    #[arg(long)]
    to: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    /// Logarithmic spacing
    #[arg(long)]
    log: bool,
    /// Crack width (the fixed value when sweeping dz)
    #[arg(long)]
    dx: Option<f64>,
    /// Crack depth (the fixed value when sweeping dx)
    #[arg(long)]
    dz: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Quantum Fisher information matrix at one point
    Qfim {
        #[command(flatten)]
        point: PointArgs,
        /// Computation route
        #[arg(long, value_enum)]
        path: Option<QfimPathArg>,
    },
    /// Mode-sorting Fisher information matrix at one point
    FimMs {
        #[command(flatten)]
        point: PointArgs,
    },
    /// Direct-imaging Fisher information matrix at one point
    FimDi {
        #[command(flatten)]
        point: PointArgs,
    },
    /// Information matrices and Cramér–Rao bounds along a sweep
    CrbSweep {
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Chernoff exponents and the fidelity bound along a sweep
    ChernoffSweep {
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Per-mode contributions to the mode-sorting information; sweeps when --var is given
    ModeContrib {
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Fast invariant checks; exits 1 if any fails
    Selftest,
}

enum Failure {
    Usage(String),
    Compute(String),
}

impl From<qsurf::Error> for Failure {
    fn from(e: qsurf::Error) -> Self {
        match e {
            qsurf::Error::Config(m) => Failure::Usage(m),
            other => Failure::Compute(other.to_string()),
        }
    }
}

fn required<T>(v: Option<T>, name: &str) -> Result<T, Failure> {
    v.ok_or_else(|| Failure::Usage(format!("missing --{name} (flag or config key)")))
}

fn settings(c: &CommonArgs, f: &FileConfig) -> Settings {
    let d = Settings::default();
    Settings {
        kzr: c.kzr.or(f.kzr).unwrap_or(d.kzr),
        max_order: c.modes_max_order.or(f.modes_max_order).unwrap_or(d.max_order),
        quad: c.quad_tol.or(f.quad_tol).map_or(d.quad, QuadratureGrid::with_tol),
        photons: c.photons.or(f.photons).unwrap_or(d.photons),
        fim_remainder: c.fim_remainder.or(f.fim_remainder).unwrap_or(d.fim_remainder),
        chernoff_remainder: c.chernoff_remainder.or(f.chernoff_remainder).unwrap_or(d.chernoff_remainder),
    }
}

fn point(p: &PointArgs, f: &FileConfig) -> Result<(f64, f64, bool), Failure> {
    Ok((required(p.dx.or(f.dx), "dx")?, required(p.dz.or(f.dz), "dz")?, p.raw || f.raw.unwrap_or(false)))
}

fn sweep_spec(s: &SweepArgs, f: &FileConfig, task: Task) -> Result<SweepSpec, Failure> {
    let var = required(s.var.or(f.var), "var")?;
    let (variable, fixed) = match var {
        SweepVar::Dx => (Variable::DeltaX, required(s.dz.or(f.dz), "dz")?),
        SweepVar::Dz => (Variable::DeltaZ, required(s.dx.or(f.dx), "dx")?),
    };
    Ok(SweepSpec {
        variable,
        lo: required(s.from.or(f.from), "from")?,
        hi: required(s.to.or(f.to), "to")?,
        points: required(s.points.or(f.points), "points")?,
        scale: if s.log || f.log.unwrap_or(false) { Scale::Log } else { Scale::Linear },
        fixed,
        task,
    })
}

fn selftest_table() -> (Table, bool) {
    let checks = qsurf::selftest::run();
    let mut t = Table::new(vec!["check".into(), "status".into(), "detail".into()]);
    t.meta("tool", qsurf::sweep::TOOL_VERSION).meta("task", "selftest");
    let mut ok = true;
    for c in checks {
        ok &= c.passed;
        t.push(vec![Cell::from(c.name), Cell::from(if c.passed { "pass" } else { "FAIL" }), Cell::from(c.detail)]);
    }
    (t, ok)
}

fn failed_rows(t: &Table) -> usize {
    let Some(col) = t.columns.iter().position(|c| c == "status") else { return 0 };
    t.rows.iter().filter(|r| !matches!(&r[col], Cell::Text(s) if s == "ok")).count()
}

fn run(cli: Cli) -> Result<(), Failure> {
    let file = match &cli.common.config {
        Some(p) => FileConfig::load(p).map_err(Failure::Usage)?,
        None => FileConfig::default(),
    };
    let settings = settings(&cli.common, &file);
    settings.validate()?;
    let format = cli.common.format.or(file.format).unwrap_or(Format::Csv);
    let out = cli.common.out.clone().or(file.out.clone());

    let mut passed = true;
    let sweeping = match &cli.command {
        Command::CrbSweep { .. } | Command::ChernoffSweep { .. } => true,
        Command::ModeContrib { sweep } => sweep.var.or(file.var).is_some(),
        _ => false,
    };
    let table = match &cli.command {
        Command::Qfim { point: p, path } => {
            let (dx, dz, raw) = point(p, &file)?;
            let route = match path.or(file.path).unwrap_or(QfimPathArg::Reduced) {
                QfimPathArg::Reduced => QfimPath::Reduced,
                QfimPathArg::General => QfimPath::General,
                QfimPathArg::Oracle => QfimPath::Oracle,
            };
            point_table(PointKind::Qfim(route), dx, dz, raw, &settings)?
        }
        Command::FimMs { point: p } => {
            let (dx, dz, raw) = point(p, &file)?;
            point_table(PointKind::ModeSorting, dx, dz, raw, &settings)?
        }
        Command::FimDi { point: p } => {
            let (dx, dz, raw) = point(p, &file)?;
            point_table(PointKind::DirectImaging, dx, dz, raw, &settings)?
        }
        Command::CrbSweep { sweep } => sweep_table(&sweep_spec(sweep, &file, Task::Crb)?, &settings)?,
        Command::ChernoffSweep { sweep } => sweep_table(&sweep_spec(sweep, &file, Task::Chernoff)?, &settings)?,
        Command::ModeContrib { sweep } => {
            if sweep.var.or(file.var).is_some() {
                sweep_table(&sweep_spec(sweep, &file, Task::FimModes)?, &settings)?
            } else {
                let dx = required(sweep.dx.or(file.dx), "dx")?;
                let dz = required(sweep.dz.or(file.dz), "dz")?;
                mode_contrib_table(dx, dz, &settings)?
            }
        }
        Command::Selftest => {
            let (t, ok) = selftest_table();
            passed = ok;
            t
        }
    };

    let failed = if sweeping { failed_rows(&table) } else { 0 };
    if failed > 0 {
        log::warn!("{failed} of {} rows failed; see the status column", table.rows.len());
    }
    let text = match format {
        Format::Csv => table.to_csv(),
        Format::Json => table.to_json(),
    };
    let written = match &out {
        Some(path) => std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => std::io::stdout().lock().write_all(text.as_bytes()).map_err(|e| format!("cannot write output: {e}")),
    };
    written.map_err(Failure::Compute)?;
    if passed {
        Ok(())
    } else {
        Err(Failure::Compute("self-test failed".into()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().filter_level(cli.common.log_level).parse_default_env().init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Compute(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
