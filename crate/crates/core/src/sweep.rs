//! Parameter sweeps over the crack model and single-point reports, all
//! rendered as [`Table`]s.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::crack::{build_crack, crack_jacobian, crack_params, CrackSpec};
use crate::direct_imaging::{chernoff_di_estimate, fim_di_estimate};
use crate::error::{Error, Result};
use crate::hypothesis::{chernoff_ms, embed_states, fidelity_trace_norm, qcb};
use crate::modesort::{fim_ms, fim_ms_contributions, ModeBasis, MsOptions};
use crate::output::{Cell, Table};
use crate::qfim::{crb, qfim_embedding_oracle, qfim_general, qfim_reduced, reparametrize, FisherMatrix};
use crate::quadrature::QuadratureGrid;

pub const TOOL_VERSION: &str = concat!("qsurf ", env!("CARGO_PKG_VERSION"));

/// Numerical configuration shared by every computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Settings {
    pub kzr: f64,
    pub max_order: usize,
    pub quad: QuadratureGrid,
    /// Detected photons `N` in the Cramér–Rao bound.
    pub photons: f64,
    pub fim_remainder: bool,
    pub chernoff_remainder: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            kzr: 100.0,
            max_order: crate::modesort::DEFAULT_MAX_ORDER,
            quad: QuadratureGrid::default(),
            photons: 1.0,
            fim_remainder: false,
            chernoff_remainder: true,
        }
    }
}

impl Settings {
    pub fn validate(&self) -> Result<()> {
        if !(self.kzr.is_finite() && self.kzr > 0.0) {
            return Err(Error::Config(format!("kzr must be positive, got {}", self.kzr)));
        }
        if !(self.photons.is_finite() && self.photons > 0.0) {
            return Err(Error::Config(format!("photon number must be positive, got {}", self.photons)));
        }
        self.quad.validate()?;
        ModeBasis::new(self.max_order).map(|_| ())
    }

    pub fn basis(&self) -> Result<ModeBasis> {
        ModeBasis::new(self.max_order)
    }

    fn ms_options(&self) -> MsOptions {
        MsOptions { include_remainder: self.fim_remainder, ..MsOptions::default() }
    }

    fn annotate(&self, t: &mut Table) {
        t.meta("tool", TOOL_VERSION)
            .meta("kzr", self.kzr)
            .meta("modes_max_order", self.max_order)
            .meta("quad_tol", format!("{:e}", self.quad.target_tol))
            .meta("photons", self.photons);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    DeltaX,
    DeltaZ,
}

impl Variable {
    pub fn name(self) -> &'static str {
        match self {
            Variable::DeltaX => "dx",
            Variable::DeltaZ => "dz",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Crb,
    Chernoff,
    FimModes,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Crb => "crb",
            Task::Chernoff => "chernoff",
            Task::FimModes => "fim-modes",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub variable: Variable,
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub scale: Scale,
    /// Value of the parameter that is not swept.
    pub fixed: f64,
    pub task: Task,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.fixed.is_finite()) {
            return Err(Error::Config("sweep bounds must be finite".into()));
        }
        if !(self.lo < self.hi) {
            return Err(Error::Config(format!("sweep needs lo < hi, got [{}, {}]", self.lo, self.hi)));
        }
        if self.lo < 0.0 || self.fixed < 0.0 {
            return Err(Error::Config("crack width and depth are nonnegative".into()));
        }
        if self.points < 2 {
            return Err(Error::Config(format!("sweep needs at least 2 points, got {}", self.points)));
        }
        if self.scale == Scale::Log && self.lo <= 0.0 {
            return Err(Error::Config("log sweeps need lo > 0".into()));
        }
        Ok(())
    }

    /// Swept values in ascending order; the endpoints are exact.
    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        (0..n)
            .map(|i| {
                if i == 0 {
                    return self.lo;
                }
                if i == n - 1 {
                    return self.hi;
                }
                let t = i as f64 / (n - 1) as f64;
                match self.scale {
                    Scale::Linear => self.lo + (self.hi - self.lo) * t,
                    Scale::Log => (self.lo.ln() + (self.hi.ln() - self.lo.ln()) * t).exp(),
                }
            })
            .collect()
    }

    /// `(δx, δz)` of each row.
    pub fn grid(&self) -> Vec<(f64, f64)> {
        self.values()
            .into_iter()
            .map(|v| match self.variable {
                Variable::DeltaX => (v, self.fixed),
                Variable::DeltaZ => (self.fixed, v),
            })
            .collect()
    }
}

/// One sweep row: the inputs, one value per output column (NaN where the
/// computation failed) and a status string.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub delta_x: f64,
    pub delta_z: f64,
    pub values: Vec<f64>,
    pub status: String,
}

impl ResultRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Accumulates values and per-block failures of one row.
struct RowBuilder {
    values: Vec<f64>,
    errors: Vec<String>,
}

impl RowBuilder {
    fn new() -> Self {
        Self { values: Vec::new(), errors: Vec::new() }
    }

    fn block(&mut self, name: &str, width: usize, r: Result<Vec<f64>>) {
        match r {
            Ok(v) => {
                debug_assert_eq!(v.len(), width);
                self.values.extend(v);
            }
            Err(e) => {
                self.values.extend(std::iter::repeat_n(f64::NAN, width));
                self.errors.push(format!("{name}: {e}"));
            }
        }
    }

    fn finish(self, delta_x: f64, delta_z: f64) -> ResultRow {
        let status = if self.errors.is_empty() { "ok".to_string() } else { self.errors.join("; ") };
        ResultRow { delta_x, delta_z, values: self.values, status }
    }
}

pub fn output_columns(task: Task, settings: &Settings) -> Result<Vec<String>> {
    let cols: Vec<&str> = match task {
        Task::Crb => vec![
            "qfim_dx",
            "qfim_dz",
            "qfim_dxdz",
            "fim_ms_dx",
            "fim_ms_dz",
            "fim_ms_dxdz",
            "fim_di_dx",
            "fim_di_dz",
            "fim_di_dxdz",
            "fim_di_err",
            "crb_q_dx",
            "crb_q_dz",
            "crb_ms_dx",
            "crb_ms_dz",
            "crb_di_dx",
            "crb_di_dz",
        ],
        Task::Chernoff => vec!["xi_q", "s_q", "xi_ms", "s_ms", "xi_di", "s_di", "xi_di_err", "fidelity", "fid_bound"],
        Task::FimModes => {
            let mut out = Vec::new();
            for m in settings.basis()?.modes() {
                out.push(format!("f_dx_{}", m.label()));
                out.push(format!("f_dz_{}", m.label()));
            }
            if settings.fim_remainder {
                out.push("f_dx_rem".into());
                out.push("f_dz_rem".into());
            }
            return Ok(out);
        }
    };
    Ok(cols.into_iter().map(String::from).collect())
}

fn fisher_triple(f: &FisherMatrix) -> Vec<f64> {
    vec![f.matrix[(0, 0)], f.matrix[(1, 1)], f.matrix[(0, 1)]]
}

fn crb_diag(f: &FisherMatrix, photons: f64) -> Result<Vec<f64>> {
    let c = crb(f, photons)?;
    Ok(vec![c[(0, 0)], c[(1, 1)]])
}

fn crb_row(dx: f64, dz: f64, settings: &Settings, basis: &ModeBasis) -> ResultRow {
    let mut row = RowBuilder::new();
    let jac = crack_jacobian();
    let params = crack_params();
    let scene = CrackSpec::new(dx, dz, settings.kzr).and_then(|s| build_crack(&s));
    let q = scene.clone().and_then(|s| reparametrize(&qfim_reduced(&s, &params)?, &jac));
    let ms = scene.clone().and_then(|s| fim_ms(&s, basis, &params, Some(&jac), &settings.ms_options()));
    let di = scene.and_then(|s| fim_di_estimate(&s, &params, &settings.quad, Some(&jac)));
    row.block("qfim", 3, q.as_ref().map(fisher_triple).map_err(Clone::clone));
    row.block("fim_ms", 3, ms.as_ref().map(fisher_triple).map_err(Clone::clone));
    row.block(
        "fim_di",
        4,
        di.as_ref()
            .map(|d| {
                let mut v = fisher_triple(&d.fisher);
                v.push(d.error);
                v
            })
            .map_err(Clone::clone),
    );
    row.block("crb_q", 2, q.and_then(|f| crb_diag(&f, settings.photons)));
    row.block("crb_ms", 2, ms.and_then(|f| crb_diag(&f, settings.photons)));
    row.block("crb_di", 2, di.and_then(|d| crb_diag(&d.fisher, settings.photons)));
    row.finish(dx, dz)
}

fn chernoff_row(dx: f64, dz: f64, settings: &Settings, basis: &ModeBasis) -> ResultRow {
    let mut row = RowBuilder::new();
    let kzr = settings.kzr;
    row.block("qcb", 2, embed_states(dx, dz, kzr).map(|p| qcb(&p)).map(|r| vec![r.xi, r.s_star]));
    row.block(
        "chernoff_ms",
        2,
        chernoff_ms(dx, dz, kzr, basis, settings.chernoff_remainder).map(|r| vec![r.xi, r.s_star]),
    );
    let di = CrackSpec::new(dx, dz, kzr)
        .and_then(|spec| chernoff_di_estimate(&build_crack(&spec.flat())?, &build_crack(&spec)?, &settings.quad));
    row.block(
        "chernoff_di",
        3,
        di.map(|d| {
            // propagate the gap error through ξ = −ln(1 − K)
            let err = d.error / (1.0 - d.result.gap).max(f64::MIN_POSITIVE);
            vec![d.result.xi, d.result.s_star, err]
        }),
    );
    row.block("fidelity", 2, fidelity_trace_norm(dx, dz, kzr).map(|f| vec![f, -2.0 * f.ln()]));
    row.finish(dx, dz)
}

fn fim_modes_row(dx: f64, dz: f64, settings: &Settings, basis: &ModeBasis, width: usize) -> ResultRow {
    let mut row = RowBuilder::new();
    let r = CrackSpec::new(dx, dz, settings.kzr).and_then(|spec| {
        let scene = build_crack(&spec)?;
        let parts =
            fim_ms_contributions(&scene, basis, &crack_params(), Some(&crack_jacobian()), &settings.ms_options())?;
        Ok(parts.iter().flat_map(|p| [p.fisher.matrix[(0, 0)], p.fisher.matrix[(1, 1)]]).collect())
    });
    row.block("fim_modes", width, r);
    row.finish(dx, dz)
}

/// Evaluates every grid point independently (in parallel, in order); a
/// failing point yields NaN entries and a status message.
pub fn run_sweep(spec: &SweepSpec, settings: &Settings) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    settings.validate()?;
    let basis = settings.basis()?;
    let width = output_columns(spec.task, settings)?.len();
    Ok(spec
        .grid()
        .par_iter()
        .map(|&(dx, dz)| match spec.task {
            Task::Crb => crb_row(dx, dz, settings, &basis),
            Task::Chernoff => chernoff_row(dx, dz, settings, &basis),
            Task::FimModes => fim_modes_row(dx, dz, settings, &basis, width),
        })
        .collect())
}

pub fn sweep_table(spec: &SweepSpec, settings: &Settings) -> Result<Table> {
    let rows = run_sweep(spec, settings)?;
    let mut columns = vec!["dx".to_string(), "dz".to_string()];
    columns.extend(output_columns(spec.task, settings)?);
    columns.push("status".into());
    let mut t = Table::new(columns);
    settings.annotate(&mut t);
    t.meta("task", spec.task.name())
        .meta("variable", spec.variable.name())
        .meta("range", format!("[{}, {}]", spec.lo, spec.hi))
        .meta("points", spec.points)
        .meta("scale", if spec.scale == Scale::Log { "log" } else { "linear" })
        .meta(if spec.variable == Variable::DeltaX { "dz" } else { "dx" }, spec.fixed);
    for r in rows {
        let mut cells: Vec<Cell> = vec![r.delta_x.into(), r.delta_z.into()];
        cells.extend(r.values.into_iter().map(Cell::Num));
        cells.push(Cell::Text(r.status));
        t.push(cells);
    }
    Ok(t)
}

/// Which route computes a single-point QFIM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QfimPath {
    Reduced,
    General,
    Oracle,
}

/// Which information matrix a point report shows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointKind {
    Qfim(QfimPath),
    ModeSorting,
    DirectImaging,
}

/// Information matrix of the crack at one point, over `(δx, δz)` or, with
/// `raw`, over the source displacements `(δx₁, δx₂, δz₃)`.
pub fn point_table(kind: PointKind, dx: f64, dz: f64, raw: bool, settings: &Settings) -> Result<Table> {
    settings.validate()?;
    let scene = build_crack(&CrackSpec::new(dx, dz, settings.kzr)?)?;
    let params = crack_params();
    let jac = crack_jacobian();
    let jac_opt = if raw { None } else { Some(&jac) };
    let mut quad_err = None;
    let (name, f) = match kind {
        PointKind::Qfim(path) => {
            let h = match path {
                QfimPath::Reduced => qfim_reduced(&scene, &params)?,
                QfimPath::General => qfim_general(&scene, &params)?,
                QfimPath::Oracle => qfim_embedding_oracle(&scene, &params)?,
            };
            let h = if raw { h } else { reparametrize(&h, &jac)? };
            ("qfim", h)
        }
        PointKind::ModeSorting => {
            ("fim-ms", fim_ms(&scene, &settings.basis()?, &params, jac_opt, &settings.ms_options())?)
        }
        PointKind::DirectImaging => {
            let d = fim_di_estimate(&scene, &params, &settings.quad, jac_opt)?;
            quad_err = Some(d.error);
            ("fim-di", d.fisher)
        }
    };
    let mut columns = vec!["param".to_string()];
    columns.extend(f.params.iter().cloned());
    let mut t = Table::new(columns);
    settings.annotate(&mut t);
    t.meta("task", name).meta("dx", dx).meta("dz", dz);
    if let Some(e) = quad_err {
        t.meta("quad_error", e);
    }
    for (i, p) in f.params.iter().enumerate() {
        let mut cells: Vec<Cell> = vec![p.as_str().into()];
        cells.extend((0..f.dim()).map(|j| Cell::Num(f.matrix[(i, j)])));
        t.push(cells);
    }
    Ok(t)
}

/// Per-channel mode-sorting information at one point.
pub fn mode_contrib_table(dx: f64, dz: f64, settings: &Settings) -> Result<Table> {
    settings.validate()?;
    let scene = build_crack(&CrackSpec::new(dx, dz, settings.kzr)?)?;
    let parts = fim_ms_contributions(
        &scene,
        &settings.basis()?,
        &crack_params(),
        Some(&crack_jacobian()),
        &settings.ms_options(),
    )?;
    let columns = ["channel", "j", "l", "prob", "f_dx", "f_dz", "f_dxdz"];
    let mut t = Table::new(columns.iter().map(|s| s.to_string()).collect());
    settings.annotate(&mut t);
    t.meta("task", "mode-contrib").meta("dx", dx).meta("dz", dz);
    for p in parts {
        let (j, l) = p.mode.map_or((-1, -1), |m| (m.j as i64, m.l as i64));
        let f = &p.fisher.matrix;
        t.push(vec![
            p.label().into(),
            Cell::Int(j),
            Cell::Int(l),
            p.prob.into(),
            f[(0, 0)].into(),
            f[(1, 1)].into(),
            f[(0, 1)].into(),
        ]);
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(task: Task) -> SweepSpec {
        SweepSpec { variable: Variable::DeltaX, lo: 0.0, hi: 1.0, points: 3, scale: Scale::Linear, fixed: 0.5, task }
    }

    #[test]
    fn grid_endpoints_are_exact() {
        let s = SweepSpec { scale: Scale::Log, lo: 1e-3, hi: 1e-1, points: 20, ..spec(Task::Chernoff) };
        let v = s.values();
        assert_eq!(v[0], 1e-3);
        assert_eq!(v[19], 1e-1);
        assert!(v.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(SweepSpec { lo: 1.0, hi: 1.0, ..spec(Task::Crb) }.validate().is_err());
        assert!(SweepSpec { points: 1, ..spec(Task::Crb) }.validate().is_err());
        assert!(SweepSpec { scale: Scale::Log, ..spec(Task::Crb) }.validate().is_err());
    }

    #[test]
    fn degenerate_point_is_isolated() {
        // δx = 0 makes the edge emitters coincide
        let rows = run_sweep(&spec(Task::Crb), &Settings::default()).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(!rows[0].is_ok());
        assert!(rows[0].values[0].is_nan());
        assert!(rows[1].is_ok() && rows[2].is_ok());
        assert!(rows[1].values.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn mode_columns_match_values() {
        let settings = Settings { max_order: 3, ..Settings::default() };
        let s = SweepSpec { lo: 0.2, ..spec(Task::FimModes) };
        let rows = run_sweep(&s, &settings).unwrap();
        let cols = output_columns(Task::FimModes, &settings).unwrap();
        assert!(rows.iter().all(|r| r.values.len() == cols.len() && r.is_ok()));
    }
}
