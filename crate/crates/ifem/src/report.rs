//! Experiment orchestration and artifacts: run configuration (flat key=value
//! files plus overrides), named presets, convergence-rate fits, CSV results,
//! and static SVG plots.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::amr::{
    adaptive_loop, uniform_loop, AmrConfig, ConvergenceHistory, EstimatorKind, LevelRecord,
};
use crate::assembly::SolverConfig;
use crate::error::{Error, Result};
use crate::estimator::Indicators;
use crate::interface_geometry::{classify, Classification, ElementTag};
use crate::mesh::Mesh;
use crate::problems::{problem_by_name, BenchmarkProblem};
use crate::scalar::{cst, Real};

/// Refinement strategy of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    Uniform,
    Adaptive,
}

/// Complete configuration of one experiment run.
#[derive(Debug, Clone)]
pub struct RunConfig<T> {
    pub problem: String,
    pub rho: T,
    pub p: T,
    pub mode: RunMode,
    pub theta: T,
    pub epsilon: i8,
    pub gamma: T,
    pub estimator: EstimatorKind,
    /// Initial `n x n` grid; `None` uses the problem default.
    pub initial_n: Option<usize>,
    pub max_dof: usize,
    pub max_levels: usize,
    pub solver_tol: T,
    pub out_dir: PathBuf,
    /// Write a plain-text dump of the final mesh.
    pub dump_mesh: bool,
    /// Write SVG plots.
    pub plots: bool,
}

impl<T: Real> Default for RunConfig<T> {
    fn default() -> Self {
        Self {
            problem: "ellipse".into(),
            rho: cst(100.0),
            p: cst(5.0),
            mode: RunMode::Adaptive,
            theta: cst(0.5),
            epsilon: 1,
            gamma: cst(10.0),
            estimator: EstimatorKind::Eta,
            initial_n: None,
            max_dof: 50_000,
            max_levels: 60,
            solver_tol: cst(1e-10),
            out_dir: PathBuf::from("out"),
            dump_mesh: false,
            plots: true,
        }
    }
}

impl<T: Real> RunConfig<T> {
    /// Applies one `key = value` override.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Config(format!("invalid value `{value}` for `{what}`"));
        match key {
            "problem" => self.problem = value.to_string(),
            "rho" => self.rho = parse_scalar(value).ok_or_else(|| bad("rho"))?,
            "p" => self.p = parse_scalar(value).ok_or_else(|| bad("p"))?,
            "mode" => {
                self.mode = match value {
                    "uniform" => RunMode::Uniform,
                    "adaptive" => RunMode::Adaptive,
                    _ => return Err(bad("mode")),
                }
            }
            "theta" => self.theta = parse_scalar(value).ok_or_else(|| bad("theta"))?,
            "epsilon" => self.epsilon = value.parse().map_err(|_| bad("epsilon"))?,
            "gamma" => self.gamma = parse_scalar(value).ok_or_else(|| bad("gamma"))?,
            "estimator" => {
                self.estimator = match value {
                    "eta" => EstimatorKind::Eta,
                    "xi" => EstimatorKind::Xi,
                    "true_error" => EstimatorKind::TrueError,
                    _ => return Err(bad("estimator")),
                }
            }
            "initial_n" => self.initial_n = Some(value.parse().map_err(|_| bad("initial_n"))?),
            "max_dof" => self.max_dof = value.parse().map_err(|_| bad("max_dof"))?,
            "max_levels" => self.max_levels = value.parse().map_err(|_| bad("max_levels"))?,
            "solver_tol" => {
                self.solver_tol = parse_scalar(value).ok_or_else(|| bad("solver_tol"))?
            }
            "out" => self.out_dir = PathBuf::from(value),
            "dump_mesh" => self.dump_mesh = value.parse().map_err(|_| bad("dump_mesh"))?,
            "plots" => self.plots = value.parse().map_err(|_| bad("plots"))?,
            _ => return Err(Error::Config(format!("unknown configuration key `{key}`"))),
        }
        Ok(())
    }

    /// Loads a flat `key = value` file (blank lines and `#` comments allowed).
    pub fn load_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path)?;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("{}:{}: expected `key = value`", path.display(), lineno + 1))
            })?;
            self.apply(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.problem != "ellipse" && self.problem != "petal" {
            return Err(Error::Config(format!("unknown problem `{}`", self.problem)));
        }
        if !(self.theta >= T::zero() && self.theta <= T::one()) {
            return Err(Error::Config("theta must lie in [0, 1]".into()));
        }
        if !matches!(self.epsilon, -1 | 0 | 1) {
            return Err(Error::Config("epsilon must be -1, 0, or 1".into()));
        }
        if !(self.gamma > T::zero()) {
            return Err(Error::Config("gamma must be positive".into()));
        }
        if !(self.rho > T::zero()) || !(self.p > T::zero()) {
            return Err(Error::Config("rho and p must be positive".into()));
        }
        if self.max_dof == 0 || self.max_levels == 0 {
            return Err(Error::Config("budgets must be positive".into()));
        }
        if self.initial_n == Some(0) {
            return Err(Error::Config("initial_n must be >= 1".into()));
        }
        if !(self.solver_tol > T::zero()) {
            return Err(Error::Config("solver_tol must be positive".into()));
        }
        Ok(())
    }

    pub fn build_problem(&self) -> Result<BenchmarkProblem<T>> {
        problem_by_name(&self.problem, self.rho, self.p)
            .ok_or_else(|| Error::Config(format!("unknown problem `{}`", self.problem)))
    }

    pub fn solver_config(&self) -> SolverConfig<T> {
        SolverConfig {
            epsilon: self.epsilon,
            gamma: self.gamma,
            tol: self.solver_tol,
            ..Default::default()
        }
    }

    pub fn amr_config(&self) -> AmrConfig<T> {
        AmrConfig {
            theta: self.theta,
            max_dof: self.max_dof,
            max_levels: self.max_levels,
            estimator: self.estimator,
        }
    }

    pub fn initial_mesh(&self, problem: &BenchmarkProblem<T>) -> Result<Mesh<T>> {
        Mesh::initial(self.initial_n.unwrap_or(problem.default_initial_n), problem.domain)
    }
}

fn parse_scalar<T: Real>(s: &str) -> Option<T> {
    s.parse::<f64>().ok().map(cst)
}

/// Named benchmark presets.
pub fn preset<T: Real>(name: &str) -> Option<RunConfig<T>> {
    let mut c = RunConfig::<T>::default();
    match name {
        // Moderate contrast, smooth solution.
        "ex61" => {}
        // Large coefficient jump.
        "ex62" => {
            c.rho = cst(1e6);
            c.max_dof = 20_000;
        }
        // Large jump plus a point singularity at the origin.
        "ex63" => {
            c.rho = cst(1e6);
            c.p = cst(0.5);
            c.max_dof = 30_000;
        }
        // Petal-shaped interface on a finer 16x16 initial mesh.
        "ex64" => {
            c.problem = "petal".into();
            c.rho = cst(10.0);
            c.max_dof = 40_000;
        }
        // Indicator variant without the geometric-mismatch term.
        "ex65" => {
            c.problem = "petal".into();
            c.rho = cst(10.0);
            c.estimator = EstimatorKind::Xi;
            c.max_dof = 20_000;
        }
        // True energy error as the marking indicator, large jump; same budget
        // as ex62 so the two runs compare errors over a matched DOF range.
        "ex66" => {
            c.rho = cst(1e6);
            c.estimator = EstimatorKind::TrueError;
            c.max_dof = 20_000;
        }
        _ => return None,
    }
    Some(c)
}

/// History plus the final mesh and a human-readable summary.
pub struct RunArtifacts<T> {
    pub history: ConvergenceHistory<T>,
    pub final_mesh: Mesh<T>,
    pub summary: String,
}

/// Executes a run and writes `results.csv`, `summary.txt`, and (optionally)
/// `convergence.svg`, `mesh.svg`, `mesh.txt` into the output directory.
pub fn run<T: Real>(config: &RunConfig<T>) -> Result<RunArtifacts<T>> {
    config.validate()?;
    let problem = config.build_problem()?;
    let mesh0 = config.initial_mesh(&problem)?;
    let solver = config.solver_config();
    let (history, final_mesh) = match config.mode {
        RunMode::Adaptive => adaptive_loop(mesh0, &problem, &solver, &config.amr_config())?,
        RunMode::Uniform => uniform_loop(
            mesh0,
            &problem,
            &solver,
            config.estimator,
            config.max_levels,
            config.max_dof,
        )?,
    };

    let summary = summarize(&history);
    fs::create_dir_all(&config.out_dir)?;
    fs::write(config.out_dir.join("results.csv"), results_csv(&history))?;
    fs::write(config.out_dir.join("summary.txt"), &summary)?;
    if config.plots {
        let class = classify(&final_mesh, &*problem.level_set)?;
        fs::write(config.out_dir.join("mesh.svg"), mesh_svg(&final_mesh, &class))?;
        let curves = history_curves(&history, "");
        fs::write(config.out_dir.join("convergence.svg"), convergence_svg(&curves))?;
    }
    if config.dump_mesh {
        let class = classify(&final_mesh, &*problem.level_set)?;
        fs::write(config.out_dir.join("mesh.txt"), dump_with_cuts(&final_mesh, &class))?;
    }
    Ok(RunArtifacts { history, final_mesh, summary })
}

/// Least-squares slope of `log(field)` versus `log(DOF)` over the final
/// `last_k` levels.
pub fn convergence_rate<T: Real>(
    records: &[LevelRecord<T>],
    field: impl Fn(&LevelRecord<T>) -> Option<T>,
    last_k: usize,
) -> Result<T> {
    if last_k < 2 || records.len() < last_k {
        return Err(Error::Config(format!(
            "need at least {last_k} levels (have {}) for a rate fit",
            records.len()
        )));
    }
    let tail = &records[records.len() - last_k..];
    let mut data = Vec::with_capacity(last_k);
    for r in tail {
        let v = field(r).ok_or_else(|| Error::MissingData("field value absent".into()))?;
        if !(v > T::zero()) {
            return Err(Error::Config("rate fit requires positive values".into()));
        }
        data.push(((crate::scalar::from_usize::<T>(r.n_dof)).ln(), v.ln()));
    }
    let n = crate::scalar::from_usize::<T>(data.len());
    let sx: T = data.iter().map(|d| d.0).sum();
    let sy: T = data.iter().map(|d| d.1).sum();
    let sxx: T = data.iter().map(|d| d.0 * d.0).sum();
    let sxy: T = data.iter().map(|d| d.0 * d.1).sum();
    Ok((n * sxy - sx * sy) / (n * sxx - sx * sx))
}

/// Summary with fitted slopes and the mean efficiency index.
pub fn summarize<T: Real>(history: &ConvergenceHistory<T>) -> String {
    let records = &history.records;
    let k = records.len().min(6);
    let mut s = String::new();
    let _ = writeln!(s, "levels: {}", records.len());
    if let Some(last) = records.last() {
        let _ = writeln!(s, "final dof: {}", last.n_dof);
    }
    if let Ok(rate) = convergence_rate(records, |r| r.energy_error, k) {
        let _ = writeln!(s, "energy error slope (last {k}): {rate:.4}");
    }
    if let Ok(rate) = convergence_rate(records, |r| Some(r.estimator), k) {
        let _ = writeln!(s, "estimator slope (last {k}): {rate:.4}");
    }
    let effs: Vec<T> = records.iter().filter_map(|r| r.eff_index).collect();
    if !effs.is_empty() {
        let mean = effs.iter().copied().sum::<T>() / crate::scalar::from_usize(effs.len());
        let _ = writeln!(s, "mean efficiency index: {mean:.4}");
    }
    s
}

fn fmt_opt<T: Real>(v: Option<T>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => "NaN".into(),
    }
}

/// Renders the per-level results table.
pub fn results_csv<T: Real>(history: &ConvergenceHistory<T>) -> String {
    let mut s = String::from(
        "level,n_dof,n_elements,n_interface_elements,energy_error,estimator,eff_index,min_angle_deg,wall_ms\n",
    );
    for r in &history.records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{:.3}",
            r.level,
            r.n_dof,
            r.n_elements,
            r.n_interface_elements,
            fmt_opt(r.energy_error),
            r.estimator,
            fmt_opt(r.eff_index),
            r.min_angle_deg,
            r.wall_ms,
        );
    }
    s
}

pub fn export_results_csv<T: Real>(history: &ConvergenceHistory<T>, path: &Path) -> Result<()> {
    fs::write(path, results_csv(history))?;
    Ok(())
}

/// Renders the per-element indicator table.
pub fn indicators_csv<T: Real>(indicators: &Indicators<T>) -> String {
    let mut s = String::from(
        "element,indicator,interface_normal_sq,interface_tangential_sq,mismatch_sq,regular_sq\n",
    );
    for (k, (e, a)) in indicators
        .per_element
        .iter()
        .zip(&indicators.addends)
        .enumerate()
    {
        let _ = writeln!(s, "{},{},{},{},{},{}", k, e, a[0], a[1], a[2], a[3]);
    }
    s
}

/// Plain-text mesh dump plus one `cut` record per interface element.
pub fn dump_with_cuts<T: Real>(mesh: &Mesh<T>, class: &Classification<T>) -> String {
    let mut s = mesh.dump();
    for cut in &class.cuts {
        let _ = writeln!(
            s,
            "cut {} {} {} {} {}",
            cut.element, cut.d.point.x, cut.d.point.y, cut.e.point.x, cut.e.point.y
        );
    }
    s
}

/// SVG of the mesh: one polygon per triangle, interface elements highlighted,
/// interface chords overlaid as a polyline approximation.
pub fn mesh_svg<T: Real>(mesh: &Mesh<T>, class: &Classification<T>) -> String {
    let size = 800.0f64;
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for p in &mesh.vertices {
        let (px, py) = (p.x.to_f64().unwrap(), p.y.to_f64().unwrap());
        x0 = x0.min(px);
        y0 = y0.min(py);
        x1 = x1.max(px);
        y1 = y1.max(py);
    }
    let scale = size / (x1 - x0).max(y1 - y0);
    let map = |p: crate::geometry::Point2<T>| {
        let px = (p.x.to_f64().unwrap() - x0) * scale;
        let py = size - (p.y.to_f64().unwrap() - y0) * scale;
        (px, py)
    };

    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {size} {size}\">\n"
    );
    for k in 0..mesh.triangles.len() {
        let pts = mesh.triangle_points(k);
        let fill = match class.tags[k] {
            ElementTag::Interface(_) => "#ffd9a0",
            _ => "#f6f6f6",
        };
        let coords: Vec<String> = pts
            .iter()
            .map(|&p| {
                let (x, y) = map(p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            s,
            "<polygon points=\"{}\" fill=\"{fill}\" stroke=\"#555\" stroke-width=\"0.5\"/>",
            coords.join(" ")
        );
    }
    for cut in &class.cuts {
        let (ax, ay) = map(cut.d.point);
        let (bx, by) = map(cut.e.point);
        let _ = writeln!(
            s,
            "<line x1=\"{ax:.2}\" y1=\"{ay:.2}\" x2=\"{bx:.2}\" y2=\"{by:.2}\" stroke=\"#c0392b\" stroke-width=\"1.5\"/>"
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn export_mesh_svg<T: Real>(
    mesh: &Mesh<T>,
    class: &Classification<T>,
    path: &Path,
) -> Result<()> {
    fs::write(path, mesh_svg(mesh, class))?;
    Ok(())
}

/// Named log-log curve: `(label, points as (dof, value))`.
pub type Curve = (String, Vec<(f64, f64)>);

/// Energy-error and estimator curves of a history, labels prefixed for
/// multi-run plots.
pub fn history_curves<T: Real>(history: &ConvergenceHistory<T>, prefix: &str) -> Vec<Curve> {
    let mut curves = Vec::new();
    let errs: Vec<(f64, f64)> = history
        .records
        .iter()
        .filter_map(|r| {
            r.energy_error
                .map(|e| (r.n_dof as f64, e.to_f64().unwrap()))
        })
        .filter(|&(_, e)| e > 0.0)
        .collect();
    if !errs.is_empty() {
        curves.push((format!("{prefix}energy error"), errs));
    }
    let est: Vec<(f64, f64)> = history
        .records
        .iter()
        .map(|r| (r.n_dof as f64, r.estimator.to_f64().unwrap()))
        .filter(|&(_, e)| e > 0.0)
        .collect();
    if !est.is_empty() {
        curves.push((format!("{prefix}estimator"), est));
    }
    curves
}

/// Log-log convergence plot with a reference line of slope -1/2.
pub fn convergence_svg(curves: &[Curve]) -> String {
    let (w, h, m) = (800.0f64, 600.0f64, 60.0f64);
    let mut pts: Vec<(f64, f64)> = curves.iter().flat_map(|c| c.1.iter().copied()).collect();
    if pts.is_empty() {
        pts.push((1.0, 1.0));
    }
    let lx: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let (x0, x1) = (
        lx.iter().cloned().fold(f64::MAX, f64::min),
        lx.iter().cloned().fold(f64::MIN, f64::max),
    );
    let (y0, y1) = (
        ly.iter().cloned().fold(f64::MAX, f64::min),
        ly.iter().cloned().fold(f64::MIN, f64::max),
    );
    let (dx, dy) = ((x1 - x0).max(1e-9), (y1 - y0).max(1e-9));
    let map = |x: f64, y: f64| {
        (
            m + (x.ln() - x0) / dx * (w - 2.0 * m),
            h - m - (y.ln() - y0) / dy * (h - 2.0 * m),
        )
    };

    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {w} {h}\">\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n\
         <line x1=\"{m}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n\
         <line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{}\" stroke=\"black\"/>\n",
        h - m,
        w - m,
        h - m,
        h - m
    );
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"];
    for (i, (label, data)) in curves.iter().enumerate() {
        let color = colors[i % colors.len()];
        let path: Vec<String> = data
            .iter()
            .map(|&(x, y)| {
                let (px, py) = map(x, y);
                format!("{px:.1},{py:.1}")
            })
            .collect();
        let _ = writeln!(
            s,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>",
            path.join(" ")
        );
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" fill=\"{color}\" font-size=\"14\">{label}</text>",
            w - m - 150.0,
            m + 20.0 * (i as f64 + 1.0)
        );
    }
    // Reference slope -1/2 anchored at the first point of the first curve.
    if let Some((_, data)) = curves.first() {
        if let (Some(&(xa, ya)), Some(&(xb, _))) = (data.first(), data.last()) {
            let yb = ya * (xb / xa).powf(-0.5);
            let (px0, py0) = map(xa, ya);
            let (px1, py1) = map(xb, yb);
            let _ = writeln!(
                s,
                "<line x1=\"{px0:.1}\" y1=\"{py0:.1}\" x2=\"{px1:.1}\" y2=\"{py1:.1}\" \
                 stroke=\"#888\" stroke-dasharray=\"6 4\"/>\n\
                 <text x=\"{px1:.1}\" y=\"{py1:.1}\" fill=\"#888\" font-size=\"14\">slope -1/2</text>"
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

pub fn export_convergence_svg(curves: &[Curve], path: &Path) -> Result<()> {
    fs::write(path, convergence_svg(curves))?;
    Ok(())
}
