//! Adaptive mesh refinement: equilibration (Dörfler) marking and the
//! Solve - Estimate - Mark - Refine driver, plus a uniform-refinement driver
//! for comparisons.

use std::time::Instant;

use crate::assembly::{solve, SolverConfig};
use crate::error::Result;
use crate::estimator::{
    efficiency_index, eta_indicators, true_error_indicators, xi_indicators, Indicators,
};
use crate::interface_geometry::classify;
use crate::mesh::Mesh;
use crate::problems::{energy_error, BenchmarkProblem};
use crate::scalar::Real;

/// Which quantity drives marking (and is reported as "the estimator").
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    Eta,
    Xi,
    TrueError,
}

/// Adaptive-loop parameters.
#[derive(Debug, Clone, Copy)]
pub struct AmrConfig<T> {
    /// Marking threshold in `[0, 1]`.
    pub theta: T,
    /// Stop once the free-DOF count reaches this budget.
    pub max_dof: usize,
    /// Hard cap on the number of levels.
    pub max_levels: usize,
    pub estimator: EstimatorKind,
}

impl<T: Real> Default for AmrConfig<T> {
    fn default() -> Self {
        Self {
            theta: crate::scalar::cst(0.5),
            max_dof: 50_000,
            max_levels: 60,
            estimator: EstimatorKind::Eta,
        }
    }
}

/// One level of a convergence run.
#[derive(Debug, Clone, Copy)]
pub struct LevelRecord<T> {
    pub level: usize,
    pub n_dof: usize,
    pub n_elements: usize,
    pub n_interface_elements: usize,
    /// True energy-norm error, when an exact solution is available.
    pub energy_error: Option<T>,
    /// Global value of the estimator driving the run.
    pub estimator: T,
    pub eta: T,
    pub xi: T,
    pub eff_index: Option<T>,
    pub min_angle_deg: T,
    pub wall_ms: f64,
}

/// Per-level records of a run; DOF counts increase strictly across levels.
#[derive(Debug, Clone, Default)]
pub struct ConvergenceHistory<T> {
    pub records: Vec<LevelRecord<T>>,
}

impl<T: Real> ConvergenceHistory<T> {
    pub fn last(&self) -> Option<&LevelRecord<T>> {
        self.records.last()
    }
}

/// Minimal marked set: elements sorted by indicator descending (ties by id
/// ascending), shortest prefix whose squared sum reaches `theta^2` times the
/// global squared indicator.
pub fn mark<T: Real>(indicators: &Indicators<T>, theta: T) -> Vec<usize> {
    let mut order: Vec<usize> = (0..indicators.per_element.len()).collect();
    order.sort_by(|&a, &b| {
        indicators.per_element[b]
            .partial_cmp(&indicators.per_element[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    // Accumulate the total in the same order as the prefix sums so that
    // theta = 1 terminates exactly at the last positive indicator.
    let total_sq: T = order
        .iter()
        .map(|&k| indicators.per_element[k] * indicators.per_element[k])
        .sum();
    let target = theta * theta * total_sq;
    let mut acc = T::zero();
    let mut out = Vec::new();
    for &k in &order {
        if acc >= target {
            break;
        }
        let e = indicators.per_element[k];
        if e == T::zero() {
            break;
        }
        acc = acc + e * e;
        out.push(k);
    }
    out
}

struct LevelOutput<T> {
    record: LevelRecord<T>,
    indicators: Indicators<T>,
    unresolved: Vec<usize>,
}

fn run_level<T: Real>(
    mesh: &Mesh<T>,
    problem: &BenchmarkProblem<T>,
    solver_config: &SolverConfig<T>,
    kind: EstimatorKind,
    level: usize,
) -> Result<LevelOutput<T>> {
    let started = Instant::now();
    let class = classify(mesh, &*problem.level_set)?;
    let solution = solve(mesh, &class, problem, solver_config)?;
    let eta = eta_indicators(mesh, &class, &solution, problem)?;
    let xi = xi_indicators(mesh, &class, &solution, problem)?;
    let indicators = match kind {
        EstimatorKind::Eta => eta.clone(),
        EstimatorKind::Xi => xi.clone(),
        EstimatorKind::TrueError => true_error_indicators(mesh, &class, &solution, problem),
    };
    let err = problem
        .exact
        .as_ref()
        .map(|_| energy_error(mesh, &class, &solution, problem));
    let eff = err.and_then(|e| efficiency_index(indicators.total, e));
    let stats = mesh.stats();
    let record = LevelRecord {
        level,
        n_dof: solution.n_dof,
        n_elements: mesh.triangles.len(),
        n_interface_elements: class.n_interface_elements(),
        energy_error: err,
        estimator: indicators.total,
        eta: eta.total,
        xi: xi.total,
        eff_index: eff,
        min_angle_deg: stats.min_angle_deg,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
    };
    Ok(LevelOutput { record, indicators, unresolved: class.unresolved })
}

/// Solve - Estimate - Mark - Refine until the DOF budget or level cap.
/// Returns the history together with the final mesh.
pub fn adaptive_loop<T: Real>(
    initial_mesh: Mesh<T>,
    problem: &BenchmarkProblem<T>,
    solver_config: &SolverConfig<T>,
    amr_config: &AmrConfig<T>,
) -> Result<(ConvergenceHistory<T>, Mesh<T>)> {
    let mut mesh = initial_mesh;
    let mut history = ConvergenceHistory::default();
    for level in 0..amr_config.max_levels {
        let out = run_level(&mesh, problem, solver_config, amr_config.estimator, level)
            .map_err(|e| e.at_level(level))?;
        history.records.push(out.record);
        if out.record.n_dof >= amr_config.max_dof {
            break;
        }
        let mut marked = mark(&out.indicators, amr_config.theta);
        // Elements the interface crossed without a two-edge cut must refine
        // regardless of their indicator, or the geometry never resolves.
        for k in out.unresolved {
            if !marked.contains(&k) {
                marked.push(k);
            }
        }
        if marked.is_empty() {
            break;
        }
        mesh = mesh.refine_nvb(&marked).map_err(|e| e.at_level(level))?;
    }
    Ok((history, mesh))
}

/// Refine every element each level; same records as the adaptive driver.
pub fn uniform_loop<T: Real>(
    initial_mesh: Mesh<T>,
    problem: &BenchmarkProblem<T>,
    solver_config: &SolverConfig<T>,
    kind: EstimatorKind,
    max_levels: usize,
    max_dof: usize,
) -> Result<(ConvergenceHistory<T>, Mesh<T>)> {
    let mut mesh = initial_mesh;
    let mut history = ConvergenceHistory::default();
    for level in 0..max_levels {
        let out = run_level(&mesh, problem, solver_config, kind, level)
            .map_err(|e| e.at_level(level))?;
        history.records.push(out.record);
        if out.record.n_dof >= max_dof {
            break;
        }
        mesh = mesh.refine_uniform().map_err(|e| e.at_level(level))?;
    }
    Ok((history, mesh))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Rect;
    use crate::problems::ellipse_problem;
    use proptest::prelude::*;

    fn indicators_of(values: Vec<f64>) -> Indicators<f64> {
        let total = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        Indicators {
            addends: values.iter().map(|&v| [v * v, 0.0, 0.0, 0.0]).collect(),
            per_element: values,
            total,
        }
    }

    #[test]
    fn theta_zero_marks_nothing() {
        let ind = indicators_of(vec![3.0, 1.0, 2.0]);
        assert!(mark(&ind, 0.0).is_empty());
    }

    #[test]
    fn theta_one_marks_all_positive() {
        let ind = indicators_of(vec![3.0, 0.0, 2.0, 1.0]);
        let mut m = mark(&ind, 1.0);
        m.sort();
        assert_eq!(m, vec![0, 2, 3]);
    }

    #[test]
    fn four_equal_elements_at_half_theta_mark_one() {
        let ind = indicators_of(vec![1.0; 4]);
        assert_eq!(mark(&ind, 0.5).len(), 1);
    }

    #[test]
    fn ties_break_by_id() {
        let ind = indicators_of(vec![2.0, 5.0, 5.0, 1.0]);
        // total sq = 55; theta^2 * 55 = 35.2 needs both tied elements.
        let m = mark(&ind, 0.8);
        assert_eq!(m[0], 1);
        assert_eq!(m[1], 2);
    }

    proptest! {
        #[test]
        fn marking_is_minimal_and_monotone_in_theta(
            values in prop::collection::vec(0.0f64..1.0, 1..50),
            t1 in 0.0f64..1.0,
            t2 in 0.0f64..1.0,
        ) {
            let ind = indicators_of(values.clone());
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let m_lo = mark(&ind, lo);
            let m_hi = mark(&ind, hi);
            // Monotone: smaller theta marks a prefix of the larger marking.
            prop_assert!(m_lo.len() <= m_hi.len());
            prop_assert_eq!(&m_lo[..], &m_hi[..m_lo.len()]);
            // Sufficient: the marked sum reaches the target.
            let total: f64 = values.iter().map(|v| v * v).sum();
            let sum: f64 = m_hi.iter().map(|&k| values[k] * values[k]).sum();
            prop_assert!(sum >= hi * hi * total - 1e-12);
            // Minimal: dropping the last marked element falls short.
            if let Some((_, head)) = m_hi.split_last() {
                let short: f64 = head.iter().map(|&k| values[k] * values[k]).sum();
                prop_assert!(short < hi * hi * total + 1e-12);
            }
        }
    }

    #[test]
    fn budget_below_initial_dof_gives_single_level() {
        let prob = ellipse_problem(10.0, 3.0, 1.0);
        let mesh = Mesh::initial(4, Rect::unit_symmetric()).unwrap();
        let amr = AmrConfig { max_dof: 1, ..Default::default() };
        let (h, _) = adaptive_loop(mesh, &prob, &SolverConfig::default(), &amr).unwrap();
        assert_eq!(h.records.len(), 1);
    }

    #[test]
    fn uniform_levels_quadruple_elements() {
        let prob = ellipse_problem(10.0, 3.0, 1.0);
        let mesh = Mesh::initial(4, Rect::unit_symmetric()).unwrap();
        let (h, _) = uniform_loop(
            mesh,
            &prob,
            &SolverConfig::default(),
            EstimatorKind::Eta,
            3,
            1_000_000,
        )
        .unwrap();
        assert_eq!(h.records.len(), 3);
        assert_eq!(h.records[1].n_elements, 4 * h.records[0].n_elements);
        assert_eq!(h.records[2].n_elements, 16 * h.records[0].n_elements);
    }

    #[test]
    fn adaptive_history_is_consistent() {
        let prob = ellipse_problem::<f64>(100.0, 5.0, 1.0);
        let mesh = Mesh::initial(4, Rect::unit_symmetric()).unwrap();
        let amr = AmrConfig { max_dof: 600, ..Default::default() };
        let (h, final_mesh) = adaptive_loop(mesh, &prob, &SolverConfig::default(), &amr).unwrap();
        final_mesh.audit().unwrap();
        assert!(h.records.len() > 1);
        for w in h.records.windows(2) {
            assert!(w[1].n_dof > w[0].n_dof, "DOF counts must strictly increase");
        }
        for r in &h.records {
            assert!(r.estimator.is_finite() && r.estimator > 0.0);
            assert!(r.energy_error.unwrap() > 0.0);
            assert!(r.eff_index.unwrap() > 0.0);
            assert!(r.min_angle_deg >= 44.9);
        }
    }
}
