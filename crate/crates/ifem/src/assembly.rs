//! Global system assembly and solve: volume stiffness (exact per chord
//! piece), interface-edge consistency/symmetrization/penalty terms, load and
//! Neumann vectors, Dirichlet lifting, and the discrete solution with its
//! per-element gradients.

use crate::error::Result;
use crate::geometry::Point2;
use crate::ife_space::{build_bases, build_dof_map, p1_basis, DofMap, IFELocalBasis, LinearPoly};
use crate::interface_geometry::{Classification, ElementTag, Side};
use crate::mesh::{BoundaryMarker, Mesh};
use crate::problems::BenchmarkProblem;
use crate::quadrature::{segment_gauss2, triangle_degree4};
use crate::scalar::{cst, Real};
use crate::sparse::{solve_bicgstab, solve_cg, CsrMatrix, SolveReport};

/// Discretization and solver parameters.
#[derive(Debug, Clone, Copy)]
pub struct SolverConfig<T> {
    /// Symmetrization sign of the edge terms: -1 (symmetric), 0, or +1.
    pub epsilon: i8,
    /// Penalty strength; the per-edge factor is `gamma / h_F`.
    pub gamma: T,
    /// Relative residual tolerance of the linear solve.
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            epsilon: 1,
            gamma: cst(10.0),
            tol: cst(1e-10),
            max_iter: 200_000,
        }
    }
}

/// Assembled linear system with its DOF bookkeeping.
pub struct SparseSystem<T> {
    pub matrix: CsrMatrix<T>,
    pub rhs: Vec<T>,
    pub dof_map: DofMap,
    pub bases: Vec<Option<IFELocalBasis<T>>>,
    /// Dirichlet boundary value per vertex (zero at free vertices).
    pub dirichlet_values: Vec<T>,
}

/// The discrete solution: nodal values plus cached per-element gradients.
pub struct DiscreteSolution<T> {
    /// Value at every mesh vertex (Dirichlet vertices carry boundary data).
    pub nodal: Vec<T>,
    /// Number of free DOFs.
    pub n_dof: usize,
    pub report: SolveReport<T>,
    grads: Vec<Point2<T>>,
    iface_grads: Vec<Option<(Point2<T>, Point2<T>)>>,
}

impl<T: Real> DiscreteSolution<T> {
    /// Constant gradient on a non-interface element. On interface elements
    /// this is the area-weighted average of the two piece gradients; use
    /// [`Self::interface_gradients`] there instead.
    pub fn gradient(&self, k: usize) -> Point2<T> {
        self.grads[k]
    }

    /// `(minus-piece, plus-piece)` gradients of an interface element.
    pub fn interface_gradients(&self, k: usize) -> (Point2<T>, Point2<T>) {
        self.iface_grads[k].expect("not an interface element")
    }

    /// Gradient of the trace seen from element `k` on its given chord side
    /// (the side is ignored for non-interface elements).
    pub fn gradient_on_side(&self, k: usize, side: Side) -> Point2<T> {
        match self.iface_grads[k] {
            Some((gm, gp)) => match side {
                Side::Minus => gm,
                Side::Plus => gp,
            },
            None => self.grads[k],
        }
    }
}

/// Assembles the penalized bilinear form and right-hand side.
pub fn assemble<T: Real>(
    mesh: &Mesh<T>,
    class: &Classification<T>,
    problem: &BenchmarkProblem<T>,
    config: &SolverConfig<T>,
) -> Result<SparseSystem<T>> {
    let bases = build_bases(mesh, class, problem.alpha_minus, problem.alpha_plus)?;
    let dof_map = build_dof_map(mesh);
    let n = dof_map.n_free;

    let mut dirichlet_values = vec![T::zero(); mesh.vertices.len()];
    for &v in &dof_map.dirichlet_vertices {
        dirichlet_values[v] = (problem.dirichlet)(mesh.vertices[v]);
    }

    let mut triplets: Vec<(usize, usize, T)> = Vec::new();
    let mut rhs = vec![T::zero(); n];
    // Routes a full-index entry through the Dirichlet lifting.
    let add = |triplets: &mut Vec<(usize, usize, T)>,
                   rhs: &mut Vec<T>,
                   row_v: usize,
                   col_v: usize,
                   val: T| {
        if let Some(r) = dof_map.free_index(row_v) {
            match dof_map.free_index(col_v) {
                Some(c) => triplets.push((r, c, val)),
                None => rhs[r] = rhs[r] - val * dirichlet_values[col_v],
            }
        }
    };

    // Volume terms: gradients are constant per (piece of an) element, so the
    // stiffness integrals are exact.
    for k in 0..mesh.triangles.len() {
        let tri_v = mesh.triangles[k].v;
        match class.tags[k] {
            ElementTag::Interface(ci) => {
                let cut = &class.cuts[ci];
                let basis = bases[k].as_ref().unwrap();
                let contributions = [
                    (problem.alpha_minus, cut.area_minus(), &basis.minus),
                    (problem.alpha_plus, cut.area_plus(), &basis.plus),
                ];
                for (alpha, area, polys) in contributions {
                    for i in 0..3 {
                        for j in 0..3 {
                            let val = alpha * area * polys[i].grad().dot(polys[j].grad());
                            add(&mut triplets, &mut rhs, tri_v[i], tri_v[j], val);
                        }
                    }
                }
            }
            tag => {
                let pts = mesh.triangle_points(k);
                let p1 = p1_basis(&pts);
                let g = mesh.element_geometry(k);
                let alpha = problem.alpha(match tag {
                    ElementTag::Minus => Side::Minus,
                    _ => Side::Plus,
                });
                for i in 0..3 {
                    for j in 0..3 {
                        let val = alpha * g.area * p1[i].grad().dot(p1[j].grad());
                        add(&mut triplets, &mut rhs, tri_v[i], tri_v[j], val);
                    }
                }
            }
        }
    }

    // Interface-edge terms: consistency, symmetrization, penalty. Each cut
    // interior edge is integrated per sub-segment, where every trace is a
    // single linear polynomial and the coefficient is constant.
    let eps = cst::<T>(config.epsilon as f64);
    for (&f, split) in &class.edge_splits {
        let edge = &mesh.edges[f];
        let k1 = edge.tris[0].expect("edge without adjacent element");
        // Edge terms live on interior edges only; a cut boundary edge (the
        // interface exits the domain there) has no jump to penalize.
        let Some(k2) = edge.tris[1] else { continue };
        let normal = mesh.edge_normal(f); // out of k1
        let h_f = mesh.edge_length(f);
        let pen = config.gamma / h_f;

        // Local DOFs: vertices of both elements (shared edge endpoints merged).
        let mut locals: Vec<usize> = Vec::with_capacity(4);
        for &v in mesh.triangles[k1].v.iter().chain(mesh.triangles[k2].v.iter()) {
            if !locals.contains(&v) {
                locals.push(v);
            }
        }
        // For each local DOF and element: local vertex index, if any.
        let slot = |k: usize, v: usize| mesh.triangles[k].v.iter().position(|&w| w == v);

        let [a, b] = mesh.edge_points(f);
        let q = split.point;
        let segments = [
            (a, q, split.first_side),
            (q, b, split.first_side.opposite()),
        ];
        // A neighbor may be uncut (e.g. a demoted sliver cut): its trace is
        // its plain linear basis regardless of the sub-segment side.
        let p1_1 = p1_basis(&mesh.triangle_points(k1));
        let p1_2 = p1_basis(&mesh.triangle_points(k2));
        let piece_of = |k: usize, side: Side, z: usize| -> LinearPoly<T> {
            match bases[k].as_ref() {
                Some(b) => *b.piece(side, z),
                None => {
                    if k == k1 {
                        p1_1[z]
                    } else {
                        p1_2[z]
                    }
                }
            }
        };
        for (pa, pb, side) in segments {
            if pa.dist(pb) == T::zero() {
                continue;
            }
            let alpha_s = problem.alpha(side);
            // Average flux is constant per basis function on the sub-segment.
            let flux: Vec<T> = locals
                .iter()
                .map(|&v| {
                    let g1 = slot(k1, v)
                        .map(|z| piece_of(k1, side, z).grad())
                        .unwrap_or_default();
                    let g2 = slot(k2, v)
                        .map(|z| piece_of(k2, side, z).grad())
                        .unwrap_or_default();
                    alpha_s * cst::<T>(0.5) * (g1.add(g2)).dot(normal)
                })
                .collect();
            let jump = |v: usize, p: Point2<T>| -> T {
                let t1 = slot(k1, v).map(|z| piece_of(k1, side, z).eval(p)).unwrap_or_default();
                let t2 = slot(k2, v).map(|z| piece_of(k2, side, z).eval(p)).unwrap_or_default();
                t1 - t2
            };
            for (i, &vi) in locals.iter().enumerate() {
                for (j, &vj) in locals.iter().enumerate() {
                    let val = segment_gauss2(pa, pb, |p| {
                        let ji = jump(vi, p);
                        let jj = jump(vj, p);
                        -flux[j] * ji + eps * flux[i] * jj + pen * alpha_s * ji * jj
                    });
                    add(&mut triplets, &mut rhs, vi, vj, val);
                }
            }
        }
    }

    // Load vector.
    for k in 0..mesh.triangles.len() {
        let tri_v = mesh.triangles[k].v;
        match class.tags[k] {
            ElementTag::Interface(ci) => {
                let cut = &class.cuts[ci];
                let basis = bases[k].as_ref().unwrap();
                for (tris, side) in [(&cut.sub_plus, Side::Plus), (&cut.sub_minus, Side::Minus)] {
                    for t in tris.iter() {
                        for z in 0..3 {
                            if let Some(r) = dof_map.free_index(tri_v[z]) {
                                let poly = basis.piece(side, z);
                                rhs[r] = rhs[r]
                                    + triangle_degree4(t[0], t[1], t[2], |p| {
                                        (problem.source)(p) * poly.eval(p)
                                    });
                            }
                        }
                    }
                }
            }
            _ => {
                let pts = mesh.triangle_points(k);
                let p1 = p1_basis(&pts);
                for z in 0..3 {
                    if let Some(r) = dof_map.free_index(tri_v[z]) {
                        rhs[r] = rhs[r]
                            + triangle_degree4(pts[0], pts[1], pts[2], |p| {
                                (problem.source)(p) * p1[z].eval(p)
                            });
                    }
                }
            }
        }
    }

    // Neumann boundary term.
    for (f, edge) in mesh.edges.iter().enumerate() {
        if edge.marker != BoundaryMarker::Neumann {
            continue;
        }
        let k = edge.tris[0].unwrap();
        let [a, b] = mesh.edge_points(f);
        let tri_v = mesh.triangles[k].v;
        for (z, &v) in tri_v.iter().enumerate() {
            if let Some(r) = dof_map.free_index(v) {
                let val = match &bases[k] {
                    Some(basis) => {
                        segment_gauss2(a, b, |p| (problem.neumann)(p) * basis.eval(z, p))
                    }
                    None => {
                        let p1 = p1_basis(&mesh.triangle_points(k));
                        segment_gauss2(a, b, |p| (problem.neumann)(p) * p1[z].eval(p))
                    }
                };
                rhs[r] = rhs[r] + val;
            }
        }
    }

    let matrix = CsrMatrix::from_triplets(n, &triplets);
    Ok(SparseSystem {
        matrix,
        rhs,
        dof_map,
        bases,
        dirichlet_values,
    })
}

/// Assembles and solves; `epsilon = -1` yields a symmetric system handled by
/// CG, anything else by BiCGStab.
pub fn solve<T: Real>(
    mesh: &Mesh<T>,
    class: &Classification<T>,
    problem: &BenchmarkProblem<T>,
    config: &SolverConfig<T>,
) -> Result<DiscreteSolution<T>> {
    let system = assemble(mesh, class, problem, config)?;
    let (x, report) = if config.epsilon == -1 {
        solve_cg(&system.matrix, &system.rhs, config.tol, config.max_iter)?
    } else {
        solve_bicgstab(&system.matrix, &system.rhs, config.tol, config.max_iter)?
    };

    let mut nodal = system.dirichlet_values.clone();
    for (i, &v) in system.dof_map.free_vertices.iter().enumerate() {
        nodal[v] = x[i];
    }

    Ok(solution_from_nodal(
        mesh,
        class,
        &system.bases,
        nodal,
        system.dof_map.n_free,
        report,
    ))
}

/// Nodal interpolant of a pointwise function, packaged as a
/// [`DiscreteSolution`]; useful for reproduction and quadrature checks.
pub fn interpolate<T: Real>(
    mesh: &Mesh<T>,
    class: &Classification<T>,
    alpha_minus: T,
    alpha_plus: T,
    f: impl Fn(Point2<T>) -> T,
) -> Result<DiscreteSolution<T>> {
    let bases = build_bases(mesh, class, alpha_minus, alpha_plus)?;
    let nodal: Vec<T> = mesh.vertices.iter().map(|&p| f(p)).collect();
    let n_dof = build_dof_map(mesh).n_free;
    let report = SolveReport { iterations: 0, relative_residual: T::zero() };
    Ok(solution_from_nodal(mesh, class, &bases, nodal, n_dof, report))
}

/// Caches the per-element (piece) gradients of a nodal coefficient vector.
fn solution_from_nodal<T: Real>(
    mesh: &Mesh<T>,
    class: &Classification<T>,
    bases: &[Option<IFELocalBasis<T>>],
    nodal: Vec<T>,
    n_dof: usize,
    report: SolveReport<T>,
) -> DiscreteSolution<T> {
    let mut grads = Vec::with_capacity(mesh.triangles.len());
    let mut iface_grads = vec![None; mesh.triangles.len()];
    for k in 0..mesh.triangles.len() {
        let tri_v = mesh.triangles[k].v;
        match &bases[k] {
            Some(basis) => {
                let mut gm = Point2::<T>::default();
                let mut gp = Point2::<T>::default();
                for z in 0..3 {
                    gm = gm.add(basis.minus[z].grad().scale(nodal[tri_v[z]]));
                    gp = gp.add(basis.plus[z].grad().scale(nodal[tri_v[z]]));
                }
                iface_grads[k] = Some((gm, gp));
                let cut = class.cut_for(k).unwrap();
                let (am, ap) = (cut.area_minus(), cut.area_plus());
                grads.push(gm.scale(am / (am + ap)).add(gp.scale(ap / (am + ap))));
            }
            None => {
                let p1 = p1_basis(&mesh.triangle_points(k));
                let mut g = Point2::<T>::default();
                for z in 0..3 {
                    g = g.add(p1[z].grad().scale(nodal[tri_v[z]]));
                }
                grads.push(g);
            }
        }
    }
    DiscreteSolution { nodal, n_dof, report, grads, iface_grads }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interface_geometry::classify;
    use crate::mesh::Rect;
    use crate::problems::{
        ellipse_problem, energy_error, linear_problem, straight_interface_problem,
    };
    use approx::assert_relative_eq;

    fn unit_mesh(n: usize) -> Mesh<f64> {
        Mesh::initial(n, Rect::unit_symmetric()).unwrap()
    }

    #[test]
    fn constant_coefficient_matrix_matches_five_point_stencil() {
        // On the uniform right-triangle mesh with constant alpha = 1 the P1
        // stiffness matrix is the classical 5-point stencil: 4 on the
        // diagonal, -1 towards N/S/E/W neighbors, 0 across the diagonal.
        let mesh = unit_mesh(4);
        let prob = linear_problem(1.0, 0.0, 0.0, 1.0);
        let class = classify(&mesh, &*prob.level_set).unwrap();
        let sys = assemble(&mesh, &class, &prob, &SolverConfig::default()).unwrap();
        let h = 0.5;
        for (i, &vi) in sys.dof_map.free_vertices.iter().enumerate() {
            assert_relative_eq!(sys.matrix.get(i, i), 4.0, max_relative = 1e-12);
            for (j, &vj) in sys.dof_map.free_vertices.iter().enumerate() {
                if i == j {
                    continue;
                }
                let d = mesh.vertices[vi].sub(mesh.vertices[vj]);
                let expected = if d.norm() < 1.01 * h { -1.0 } else { 0.0 };
                assert_relative_eq!(sys.matrix.get(i, j), expected, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn reproduces_linear_solutions_exactly() {
        let mesh = unit_mesh(4);
        let prob = linear_problem(2.0, -3.0, 0.7, 5.0);
        let class = classify(&mesh, &*prob.level_set).unwrap();
        let mut config = SolverConfig::default();
        config.tol = 1e-13;
        let sol = solve(&mesh, &class, &prob, &config).unwrap();
        let u = prob.exact.as_ref().unwrap().u.clone();
        for (v, &p) in mesh.vertices.iter().enumerate() {
            assert!((sol.nodal[v] - u(p)).abs() <= 1e-10, "vertex {v}");
        }
    }

    #[test]
    fn reproduces_piecewise_linear_interface_solution() {
        // The exact solution lies in the global IFE space, so the method
        // reproduces it up to solver tolerance for every epsilon.
        for epsilon in [-1i8, 0, 1] {
            let mesh = unit_mesh(8);
            let prob = straight_interface_problem(0.31, 1.0, 100.0);
            let class = classify(&mesh, &*prob.level_set).unwrap();
            let config = SolverConfig { epsilon, tol: 1e-12, ..Default::default() };
            let sol = solve(&mesh, &class, &prob, &config).unwrap();
            let u = prob.exact.as_ref().unwrap().u.clone();
            for (v, &p) in mesh.vertices.iter().enumerate() {
                assert!(
                    (sol.nodal[v] - u(p)).abs() <= 1e-9,
                    "epsilon {epsilon}, vertex {v}: {} vs {}",
                    sol.nodal[v],
                    u(p)
                );
            }
        }
    }

    #[test]
    fn symmetric_variant_yields_symmetric_matrix() {
        let mesh = unit_mesh(8);
        let prob = ellipse_problem(100.0, 5.0, 1.0);
        let class = classify(&mesh, &*prob.level_set).unwrap();
        let config = SolverConfig { epsilon: -1, ..Default::default() };
        let sys = assemble(&mesh, &class, &prob, &config).unwrap();
        assert!(sys.matrix.max_relative_asymmetry() <= 1e-12);
    }

    #[test]
    fn penalty_term_is_linear_in_gamma() {
        let mesh = unit_mesh(8);
        let prob = ellipse_problem(100.0, 5.0, 1.0);
        let class = classify(&mesh, &*prob.level_set).unwrap();
        let at = |gamma: f64| {
            let config = SolverConfig { gamma, ..Default::default() };
            assemble(&mesh, &class, &prob, &config).unwrap().matrix
        };
        let (a10, a20, a30) = (at(10.0), at(20.0), at(30.0));
        for i in 0..a10.n {
            for idx in a10.row_ptr[i]..a10.row_ptr[i + 1] {
                let j = a10.col_idx[idx];
                let d1 = a20.get(i, j) - a10.get(i, j);
                let d2 = a30.get(i, j) - a20.get(i, j);
                assert!((d1 - d2).abs() <= 1e-9 * (1.0 + d1.abs()));
            }
        }
    }

    #[test]
    fn energy_error_decreases_under_refinement() {
        let prob = ellipse_problem(10.0, 3.0, 1.0);
        let config = SolverConfig::default();
        let mut errors = Vec::new();
        for n in [4usize, 8] {
            let mesh = unit_mesh(n);
            let class = classify(&mesh, &*prob.level_set).unwrap();
            let sol = solve(&mesh, &class, &prob, &config).unwrap();
            errors.push(energy_error(&mesh, &class, &sol, &prob));
        }
        assert!(errors[1] < errors[0]);
        assert!(errors.iter().all(|e| e.is_finite() && *e > 0.0));
    }
}
