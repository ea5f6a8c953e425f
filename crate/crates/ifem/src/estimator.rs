//! Residual-type a posteriori error estimation: edge jumps, the local
//! indicators eta_K (with the chord-mismatch term), the variant xi_K without
//! it, the true-error indicator, and the efficiency index.

use crate::assembly::DiscreteSolution;
use crate::error::Result;
use crate::interface_geometry::{Classification, ElementTag, MismatchRegion, Side};
use crate::mesh::{BoundaryMarker, Mesh};
use crate::problems::{element_energy_error_sq, pairwise_sum, BenchmarkProblem};
use crate::scalar::{cst, Real};

/// Jump data on one sub-segment of an edge (whole edge for uncut edges).
#[derive(Debug, Clone, Copy)]
pub struct JumpPart<T> {
    /// Normal flux jump `[alpha grad u_T . n]` (or the Neumann residual).
    pub j_n: T,
    /// Tangential derivative jump `[grad u_T . t]`.
    pub j_t: T,
    /// Coefficient weight on this sub-segment.
    pub alpha: T,
    /// Sub-segment length.
    pub len: T,
}

/// Jumps of one edge.
#[derive(Debug, Clone)]
pub struct EdgeJump<T> {
    pub h: T,
    pub marker: BoundaryMarker,
    pub is_interface: bool,
    /// One part for uncut edges, two (plus then minus side) for cut edges.
    pub parts: Vec<JumpPart<T>>,
}

/// Per-edge jump table, indexed by global edge id.
#[derive(Debug, Clone)]
pub struct EdgeJumps<T> {
    pub per_edge: Vec<EdgeJump<T>>,
}

/// Local indicators with their squared addends for diagnostics.
#[derive(Debug, Clone)]
pub struct Indicators<T> {
    /// Indicator value per element (not squared).
    pub per_element: Vec<T>,
    /// Squared addends per element: interface-edge normal, interface-edge
    /// tangential, chord-mismatch, regular-edge (incl. Neumann) terms.
    pub addends: Vec<[T; 4]>,
    /// Global value: sqrt of the pairwise sum of squared local indicators.
    pub total: T,
}

impl<T: Real> Indicators<T> {
    fn from_squares(sq: Vec<[T; 4]>) -> Self {
        let per_element: Vec<T> = sq
            .iter()
            .map(|a| (a[0] + a[1] + a[2] + a[3]).sqrt())
            .collect();
        let squares: Vec<T> = per_element.iter().map(|&e| e * e).collect();
        let total = pairwise_sum(&squares).sqrt();
        Indicators { per_element, addends: sq, total }
    }
}

/// Trace data of one element on (a sub-segment of) an edge: coefficient and
/// constant gradient, selected by the chord side when the element is cut.
fn trace<T: Real>(
    mesh: &Mesh<T>,
    class: &Classification<T>,
    solution: &DiscreteSolution<T>,
    problem: &BenchmarkProblem<T>,
    k: usize,
    side_hint: Side,
    use_hint: bool,
    edge: usize,
) -> (T, crate::geometry::Point2<T>) {
    match class.tags[k] {
        ElementTag::Interface(ci) => {
            let side = if use_hint {
                side_hint
            } else {
                // Uncut edge of a cut element: the whole edge lies in one
                // chord piece; sample the midpoint.
                let [a, b] = mesh.edge_points(edge);
                class.cuts[ci].side_of_chord(a.midpoint(b))
            };
            (problem.alpha(side), solution.gradient_on_side(k, side))
        }
        ElementTag::Minus => (problem.alpha(Side::Minus), solution.gradient(k)),
        ElementTag::Plus => (problem.alpha(Side::Plus), solution.gradient(k)),
    }
}

/// Computes the jump data of every edge. All traces are piecewise constant,
/// so the values are exact (no quadrature).
pub fn edge_jumps<T: Real>(
    mesh: &Mesh<T>,
    class: &Classification<T>,
    solution: &DiscreteSolution<T>,
    problem: &BenchmarkProblem<T>,
) -> EdgeJumps<T> {
    let mut per_edge = Vec::with_capacity(mesh.edges.len());
    for (f, edge) in mesh.edges.iter().enumerate() {
        let h = mesh.edge_length(f);
        let n = mesh.edge_normal(f);
        let t = mesh.edge_tangent(f);
        let k1 = edge.tris[0].unwrap();

        let jump = match (edge.tris[1], edge.marker) {
            (_, BoundaryMarker::Dirichlet) => EdgeJump {
                h,
                marker: edge.marker,
                is_interface: false,
                parts: vec![JumpPart { j_n: T::zero(), j_t: T::zero(), alpha: T::one(), len: h }],
            },
            (_, BoundaryMarker::Neumann) => {
                // Residual of the flux boundary condition.
                let [a, b] = mesh.edge_points(f);
                let (alpha, g1) = trace(mesh, class, solution, problem, k1, Side::Plus, false, f);
                let j_n = alpha * g1.dot(n) + (problem.neumann)(a.midpoint(b));
                EdgeJump {
                    h,
                    marker: edge.marker,
                    is_interface: false,
                    parts: vec![JumpPart { j_n, j_t: g1.dot(t), alpha, len: h }],
                }
            }
            (Some(k2), _) => match class.edge_splits.get(&f) {
                Some(split) => {
                    // Cut edge: one part per side; both traces carry the
                    // side's coefficient there.
                    let mut parts = Vec::with_capacity(2);
                    for (side, len) in
                        [(Side::Plus, split.h_plus), (Side::Minus, split.h_minus)]
                    {
                        let (a1, g1) =
                            trace(mesh, class, solution, problem, k1, side, true, f);
                        let (a2, g2) =
                            trace(mesh, class, solution, problem, k2, side, true, f);
                        let d = g1.sub(g2);
                        parts.push(JumpPart {
                            j_n: a1 * g1.dot(n) - a2 * g2.dot(n),
                            j_t: d.dot(t),
                            alpha: a1.max(a2), // equal by construction
                            len,
                        });
                    }
                    EdgeJump { h, marker: edge.marker, is_interface: true, parts }
                }
                None => {
                    let (a1, g1) = trace(mesh, class, solution, problem, k1, Side::Plus, false, f);
                    let (a2, g2) = trace(mesh, class, solution, problem, k2, Side::Plus, false, f);
                    EdgeJump {
                        h,
                        marker: edge.marker,
                        is_interface: false,
                        parts: vec![JumpPart {
                            j_n: a1 * g1.dot(n) - a2 * g2.dot(n),
                            j_t: g1.sub(g2).dot(t),
                            alpha: a1.max(a2),
                            len: h,
                        }],
                    }
                }
            },
            (None, BoundaryMarker::Interior) => unreachable!("boundary edge marked interior"),
        };
        per_edge.push(jump);
    }
    EdgeJumps { per_edge }
}

/// `(h/2) * ||alpha^(-1/2) j_n||^2` evaluated as a piecewise-constant sum.
pub(crate) fn weighted_normal_sq<T: Real>(h: T, parts: &[JumpPart<T>]) -> T {
    let s: T = parts.iter().map(|p| p.j_n * p.j_n * p.len / p.alpha).sum();
    h * cst::<T>(0.5) * s
}

/// `(h/2) * ||alpha^(1/2) j_t||^2` evaluated as a piecewise-constant sum.
pub(crate) fn weighted_tangential_sq<T: Real>(h: T, parts: &[JumpPart<T>]) -> T {
    let s: T = parts.iter().map(|p| p.alpha * p.j_t * p.j_t * p.len).sum();
    h * cst::<T>(0.5) * s
}

fn indicators_from_jumps<T: Real>(
    mesh: &Mesh<T>,
    class: &Classification<T>,
    solution: &DiscreteSolution<T>,
    problem: &BenchmarkProblem<T>,
    jumps: &EdgeJumps<T>,
    mismatches: Option<&[MismatchRegion<T>]>,
) -> Indicators<T> {
    let mut sq = vec![[T::zero(); 4]; mesh.triangles.len()];

    for (f, jump) in jumps.per_edge.iter().enumerate() {
        let edge = &mesh.edges[f];
        match (jump.marker, jump.is_interface) {
            (BoundaryMarker::Dirichlet, _) => {}
            (BoundaryMarker::Neumann, _) => {
                // Boundary: the full h_F weight goes to the single element.
                let k = edge.tris[0].unwrap();
                let p = &jump.parts[0];
                sq[k][3] = sq[k][3] + jump.h * (p.j_n * p.j_n * p.len / p.alpha);
            }
            (BoundaryMarker::Interior, true) => {
                let wn = weighted_normal_sq(jump.h, &jump.parts);
                let wt = weighted_tangential_sq(jump.h, &jump.parts);
                for k in [edge.tris[0].unwrap(), edge.tris[1].unwrap()] {
                    sq[k][0] = sq[k][0] + wn;
                    sq[k][1] = sq[k][1] + wt;
                }
            }
            (BoundaryMarker::Interior, false) => {
                let wn = weighted_normal_sq(jump.h, &jump.parts);
                for k in [edge.tris[0].unwrap(), edge.tris[1].unwrap()] {
                    sq[k][3] = sq[k][3] + wn;
                }
            }
        }
    }

    if let Some(regions) = mismatches {
        for (cut, reg) in class.cuts.iter().zip(regions) {
            let k = cut.element;
            let (gm, gp) = solution.interface_gradients(k);
            sq[k][2] = sq[k][2]
                + problem.alpha(Side::Plus) * gp.dot(gp) * reg.area_in_plus_piece
                + problem.alpha(Side::Minus) * gm.dot(gm) * reg.area_in_minus_piece;
        }
    }

    Indicators::from_squares(sq)
}

/// Mismatch regions of every cut element, aligned with `class.cuts`.
pub fn all_mismatch_regions<T: Real>(
    mesh: &Mesh<T>,
    class: &Classification<T>,
    problem: &BenchmarkProblem<T>,
) -> Result<Vec<MismatchRegion<T>>> {
    class
        .cuts
        .iter()
        .map(|cut| {
            let g = mesh.element_geometry(cut.element);
            crate::interface_geometry::mismatch_regions(cut, &*problem.level_set, g.h)
        })
        .collect()
}

/// The full local indicator eta_K, including the chord-mismatch term.
pub fn eta_indicators<T: Real>(
    mesh: &Mesh<T>,
    class: &Classification<T>,
    solution: &DiscreteSolution<T>,
    problem: &BenchmarkProblem<T>,
) -> Result<Indicators<T>> {
    let jumps = edge_jumps(mesh, class, solution, problem);
    let regions = all_mismatch_regions(mesh, class, problem)?;
    Ok(indicators_from_jumps(mesh, class, solution, problem, &jumps, Some(&regions)))
}

/// The variant xi_K: eta_K with the mismatch term dropped.
pub fn xi_indicators<T: Real>(
    mesh: &Mesh<T>,
    class: &Classification<T>,
    solution: &DiscreteSolution<T>,
    problem: &BenchmarkProblem<T>,
) -> Result<Indicators<T>> {
    let jumps = edge_jumps(mesh, class, solution, problem);
    Ok(indicators_from_jumps(mesh, class, solution, problem, &jumps, None))
}

/// Per-element true energy-norm error, usable as an indicator.
pub fn true_error_indicators<T: Real>(
    mesh: &Mesh<T>,
    class: &Classification<T>,
    solution: &DiscreteSolution<T>,
    problem: &BenchmarkProblem<T>,
) -> Indicators<T> {
    let sq: Vec<[T; 4]> = (0..mesh.triangles.len())
        .map(|k| {
            let e = element_energy_error_sq(mesh, class, solution, problem, k);
            [T::zero(), T::zero(), T::zero(), e]
        })
        .collect();
    Indicators::from_squares(sq)
}

/// Ratio of estimator to true energy error; `None` when the error vanishes.
pub fn efficiency_index<T: Real>(eta: T, energy_error: T) -> Option<T> {
    if energy_error > T::zero() {
        Some(eta / energy_error)
    } else {
        None
    }
}
