//! Conforming triangular meshes with newest-vertex-bisection refinement.
//!
//! Triangles are stored counterclockwise together with a refinement-edge
//! index: edge `i` of a triangle is the edge opposite local vertex `i`.
//! Bisection always goes through the midpoint of the refinement edge, and
//! the two children inherit the parent's remaining edges as their own
//! refinement edges, which is the classical newest-vertex rule.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::{signed_area2, Point2};
use crate::scalar::{cst, from_usize, Real};

/// Classification of a mesh edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryMarker {
    Interior,
    Dirichlet,
    Neumann,
}

/// A triangle: counterclockwise vertex ids plus the refinement-edge index.
#[derive(Debug, Clone, Copy)]
pub struct Triangle {
    pub v: [usize; 3],
    /// Index in `0..3`; the refinement edge is the edge opposite vertex `refedge`.
    pub refedge: u8,
}

impl Triangle {
    /// Endpoints of the refinement edge, in counterclockwise traversal order.
    pub fn refinement_edge(&self) -> (usize, usize) {
        let r = self.refedge as usize;
        (self.v[(r + 1) % 3], self.v[(r + 2) % 3])
    }
}

/// A mesh edge with its adjacency.
///
/// `v[0] -> v[1]` is the counterclockwise traversal order within the first
/// adjacent triangle, so the edge normal `(dy, -dx)` points out of `tris[0]`.
#[derive(Debug, Clone, Copy)]
pub struct Edge {
    pub v: [usize; 2],
    pub tris: [Option<usize>; 2],
    pub marker: BoundaryMarker,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.tris[1].is_none()
    }

    pub fn other_triangle(&self, k: usize) -> Option<usize> {
        if self.tris[0] == Some(k) {
            self.tris[1]
        } else {
            self.tris[0]
        }
    }
}

/// Axis-aligned rectangular domain.
#[derive(Debug, Clone, Copy)]
pub struct Rect<T> {
    pub x0: T,
    pub y0: T,
    pub x1: T,
    pub y1: T,
}

impl<T: Real> Rect<T> {
    pub fn new(x0: T, y0: T, x1: T, y1: T) -> Self {
        Self { x0, y0, x1, y1 }
    }

    /// The square `[-1, 1]^2` used by all benchmark problems.
    pub fn unit_symmetric() -> Self {
        Self::new(cst(-1.0), cst(-1.0), cst(1.0), cst(1.0))
    }
}

/// Per-element geometry report.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry<T> {
    /// Diameter of the element (longest edge).
    pub h: T,
    pub area: T,
    pub min_angle_deg: T,
    pub edge_lengths: [T; 3],
}

/// Whole-mesh aggregate of [`ElementGeometry`].
#[derive(Debug, Clone, Copy)]
pub struct MeshStats<T> {
    pub n_vertices: usize,
    pub n_triangles: usize,
    pub n_edges: usize,
    pub min_angle_deg: T,
    pub max_h: T,
    pub min_h: T,
}

/// A conforming triangulation with edge topology and boundary markers.
#[derive(Debug, Clone)]
pub struct Mesh<T> {
    pub vertices: Vec<Point2<T>>,
    pub triangles: Vec<Triangle>,
    pub edges: Vec<Edge>,
    /// For each triangle, the edge id opposite each local vertex.
    pub tri_edges: Vec<[usize; 3]>,
    pub generation: u32,
}

impl<T: Real> Mesh<T> {
    /// Builds the standard `n x n` initial mesh of `domain`: each cell of the
    /// grid is split along its positive-slope diagonal, and every triangle's
    /// refinement edge is its hypotenuse.
    pub fn initial(n: usize, domain: Rect<T>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("initial mesh subdivision must be >= 1".into()));
        }
        let nv = n + 1;
        let mut vertices = Vec::with_capacity(nv * nv);
        let nf: T = from_usize(n);
        for j in 0..nv {
            for i in 0..nv {
                let fx = from_usize::<T>(i) / nf;
                let fy = from_usize::<T>(j) / nf;
                vertices.push(Point2::new(
                    domain.x0 + (domain.x1 - domain.x0) * fx,
                    domain.y0 + (domain.y1 - domain.y0) * fy,
                ));
            }
        }
        let vid = |i: usize, j: usize| j * nv + i;
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let (a, b, c, d) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
                // Lower-right triangle; hypotenuse a-c is opposite vertex b.
                triangles.push(Triangle { v: [a, b, c], refedge: 1 });
                // Upper-left triangle; hypotenuse a-c is opposite vertex d.
                triangles.push(Triangle { v: [a, c, d], refedge: 2 });
            }
        }
        let mut mesh = Self {
            vertices,
            triangles,
            edges: Vec::new(),
            tri_edges: Vec::new(),
            generation: 0,
        };
        mesh.rebuild_edges(|_| BoundaryMarker::Dirichlet);
        mesh.audit()?;
        Ok(mesh)
    }

    /// Vertex coordinates of triangle `k`.
    pub fn triangle_points(&self, k: usize) -> [Point2<T>; 3] {
        let t = &self.triangles[k];
        [self.vertices[t.v[0]], self.vertices[t.v[1]], self.vertices[t.v[2]]]
    }

    pub fn edge_points(&self, f: usize) -> [Point2<T>; 2] {
        let e = &self.edges[f];
        [self.vertices[e.v[0]], self.vertices[e.v[1]]]
    }

    pub fn edge_length(&self, f: usize) -> T {
        let [a, b] = self.edge_points(f);
        a.dist(b)
    }

    /// Unit normal of edge `f`, pointing out of its first adjacent triangle.
    pub fn edge_normal(&self, f: usize) -> Point2<T> {
        let [a, b] = self.edge_points(f);
        let d = b.sub(a).normalized();
        Point2::new(d.y, -d.x)
    }

    /// Unit tangent of edge `f`, oriented so that `(normal, tangent)` follows
    /// the `t = (-n2, n1)` convention.
    pub fn edge_tangent(&self, f: usize) -> Point2<T> {
        let [a, b] = self.edge_points(f);
        b.sub(a).normalized()
    }

    pub fn element_geometry(&self, k: usize) -> ElementGeometry<T> {
        let [a, b, c] = self.triangle_points(k);
        let ls = [b.dist(c), c.dist(a), a.dist(b)];
        let area = signed_area2(a, b, c) * cst(0.5);
        let mut min_angle = T::infinity();
        let pts = [a, b, c];
        for i in 0..3 {
            let p = pts[i];
            let q = pts[(i + 1) % 3];
            let r = pts[(i + 2) % 3];
            let u = q.sub(p);
            let w = r.sub(p);
            let ang = (u.dot(w) / (u.norm() * w.norm())).min(T::one()).max(-T::one()).acos();
            if ang < min_angle {
                min_angle = ang;
            }
        }
        let h = ls[0].max(ls[1]).max(ls[2]);
        ElementGeometry {
            h,
            area,
            min_angle_deg: min_angle * cst(180.0 / std::f64::consts::PI),
            edge_lengths: ls,
        }
    }

    /// Deterministic aggregate over the whole mesh.
    pub fn stats(&self) -> MeshStats<T> {
        let mut min_angle = T::infinity();
        let mut max_h = T::zero();
        let mut min_h = T::infinity();
        for k in 0..self.triangles.len() {
            let g = self.element_geometry(k);
            min_angle = min_angle.min(g.min_angle_deg);
            max_h = max_h.max(g.h);
            min_h = min_h.min(g.h);
        }
        MeshStats {
            n_vertices: self.vertices.len(),
            n_triangles: self.triangles.len(),
            n_edges: self.edges.len(),
            min_angle_deg: min_angle,
            max_h,
            min_h,
        }
    }

    /// Marks boundary edges whose midpoint satisfies `pred` as Neumann.
    pub fn mark_neumann(&mut self, pred: impl Fn(Point2<T>) -> bool) {
        for e in self.edges.iter_mut() {
            if e.is_boundary() {
                let mid = self.vertices[e.v[0]].midpoint(self.vertices[e.v[1]]);
                e.marker = if pred(mid) {
                    BoundaryMarker::Neumann
                } else {
                    BoundaryMarker::Dirichlet
                };
            }
        }
    }

    /// Bisects every marked triangle at least once and restores conformity.
    /// Returns a new mesh; the input is untouched.
    pub fn refine_nvb(&self, marked: &[usize]) -> Result<Self> {
        for &k in marked {
            if k >= self.triangles.len() {
                return Err(Error::Mesh(format!("marked triangle id {k} out of range")));
            }
        }
        if marked.is_empty() {
            let mut out = self.clone();
            out.generation += 1;
            return Ok(out);
        }

        // Edges scheduled for bisection; closure: whenever any edge of a
        // triangle is scheduled, its refinement edge must be scheduled too.
        let mut edge_marked = vec![false; self.edges.len()];
        for &k in marked {
            edge_marked[self.tri_edges[k][self.triangles[k].refedge as usize]] = true;
        }
        loop {
            let mut changed = false;
            for (k, t) in self.triangles.iter().enumerate() {
                let eids = self.tri_edges[k];
                let re = eids[t.refedge as usize];
                if !edge_marked[re] && eids.iter().any(|&e| edge_marked[e]) {
                    edge_marked[re] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }

        let mut vertices = self.vertices.clone();
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        for (f, e) in self.edges.iter().enumerate() {
            if edge_marked[f] {
                let m = vertices.len();
                vertices.push(self.vertices[e.v[0]].midpoint(self.vertices[e.v[1]]));
                let key = sorted_pair(e.v[0], e.v[1]);
                midpoint.insert(key, m);
            }
        }

        let mut triangles = Vec::with_capacity(self.triangles.len() * 2);
        for t in &self.triangles {
            emit_bisected(*t, &midpoint, &mut triangles);
        }

        // Boundary-marker propagation: every new boundary edge is either an
        // old boundary edge or one half of a bisected old boundary edge.
        let mut old_markers: HashMap<(usize, usize), BoundaryMarker> = HashMap::new();
        for e in &self.edges {
            if e.is_boundary() {
                old_markers.insert(sorted_pair(e.v[0], e.v[1]), e.marker);
                if let Some(&m) = midpoint.get(&sorted_pair(e.v[0], e.v[1])) {
                    old_markers.insert(sorted_pair(e.v[0], m), e.marker);
                    old_markers.insert(sorted_pair(m, e.v[1]), e.marker);
                }
            }
        }

        let mut out = Self {
            vertices,
            triangles,
            edges: Vec::new(),
            tri_edges: Vec::new(),
            generation: self.generation + 1,
        };
        out.rebuild_edges(|key| *old_markers.get(&key).unwrap_or(&BoundaryMarker::Dirichlet));
        out.audit()?;
        Ok(out)
    }

    /// Refines every triangle; on a compatibly labeled mesh this quadruples
    /// the element count.
    pub fn refine_uniform(&self) -> Result<Self> {
        let all: Vec<usize> = (0..self.triangles.len()).collect();
        let once = self.refine_nvb(&all)?;
        let all: Vec<usize> = (0..once.triangles.len()).collect();
        once.refine_nvb(&all)
    }

    /// Conformity and orientation audit; all `Mesh` invariants.
    pub fn audit(&self) -> Result<()> {
        for (k, t) in self.triangles.iter().enumerate() {
            if t.refedge > 2 {
                return Err(Error::Mesh(format!("triangle {k} has invalid refinement edge")));
            }
            let [a, b, c] = self.triangle_points(k);
            if signed_area2(a, b, c) <= T::zero() {
                return Err(Error::Mesh(format!("triangle {k} has non-positive area")));
            }
        }
        for (f, e) in self.edges.iter().enumerate() {
            match (e.tris[0], e.tris[1]) {
                (Some(_), Some(_)) => {
                    if e.marker != BoundaryMarker::Interior {
                        return Err(Error::Mesh(format!("interior edge {f} carries a boundary marker")));
                    }
                }
                (Some(_), None) => {
                    if e.marker == BoundaryMarker::Interior {
                        return Err(Error::Mesh(format!("boundary edge {f} marked interior")));
                    }
                }
                _ => return Err(Error::Mesh(format!("edge {f} has no adjacent triangle"))),
            }
        }
        Ok(())
    }

    /// Plain-text dump: header line, vertex lines, triangle lines.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "vertices {} triangles {}", self.vertices.len(), self.triangles.len());
        for p in &self.vertices {
            let _ = writeln!(s, "{} {}", p.x, p.y);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {} {}", t.v[0], t.v[1], t.v[2], t.refedge);
        }
        s
    }

    fn rebuild_edges(&mut self, boundary_marker: impl Fn((usize, usize)) -> BoundaryMarker) {
        let mut map: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut tri_edges = vec![[usize::MAX; 3]; self.triangles.len()];
        for (k, t) in self.triangles.iter().enumerate() {
            for i in 0..3 {
                let a = t.v[(i + 1) % 3];
                let b = t.v[(i + 2) % 3];
                let key = sorted_pair(a, b);
                let f = *map.entry(key).or_insert_with(|| {
                    edges.push(Edge {
                        v: [a, b],
                        tris: [Some(k), None],
                        marker: BoundaryMarker::Interior,
                    });
                    edges.len() - 1
                });
                if edges[f].tris[0] != Some(k) {
                    edges[f].tris[1] = Some(k);
                }
                tri_edges[k][i] = f;
            }
        }
        for e in edges.iter_mut() {
            if e.is_boundary() {
                e.marker = boundary_marker(sorted_pair(e.v[0], e.v[1]));
            }
        }
        self.edges = edges;
        self.tri_edges = tri_edges;
    }
}

fn sorted_pair(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn emit_bisected(t: Triangle, midpoint: &HashMap<(usize, usize), usize>, out: &mut Vec<Triangle>) {
    let (q1, q2) = t.refinement_edge();
    if let Some(&m) = midpoint.get(&sorted_pair(q1, q2)) {
        let p = t.v[t.refedge as usize];
        // Children keep the parent's other edges as refinement edges.
        emit_bisected(Triangle { v: [p, q1, m], refedge: 2 }, midpoint, out);
        emit_bisected(Triangle { v: [p, m, q2], refedge: 1 }, midpoint, out);
    } else {
        out.push(t);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::collections::HashSet;

    fn unit_mesh(n: usize) -> Mesh<f64> {
        Mesh::initial(n, Rect::unit_symmetric()).unwrap()
    }

    #[test]
    fn initial_mesh_counts() {
        let m = unit_mesh(4);
        assert_eq!(m.vertices.len(), 25);
        assert_eq!(m.triangles.len(), 32);
        let m1 = unit_mesh(1);
        assert_eq!(m1.vertices.len(), 4);
        assert_eq!(m1.triangles.len(), 2);
        let m16 = unit_mesh(16);
        assert_eq!(m16.vertices.len(), 289);
        assert_eq!(m16.triangles.len(), 512);
    }

    #[test]
    fn initial_mesh_rejects_zero() {
        assert!(Mesh::<f64>::initial(0, Rect::unit_symmetric()).is_err());
    }

    #[test]
    fn refinement_edge_is_hypotenuse() {
        let m = unit_mesh(4);
        for k in 0..m.triangles.len() {
            let (a, b) = m.triangles[k].refinement_edge();
            let len = m.vertices[a].dist(m.vertices[b]);
            let g = m.element_geometry(k);
            assert_relative_eq!(len, g.h, max_relative = 1e-14);
        }
    }

    #[test]
    fn stats_of_initial_meshes() {
        let m1 = unit_mesh(1);
        assert_relative_eq!(m1.stats().min_angle_deg, 45.0, max_relative = 1e-12);
        let m4 = unit_mesh(4);
        assert_relative_eq!(m4.stats().max_h, std::f64::consts::SQRT_2 * 0.5, max_relative = 1e-12);
    }

    #[test]
    fn empty_marking_is_identity() {
        let m = unit_mesh(4);
        let r = m.refine_nvb(&[]).unwrap();
        assert_eq!(r.vertices.len(), m.vertices.len());
        assert_eq!(r.triangles.len(), m.triangles.len());
    }

    #[test]
    fn two_triangle_square_bisection() {
        let m = Mesh::<f64>::initial(1, Rect::new(0.0, 0.0, 1.0, 1.0)).unwrap();
        let r = m.refine_nvb(&[0, 1]).unwrap();
        assert_eq!(r.triangles.len(), 4);
        assert_eq!(r.vertices.len(), 5);
        r.audit().unwrap();
    }

    /// Independent closure trace: marking one triangle bisects it and forces
    /// exactly the triangles whose refinement edge gets a hanging node.
    #[test]
    fn single_mark_matches_reference_closure_trace() {
        let m = unit_mesh(4);
        // Pick an interior triangle.
        let k = (0..m.triangles.len())
            .find(|&k| m.tri_edges[k].iter().all(|&f| !m.edges[f].is_boundary()))
            .unwrap();

        // Reference trace: propagate refinement-edge marks on a set of edges.
        let mut marked_edges: HashSet<usize> = HashSet::new();
        marked_edges.insert(m.tri_edges[k][m.triangles[k].refedge as usize]);
        loop {
            let mut changed = false;
            for (t, tri) in m.triangles.iter().enumerate() {
                let re = m.tri_edges[t][tri.refedge as usize];
                if !marked_edges.contains(&re)
                    && m.tri_edges[t].iter().any(|f| marked_edges.contains(f))
                {
                    marked_edges.insert(re);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        // Each triangle gains one extra triangle per bisected edge.
        let mut expected = m.triangles.len();
        for (t, _) in m.triangles.iter().enumerate() {
            expected += m.tri_edges[t].iter().filter(|f| marked_edges.contains(f)).count();
        }

        let r = m.refine_nvb(&[k]).unwrap();
        assert_eq!(r.triangles.len(), expected);
        assert_eq!(r.vertices.len(), m.vertices.len() + marked_edges.len());
    }

    #[test]
    fn repeated_refinement_keeps_shape_regularity() {
        // The initial triangles are right isoceles with hypotenuse labels, so
        // every NVB descendant is again right isoceles: min angle stays 45deg.
        let mut m = unit_mesh(4);
        for round in 0..10 {
            let marked: Vec<usize> = (0..m.triangles.len()).step_by(3 + round % 3).collect();
            m = m.refine_nvb(&marked).unwrap();
            m.audit().unwrap();
            assert!(m.stats().min_angle_deg >= 0.99 * 45.0);
        }
    }

    #[test]
    fn refinement_is_monotone() {
        let mut m = unit_mesh(2);
        for _ in 0..5 {
            let r = m.refine_nvb(&[0]).unwrap();
            assert!(r.vertices.len() >= m.vertices.len());
            assert!(r.triangles.len() >= m.triangles.len());
            for (i, p) in m.vertices.iter().enumerate() {
                assert_eq!(*p, r.vertices[i]);
            }
            m = r;
        }
    }

    #[test]
    fn uniform_refinement_quadruples() {
        let m = unit_mesh(4);
        let r = m.refine_uniform().unwrap();
        assert_eq!(r.triangles.len(), 4 * m.triangles.len());
        r.audit().unwrap();
    }

    #[test]
    fn dump_format() {
        let m = Mesh::<f64>::initial(1, Rect::new(0.0, 0.0, 1.0, 1.0)).unwrap();
        let d = m.dump();
        let mut lines = d.lines();
        assert_eq!(lines.next().unwrap(), "vertices 4 triangles 2");
        assert_eq!(d.lines().count(), 1 + 4 + 2);
    }

    #[test]
    fn neumann_marking() {
        let mut m = unit_mesh(4);
        m.mark_neumann(|p| p.x > 1.0 - 1e-12);
        let n_neumann = m
            .edges
            .iter()
            .filter(|e| e.marker == BoundaryMarker::Neumann)
            .count();
        assert_eq!(n_neumann, 4);
    }
}
