//! The immersed finite element local space: piecewise-linear nodal basis
//! functions on interface elements constrained to be continuous at the cut
//! points and to have continuous weighted normal flux across the chord.

use crate::error::{Error, Result};
use crate::geometry::{signed_area2, Point2};
use crate::interface_geometry::{Classification, InterfaceCut, Side};
use crate::mesh::{BoundaryMarker, Mesh};
use crate::scalar::{cst, Real};

/// `c0 + c1 x + c2 y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearPoly<T> {
    pub c: [T; 3],
}

impl<T: Real> LinearPoly<T> {
    pub fn eval(&self, p: Point2<T>) -> T {
        self.c[0] + self.c[1] * p.x + self.c[2] * p.y
    }

    pub fn grad(&self) -> Point2<T> {
        Point2::new(self.c[1], self.c[2])
    }
}

/// Standard P1 barycentric basis coefficients on a triangle.
pub fn p1_basis<T: Real>(pts: &[Point2<T>; 3]) -> [LinearPoly<T>; 3] {
    let det = signed_area2(pts[0], pts[1], pts[2]);
    let mut out = [LinearPoly { c: [T::zero(); 3] }; 3];
    for i in 0..3 {
        let a = pts[(i + 1) % 3];
        let b = pts[(i + 2) % 3];
        out[i] = LinearPoly {
            c: [
                (a.x * b.y - b.x * a.y) / det,
                (a.y - b.y) / det,
                (b.x - a.x) / det,
            ],
        };
    }
    out
}

/// The three IFE nodal functions of one interface element, each a pair of
/// linear polynomials on the chord pieces.
#[derive(Debug, Clone)]
pub struct IFELocalBasis<T> {
    pub element: usize,
    /// `minus[z]` / `plus[z]`: piece polynomials of the nodal function of
    /// local vertex `z`.
    pub minus: [LinearPoly<T>; 3],
    pub plus: [LinearPoly<T>; 3],
    /// Unit normal of the chord pointing from the minus piece into the plus piece.
    pub chord_normal: Point2<T>,
    d: Point2<T>,
    e: Point2<T>,
    plus_cross_sign: i8,
}

impl<T: Real> IFELocalBasis<T> {
    /// Chord piece containing `p` (points on the chord report Plus; the two
    /// pieces agree there).
    pub fn side_of(&self, p: Point2<T>) -> Side {
        let c = self.e.sub(self.d).cross(p.sub(self.d));
        let s = if c >= T::zero() { 1i8 } else { -1i8 };
        if s == self.plus_cross_sign {
            Side::Plus
        } else {
            Side::Minus
        }
    }

    pub fn piece(&self, side: Side, z: usize) -> &LinearPoly<T> {
        match side {
            Side::Minus => &self.minus[z],
            Side::Plus => &self.plus[z],
        }
    }

    /// Value of nodal function `z` at `p`.
    pub fn eval(&self, z: usize, p: Point2<T>) -> T {
        self.piece(self.side_of(p), z).eval(p)
    }

    /// Gradient of nodal function `z` at `p`.
    pub fn grad(&self, z: usize, p: Point2<T>) -> Point2<T> {
        self.piece(self.side_of(p), z).grad()
    }
}

/// Builds the IFE nodal basis from raw cut data. Each nodal function solves a
/// 6x6 system: three nodal values, continuity at D and E, and one weighted
/// normal-flux constraint across the chord.
pub fn build_local_basis_raw<T: Real>(
    element: usize,
    pts: &[Point2<T>; 3],
    d: Point2<T>,
    e: Point2<T>,
    vertex_sides: [Side; 3],
    alpha_minus: T,
    alpha_plus: T,
) -> Result<IFELocalBasis<T>> {
    // Chord normal oriented from the minus piece into the plus piece.
    let u = e.sub(d).normalized();
    let mut n = Point2::new(-u.y, u.x);
    // Use any vertex to fix the orientation (no vertex lies on the chord).
    let cross0 = e.sub(d).cross(pts[0].sub(d));
    let plus_cross_sign: i8 = match (vertex_sides[0], cross0 >= T::zero()) {
        (Side::Plus, true) | (Side::Minus, false) => 1,
        _ => -1,
    };
    if plus_cross_sign < 0 {
        n = n.scale(-T::one());
    }

    // Unknown layout: [m0, m1, m2, p0, p1, p2].
    let mut a = [[T::zero(); 6]; 6];
    let mut rhs = [[T::zero(); 3]; 6]; // one column per nodal function
    for (row, &v) in pts.iter().enumerate() {
        let off = match vertex_sides[row] {
            Side::Minus => 0,
            Side::Plus => 3,
        };
        a[row][off] = T::one();
        a[row][off + 1] = v.x;
        a[row][off + 2] = v.y;
        rhs[row][row] = T::one();
    }
    for (row, q) in [(3usize, d), (4usize, e)] {
        a[row][0] = T::one();
        a[row][1] = q.x;
        a[row][2] = q.y;
        a[row][3] = -T::one();
        a[row][4] = -q.x;
        a[row][5] = -q.y;
    }
    a[5][1] = alpha_minus * n.x;
    a[5][2] = alpha_minus * n.y;
    a[5][4] = -alpha_plus * n.x;
    a[5][5] = -alpha_plus * n.y;

    let (x, cond) = solve_dense6(a, rhs).ok_or(Error::DegenerateCut { element })?;
    if cond > cst::<T>(1e12) {
        return Err(Error::IllConditioned {
            element,
            cond: cond.to_f64().unwrap_or(f64::INFINITY),
        });
    }

    let mut minus = [LinearPoly { c: [T::zero(); 3] }; 3];
    let mut plus = [LinearPoly { c: [T::zero(); 3] }; 3];
    for z in 0..3 {
        minus[z] = LinearPoly { c: [x[0][z], x[1][z], x[2][z]] };
        plus[z] = LinearPoly { c: [x[3][z], x[4][z], x[5][z]] };
    }
    Ok(IFELocalBasis {
        element,
        minus,
        plus,
        chord_normal: n,
        d,
        e,
        plus_cross_sign,
    })
}

/// Builds the IFE nodal basis for a classified interface element.
pub fn build_local_basis<T: Real>(
    mesh: &Mesh<T>,
    cut: &InterfaceCut<T>,
    alpha_minus: T,
    alpha_plus: T,
) -> Result<IFELocalBasis<T>> {
    let pts = mesh.triangle_points(cut.element);
    build_local_basis_raw(
        cut.element,
        &pts,
        cut.d.point,
        cut.e.point,
        cut.vertex_sides,
        alpha_minus,
        alpha_plus,
    )
}

/// Builds IFE bases for every interface element of a classified mesh.
pub fn build_bases<T: Real>(
    mesh: &Mesh<T>,
    class: &Classification<T>,
    alpha_minus: T,
    alpha_plus: T,
) -> Result<Vec<Option<IFELocalBasis<T>>>> {
    let mut out = vec![None; mesh.triangles.len()];
    for cut in &class.cuts {
        out[cut.element] = Some(build_local_basis(mesh, cut, alpha_minus, alpha_plus)?);
    }
    Ok(out)
}

/// Gaussian elimination with partial pivoting on a 6x6 system with three
/// right-hand sides; also returns an infinity-norm condition estimate.
fn solve_dense6<T: Real>(mut a: [[T; 6]; 6], mut rhs: [[T; 3]; 6]) -> Option<([[T; 3]; 6], T)> {
    // Row equilibration: a strongly contrasting coefficient scales the flux
    // row without making the cut any more degenerate, so condition the scaled
    // system instead.
    for i in 0..6 {
        let scale = (0..6).map(|j| a[i][j].abs()).fold(T::zero(), |acc, v| acc.max(v));
        if scale > T::zero() {
            for j in 0..6 {
                a[i][j] = a[i][j] / scale;
            }
            for j in 0..3 {
                rhs[i][j] = rhs[i][j] / scale;
            }
        }
    }
    // Augment with the identity so the inverse comes out of the same sweep.
    let mut m = [[T::zero(); 15]; 6]; // 6 | 3 rhs | 6 identity
    for i in 0..6 {
        for j in 0..6 {
            m[i][j] = a[i][j];
            m[i][9 + j] = if i == j { T::one() } else { T::zero() };
        }
        for j in 0..3 {
            m[i][6 + j] = rhs[i][j];
        }
    }
    for col in 0..6 {
        let mut piv = col;
        for r in col + 1..6 {
            if m[r][col].abs() > m[piv][col].abs() {
                piv = r;
            }
        }
        if m[piv][col].abs() == T::zero() {
            return None;
        }
        m.swap(col, piv);
        let d = m[col][col];
        for j in col..15 {
            m[col][j] = m[col][j] / d;
        }
        for r in 0..6 {
            if r != col {
                let f = m[r][col];
                if f != T::zero() {
                    for j in col..15 {
                        m[r][j] = m[r][j] - f * m[col][j];
                    }
                }
            }
        }
    }
    let mut x = [[T::zero(); 3]; 6];
    for i in 0..6 {
        for j in 0..3 {
            x[i][j] = m[i][6 + j];
        }
    }
    let norm_a = (0..6)
        .map(|i| (0..6).map(|j| a[i][j].abs()).sum::<T>())
        .fold(T::zero(), |acc, v| acc.max(v));
    let norm_ainv = (0..6)
        .map(|i| (0..6).map(|j| m[i][9 + j].abs()).sum::<T>())
        .fold(T::zero(), |acc, v| acc.max(v));
    Some((x, norm_a * norm_ainv))
}

/// Assignment of a mesh vertex to the linear system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofKind {
    Free(usize),
    Dirichlet(usize),
}

/// Vertex-to-DOF enumeration with the Dirichlet set flagged from boundary markers.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub kinds: Vec<DofKind>,
    pub n_free: usize,
    pub n_dirichlet: usize,
    pub free_vertices: Vec<usize>,
    pub dirichlet_vertices: Vec<usize>,
}

impl DofMap {
    pub fn free_index(&self, vertex: usize) -> Option<usize> {
        match self.kinds[vertex] {
            DofKind::Free(i) => Some(i),
            DofKind::Dirichlet(_) => None,
        }
    }
}

/// Enumerates free DOFs; a vertex is Dirichlet iff it lies on a Dirichlet
/// boundary edge.
pub fn build_dof_map<T: Real>(mesh: &Mesh<T>) -> DofMap {
    let mut is_dirichlet = vec![false; mesh.vertices.len()];
    for e in &mesh.edges {
        if e.marker == BoundaryMarker::Dirichlet {
            is_dirichlet[e.v[0]] = true;
            is_dirichlet[e.v[1]] = true;
        }
    }
    let mut kinds = Vec::with_capacity(mesh.vertices.len());
    let mut free_vertices = Vec::new();
    let mut dirichlet_vertices = Vec::new();
    for (v, &d) in is_dirichlet.iter().enumerate() {
        if d {
            kinds.push(DofKind::Dirichlet(dirichlet_vertices.len()));
            dirichlet_vertices.push(v);
        } else {
            kinds.push(DofKind::Free(free_vertices.len()));
            free_vertices.push(v);
        }
    }
    DofMap {
        kinds,
        n_free: free_vertices.len(),
        n_dirichlet: dirichlet_vertices.len(),
        free_vertices,
        dirichlet_vertices,
    }
}
