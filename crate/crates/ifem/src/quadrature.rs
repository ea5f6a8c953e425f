//! Fixed quadrature rules: a degree-4 triangle rule and 2-point Gauss on segments.

use crate::geometry::{triangle_area, Point2};
use crate::scalar::{cst, Real};

/// Degree-4, 6-point symmetric rule on a triangle (Dunavant). Weights sum to 1
/// and multiply the triangle area.
const TRI_DEGREE4: [(f64, f64, f64); 6] = {
    // (barycentric b1, b2, weight); b0 = 1 - b1 - b2
    const A1: f64 = 0.445948490915965;
    const W1: f64 = 0.223381589678011;
    const A2: f64 = 0.091576213509771;
    const W2: f64 = 0.109951743655322;
    [
        (A1, A1, W1),
        (1.0 - 2.0 * A1, A1, W1),
        (A1, 1.0 - 2.0 * A1, W1),
        (A2, A2, W2),
        (1.0 - 2.0 * A2, A2, W2),
        (A2, 1.0 - 2.0 * A2, W2),
    ]
};

/// Integrates `f` over the triangle `(a, b, c)` with the degree-4 rule.
pub fn triangle_degree4<T: Real>(
    a: Point2<T>,
    b: Point2<T>,
    c: Point2<T>,
    mut f: impl FnMut(Point2<T>) -> T,
) -> T {
    let area = triangle_area(a, b, c).abs();
    let mut acc = T::zero();
    for &(b1, b2, w) in &TRI_DEGREE4 {
        let (b1, b2, w) = (cst::<T>(b1), cst::<T>(b2), cst::<T>(w));
        let b0 = T::one() - b1 - b2;
        let p = Point2::new(
            a.x * b0 + b.x * b1 + c.x * b2,
            a.y * b0 + b.y * b1 + c.y * b2,
        );
        acc = acc + w * f(p);
    }
    acc * area
}

/// Integrates `f` over the segment from `a` to `b` with 2-point Gauss
/// (exact for cubics).
pub fn segment_gauss2<T: Real>(a: Point2<T>, b: Point2<T>, mut f: impl FnMut(Point2<T>) -> T) -> T {
    let len = a.dist(b);
    let s = cst::<T>(0.5) - cst::<T>(0.5) / cst::<T>(3.0f64.sqrt());
    let t = T::one() - s;
    (f(a.lerp(b, s)) + f(a.lerp(b, t))) * len * cst(0.5)
}
