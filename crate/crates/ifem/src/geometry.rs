//! Small 2D vector/point helpers shared by the mesh and geometry modules.

use crate::scalar::{cst, Real};

/// A point (or vector) in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Point2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }

    pub fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }

    pub fn scale(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s)
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the cross product `self × o`.
    pub fn cross(self, o: Self) -> T {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> T {
        self.dot(self).sqrt()
    }

    pub fn dist(self, o: Self) -> T {
        self.sub(o).norm()
    }

    pub fn midpoint(self, o: Self) -> Self {
        self.add(o).scale(cst(0.5))
    }

    /// Point at parameter `t` on the segment from `self` to `o`.
    pub fn lerp(self, o: Self, t: T) -> Self {
        self.add(o.sub(self).scale(t))
    }

    pub fn normalized(self) -> Self {
        let n = self.norm();
        Self::new(self.x / n, self.y / n)
    }
}

/// Twice the signed area of the triangle `(a, b, c)`; positive for counterclockwise order.
pub fn signed_area2<T: Real>(a: Point2<T>, b: Point2<T>, c: Point2<T>) -> T {
    b.sub(a).cross(c.sub(a))
}

/// Signed area of the triangle `(a, b, c)`.
pub fn triangle_area<T: Real>(a: Point2<T>, b: Point2<T>, c: Point2<T>) -> T {
    signed_area2(a, b, c) * cst(0.5)
}

/// Centroid of a triangle.
pub fn centroid<T: Real>(a: Point2<T>, b: Point2<T>, c: Point2<T>) -> Point2<T> {
    Point2::new(
        (a.x + b.x + c.x) / cst(3.0),
        (a.y + b.y + c.y) / cst(3.0),
    )
}
