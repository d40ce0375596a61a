//! Mask-to-grasp geometry in image pixel space.
//!
//! Frame: origin top-left, x to the right, y down. Every angle is an
//! undirected line angle in `[-90, 90)` degrees computed as `atan2(dy, dx)`
//! in this frame, except [`RotatedRect::gamma`] which follows the
//! min-area-rectangle convention documented on that field.
//!
//! Winding: polygons and rectangle corners are stored "clockwise" in the
//! coordinate plane, meaning a negative shoelace sum over raw pixel
//! coordinates (on screen, with y pointing down, that traversal appears
//! counter-clockwise).

mod contour;
mod grasp;
mod hull;
mod rect;

use alloc::vec::Vec;
use core::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::math::hypot;
#[allow(unused_imports)]
use crate::math::Float;

pub use contour::{mask_to_polygon, prune_collinear, PRUNE_TOLERANCE_PX};
pub use grasp::{grasp_points, grasp_points_or_fallback, plan_grasp, GraspPlan};
pub use hull::convex_hull;
pub use rect::{actual_angle, min_area_rect, RotatedRect};

/// Comparison tolerance for pixel geometry.
pub const EPS_PX: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GeometryError {
    #[error("mask has no foreground pixels")]
    EmptyMask,
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("grasp line does not cross the object boundary")]
    GraspLineMiss,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z component of the 3D cross product.
    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        hypot(self.x, self.y)
    }

    pub fn distance(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn midpoint(self, other: Point) -> Point {
        Point::new((self.x + other.x) / 2.0, (self.y + other.y) / 2.0)
    }

    /// Unit direction at `deg` degrees (`atan2(dy, dx)` convention).
    pub fn from_angle(deg: f64) -> Point {
        let (s, c) = deg.to_radians().sin_cos();
        Point::new(c, s)
    }

    /// Rotates by `deg` degrees about `pivot`.
    pub fn rotated_about(self, pivot: Point, deg: f64) -> Point {
        let (s, c) = deg.to_radians().sin_cos();
        let d = self - pivot;
        Point::new(pivot.x + c * d.x - s * d.y, pivot.y + s * d.x + c * d.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, rhs: f64) -> Point {
        Point::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

/// Twice the signed shoelace area of a closed vertex ring.
pub(crate) fn shoelace2(vertices: &[Point]) -> f64 {
    let n = vertices.len();
    (0..n)
        .map(|i| vertices[i].cross(vertices[(i + 1) % n]))
        .sum()
}

/// Implicitly closed simple polygon with at least three vertices and nonzero
/// area, stored clockwise (negative shoelace sum).
///
/// Self-intersection is not checked on construction; contours traced from
/// masks may touch themselves at single pixel corners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolygonRepr", into = "PolygonRepr")]
pub struct Polygon {
    vertices: Vec<Point>,
}

#[derive(Serialize, Deserialize)]
struct PolygonRepr {
    vertices: Vec<Point>,
}

impl TryFrom<PolygonRepr> for Polygon {
    type Error = GeometryError;
    fn try_from(value: PolygonRepr) -> Result<Self, Self::Error> {
        Polygon::new(value.vertices)
    }
}

impl From<Polygon> for PolygonRepr {
    fn from(value: Polygon) -> Self {
        PolygonRepr {
            vertices: value.vertices,
        }
    }
}

impl Polygon {
    pub fn new(mut vertices: Vec<Point>) -> Result<Self, GeometryError> {
        if vertices.len() < 3 {
            return Err(GeometryError::DegenerateInput("polygon needs at least 3 vertices"));
        }
        if !vertices.iter().all(|p| p.is_finite()) {
            return Err(GeometryError::DegenerateInput("non-finite vertex"));
        }
        let area2 = shoelace2(&vertices);
        if area2.abs() <= 1e-12 {
            return Err(GeometryError::DegenerateInput("polygon has zero area"));
        }
        if area2 > 0.0 {
            vertices.reverse();
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Unsigned area in px².
    pub fn area(&self) -> f64 {
        shoelace2(&self.vertices).abs() / 2.0
    }

    /// Directed edges `(v[i], v[i+1])`, closing edge included.
    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// `(min, max)` corners of the axis-aligned bounding box.
    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for v in &self.vertices[1..] {
            lo.x = lo.x.min(v.x);
            lo.y = lo.y.min(v.y);
            hi.x = hi.x.max(v.x);
            hi.y = hi.y.max(v.y);
        }
        (lo, hi)
    }

    /// Even-odd ray cast. Points exactly on the boundary may go either way.
    pub fn contains(&self, p: Point) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn translated(&self, offset: Point) -> Polygon {
        Polygon {
            vertices: self.vertices.iter().map(|&v| v + offset).collect(),
        }
    }

    /// Rotation preserves orientation, so the winding invariant still holds.
    pub fn rotated_about(&self, pivot: Point, deg: f64) -> Polygon {
        Polygon {
            vertices: self
                .vertices
                .iter()
                .map(|v| v.rotated_about(pivot, deg))
                .collect(),
        }
    }
}
