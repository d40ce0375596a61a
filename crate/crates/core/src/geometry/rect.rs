use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{convex_hull, shoelace2, GeometryError, Point, Polygon};
use crate::math::deg;
#[allow(unused_imports)]
use crate::math::Float;
use crate::normalize_line_angle;

/// Two x coordinates closer than this count as a tie when picking corner 0.
const CORNER_TIE_PX: f64 = 1e-9;
/// Relative area band inside which two caliper rectangles count as equal.
const AREA_TIE_REL: f64 = 1e-10;
/// Relative edge-length band inside which a rectangle counts as a square.
const SQUARE_TIE_REL: f64 = 1e-9;

/// Rotated rectangle with the min-area-rect corner convention: corner 0 has the
/// smallest x (ties: smallest y) and corners proceed clockwise in the
/// coordinate plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotatedRect {
    pub center: Point,
    pub corners: [Point; 4],
    /// Length of edge A, corner 0 to corner 3.
    pub edge_a_len: f64,
    /// Length of corner 0 to corner 1.
    pub edge_b_len: f64,
    /// Rotation of edge A from the +x axis in `[-90, 90)`, measured positive
    /// counter-clockwise on screen, i.e. `-atan2(dy, dx)` in pixel axes.
    pub gamma: f64,
}

impl RotatedRect {
    /// Canonicalizes four rectangle corners given in any cyclic order.
    pub fn from_corners(corners: [Point; 4]) -> Self {
        let mut c = corners;
        if shoelace2(&c) > 0.0 {
            c.reverse();
        }
        let mut start = 0;
        for i in 1..4 {
            let (a, b) = (c[i], c[start]);
            if a.x < b.x - CORNER_TIE_PX || ((a.x - b.x).abs() <= CORNER_TIE_PX && a.y < b.y) {
                start = i;
            }
        }
        c.rotate_left(start);

        let center = Point::new(
            (c[0].x + c[1].x + c[2].x + c[3].x) / 4.0,
            (c[0].y + c[1].y + c[2].y + c[3].y) / 4.0,
        );
        let edge_a = c[3] - c[0];
        let edge_b = c[1] - c[0];
        Self {
            center,
            corners: c,
            edge_a_len: edge_a.norm(),
            edge_b_len: edge_b.norm(),
            gamma: normalize_line_angle(-deg(edge_a.y.atan2(edge_a.x))),
        }
    }

    pub fn area(&self) -> f64 {
        self.edge_a_len * self.edge_b_len
    }

    pub fn shorter_edge(&self) -> f64 {
        self.edge_a_len.min(self.edge_b_len)
    }

    pub fn longer_edge(&self) -> f64 {
        self.edge_a_len.max(self.edge_b_len)
    }

    pub fn is_square(&self) -> bool {
        (self.edge_a_len - self.edge_b_len).abs() <= SQUARE_TIE_REL * self.longer_edge()
    }

    /// Edge A is the rectangle's "width" when it is the strictly longer edge.
    pub fn edge_a_is_width(&self) -> bool {
        !self.is_square() && self.edge_a_len > self.edge_b_len
    }
}

/// Gripper angle ψ from the rectangle's γ: `90 - γ` when edge A is the width,
/// `-γ` when it is the height, folded into `[-90, 90)`.
///
/// The result is the line angle of the shorter edge in pixel axes. Squares
/// take the height branch, which is the direction of edge A.
pub fn actual_angle(rect: &RotatedRect) -> f64 {
    let psi = if rect.edge_a_is_width() {
        90.0 - rect.gamma
    } else {
        -rect.gamma
    };
    normalize_line_angle(psi)
}

/// Minimum-area enclosing rectangle by rotating calipers over the convex hull.
///
/// Equal-area candidates (within a 1e-10 relative band) are resolved towards
/// the smallest γ.
pub fn min_area_rect(polygon: &Polygon) -> Result<RotatedRect, GeometryError> {
    let hull = convex_hull(polygon.vertices())?;
    // Counter-clockwise in the coordinate plane: interior is left of each edge.
    let origin = hull.vertices()[0];
    let mut h: Vec<Point> = hull.vertices().iter().map(|&p| p - origin).collect();
    h.reverse();
    let n = h.len();

    let unit_edge = |i: usize| {
        let e = h[(i + 1) % n] - h[i];
        e * (1.0 / e.norm())
    };
    let left = |u: Point| Point::new(-u.y, u.x);
    let argmax = |dir: Point| {
        (1..n).fold(0, |best, k| if h[k].dot(dir) > h[best].dot(dir) { k } else { best })
    };

    let u0 = unit_edge(0);
    let mut far_u = argmax(u0);
    let mut far_n = argmax(left(u0));
    let mut near_u = argmax(-u0);

    let mut best: Option<(f64, RotatedRect)> = None;
    for i in 0..n {
        let u = unit_edge(i);
        let v = left(u);
        for _ in 0..n {
            if h[(far_u + 1) % n].dot(u) > h[far_u].dot(u) {
                far_u = (far_u + 1) % n;
            } else {
                break;
            }
        }
        for _ in 0..n {
            if h[(far_n + 1) % n].dot(v) > h[far_n].dot(v) {
                far_n = (far_n + 1) % n;
            } else {
                break;
            }
        }
        for _ in 0..n {
            if h[(near_u + 1) % n].dot(u) < h[near_u].dot(u) {
                near_u = (near_u + 1) % n;
            } else {
                break;
            }
        }

        let base = h[i];
        let lo = (h[near_u] - base).dot(u);
        let hi = (h[far_u] - base).dot(u);
        let depth = (h[far_n] - base).dot(v);
        let area = (hi - lo) * depth;

        let replace = match &best {
            None => true,
            Some((best_area, _)) if area < best_area * (1.0 - AREA_TIE_REL) => true,
            Some((best_area, _)) if area <= best_area * (1.0 + AREA_TIE_REL) => {
                let cand = rect_from_frame(origin, base, u, v, lo, hi, depth);
                let current = best.as_ref().map(|b| b.1.gamma).unwrap_or(f64::INFINITY);
                if cand.gamma < current {
                    best = Some((area.min(*best_area), cand));
                }
                false
            }
            Some(_) => false,
        };
        if replace {
            best = Some((area, rect_from_frame(origin, base, u, v, lo, hi, depth)));
        }
    }

    match best {
        Some((area, rect)) if area > 0.0 => Ok(rect),
        _ => Err(GeometryError::DegenerateInput("zero-area polygon")),
    }
}

fn rect_from_frame(
    origin: Point,
    base: Point,
    u: Point,
    v: Point,
    lo: f64,
    hi: f64,
    depth: f64,
) -> RotatedRect {
    let at = |s: f64, t: f64| origin + base + u * s + v * t;
    RotatedRect::from_corners([at(lo, 0.0), at(hi, 0.0), at(hi, depth), at(lo, depth)])
}
