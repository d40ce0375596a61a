use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{actual_angle, min_area_rect, GeometryError, Point, Polygon, RotatedRect};

/// Grasp description in pixel space; `width_mm` and `depth_mm` are filled in
/// once calibration and label configuration are known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspPlan {
    pub label: String,
    pub p1: Point,
    pub p2: Point,
    /// Midpoint of `p1` and `p2`.
    pub center: Point,
    /// Closing direction of the gripper, `[-90, 90)` degrees.
    pub psi: f64,
    pub width_px: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width_mm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_mm: Option<f64>,
}

impl GraspPlan {
    fn from_points(p1: Point, p2: Point, psi: f64) -> Self {
        Self {
            label: String::new(),
            p1,
            p2,
            center: p1.midpoint(p2),
            psi,
            width_px: p1.distance(p2),
            width_mm: None,
            depth_mm: None,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

/// Intersects the line through `rect.center` at angle ψ with the polygon
/// boundary.
///
/// Crossings are paired into the chords the line cuts through the polygon
/// interior. The chord containing the rectangle center is used (its ends are
/// the nearest crossings on either side); if the center falls outside the
/// polygon, the chord nearest to the center is used instead, which keeps the
/// grasp center on the object for curved shapes. `p1` lies in the +ψ
/// direction from the center.
pub fn grasp_points(polygon: &Polygon, rect: &RotatedRect) -> Result<GraspPlan, GeometryError> {
    let psi = actual_angle(rect);
    let dir = Point::from_angle(psi);
    let c = rect.center;

    // Half-open side test keeps crossing parity exact at vertices that lie on
    // the line.
    let mut hits: Vec<f64> = Vec::new();
    for (a, b) in polygon.edges() {
        let sa = dir.cross(a - c);
        let sb = dir.cross(b - c);
        if (sa > 0.0) != (sb > 0.0) {
            let s = sa / (sa - sb);
            let hit = a + (b - a) * s;
            hits.push((hit - c).dot(dir));
        }
    }
    hits.sort_by(f64::total_cmp);
    if hits.len() < 2 {
        return Err(GeometryError::GraspLineMiss);
    }

    let mut chosen: Option<(f64, f64, f64)> = None;
    for pair in hits.chunks_exact(2) {
        let (lo, hi) = (pair[0], pair[1]);
        let gap = if lo <= 0.0 && hi >= 0.0 {
            0.0
        } else {
            lo.abs().min(hi.abs())
        };
        if chosen.is_none_or(|(g, _, _)| gap < g) {
            chosen = Some((gap, lo, hi));
        }
    }
    let (_, lo, hi) = chosen.ok_or(GeometryError::GraspLineMiss)?;
    if hi - lo <= 0.0 {
        return Err(GeometryError::GraspLineMiss);
    }
    Ok(GraspPlan::from_points(c + dir * hi, c + dir * lo, psi))
}

/// [`grasp_points`], falling back to `rect.center ± shorter_edge / 2` along ψ
/// when the line misses the boundary.
pub fn grasp_points_or_fallback(polygon: &Polygon, rect: &RotatedRect) -> GraspPlan {
    grasp_points(polygon, rect).unwrap_or_else(|_| {
        let psi = actual_angle(rect);
        let half = Point::from_angle(psi) * (rect.shorter_edge() / 2.0);
        GraspPlan::from_points(rect.center + half, rect.center - half, psi)
    })
}

/// Min-area rectangle followed by [`grasp_points`].
pub fn plan_grasp(polygon: &Polygon) -> Result<(RotatedRect, GraspPlan), GeometryError> {
    let rect = min_area_rect(polygon)?;
    let plan = grasp_points(polygon, &rect)?;
    Ok((rect, plan))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::EPS_PX;
    use alloc::vec;

    fn rect4x2() -> Polygon {
        Polygon::new(vec![
            Point::new(0.0, 0.0),
            Point::new(4.0, 0.0),
            Point::new(4.0, 2.0),
            Point::new(0.0, 2.0),
        ])
        .unwrap()
    }

    #[test]
    fn axis_aligned_rectangle_grasp() {
        let (_, g) = plan_grasp(&rect4x2()).unwrap();
        assert!(g.p1.distance(Point::new(2.0, 0.0)) < EPS_PX);
        assert!(g.p2.distance(Point::new(2.0, 2.0)) < EPS_PX);
        assert!(g.center.distance(Point::new(2.0, 1.0)) < EPS_PX);
        assert!((g.width_px - 2.0).abs() < EPS_PX);
    }

    #[test]
    fn midpoint_identity() {
        let (_, g) = plan_grasp(&rect4x2().rotated_about(Point::new(7.0, -3.0), 17.0)).unwrap();
        assert_eq!(g.center, g.p1.midpoint(g.p2));
        assert_eq!(g.width_px, g.p1.distance(g.p2));
    }

    #[test]
    fn miss_and_fallback() {
        // A connected polygon always meets the line through its own rectangle
        // center, so the miss path needs a rectangle that does not enclose it.
        let poly = rect4x2();
        let far = RotatedRect::from_corners([
            Point::new(100.0, 100.0),
            Point::new(104.0, 100.0),
            Point::new(104.0, 102.0),
            Point::new(100.0, 102.0),
        ]);
        assert_eq!(grasp_points(&poly, &far), Err(GeometryError::GraspLineMiss));
        let g = grasp_points_or_fallback(&poly, &far);
        assert!(g.center.distance(Point::new(102.0, 101.0)) < EPS_PX);
        assert!((g.width_px - 2.0).abs() < EPS_PX);

        let rect = min_area_rect(&poly).unwrap();
        assert_eq!(grasp_points_or_fallback(&poly, &rect), grasp_points(&poly, &rect).unwrap());
    }
}
