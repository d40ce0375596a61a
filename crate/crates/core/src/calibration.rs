//! Pixel to robot-workspace mapping fitted from grid correspondences captured
//! at several camera heights.
//!
//! Each height gets an affine map `world = L · pixel + t`; between calibrated
//! heights the six parameters are interpolated linearly. Up to 10% of the
//! calibrated height range beyond either end the nearest plane is used
//! unchanged; further out is an error.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::geometry::Point;
use crate::math::deg;
#[allow(unused_imports)]
use crate::math::Float;
use crate::normalize_line_angle;

/// Fraction of the calibrated height range usable beyond either end.
pub const EXTRAPOLATION_MARGIN: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum CalibrationError {
    #[error("need at least 3 correspondences, got {0}")]
    InsufficientPoints(usize),
    #[error("correspondences are collinear or the fitted map is singular")]
    DegenerateConfiguration,
    #[error("pixel and world point counts differ")]
    LengthMismatch,
    #[error("two plane maps share the height {0} mm")]
    DuplicateHeights(f64),
    #[error("need plane maps at two or more heights")]
    TooFewPlanes,
    #[error("height {height_mm} mm is outside the usable range [{min_mm}, {max_mm}]")]
    HeightOutOfRange { height_mm: f64, min_mm: f64, max_mm: f64 },
}

/// Affine pixel → world map for one camera height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneMap {
    pub height_mm: f64,
    /// Row-major 2×2 linear part (mm per px).
    pub linear: [[f64; 2]; 2],
    /// World offset in mm.
    pub offset: [f64; 2],
    pub rms_residual_mm: f64,
}

impl PlaneMap {
    pub fn apply(&self, p: Point) -> Point {
        let l = &self.linear;
        Point::new(
            l[0][0] * p.x + l[0][1] * p.y + self.offset[0],
            l[1][0] * p.x + l[1][1] * p.y + self.offset[1],
        )
    }

    pub fn determinant(&self) -> f64 {
        self.linear[0][0] * self.linear[1][1] - self.linear[0][1] * self.linear[1][0]
    }

    pub fn invert(&self, w: Point) -> Point {
        let l = &self.linear;
        let det = self.determinant();
        let dx = w.x - self.offset[0];
        let dy = w.y - self.offset[1];
        Point::new(
            (l[1][1] * dx - l[0][1] * dy) / det,
            (-l[1][0] * dx + l[0][0] * dy) / det,
        )
    }

    /// Maps a pixel-space direction through the linear part.
    pub fn apply_vector(&self, v: Point) -> Point {
        let l = &self.linear;
        Point::new(l[0][0] * v.x + l[0][1] * v.y, l[1][0] * v.x + l[1][1] * v.y)
    }

    /// Mean singular value of the linear part: isotropic mm per px.
    pub fn mm_per_px(&self) -> f64 {
        let l = &self.linear;
        let frob2 = l[0][0] * l[0][0] + l[0][1] * l[0][1] + l[1][0] * l[1][0] + l[1][1] * l[1][1];
        // (s1 + s2)^2 = s1^2 + s2^2 + 2 s1 s2 = |L|_F^2 + 2 |det L|
        (frob2 + 2.0 * self.determinant().abs()).sqrt() / 2.0
    }

    /// World line angle of a pixel-space line angle, `[-90, 90)` degrees.
    pub fn map_angle(&self, psi_px_deg: f64) -> f64 {
        let v = self.apply_vector(Point::from_angle(psi_px_deg));
        normalize_line_angle(deg(v.y.atan2(v.x)))
    }

    fn params(&self) -> [f64; 6] {
        [
            self.linear[0][0],
            self.linear[0][1],
            self.linear[1][0],
            self.linear[1][1],
            self.offset[0],
            self.offset[1],
        ]
    }
}

/// Least-squares affine fit of `world ≈ L · pixel + t` over centred data.
pub fn fit_plane_map(pixels: &[Point], world: &[Point], height_mm: f64) -> Result<PlaneMap, CalibrationError> {
    if pixels.len() != world.len() {
        return Err(CalibrationError::LengthMismatch);
    }
    let n = pixels.len();
    if n < 3 {
        return Err(CalibrationError::InsufficientPoints(n));
    }
    let inv_n = 1.0 / n as f64;
    let mean = |pts: &[Point]| {
        let s = pts.iter().fold(Point::default(), |acc, &p| acc + p);
        s * inv_n
    };
    let pm = mean(pixels);
    let wm = mean(world);

    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    let (mut ux, mut uy, mut vx, mut vy) = (0.0, 0.0, 0.0, 0.0);
    for (p, w) in pixels.iter().zip(world) {
        let dp = *p - pm;
        let dw = *w - wm;
        sxx += dp.x * dp.x;
        sxy += dp.x * dp.y;
        syy += dp.y * dp.y;
        ux += dw.x * dp.x;
        uy += dw.x * dp.y;
        vx += dw.y * dp.x;
        vy += dw.y * dp.y;
    }
    let det = sxx * syy - sxy * sxy;
    let scale = (sxx + syy) * (sxx + syy);
    if !(det > 1e-12 * scale) || !(scale > 0.0) {
        return Err(CalibrationError::DegenerateConfiguration);
    }
    // L = S_wp · S_pp⁻¹
    let inv = [[syy / det, -sxy / det], [-sxy / det, sxx / det]];
    let linear = [
        [ux * inv[0][0] + uy * inv[1][0], ux * inv[0][1] + uy * inv[1][1]],
        [vx * inv[0][0] + vy * inv[1][0], vx * inv[0][1] + vy * inv[1][1]],
    ];
    let mut map = PlaneMap {
        height_mm,
        linear,
        offset: [0.0, 0.0],
        rms_residual_mm: 0.0,
    };
    let lm = map.apply_vector(pm);
    map.offset = [wm.x - lm.x, wm.y - lm.y];
    if !(map.determinant().abs() > 1e-12) {
        return Err(CalibrationError::DegenerateConfiguration);
    }
    let sq: f64 = pixels
        .iter()
        .zip(world)
        .map(|(p, w)| {
            let d = map.apply(*p) - *w;
            d.dot(d)
        })
        .sum();
    map.rms_residual_mm = (sq * inv_n).sqrt();
    Ok(map)
}

/// Plane maps at two or more distinct heights, sorted ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CalibrationRepr", into = "CalibrationRepr")]
pub struct CalibrationModel {
    planes: Vec<PlaneMap>,
}

#[derive(Serialize, Deserialize)]
struct CalibrationRepr {
    planes: Vec<PlaneMap>,
}

impl TryFrom<CalibrationRepr> for CalibrationModel {
    type Error = CalibrationError;
    fn try_from(value: CalibrationRepr) -> Result<Self, Self::Error> {
        fit_calibration(value.planes)
    }
}

impl From<CalibrationModel> for CalibrationRepr {
    fn from(value: CalibrationModel) -> Self {
        CalibrationRepr { planes: value.planes }
    }
}

pub fn fit_calibration(mut planes: Vec<PlaneMap>) -> Result<CalibrationModel, CalibrationError> {
    if planes.len() < 2 {
        return Err(CalibrationError::TooFewPlanes);
    }
    planes.sort_by(|a, b| a.height_mm.total_cmp(&b.height_mm));
    for pair in planes.windows(2) {
        if pair[0].height_mm == pair[1].height_mm {
            return Err(CalibrationError::DuplicateHeights(pair[0].height_mm));
        }
    }
    if planes.iter().any(|p| !(p.determinant().abs() > 1e-12)) {
        return Err(CalibrationError::DegenerateConfiguration);
    }
    Ok(CalibrationModel { planes })
}

impl CalibrationModel {
    pub fn planes(&self) -> &[PlaneMap] {
        &self.planes
    }

    /// Calibrated `[min, max]` heights.
    pub fn height_range(&self) -> (f64, f64) {
        (self.planes[0].height_mm, self.planes[self.planes.len() - 1].height_mm)
    }

    /// Heights accepted by [`CalibrationModel::map_at`], margin included.
    pub fn usable_range(&self) -> (f64, f64) {
        let (lo, hi) = self.height_range();
        let margin = (hi - lo) * EXTRAPOLATION_MARGIN;
        (lo - margin, hi + margin)
    }

    /// Interpolated plane map at `height_mm`.
    pub fn map_at(&self, height_mm: f64) -> Result<PlaneMap, CalibrationError> {
        let (min_mm, max_mm) = self.usable_range();
        if !(height_mm >= min_mm && height_mm <= max_mm) {
            return Err(CalibrationError::HeightOutOfRange { height_mm, min_mm, max_mm });
        }
        let first = self.planes[0];
        let last = self.planes[self.planes.len() - 1];
        if height_mm <= first.height_mm {
            return Ok(PlaneMap { height_mm, ..first });
        }
        if height_mm >= last.height_mm {
            return Ok(PlaneMap { height_mm, ..last });
        }
        let upper = self.planes.partition_point(|p| p.height_mm < height_mm);
        let (a, b) = (self.planes[upper - 1], self.planes[upper]);
        if b.height_mm == height_mm {
            return Ok(b);
        }
        let t = (height_mm - a.height_mm) / (b.height_mm - a.height_mm);
        let (pa, pb) = (a.params(), b.params());
        let q: [f64; 6] = core::array::from_fn(|i| pa[i] + (pb[i] - pa[i]) * t);
        Ok(PlaneMap {
            height_mm,
            linear: [[q[0], q[1]], [q[2], q[3]]],
            offset: [q[4], q[5]],
            rms_residual_mm: a.rms_residual_mm + (b.rms_residual_mm - a.rms_residual_mm) * t,
        })
    }

    pub fn pixel_to_world(&self, pixel: Point, height_mm: f64) -> Result<Point, CalibrationError> {
        Ok(self.map_at(height_mm)?.apply(pixel))
    }

    pub fn world_to_pixel(&self, world: Point, height_mm: f64) -> Result<Point, CalibrationError> {
        let map = self.map_at(height_mm)?;
        if !(map.determinant().abs() > 1e-12) {
            return Err(CalibrationError::DegenerateConfiguration);
        }
        Ok(map.invert(world))
    }

    pub fn mm_per_px(&self, height_mm: f64) -> Result<f64, CalibrationError> {
        Ok(self.map_at(height_mm)?.mm_per_px())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn square() -> Vec<Point> {
        vec![
            Point::new(0.0, 0.0),
            Point::new(100.0, 0.0),
            Point::new(100.0, 100.0),
            Point::new(0.0, 100.0),
        ]
    }

    fn diag_plane(height_mm: f64, s: f64) -> PlaneMap {
        PlaneMap {
            height_mm,
            linear: [[s, 0.0], [0.0, s]],
            offset: [10.0, 20.0],
            rms_residual_mm: 0.0,
        }
    }

    #[test]
    fn identity_fit() {
        let m = fit_plane_map(&square(), &square(), 400.0).unwrap();
        assert!((m.linear[0][0] - 1.0).abs() < 1e-12 && (m.linear[1][1] - 1.0).abs() < 1e-12);
        assert!(m.linear[0][1].abs() < 1e-12 && m.linear[1][0].abs() < 1e-12);
        assert!(m.offset[0].abs() < 1e-9 && m.offset[1].abs() < 1e-9);
        assert!(m.rms_residual_mm < 1e-9);
    }

    #[test]
    fn recovers_scale_and_offset() {
        let px: Vec<Point> = [(0.0, 0.0), (640.0, 0.0), (0.0, 480.0), (640.0, 480.0), (320.0, 240.0), (100.0, 400.0)]
            .iter()
            .map(|&(x, y)| Point::new(x, y))
            .collect();
        let world: Vec<Point> = px.iter().map(|p| Point::new(0.5 * p.x + 10.0, 0.5 * p.y + 20.0)).collect();
        let m = fit_plane_map(&px, &world, 300.0).unwrap();
        let expect = [0.5, 0.0, 0.0, 0.5, 10.0, 20.0];
        for (got, want) in m.params().iter().zip(expect) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
        assert!(m.rms_residual_mm < 1e-9);
    }

    #[test]
    fn collinear_rejected() {
        let px = vec![Point::new(0.0, 0.0), Point::new(1.0, 1.0), Point::new(2.0, 2.0)];
        assert_eq!(
            fit_plane_map(&px, &px, 1.0),
            Err(CalibrationError::DegenerateConfiguration)
        );
        assert_eq!(
            fit_plane_map(&px[..2], &px[..2], 1.0),
            Err(CalibrationError::InsufficientPoints(2))
        );
    }

    #[test]
    fn constant_field_interpolation() {
        let m = fit_calibration(vec![diag_plane(300.0, 0.5), diag_plane(500.0, 0.5)]).unwrap();
        let at = m.map_at(400.0).unwrap();
        assert_eq!(at.linear, [[0.5, 0.0], [0.0, 0.5]]);
        assert_eq!(at.offset, [10.0, 20.0]);
    }

    #[test]
    fn linear_interpolation() {
        let m = fit_calibration(vec![diag_plane(600.0, 0.25), diag_plane(300.0, 0.5)]).unwrap();
        let at = m.map_at(450.0).unwrap();
        assert!((at.linear[0][0] - 0.375).abs() < 1e-15);
        assert!((at.linear[1][1] - 0.375).abs() < 1e-15);
        assert_eq!(m.height_range(), (300.0, 600.0));
    }

    #[test]
    fn plane_errors() {
        assert_eq!(
            fit_calibration(vec![diag_plane(300.0, 0.5)]),
            Err(CalibrationError::TooFewPlanes)
        );
        assert_eq!(
            fit_calibration(vec![diag_plane(300.0, 0.5), diag_plane(300.0, 0.4)]),
            Err(CalibrationError::DuplicateHeights(300.0))
        );
    }

    #[test]
    fn range_guard_and_clamping() {
        let m = fit_calibration(vec![diag_plane(300.0, 0.5), diag_plane(500.0, 0.25)]).unwrap();
        assert!(matches!(
            m.pixel_to_world(Point::new(1.0, 1.0), 1000.0),
            Err(CalibrationError::HeightOutOfRange { .. })
        ));
        // 10% of a 200 mm range: 280..520 usable, clamped to the end planes.
        assert_eq!(m.map_at(285.0).unwrap().linear, [[0.5, 0.0], [0.0, 0.5]]);
        assert_eq!(m.map_at(520.0).unwrap().linear, [[0.25, 0.0], [0.0, 0.25]]);
        assert!(m.map_at(521.0).is_err());
    }

    #[test]
    fn exact_plane_equals_direct_application() {
        let a = diag_plane(300.0, 0.5);
        let m = fit_calibration(vec![a, diag_plane(500.0, 0.25)]).unwrap();
        let p = Point::new(123.0, 45.0);
        assert_eq!(m.pixel_to_world(p, 300.0).unwrap(), a.apply(p));
    }

    #[test]
    fn mm_per_px_of_rotation_and_scale() {
        let (s, c) = 0.3f64.sin_cos();
        let m = PlaneMap {
            height_mm: 0.0,
            linear: [[0.5 * c, -0.5 * s], [0.5 * s, 0.5 * c]],
            offset: [0.0, 0.0],
            rms_residual_mm: 0.0,
        };
        assert!((m.mm_per_px() - 0.5).abs() < 1e-12);
        let aniso = diag_plane(0.0, 1.0);
        let aniso = PlaneMap { linear: [[2.0, 0.0], [0.0, 1.0]], ..aniso };
        assert!((aniso.mm_per_px() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn json_rejects_single_plane() {
        let one = r#"{"planes":[{"height_mm":1,"linear":[[1,0],[0,1]],"offset":[0,0],"rms_residual_mm":0}]}"#;
        assert!(serde_json::from_str::<CalibrationModel>(one).is_err());
    }
}
