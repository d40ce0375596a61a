//! 3-DOF delta robot kinematics with a decoupled yaw axis.
//!
//! Robot frame: origin at the centre of the base plane, z up, so the
//! workspace sits at negative z. Arm `i` is mounted at azimuth `120° · i`.
//! Actuator angle 0 means the upper arm is horizontal; positive angles swing
//! the elbow down. Degrees at the interface, radians inside.

use serde::{Deserialize, Serialize};

use crate::math::{deg, rad};
#[allow(unused_imports)]
use crate::math::Float;

const ARM_AZIMUTH_DEG: [f64; 3] = [0.0, 120.0, 240.0];

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum KinematicsError {
    #[error("pose is out of reach of arm {arm}")]
    Unreachable { arm: usize },
    #[error("arm {arm} needs {angle_deg:.3} deg, outside the actuator limits")]
    JointLimit { arm: usize, angle_deg: f64 },
    #[error("forearm spheres do not intersect for the given actuator angles")]
    NoIntersection,
    #[error("invalid geometry: {0}")]
    InvalidGeometry(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaGeometry {
    /// Base centre to actuator axis.
    pub base_radius_mm: f64,
    /// Effector centre to forearm attachment.
    pub effector_radius_mm: f64,
    /// Actuated link.
    pub upper_arm_mm: f64,
    /// Parallelogram link.
    pub forearm_mm: f64,
    /// Inclusive `[min, max]` actuator angle in degrees.
    pub actuator_limits_deg: [f64; 2],
    /// Inclusive `[min, max]` yaw in degrees.
    pub yaw_limits_deg: [f64; 2],
}

impl Default for DeltaGeometry {
    /// Desk-scale reference robot.
    fn default() -> Self {
        Self {
            base_radius_mm: 200.0,
            effector_radius_mm: 50.0,
            upper_arm_mm: 200.0,
            forearm_mm: 400.0,
            actuator_limits_deg: [-40.0, 90.0],
            yaw_limits_deg: [-180.0, 180.0],
        }
    }
}

impl DeltaGeometry {
    pub fn validate(&self) -> Result<(), KinematicsError> {
        let lengths = [
            self.base_radius_mm,
            self.effector_radius_mm,
            self.upper_arm_mm,
            self.forearm_mm,
        ];
        if !lengths.iter().all(|l| l.is_finite() && *l > 0.0) {
            return Err(KinematicsError::InvalidGeometry("lengths must be positive"));
        }
        let offset = self.base_radius_mm - self.effector_radius_mm;
        if self.forearm_mm <= (self.upper_arm_mm - offset).abs() {
            return Err(KinematicsError::InvalidGeometry("forearm too short to close the loop"));
        }
        let [lo, hi] = self.actuator_limits_deg;
        let [ylo, yhi] = self.yaw_limits_deg;
        if !(lo < hi) || !(ylo < yhi) {
            return Err(KinematicsError::InvalidGeometry("limits must be increasing"));
        }
        Ok(())
    }

    /// End-effector position with every actuator at 0°.
    pub fn home(&self) -> Pose {
        let p = forward_kinematics(self, [0.0; 3]).expect("validated geometry closes at home");
        Pose { x: p[0], y: p[1], z: p[2], yaw: 0.0 }
    }

    pub fn yaw_in_limits(&self, yaw_deg: f64) -> bool {
        yaw_deg >= self.yaw_limits_deg[0] && yaw_deg <= self.yaw_limits_deg[1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub yaw: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, z: f64, yaw: f64) -> Self {
        Self { x, y, z, yaw }
    }

    pub fn position(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

/// Actuator angles (degrees) for a pose, elbow-out branch. Yaw is ignored.
pub fn inverse_kinematics(geometry: &DeltaGeometry, pose: &Pose) -> Result<[f64; 3], KinematicsError> {
    let mut angles = [0.0; 3];
    for (arm, azimuth) in ARM_AZIMUTH_DEG.iter().enumerate() {
        let theta = arm_angle(geometry, pose, rad(*azimuth)).ok_or(KinematicsError::Unreachable { arm })?;
        let angle_deg = deg(theta);
        let [lo, hi] = geometry.actuator_limits_deg;
        if !(angle_deg >= lo && angle_deg <= hi) {
            return Err(KinematicsError::JointLimit { arm, angle_deg });
        }
        angles[arm] = angle_deg;
    }
    Ok(angles)
}

/// Solves `A cos θ + B sin θ = K` for one arm in its own vertical plane.
fn arm_angle(g: &DeltaGeometry, pose: &Pose, azimuth: f64) -> Option<f64> {
    let (s, c) = azimuth.sin_cos();
    let along = pose.x * c + pose.y * s;
    let across = -pose.x * s + pose.y * c;
    let z = pose.z;
    let reach = along + g.effector_radius_mm - g.base_radius_mm;
    let l = g.upper_arm_mm;

    let a = -2.0 * reach * l;
    let b = 2.0 * z * l;
    let k = g.forearm_mm * g.forearm_mm - reach * reach - l * l - across * across - z * z;
    let r = a.hypot(b);
    if !(r > 0.0) || !k.is_finite() {
        return None;
    }
    let ratio = k / r;
    if ratio.abs() > 1.0 {
        return None;
    }
    let phase = b.atan2(a);
    let spread = ratio.acos();
    let t1 = wrap_pi(phase + spread);
    let t2 = wrap_pi(phase - spread);
    // Elbow-out: the elbow lies further from the base centre.
    Some(if t1.cos() >= t2.cos() { t1 } else { t2 })
}

fn wrap_pi(mut a: f64) -> f64 {
    use core::f64::consts::PI;
    while a > PI {
        a -= 2.0 * PI;
    }
    while a <= -PI {
        a += 2.0 * PI;
    }
    a
}

/// Elbow position of one arm shifted inward by the effector radius, so the
/// effector centre lies on a sphere of forearm radius around it.
fn shifted_elbow(g: &DeltaGeometry, arm: usize, angle_deg: f64) -> [f64; 3] {
    let theta = rad(angle_deg);
    let (s, c) = rad(ARM_AZIMUTH_DEG[arm]).sin_cos();
    let radial = g.base_radius_mm + g.upper_arm_mm * theta.cos() - g.effector_radius_mm;
    [radial * c, radial * s, -g.upper_arm_mm * theta.sin()]
}

/// Effector centre for three actuator angles (degrees): the lower
/// intersection of the three forearm spheres.
pub fn forward_kinematics(geometry: &DeltaGeometry, angles_deg: [f64; 3]) -> Result<[f64; 3], KinematicsError> {
    let p1 = shifted_elbow(geometry, 0, angles_deg[0]);
    let p2 = shifted_elbow(geometry, 1, angles_deg[1]);
    let p3 = shifted_elbow(geometry, 2, angles_deg[2]);
    let radius = geometry.forearm_mm;

    let d12 = sub(p2, p1);
    let d = norm(d12);
    if !(d > 0.0) {
        return Err(KinematicsError::NoIntersection);
    }
    let ex = scale(d12, 1.0 / d);
    let d13 = sub(p3, p1);
    let i = dot(ex, d13);
    let ey_raw = sub(d13, scale(ex, i));
    let ey_len = norm(ey_raw);
    if !(ey_len > 1e-12) {
        return Err(KinematicsError::NoIntersection);
    }
    let ey = scale(ey_raw, 1.0 / ey_len);
    let ez = cross(ex, ey);
    let j = dot(ey, d13);

    // Equal radii simplify the classic trilateration terms.
    let x = d / 2.0;
    let y = (i * i + j * j - 2.0 * i * x) / (2.0 * j);
    let z2 = radius * radius - x * x - y * y;
    if !(z2 >= 0.0) {
        return Err(KinematicsError::NoIntersection);
    }
    let h = z2.sqrt();
    let base = add(p1, add(scale(ex, x), scale(ey, y)));
    let a = add(base, scale(ez, h));
    let b = sub(base, scale(ez, h));
    Ok(if a[2] <= b[2] { a } else { b })
}

/// Per-arm loop closure error `|P - E| - forearm` in mm.
pub fn closure_residuals(geometry: &DeltaGeometry, angles_deg: [f64; 3], position: [f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (arm, slot) in out.iter_mut().enumerate() {
        let e = shifted_elbow(geometry, arm, angles_deg[arm]);
        *slot = norm(sub(position, e)) - geometry.forearm_mm;
    }
    out
}

/// True when [`inverse_kinematics`] succeeds within the actuator limits.
pub fn in_workspace(geometry: &DeltaGeometry, pose: &Pose) -> bool {
    inverse_kinematics(geometry, pose).is_ok()
}

fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn scale(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}
