//! Deterministic simulated delta robot with a two-finger force-sensing
//! gripper and a table of objects.
//!
//! Moves are teleports validated by inverse kinematics. A move whose path
//! sweeps through a standing object's footprint low enough knocks it over
//! (it becomes laying with a fresh random ψ). A grip binds the nearest laying
//! object under the gripper when depth and yaw line up; the finger force is a
//! linear spring on the overlap between object width and commanded width.

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::Point;
use crate::kinematics::{inverse_kinematics, DeltaGeometry, KinematicsError, Pose};
use crate::line_angle_distance;
use crate::normalize_line_angle;
use crate::protocol::{decode_command, salvage_seq, Command, ErrorCode, RobotCommand, RobotReply, MAX_GRIP_WIDTH_MM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectState {
    Laying,
    Standing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimObject {
    pub label: String,
    /// Robot frame, mm.
    pub center: Point,
    /// Short-axis direction in the robot frame, degrees.
    pub psi: f64,
    pub width_mm: f64,
    /// Gripper z at which the fingers close on this object.
    pub depth_mm: f64,
    pub state: ObjectState,
    #[serde(default = "yes")]
    pub graspable: bool,
    /// Rotationally symmetric: the fingers close on it from any yaw.
    #[serde(default)]
    pub round: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Finger spring constant, N per mm of overlap.
    pub spring_n_per_mm: f64,
    pub force_threshold_n: f64,
    pub capture_radius_mm: f64,
    pub yaw_tolerance_deg: f64,
    pub depth_tolerance_mm: f64,
    /// A path lower than `depth_mm + standing_height_mm` inside a standing
    /// object's footprint knocks it over.
    pub standing_height_mm: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            spring_n_per_mm: 1.0,
            force_threshold_n: 2.0,
            capture_radius_mm: 10.0,
            yaw_tolerance_deg: 25.0,
            depth_tolerance_mm: 5.0,
            standing_height_mm: 40.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Geometry(#[from] KinematicsError),
    #[error("object {index} ({label}) has non-positive width")]
    InvalidObject { index: usize, label: String },
}

#[derive(Debug, Clone)]
pub struct SimRobot {
    geometry: DeltaGeometry,
    config: SimConfig,
    pose: Pose,
    grip_width_mm: f64,
    force_n: f64,
    held: Option<usize>,
    held_psi_offset: f64,
    objects: Vec<SimObject>,
    rng: ChaCha8Rng,
}

impl SimRobot {
    pub fn new(
        geometry: DeltaGeometry,
        config: SimConfig,
        objects: Vec<SimObject>,
        seed: u64,
    ) -> Result<Self, SimError> {
        geometry.validate()?;
        for (index, o) in objects.iter().enumerate() {
            if !(o.width_mm > 0.0) {
                return Err(SimError::InvalidObject {
                    index,
                    label: o.label.clone(),
                });
            }
        }
        Ok(Self {
            pose: geometry.home(),
            geometry,
            config,
            grip_width_mm: MAX_GRIP_WIDTH_MM,
            force_n: 0.0,
            held: None,
            held_psi_offset: 0.0,
            objects,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn objects(&self) -> &[SimObject] {
        &self.objects
    }

    pub fn pose(&self) -> Pose {
        self.pose
    }

    pub fn geometry(&self) -> &DeltaGeometry {
        &self.geometry
    }

    pub fn held(&self) -> Option<usize> {
        self.held
    }

    pub fn reply(&self, seq: u64, error: Option<ErrorCode>) -> RobotReply {
        RobotReply {
            seq,
            ok: error.is_none(),
            pose: self.pose,
            grip_width_mm: self.grip_width_mm,
            force_n: self.force_n,
            grasped: self.held.is_some(),
            error,
        }
    }

    pub fn apply(&mut self, command: &RobotCommand) -> RobotReply {
        let error = match command.command {
            Command::Move { x, y, z } => self.move_to(x, y, z),
            Command::Yaw { deg } => self.set_yaw(deg),
            Command::Grip { width_mm } => self.grip(width_mm),
            Command::Open { width_mm } => self.open(width_mm),
            Command::Status => Ok(()),
        };
        self.reply(command.seq, error.err())
    }

    fn move_to(&mut self, x: f64, y: f64, z: f64) -> Result<(), ErrorCode> {
        let target = Pose::new(x, y, z, self.pose.yaw);
        match inverse_kinematics(&self.geometry, &target) {
            Ok(_) => {}
            Err(KinematicsError::JointLimit { .. }) => return Err(ErrorCode::JointLimit),
            Err(_) => return Err(ErrorCode::Unreachable),
        }
        let from = self.pose;
        self.knock_over_along(&from, &target);
        self.pose = target;
        if let Some(i) = self.held {
            self.objects[i].center = Point::new(x, y);
        }
        Ok(())
    }

    fn knock_over_along(&mut self, from: &Pose, to: &Pose) {
        for i in 0..self.objects.len() {
            if Some(i) == self.held || self.objects[i].state != ObjectState::Standing {
                continue;
            }
            let o = &self.objects[i];
            let radius = o.width_mm / 2.0;
            let ceiling = o.depth_mm + self.config.standing_height_mm;
            if let Some(lowest) = lowest_z_inside_disc(from, to, o.center, radius) {
                if lowest <= ceiling {
                    let psi = self.rng.random_range(-90.0..90.0);
                    let o = &mut self.objects[i];
                    o.state = ObjectState::Laying;
                    o.psi = psi;
                }
            }
        }
    }

    fn set_yaw(&mut self, deg: f64) -> Result<(), ErrorCode> {
        if !deg.is_finite() || !self.geometry.yaw_in_limits(deg) {
            return Err(ErrorCode::YawLimit);
        }
        self.pose.yaw = deg;
        if let Some(i) = self.held {
            self.objects[i].psi = normalize_line_angle(deg + self.held_psi_offset);
        }
        Ok(())
    }

    fn check_width(width_mm: f64) -> Result<(), ErrorCode> {
        if !width_mm.is_finite() || width_mm < 0.0 {
            return Err(ErrorCode::InvalidArgument);
        }
        if width_mm > MAX_GRIP_WIDTH_MM {
            return Err(ErrorCode::WidthExceedsGripper);
        }
        Ok(())
    }

    fn grip(&mut self, width_mm: f64) -> Result<(), ErrorCode> {
        Self::check_width(width_mm)?;
        let here = Point::new(self.pose.x, self.pose.y);
        let target = match self.held {
            Some(i) => Some(i),
            None => self.contact_candidate(here),
        };
        let Some(i) = target else {
            self.grip_width_mm = width_mm;
            self.force_n = 0.0;
            return Ok(());
        };
        let o = &self.objects[i];
        let overlap = (o.width_mm - width_mm).max(0.0);
        self.force_n = self.config.spring_n_per_mm * overlap;
        self.grip_width_mm = width_mm.max(o.width_mm);
        if self.held.is_none() && o.graspable && self.force_n >= self.config.force_threshold_n {
            self.held_psi_offset = normalize_line_angle(o.psi - self.pose.yaw);
            self.held = Some(i);
            self.objects[i].center = here;
        } else if self.held.is_some() && self.force_n < self.config.force_threshold_n {
            self.held = None;
        }
        Ok(())
    }

    /// Nearest laying object the fingers would close on from the current pose.
    fn contact_candidate(&self, here: Point) -> Option<usize> {
        let c = &self.config;
        self.objects
            .iter()
            .enumerate()
            .filter(|(_, o)| o.state == ObjectState::Laying)
            .map(|(i, o)| (i, o.center.distance(here)))
            .filter(|&(_, d)| d < c.capture_radius_mm)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
            .filter(|&i| {
                let o = &self.objects[i];
                (self.pose.z - o.depth_mm).abs() <= c.depth_tolerance_mm
                    && (o.round || line_angle_distance(o.psi, self.pose.yaw) <= c.yaw_tolerance_deg)
            })
    }

    fn open(&mut self, width_mm: f64) -> Result<(), ErrorCode> {
        Self::check_width(width_mm)?;
        self.grip_width_mm = width_mm;
        self.force_n = 0.0;
        if let Some(i) = self.held.take() {
            self.objects[i].center = Point::new(self.pose.x, self.pose.y);
        }
        Ok(())
    }
}

/// Lowest z of the straight path `from → to` while its horizontal projection
/// is strictly inside the disc, or `None` if it never enters.
fn lowest_z_inside_disc(from: &Pose, to: &Pose, center: Point, radius: f64) -> Option<f64> {
    let a = Point::new(from.x, from.y);
    let d = Point::new(to.x, to.y) - a;
    let f = a - center;
    let dd = d.dot(d);
    let (t0, t1) = if dd == 0.0 {
        if f.norm() < radius {
            (0.0, 1.0)
        } else {
            return None;
        }
    } else {
        // |f + t d|² < r²
        let b = f.dot(d);
        let c = f.dot(f) - radius * radius;
        let disc = b * b - dd * c;
        if disc <= 0.0 {
            return None;
        }
        let s = crate::math::Float::sqrt(disc);
        let lo = ((-b - s) / dd).max(0.0);
        let hi = ((-b + s) / dd).min(1.0);
        if lo >= hi {
            return None;
        }
        (lo, hi)
    };
    let z = |t: f64| from.z + (to.z - from.z) * t;
    Some(z(t0).min(z(t1)))
}

/// Per-connection request handling: decoding, sequence checks and replies.
#[derive(Debug, Default, Clone)]
pub struct SessionState {
    last_seq: Option<u64>,
}

impl SessionState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Applies one raw frame (newline included) to the robot and returns the
    /// reply. Never panics on malformed input.
    pub fn handle_frame(&mut self, robot: &mut SimRobot, frame: &[u8]) -> RobotReply {
        match decode_command(frame) {
            Ok(cmd) => self.handle(robot, &cmd),
            Err(e) => robot.reply(salvage_seq(frame), Some(e.code())),
        }
    }

    pub fn handle(&mut self, robot: &mut SimRobot, cmd: &RobotCommand) -> RobotReply {
        if self.last_seq.is_some_and(|last| cmd.seq <= last) {
            return robot.reply(cmd.seq, Some(ErrorCode::SequenceOutOfOrder));
        }
        self.last_seq = Some(cmd.seq);
        robot.apply(cmd)
    }
}
