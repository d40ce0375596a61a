//! Allocation-only core of the catering pack assembler.
//!
//! Everything in here is a pure function of its inputs: mask-to-grasp
//! geometry, pixel to workspace calibration, delta robot kinematics, the
//! robot wire codec, the simulated robot state machine, pack planning and
//! plan execution against any [`link::RobotLink`]. File formats, sockets and
//! the command line live in the `packer` crate.
#![no_std]
// `!(a > b)` is used on purpose so NaN inputs fall into the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod calibration;
pub mod executor;
pub mod geometry;
pub mod kinematics;
pub mod link;
pub mod mask;
pub mod metrics;
pub mod perception;
pub mod planner;
pub mod protocol;
pub mod sim;

mod math;

pub use geometry::{GeometryError, GraspPlan, Point, Polygon, RotatedRect};
pub use mask::Mask;

/// Maps any angle in degrees onto the undirected line range `[-90, 90)`.
pub fn normalize_line_angle(deg: f64) -> f64 {
    let mut a = deg % 180.0;
    if a < -90.0 {
        a += 180.0;
    } else if a >= 90.0 {
        a -= 180.0;
    }
    // `a + 180.0` can round up to exactly 90.0 for tiny negative inputs.
    if a >= 90.0 {
        a -= 180.0;
    }
    // Folds -0.0 into 0.0.
    a + 0.0
}

/// Smallest absolute difference between two undirected line angles (degrees).
pub fn line_angle_distance(a: f64, b: f64) -> f64 {
    let d = normalize_line_angle(a - b);
    if d < 0.0 {
        -d
    } else {
        d
    }
}
