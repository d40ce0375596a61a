//! Runs a plan against a robot session.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::calibration::CalibrationModel;
use crate::geometry::{GraspPlan, Point};
use crate::kinematics::{in_workspace, DeltaGeometry, Pose};
use crate::link::{LinkError, RobotLink};
use crate::perception::Scene;
use crate::planner::{grasp_to_world, ActionKind, LabelConfig, PickPlaceAction, Plan};
use crate::protocol::{Command, ErrorCode, RobotReply, MAX_GRIP_WIDTH_MM};

/// Fresh perception of the work area, used after a knock-over.
pub trait SceneSource {
    fn rescan(&mut self) -> Result<Scene, String>;
}

/// Scene source for plans without standing objects.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoRescan;

impl SceneSource for NoRescan {
    fn rescan(&mut self) -> Result<Scene, String> {
        Err("no scene source configured".into())
    }
}

impl<F: FnMut() -> Result<Scene, String>> SceneSource for F {
    fn rescan(&mut self) -> Result<Scene, String> {
        self()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ActionStatus {
    Succeeded,
    GraspFailed,
    OutOfWorkspace,
    WidthExceedsGripper,
    CommandRejected,
    RescanFailed,
    /// An earlier action this one depends on failed.
    Skipped,
    /// The session was lost before this action ran.
    NotAttempted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionOutcome {
    pub index: usize,
    pub kind: ActionKind,
    pub label: String,
    pub object_id: usize,
    pub status: ActionStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorCode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    /// Where the object was released, for successful placements.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub placed_at: Option<Point>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExecutionReport {
    pub outcomes: Vec<ActionOutcome>,
    pub placements: usize,
    pub commands_sent: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_lost: Option<String>,
}

impl ExecutionReport {
    pub fn all_succeeded(&self) -> bool {
        self.session_lost.is_none() && self.outcomes.iter().all(|o| o.status == ActionStatus::Succeeded)
    }
}

enum Failure {
    Status(ActionStatus, Option<ErrorCode>, Option<String>),
    Lost(LinkError),
}

impl From<LinkError> for Failure {
    fn from(e: LinkError) -> Self {
        Failure::Lost(e)
    }
}

fn fail(status: ActionStatus, detail: impl Into<String>) -> Failure {
    Failure::Status(status, None, Some(detail.into()))
}

pub struct Executor<'a> {
    pub geometry: &'a DeltaGeometry,
    /// Needed only to convert rescanned scenes.
    pub calibration: Option<&'a CalibrationModel>,
    pub config: &'a LabelConfig,
}

struct Session<'l, L: RobotLink> {
    link: &'l mut L,
    sent: u64,
}

impl<L: RobotLink> Session<'_, L> {
    fn send(&mut self, command: Command) -> Result<RobotReply, LinkError> {
        self.sent += 1;
        self.link.send(command)
    }

    /// Sends and turns a rejected reply into a failure.
    fn expect(&mut self, command: Command) -> Result<RobotReply, Failure> {
        let reply = self.send(command)?;
        if reply.ok {
            Ok(reply)
        } else {
            Err(Failure::Status(
                ActionStatus::CommandRejected,
                reply.error,
                Some(format!("{} rejected", command.name())),
            ))
        }
    }

    fn move_to(&mut self, p: Point, z: f64) -> Result<RobotReply, Failure> {
        self.expect(Command::Move { x: p.x, y: p.y, z })
    }
}

impl Executor<'_> {
    fn check_pose(&self, p: Point, z: f64, yaw: f64) -> Result<(), Failure> {
        let pose = Pose::new(p.x, p.y, z, yaw);
        if !in_workspace(self.geometry, &pose) || !self.geometry.yaw_in_limits(yaw) {
            return Err(fail(
                ActionStatus::OutOfWorkspace,
                format!("pose ({:.1}, {:.1}, {:.1}) yaw {:.1} not reachable", p.x, p.y, z, yaw),
            ));
        }
        Ok(())
    }

    /// Executes actions in order. A lost session aborts the rest of the plan;
    /// any other failure is recorded and execution continues.
    pub fn execute<L: RobotLink, S: SceneSource>(&self, plan: &Plan, link: &mut L, scenes: &mut S) -> ExecutionReport {
        let mut session = Session { link, sent: 0 };
        let mut report = ExecutionReport::default();
        let mut refreshed: BTreeMap<usize, GraspPlan> = BTreeMap::new();
        let mut blocked: Vec<usize> = Vec::new();

        for (index, action) in plan.actions.iter().enumerate() {
            let mut outcome = ActionOutcome {
                index,
                kind: action.kind,
                label: action.label.clone(),
                object_id: action.object_id,
                status: ActionStatus::Succeeded,
                error: None,
                detail: None,
                placed_at: None,
            };
            if report.session_lost.is_some() {
                outcome.status = ActionStatus::NotAttempted;
                report.outcomes.push(outcome);
                continue;
            }
            if blocked.contains(&action.object_id) {
                outcome.status = ActionStatus::Skipped;
                report.outcomes.push(outcome);
                continue;
            }
            let result = match action.kind {
                ActionKind::PickPlace => {
                    let source = refreshed.get(&action.object_id).unwrap_or(&action.source);
                    self.pick_place(&mut session, action, source).map(Some)
                }
                ActionKind::Knockdown => self.knockdown(&mut session, action).map(|_| None),
                ActionKind::Rescan => self.rescan(action, scenes).map(|g| {
                    refreshed.insert(action.object_id, g);
                    None
                }),
            };
            match result {
                Ok(placed_at) => {
                    outcome.placed_at = placed_at;
                    if placed_at.is_some() {
                        report.placements += 1;
                    }
                }
                Err(Failure::Status(status, error, detail)) => {
                    outcome.status = status;
                    outcome.error = error;
                    outcome.detail = detail;
                    if action.kind != ActionKind::PickPlace {
                        blocked.push(action.object_id);
                    }
                }
                Err(Failure::Lost(e)) => {
                    outcome.status = ActionStatus::NotAttempted;
                    outcome.detail = Some(format!("{e}"));
                    report.session_lost = Some(format!("{e}"));
                }
            }
            report.outcomes.push(outcome);
        }
        report.commands_sent = session.sent;
        report
    }

    fn pick_place<L: RobotLink>(
        &self,
        s: &mut Session<'_, L>,
        action: &PickPlaceAction,
        source: &GraspPlan,
    ) -> Result<Point, Failure> {
        let c = &self.config;
        let width = source.width_mm.unwrap_or(0.0);
        if !(width.is_finite() && width <= MAX_GRIP_WIDTH_MM) {
            return Err(fail(
                ActionStatus::WidthExceedsGripper,
                format!("object width {width:.1} mm exceeds the gripper"),
            ));
        }
        let open_width = (width + c.width_margin_mm).min(MAX_GRIP_WIDTH_MM);
        let grip_width = (width - c.grip_squeeze_mm).max(0.0);
        let from = source.center;
        let to = Point::new(action.destination.x, action.destination.y);
        let depth = action.depth_mm;
        for (p, z, yaw) in [
            (from, c.safe_z_mm, source.psi),
            (from, depth, source.psi),
            (to, c.safe_z_mm, action.destination.psi),
            (to, depth, action.destination.psi),
        ] {
            self.check_pose(p, z, yaw)?;
        }

        s.move_to(from, c.safe_z_mm)?;
        s.expect(Command::Yaw { deg: source.psi })?;
        s.expect(Command::Open { width_mm: open_width })?;
        s.move_to(from, depth)?;
        let gripped = s.expect(Command::Grip { width_mm: grip_width })?;
        if !gripped.grasped {
            s.expect(Command::Open { width_mm: open_width })?;
            s.move_to(from, c.safe_z_mm)?;
            return Err(Failure::Status(
                ActionStatus::GraspFailed,
                None,
                Some(format!("force {:.2} N, not grasped", gripped.force_n)),
            ));
        }
        s.move_to(from, c.safe_z_mm)?;
        s.move_to(to, c.safe_z_mm)?;
        s.expect(Command::Yaw { deg: action.destination.psi })?;
        s.move_to(to, depth)?;
        let released = s.expect(Command::Open { width_mm: open_width })?;
        s.move_to(to, c.safe_z_mm)?;
        if released.grasped {
            return Err(fail(ActionStatus::CommandRejected, "object still held after OPEN"));
        }
        Ok(to)
    }

    /// Lateral sweep through the footprint at the action depth.
    fn knockdown<L: RobotLink>(&self, s: &mut Session<'_, L>, action: &PickPlaceAction) -> Result<(), Failure> {
        let c = &self.config;
        let reach = action.source.width_mm.unwrap_or(0.0) / 2.0 + c.knock_margin_mm;
        let center = action.source.center;
        let start = center - Point::new(reach, 0.0);
        let end = center + Point::new(reach, 0.0);
        let yaw = s.send(Command::Status)?.pose.yaw;
        for (p, z) in [(start, c.safe_z_mm), (start, action.depth_mm), (end, action.depth_mm), (end, c.safe_z_mm)] {
            self.check_pose(p, z, yaw)?;
        }
        s.move_to(start, c.safe_z_mm)?;
        s.move_to(start, action.depth_mm)?;
        s.move_to(end, action.depth_mm)?;
        s.move_to(end, c.safe_z_mm)?;
        Ok(())
    }

    /// Re-identifies the object under its laying label near its old position.
    fn rescan<S: SceneSource>(&self, action: &PickPlaceAction, scenes: &mut S) -> Result<GraspPlan, Failure> {
        let scene = scenes.rescan().map_err(|e| fail(ActionStatus::RescanFailed, e))?;
        let calibration = self
            .calibration
            .ok_or_else(|| fail(ActionStatus::RescanFailed, "no calibration for rescanned scenes"))?;
        let map = calibration
            .map_at(self.config.camera_height_mm)
            .map_err(|e| fail(ActionStatus::RescanFailed, format!("{e}")))?;
        scene
            .objects
            .iter()
            .filter(|o| self.config.canonical(o.label()) == action.label && !self.config.is_standing(o.label()))
            .filter_map(|o| o.grasp.as_ref())
            .map(|g| grasp_to_world(g, &map, action.depth_mm))
            .map(|g| (g.center.distance(action.source.center), g))
            .filter(|(d, _)| *d <= self.config.rescan_radius_mm)
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, mut g)| {
                g.label = action.label.clone();
                g
            })
            .ok_or_else(|| {
                fail(
                    ActionStatus::RescanFailed,
                    format!("no {} within {} mm of the knock-over point", action.label, self.config.rescan_radius_mm),
                )
            })
    }
}
