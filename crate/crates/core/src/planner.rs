//! Pack specifications, label configuration and pick-and-place planning.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::calibration::{CalibrationError, CalibrationModel, PlaneMap};
use crate::geometry::{GraspPlan, Point};
use crate::kinematics::{in_workspace, DeltaGeometry, Pose};
use crate::perception::{Detection, Scene, SceneObject};
use crate::protocol::MAX_GRIP_WIDTH_MM;

pub const PACK_LABEL: &str = "pack";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSpec {
    /// Gripper z at which the fingers close.
    pub depth_mm: f64,
    /// Whether the planner should ever pick this label.
    #[serde(default = "yes")]
    pub graspable: bool,
    /// Laying label a standing object becomes once knocked over.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub laying_alias: Option<String>,
    /// Lower picks first.
    #[serde(default)]
    pub priority: i32,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LabelConfig {
    /// Camera-to-plane height used for pixel → world conversion.
    pub camera_height_mm: f64,
    pub safe_z_mm: f64,
    /// Added to the object width when opening before descent.
    pub width_margin_mm: f64,
    /// Subtracted from the object width when gripping.
    pub grip_squeeze_mm: f64,
    pub placement_tolerance_mm: f64,
    /// Extra travel beyond the footprint on each side of a knock-over sweep.
    pub knock_margin_mm: f64,
    /// How far a knocked-over object may have moved and still be re-identified.
    pub rescan_radius_mm: f64,
    pub labels: BTreeMap<String, LabelSpec>,
}

impl Default for LabelConfig {
    fn default() -> Self {
        Self {
            camera_height_mm: 500.0,
            safe_z_mm: -380.0,
            width_margin_mm: 8.0,
            grip_squeeze_mm: 5.0,
            placement_tolerance_mm: 5.0,
            knock_margin_mm: 15.0,
            rescan_radius_mm: 40.0,
            labels: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("label {label}: alias {alias} is not a configured label")]
    UnknownAlias { label: String, alias: String },
    #[error("label {label}: depth {depth_mm} mm is outside the robot workspace")]
    DepthOutOfReach { label: String, depth_mm: f64 },
    #[error("safe z {0} mm is outside the robot workspace")]
    SafeZOutOfReach(f64),
    #[error("{0} must be finite and non-negative")]
    InvalidValue(&'static str),
}

impl LabelConfig {
    /// Catering-pack classes with nominal depths for the default robot.
    pub fn default_catering() -> Self {
        let rows: [(&str, f64, bool, Option<&str>, i32); 19] = [
            ("banana", -465.0, true, None, 20),
            ("biscuit", -470.0, true, None, 30),
            ("cake", -460.0, true, None, 30),
            ("cup(laying)", -455.0, true, None, 10),
            ("cup(standing)", -430.0, true, Some("cup(laying)"), 10),
            ("fork", -476.0, true, None, 60),
            ("juice(laying)", -460.0, true, None, 10),
            ("juice(standing)", -430.0, true, Some("juice(laying)"), 10),
            ("knife", -476.0, true, None, 60),
            ("logo", -478.0, false, None, 90),
            ("nescafe", -475.0, true, None, 40),
            ("nescafe(square)", -474.0, true, None, 40),
            ("pack", -460.0, false, None, 90),
            ("rani(laying)", -460.0, true, None, 10),
            ("rani(standing)", -430.0, true, Some("rani(laying)"), 10),
            ("spoon", -476.0, true, None, 60),
            ("straw", -476.0, true, None, 60),
            ("tangerine", -460.0, true, None, 20),
            ("teabag", -476.0, true, None, 50),
        ];
        let labels = rows
            .iter()
            .map(|&(name, depth_mm, graspable, alias, priority)| {
                (
                    name.to_string(),
                    LabelSpec {
                        depth_mm,
                        graspable,
                        laying_alias: alias.map(str::to_string),
                        priority,
                    },
                )
            })
            .collect();
        Self {
            labels,
            ..Self::default()
        }
    }

    pub fn label(&self, label: &str) -> Option<&LabelSpec> {
        self.labels.get(label)
    }

    /// The laying label for standing labels, the label itself otherwise.
    pub fn canonical<'a>(&'a self, label: &'a str) -> &'a str {
        self.labels
            .get(label)
            .and_then(|s| s.laying_alias.as_deref())
            .unwrap_or(label)
    }

    pub fn is_standing(&self, label: &str) -> bool {
        self.labels.get(label).is_some_and(|s| s.laying_alias.is_some())
    }

    pub fn validate(&self, geometry: Option<&DeltaGeometry>) -> Result<(), ConfigError> {
        let values = [
            (self.width_margin_mm, "width_margin_mm"),
            (self.grip_squeeze_mm, "grip_squeeze_mm"),
            (self.placement_tolerance_mm, "placement_tolerance_mm"),
            (self.knock_margin_mm, "knock_margin_mm"),
            (self.rescan_radius_mm, "rescan_radius_mm"),
        ];
        for (v, name) in values {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ConfigError::InvalidValue(name));
            }
        }
        if !self.camera_height_mm.is_finite() {
            return Err(ConfigError::InvalidValue("camera_height_mm"));
        }
        for (label, spec) in &self.labels {
            if let Some(alias) = &spec.laying_alias {
                if !self.labels.contains_key(alias) {
                    return Err(ConfigError::UnknownAlias {
                        label: label.clone(),
                        alias: alias.clone(),
                    });
                }
            }
            let reachable = spec.depth_mm.is_finite()
                && geometry.is_none_or(|g| in_workspace(g, &Pose::new(0.0, 0.0, spec.depth_mm, 0.0)));
            if !reachable {
                return Err(ConfigError::DepthOutOfReach {
                    label: label.clone(),
                    depth_mm: spec.depth_mm,
                });
            }
        }
        if let Some(g) = geometry {
            if !in_workspace(g, &Pose::new(0.0, 0.0, self.safe_z_mm, 0.0)) {
                return Err(ConfigError::SafeZOutOfReach(self.safe_z_mm));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    pub label: String,
    /// Pixels, relative to the container bbox origin.
    pub center: Point,
    pub psi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackSpec {
    pub container: Detection,
    pub slots: Vec<Slot>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PackSpecError {
    #[error("scene has no pack detection")]
    NoPackFound,
    #[error("scene has {0} pack detections")]
    MultiplePacks(usize),
}

fn is_pack(label: &str) -> bool {
    label.eq_ignore_ascii_case(PACK_LABEL)
}

/// Container from the single pack detection; every other object whose center
/// lies inside the container becomes a slot.
pub fn extract_pack_spec(scene: &Scene) -> Result<PackSpec, PackSpecError> {
    let packs: Vec<&SceneObject> = scene.objects.iter().filter(|o| is_pack(o.label())).collect();
    let container = match packs.as_slice() {
        [] => return Err(PackSpecError::NoPackFound),
        [one] => one.detection.clone(),
        many => return Err(PackSpecError::MultiplePacks(many.len())),
    };
    let origin = container.bbox.origin();
    let slots = scene
        .objects
        .iter()
        .filter(|o| !is_pack(o.label()) && container.bbox.contains(o.center()))
        .map(|o| Slot {
            label: o.label().to_string(),
            center: o.center() - origin,
            psi: o.psi(),
        })
        .collect();
    Ok(PackSpec { container, slots })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ActionKind {
    PickPlace,
    Knockdown,
    Rescan,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacePose {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PickPlaceAction {
    pub kind: ActionKind,
    /// Index of the source object in the floor scene.
    pub object_id: usize,
    pub slot: usize,
    pub label: String,
    pub confidence: f64,
    /// World millimetres and degrees.
    pub source: GraspPlan,
    pub destination: PlacePose,
    pub depth_mm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MissingReason {
    /// Label excluded from picking by configuration.
    Excluded,
    UnknownLabel,
    NoMatch,
    WidthExceedsGripper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingSlot {
    pub slot: usize,
    pub label: String,
    pub reason: MissingReason,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Plan {
    pub actions: Vec<PickPlaceAction>,
    pub missing: Vec<MissingSlot>,
}

impl Plan {
    /// Missing slots other than configured exclusions.
    pub fn has_shortfall(&self) -> bool {
        self.missing.iter().any(|m| m.reason != MissingReason::Excluded)
    }
}

/// Pixel-space grasp mapped into the world frame.
pub fn grasp_to_world(plan: &GraspPlan, map: &PlaneMap, depth_mm: f64) -> GraspPlan {
    let p1 = map.apply(plan.p1);
    let p2 = map.apply(plan.p2);
    GraspPlan {
        label: plan.label.clone(),
        p1,
        p2,
        center: p1.midpoint(p2),
        psi: map.map_angle(plan.psi),
        width_px: plan.width_px,
        width_mm: Some(plan.width_px * map.mm_per_px()),
        depth_mm: Some(depth_mm),
    }
}

/// World grasp for a scene object, falling back to its bbox center, ψ = 0 and
/// the shorter bbox side when no grasp could be computed.
pub fn object_to_world(object: &SceneObject, map: &PlaneMap, depth_mm: f64) -> GraspPlan {
    match &object.grasp {
        Some(g) => grasp_to_world(g, map, depth_mm),
        None => {
            let b = &object.detection.bbox;
            let half = b.width().min(b.height()) / 2.0;
            let c = b.center();
            let px = GraspPlan {
                label: object.label().to_string(),
                p1: Point::new(c.x + half, c.y),
                p2: Point::new(c.x - half, c.y),
                center: c,
                psi: 0.0,
                width_px: 2.0 * half,
                width_mm: None,
                depth_mm: None,
            };
            grasp_to_world(&px, map, depth_mm)
        }
    }
}

struct Group {
    priority: i32,
    confidence: f64,
    slot: usize,
    actions: Vec<PickPlaceAction>,
}

/// Matches slots to floor objects and emits actions.
///
/// Each slot takes the highest-confidence unused floor object whose label
/// matches after mapping standing labels to their laying alias. Standing
/// matches get KNOCKDOWN and RESCAN ahead of their PICK_PLACE. Groups are
/// ordered by label priority, then confidence, then slot order.
pub fn plan_pack(
    spec: &PackSpec,
    floor: &Scene,
    config: &LabelConfig,
    calibration: &CalibrationModel,
) -> Result<Plan, CalibrationError> {
    let map = calibration.map_at(config.camera_height_mm)?;
    let floor_pack = floor
        .objects
        .iter()
        .filter(|o| is_pack(o.label()))
        .max_by(|a, b| a.detection.confidence.total_cmp(&b.detection.confidence));
    let (origin, scale) = match floor_pack {
        Some(p) => {
            let (f, s) = (&p.detection.bbox, &spec.container.bbox);
            (f.origin(), Point::new(f.width() / s.width(), f.height() / s.height()))
        }
        None => (spec.container.bbox.origin(), Point::new(1.0, 1.0)),
    };

    let mut used = alloc::vec![false; floor.objects.len()];
    let mut groups = Vec::new();
    let mut missing = Vec::new();
    for (slot_index, slot) in spec.slots.iter().enumerate() {
        let mut miss = |reason| {
            missing.push(MissingSlot {
                slot: slot_index,
                label: slot.label.clone(),
                reason,
            })
        };
        let Some(slot_spec) = config.label(&slot.label) else {
            miss(MissingReason::UnknownLabel);
            continue;
        };
        if !slot_spec.graspable {
            miss(MissingReason::Excluded);
            continue;
        }
        let wanted = config.canonical(&slot.label);
        let candidate = floor
            .objects
            .iter()
            .enumerate()
            .filter(|(i, o)| {
                !used[*i]
                    && config.label(o.label()).is_some()
                    && config.canonical(o.label()) == wanted
                    && (o.grasp.is_some() || config.is_standing(o.label()))
            })
            .fold(None, |best: Option<(usize, &SceneObject)>, (i, o)| match best {
                Some((_, b)) if b.detection.confidence >= o.detection.confidence => best,
                _ => Some((i, o)),
            });
        let Some((object_id, object)) = candidate else {
            miss(MissingReason::NoMatch);
            continue;
        };

        let standing = config.is_standing(object.label());
        let pick_label = wanted.to_string();
        let Some(pick_spec) = config.label(&pick_label) else {
            miss(MissingReason::UnknownLabel);
            continue;
        };
        let object_spec = config.label(object.label()).expect("filtered on known labels");
        let source = object_to_world(object, &map, object_spec.depth_mm);
        if !standing && source.width_mm.is_some_and(|w| w > MAX_GRIP_WIDTH_MM) {
            miss(MissingReason::WidthExceedsGripper);
            continue;
        }
        used[object_id] = true;

        let dest_px = Point::new(origin.x + slot.center.x * scale.x, origin.y + slot.center.y * scale.y);
        let dest = map.apply(dest_px);
        let destination = PlacePose {
            x: dest.x,
            y: dest.y,
            psi: map.map_angle(slot.psi),
        };
        let action = |kind, label: &str, depth_mm| PickPlaceAction {
            kind,
            object_id,
            slot: slot_index,
            label: label.to_string(),
            confidence: object.detection.confidence,
            source: source.clone(),
            destination,
            depth_mm,
        };
        let mut actions = Vec::new();
        if standing {
            actions.push(action(ActionKind::Knockdown, object.label(), object_spec.depth_mm));
            actions.push(action(ActionKind::Rescan, &pick_label, pick_spec.depth_mm));
        }
        actions.push(action(ActionKind::PickPlace, &pick_label, pick_spec.depth_mm));
        groups.push(Group {
            priority: pick_spec.priority,
            confidence: object.detection.confidence,
            slot: slot_index,
            actions,
        });
    }
    groups.sort_by(|a, b| {
        a.priority
            .cmp(&b.priority)
            .then(b.confidence.total_cmp(&a.confidence))
            .then(a.slot.cmp(&b.slot))
    });
    Ok(Plan {
        actions: groups.into_iter().flat_map(|g| g.actions).collect(),
        missing,
    })
}
