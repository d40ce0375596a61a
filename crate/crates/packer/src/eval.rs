//! Grasp-success harness: randomized single-object pick-and-place episodes
//! against the in-process simulator, with perception noise injected by
//! jittering each object's footprint before it is rasterized into a mask.

use std::cell::RefCell;
use std::fmt::Write as _;
use std::rc::Rc;

use packer_core::calibration::{fit_calibration, CalibrationModel, PlaneMap};
use packer_core::executor::{ActionStatus, Executor};
use packer_core::kinematics::DeltaGeometry;
use packer_core::link::LocalLink;
use packer_core::perception::{build_scene, BBox, Detection, Scene};
use packer_core::planner::{plan_pack, ActionKind, LabelConfig, PackSpec, Slot, PACK_LABEL};
use packer_core::sim::{ObjectState, SimConfig, SimObject, SimRobot};
use packer_core::{normalize_line_angle, Mask, Point, Polygon};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Gaussian perception errors, standard deviations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub center_px: f64,
    pub psi_deg: f64,
    pub width_px: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            center_px: 2.0,
            psi_deg: 5.0,
            width_px: 2.0,
        }
    }
}

impl NoiseModel {
    pub fn none() -> Self {
        Self {
            center_px: 0.0,
            psi_deg: 0.0,
            width_px: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// Short side `width`, long side `length`.
    Box,
    /// Near-round outline with axes `width` and `length`; its grasp
    /// direction does not matter.
    Ellipse,
}

/// Physical stand-in for one class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Physical {
    pub label: &'static str,
    pub width_mm: f64,
    pub length_mm: f64,
    pub shape: Shape,
    /// Starts upright; seen from above as a disc of diameter `width_mm`.
    pub standing: bool,
    pub graspable: bool,
}

const fn physical(label: &'static str, width_mm: f64, length_mm: f64, shape: Shape, standing: bool, graspable: bool) -> Physical {
    Physical {
        label,
        width_mm,
        length_mm,
        shape,
        standing,
        graspable,
    }
}

/// Catering classes with plausible sizes. Teabags are too flat for the
/// fingers to hold and are ungraspable in the simulator.
pub const CATALOG: [Physical; 18] = [
    physical("banana", 36.0, 150.0, Shape::Box, false, true),
    physical("biscuit", 45.0, 90.0, Shape::Box, false, true),
    physical("cake", 60.0, 95.0, Shape::Box, false, true),
    physical("cup(laying)", 62.0, 90.0, Shape::Box, false, true),
    physical("cup(standing)", 62.0, 90.0, Shape::Box, true, true),
    physical("fork", 22.0, 150.0, Shape::Box, false, true),
    physical("juice(laying)", 40.0, 95.0, Shape::Box, false, true),
    physical("juice(standing)", 40.0, 95.0, Shape::Box, true, true),
    physical("knife", 18.0, 160.0, Shape::Box, false, true),
    physical("nescafe", 25.0, 110.0, Shape::Box, false, true),
    physical("nescafe(square)", 50.0, 75.0, Shape::Box, false, true),
    physical("pack", 150.0, 200.0, Shape::Box, false, false),
    physical("rani(laying)", 55.0, 120.0, Shape::Box, false, true),
    physical("rani(standing)", 55.0, 120.0, Shape::Box, true, true),
    physical("spoon", 30.0, 150.0, Shape::Box, false, true),
    physical("straw", 8.0, 140.0, Shape::Box, false, true),
    physical("tangerine", 54.0, 54.0, Shape::Ellipse, false, true),
    physical("teabag", 50.0, 65.0, Shape::Box, false, false),
];

pub fn catalog_entry(label: &str) -> Option<&'static Physical> {
    CATALOG.iter().find(|p| p.label == label)
}

const IMAGE_W: usize = 640;
const IMAGE_H: usize = 480;
const DETECTION_CONFIDENCE: f64 = 0.9;
/// Objects are dropped uniformly in this disc (world mm).
const DROP_CENTER: Point = Point::new(-30.0, 0.0);
const DROP_RADIUS_MM: f64 = 40.0;
/// Container in the pack image and the single slot inside it (pixels).
const PACK_BBOX: [f64; 4] = [440.0, 160.0, 600.0, 320.0];
const SLOT_CENTER: Point = Point::new(80.0, 80.0);

/// Camera looking straight down at the image centre, 0.5 mm/px at 500 mm,
/// image y pointing along world −y.
pub fn synthetic_calibration() -> CalibrationModel {
    let plane = |h: f64| {
        let s = 0.5 * h / 500.0;
        PlaneMap {
            height_mm: h,
            linear: [[s, 0.0], [0.0, -s]],
            offset: [-s * IMAGE_W as f64 / 2.0, s * IMAGE_H as f64 / 2.0],
            rms_residual_mm: 0.0,
        }
    };
    fit_calibration(vec![plane(300.0), plane(700.0)]).expect("synthetic planes are valid")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub label: String,
    pub trials: usize,
    pub detected: usize,
    /// `None` for classes that are never picked.
    pub grasped: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
}

fn percent(hits: usize, trials: usize) -> f64 {
    if trials == 0 {
        0.0
    } else {
        100.0 * hits as f64 / trials as f64
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// One decimal, rounded down.
fn truncated(v: f64) -> String {
    format!("{:.1}", (v * 10.0 + 1e-9).floor() / 10.0)
}

impl EvalReport {
    /// Mean per-row detection rate in percent.
    pub fn detected_average(&self) -> f64 {
        mean(self.rows.iter().map(|r| percent(r.detected, r.trials)))
    }

    /// Mean per-row grasp rate in percent over rows that are picked.
    pub fn grasped_average(&self) -> f64 {
        mean(self.rows.iter().filter_map(|r| r.grasped.map(|g| percent(g, r.trials))))
    }

    pub fn row(&self, label: &str) -> Option<&EvalRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    /// label / detected / physical grasping table with an average row.
    pub fn render(&self) -> String {
        let width = self.rows.iter().map(|r| r.label.len()).max().unwrap_or(0).max("Average(%)".len());
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  {:>8}  {:>17}", "label", "detected", "physical grasping");
        for r in &self.rows {
            let grasped = r.grasped.map_or_else(|| "-".to_string(), |g| format!("{g}/{}", r.trials));
            let _ = writeln!(out, "{:<width$}  {:>8}  {:>17}", r.label, format!("{}/{}", r.detected, r.trials), grasped);
        }
        let _ = writeln!(
            out,
            "{:<width$}  {:>8}  {:>17}",
            "Average(%)",
            truncated(self.detected_average()),
            truncated(self.grasped_average())
        );
        out
    }
}

/// Everything an episode needs besides its random stream.
pub struct Harness<'a> {
    pub config: &'a LabelConfig,
    pub geometry: DeltaGeometry,
    pub sim: SimConfig,
    pub noise: NoiseModel,
    pub calibration: CalibrationModel,
}

impl<'a> Harness<'a> {
    pub fn new(config: &'a LabelConfig, noise: NoiseModel) -> Self {
        Self {
            config,
            geometry: DeltaGeometry::default(),
            sim: SimConfig::default(),
            noise,
            calibration: synthetic_calibration(),
        }
    }

    fn map(&self) -> PlaneMap {
        self.calibration
            .map_at(self.config.camera_height_mm)
            .expect("camera height inside the synthetic calibration")
    }

    /// Rows for every configured label with a physical stand-in, in label
    /// order. Each row draws its own seed from the master stream, so the
    /// table is a pure function of `seed`.
    pub fn run(&self, trials: usize, seed: u64) -> EvalReport {
        let mut master = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        for label in self.config.labels.keys() {
            let Some(physical) = catalog_entry(label) else {
                log::info!("no physical model for {label}; skipped");
                continue;
            };
            let mut rng = ChaCha8Rng::seed_from_u64(master.random());
            let mut row = EvalRow {
                label: label.clone(),
                trials,
                detected: 0,
                grasped: (label != PACK_LABEL).then_some(0),
            };
            for _ in 0..trials {
                let (detected, grasped) = self.episode(physical, &mut rng);
                row.detected += usize::from(detected);
                if let Some(g) = row.grasped.as_mut() {
                    *g += usize::from(grasped);
                }
            }
            rows.push(row);
        }
        EvalReport { rows }
    }

    fn sample(&self, sigma: f64, rng: &mut ChaCha8Rng) -> f64 {
        if sigma > 0.0 {
            Normal::new(0.0, sigma).expect("finite sigma").sample(rng)
        } else {
            0.0
        }
    }

    /// Footprint of a world object in pixels, with perception noise applied.
    fn footprint(&self, object: &SimObject, physical: &Physical, rng: &mut ChaCha8Rng) -> Polygon {
        let map = self.map();
        let px_per_mm = 1.0 / map.mm_per_px();
        let c = map.invert(object.center);
        let dir = map.invert(object.center + Point::from_angle(object.psi)) - c;
        let psi = dir.y.atan2(dir.x).to_degrees();
        let center = c + Point::new(self.sample(self.noise.center_px, rng), self.sample(self.noise.center_px, rng));
        let psi = psi + self.sample(self.noise.psi_deg, rng);
        let width = (object.width_mm * px_per_mm + self.sample(self.noise.width_px, rng)).max(1.0);
        let length = physical.length_mm * px_per_mm;
        let (u, v) = (Point::from_angle(psi), Point::from_angle(psi + 90.0));
        let vertices = if object.state == ObjectState::Standing {
            ellipse(center, u, v, width, width)
        } else if physical.shape == Shape::Ellipse {
            ellipse(center, u, v, width, length)
        } else {
            let (a, b) = (u * (width / 2.0), v * (length / 2.0));
            vec![center + a + b, center - a + b, center - a - b, center + a - b]
        };
        Polygon::new(vertices).expect("footprint is a valid polygon")
    }

    /// Noisy detections and masks for the robot's current objects.
    fn perceive(&self, robot: &SimRobot, rng: &mut ChaCha8Rng) -> (Vec<Detection>, Vec<Mask>) {
        let mut detections = Vec::new();
        let mut masks = Vec::new();
        for object in robot.objects() {
            let label = if object.state == ObjectState::Laying {
                self.config.canonical(&object.label).to_string()
            } else {
                object.label.clone()
            };
            let physical = catalog_entry(&object.label).expect("episode objects come from the catalog");
            let polygon = self.footprint(object, physical, rng);
            let mask = Mask::from_polygon(IMAGE_W, IMAGE_H, &polygon);
            let Some(bbox) = mask_bbox(&mask) else {
                continue;
            };
            detections.push(Detection::new(label, DETECTION_CONFIDENCE, bbox));
            masks.push(mask);
        }
        (detections, masks)
    }

    fn scene(&self, robot: &SimRobot, rng: &mut ChaCha8Rng) -> Scene {
        let (detections, masks) = self.perceive(robot, rng);
        build_scene(&detections, &masks)
    }

    /// Drops one object, perceives it, plans a single-slot pack and runs it.
    /// Returns (detected, grasped and placed).
    pub fn episode(&self, physical: &Physical, rng: &mut ChaCha8Rng) -> (bool, bool) {
        let map = self.map();
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        let radius = DROP_RADIUS_MM * rng.random::<f64>().sqrt();
        let center = DROP_CENTER + Point::new(radius * angle.cos(), radius * angle.sin());
        let psi = normalize_line_angle(rng.random_range(-90.0..90.0));
        let depth_mm = self
            .config
            .label(self.config.canonical(physical.label))
            .map_or(-470.0, |s| s.depth_mm);
        let object = SimObject {
            label: physical.label.to_string(),
            center,
            psi,
            width_mm: physical.width_mm,
            depth_mm,
            state: if physical.standing { ObjectState::Standing } else { ObjectState::Laying },
            graspable: physical.graspable,
            round: physical.shape == Shape::Ellipse,
        };
        let robot = SimRobot::new(self.geometry, self.sim, vec![object], rng.random()).expect("catalog objects are valid");
        let floor = self.scene(&robot, rng);
        let detected = floor
            .objects
            .iter()
            .any(|o| o.label() == physical.label && o.grasp.is_some() && o.failure.is_none());
        if physical.label == PACK_LABEL || !detected {
            return (detected, false);
        }

        let spec = PackSpec {
            container: Detection::new(PACK_LABEL, DETECTION_CONFIDENCE, BBox::from(PACK_BBOX)),
            slots: vec![Slot {
                label: self.config.canonical(physical.label).to_string(),
                center: SLOT_CENTER,
                psi: 0.0,
            }],
        };
        let Ok(plan) = plan_pack(&spec, &floor, self.config, &self.calibration) else {
            return (detected, false);
        };
        let robot = Rc::new(RefCell::new(robot));
        let mut link = LocalLink::shared(Rc::clone(&robot));
        let rescan_rng = RefCell::new(ChaCha8Rng::seed_from_u64(rng.random()));
        let mut rescan = || Ok(self.scene(&robot.borrow(), &mut rescan_rng.borrow_mut()));
        let executor = Executor {
            geometry: &self.geometry,
            calibration: Some(&self.calibration),
            config: self.config,
        };
        let report = executor.execute(&plan, &mut link, &mut rescan);
        let destination = map.apply(spec.container.bbox.origin() + SLOT_CENTER);
        let placed = plan
            .actions
            .iter()
            .zip(&report.outcomes)
            .any(|(a, o)| a.kind == ActionKind::PickPlace && o.status == ActionStatus::Succeeded)
            && robot.borrow().objects()[0].center.distance(destination) <= self.config.placement_tolerance_mm;
        (detected, placed)
    }
}

fn ellipse(center: Point, u: Point, v: Point, a: f64, b: f64) -> Vec<Point> {
    (0..48)
        .map(|k| {
            let t = std::f64::consts::TAU * k as f64 / 48.0;
            center + u * (a / 2.0 * t.cos()) + v * (b / 2.0 * t.sin())
        })
        .collect()
}

fn mask_bbox(mask: &Mask) -> Option<BBox> {
    let mut bounds: Option<(usize, usize, usize, usize)> = None;
    for y in 0..mask.height {
        for x in 0..mask.width {
            if mask.get(x, y) {
                let b = bounds.get_or_insert((x, y, x, y));
                *b = (b.0.min(x), b.1.min(y), b.2.max(x), b.3.max(y));
            }
        }
    }
    bounds.map(|(x0, y0, x1, y1)| BBox::new(x0 as f64, y0 as f64, (x1 + 1) as f64, (y1 + 1) as f64))
}

/// Runs the harness with the default robot and simulator.
pub fn evaluate(config: &LabelConfig, trials: usize, noise: NoiseModel, seed: u64) -> EvalReport {
    Harness::new(config, noise).run(trials, seed)
}
