//! Detections, mask selection and scene assembly.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::geometry::{mask_to_polygon, plan_grasp, GeometryError, GraspPlan, Point, Polygon, RotatedRect};
use crate::mask::Mask;

/// Axis-aligned box in pixels. Serialized as `[x_min, y_min, x_max, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl From<[f64; 4]> for BBox {
    fn from([x_min, y_min, x_max, y_max]: [f64; 4]) -> Self {
        Self { x_min, y_min, x_max, y_max }
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x_min, b.y_min, b.x_max, b.y_max]
    }
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Self { x_min, y_min, x_max, y_max }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn center(&self) -> Point {
        Point::new((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)
    }

    pub fn origin(&self) -> Point {
        Point::new(self.x_min, self.y_min)
    }

    /// Closed containment.
    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    pub fn intersection_over_union(&self, other: &BBox) -> f64 {
        let w = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        let h = self.y_max.min(other.y_max) - self.y_min.max(other.y_min);
        if w <= 0.0 || h <= 0.0 {
            return 0.0;
        }
        let inter = w * h;
        inter / (self.area() + other.area() - inter)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub label: String,
    pub confidence: f64,
    pub bbox: BBox,
}

impl Detection {
    pub fn new(label: impl Into<String>, confidence: f64, bbox: BBox) -> Self {
        Self {
            label: label.into(),
            confidence,
            bbox,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.label.is_empty() {
            return Err("empty label".into());
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(format!("confidence {} outside [0, 1]", self.confidence));
        }
        let b = &self.bbox;
        if ![b.x_min, b.y_min, b.x_max, b.y_max].iter().all(|v| v.is_finite()) {
            return Err("non-finite bbox coordinate".into());
        }
        if b.x_min >= b.x_max || b.y_min >= b.y_max {
            return Err(format!("empty bbox {:?}", <[f64; 4]>::from(*b)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DetectionParseError {
    #[error("invalid detection JSON: {0}")]
    Parse(String),
    #[error("detection record {index}: {reason}")]
    Schema { index: usize, reason: String },
}

/// Parses a JSON array of detection records, validating each one.
pub fn parse_detections(text: &str) -> Result<Vec<Detection>, DetectionParseError> {
    let records: Vec<serde_json::Value> =
        serde_json::from_str(text).map_err(|e| DetectionParseError::Parse(format!("{e}")))?;
    records
        .into_iter()
        .enumerate()
        .map(|(index, value)| {
            let det: Detection = serde_json::from_value(value).map_err(|e| DetectionParseError::Schema {
                index,
                reason: format!("{e}"),
            })?;
            det.validate()
                .map_err(|reason| DetectionParseError::Schema { index, reason })?;
            Ok(det)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("no mask has at least half of its foreground inside the box")]
pub struct NoMaskInBox;

/// Foreground pixels of `mask` whose centers lie inside `bbox`.
pub fn pixels_inside(mask: &Mask, bbox: &BBox) -> usize {
    let x0 = (bbox.x_min - 0.5).ceil().max(0.0) as usize;
    let y0 = (bbox.y_min - 0.5).ceil().max(0.0) as usize;
    let x1 = ((bbox.x_max - 0.5).floor() + 1.0).clamp(0.0, mask.width as f64) as usize;
    let y1 = ((bbox.y_max - 0.5).floor() + 1.0).clamp(0.0, mask.height as f64) as usize;
    let mut n = 0;
    for y in y0..y1 {
        for x in x0..x1 {
            n += usize::from(mask.get(x, y));
        }
    }
    n
}

/// Index of the mask with the most foreground inside `bbox`, among masks
/// with at least half of their foreground inside. Ties go to the earlier mask.
pub fn select_mask_for_bbox(masks: &[Mask], bbox: &BBox) -> Result<usize, NoMaskInBox> {
    let mut best: Option<(usize, usize)> = None;
    for (i, m) in masks.iter().enumerate() {
        let inside = pixels_inside(m, bbox);
        if inside == 0 || inside * 2 < m.foreground_count() {
            continue;
        }
        if best.is_none_or(|(_, n)| inside > n) {
            best = Some((i, inside));
        }
    }
    best.map(|(i, _)| i).ok_or(NoMaskInBox)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObjectFailure {
    NoMaskInBox,
    EmptyMask,
    DegenerateGeometry,
    GraspLineMiss,
}

impl From<GeometryError> for ObjectFailure {
    fn from(e: GeometryError) -> Self {
        match e {
            GeometryError::EmptyMask => ObjectFailure::EmptyMask,
            GeometryError::DegenerateInput(_) => ObjectFailure::DegenerateGeometry,
            GeometryError::GraspLineMiss => ObjectFailure::GraspLineMiss,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub detection: Detection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polygon: Option<Polygon>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rect: Option<RotatedRect>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grasp: Option<GraspPlan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<ObjectFailure>,
}

impl SceneObject {
    pub fn label(&self) -> &str {
        &self.detection.label
    }

    /// Grasp center when available, otherwise the bbox center.
    pub fn center(&self) -> Point {
        self.grasp
            .as_ref()
            .map_or_else(|| self.detection.bbox.center(), |g| g.center)
    }

    /// Grasp ψ when available, otherwise 0.
    pub fn psi(&self) -> f64 {
        self.grasp.as_ref().map_or(0.0, |g| g.psi)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Scene {
    pub width: usize,
    pub height: usize,
    pub objects: Vec<SceneObject>,
}

fn analyse(detection: &Detection, masks: &[Mask]) -> SceneObject {
    let mut object = SceneObject {
        detection: detection.clone(),
        mask_index: None,
        polygon: None,
        rect: None,
        grasp: None,
        failure: None,
    };
    let index = match select_mask_for_bbox(masks, &detection.bbox) {
        Ok(i) => i,
        Err(NoMaskInBox) => {
            object.failure = Some(ObjectFailure::NoMaskInBox);
            return object;
        }
    };
    object.mask_index = Some(index);
    let polygon = match mask_to_polygon(&masks[index]) {
        Ok(p) => p,
        Err(e) => {
            object.failure = Some(e.into());
            return object;
        }
    };
    match plan_grasp(&polygon) {
        Ok((rect, plan)) => {
            object.rect = Some(rect);
            object.grasp = Some(plan.with_label(detection.label.clone()));
        }
        Err(e) => object.failure = Some(e.into()),
    }
    object.polygon = Some(polygon);
    object
}

/// Runs mask selection, contour extraction and grasp planning for every
/// detection. Failures are recorded on the object rather than dropped.
pub fn build_scene(detections: &[Detection], masks: &[Mask]) -> Scene {
    let (width, height) = masks.first().map_or((0, 0), |m| (m.width, m.height));
    Scene {
        width,
        height,
        objects: detections.iter().map(|d| analyse(d, masks)).collect(),
    }
}
