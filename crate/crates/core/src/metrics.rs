//! Detection metrics: precision, recall and all-points-interpolated AP per
//! label, with a plain-text report.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::perception::Detection;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageDetections {
    pub image_id: String,
    pub detections: Vec<Detection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub map50: f64,
    pub truths: usize,
    pub predictions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionMetrics {
    /// In order of first appearance in the ground truth.
    pub labels: Vec<LabelMetrics>,
    pub precision: f64,
    pub recall: f64,
    pub map50: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("ground truth contains no boxes")]
    EmptyGroundTruth,
    #[error("IoU threshold {0} outside (0, 1)")]
    InvalidThreshold(f64),
}

/// Area under the precision envelope of a ranked hit list.
pub fn average_precision(hits: &[bool], truths: usize) -> f64 {
    if truths == 0 {
        return 0.0;
    }
    let mut recall = vec![0.0];
    let mut precision = vec![0.0];
    let mut tp = 0usize;
    for (rank, &hit) in hits.iter().enumerate() {
        tp += usize::from(hit);
        recall.push(tp as f64 / truths as f64);
        precision.push(tp as f64 / (rank + 1) as f64);
    }
    recall.push(1.0);
    precision.push(0.0);
    for i in (0..precision.len() - 1).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    (1..recall.len())
        .map(|i| (recall[i] - recall[i - 1]) * precision[i])
        .sum()
}

struct Ranked {
    confidence: f64,
    order: usize,
    hit: bool,
}

/// Greedy matching in descending confidence (stable on input order): each
/// prediction takes the unmatched same-label truth box of highest IoU, if
/// that IoU reaches the threshold.
pub fn evaluate_detections(
    predictions: &[ImageDetections],
    ground_truth: &[ImageDetections],
    iou_threshold: f64,
) -> Result<DetectionMetrics, MetricsError> {
    if !(iou_threshold > 0.0 && iou_threshold < 1.0) {
        return Err(MetricsError::InvalidThreshold(iou_threshold));
    }
    let mut labels: Vec<String> = Vec::new();
    for image in ground_truth {
        for d in &image.detections {
            if !labels.contains(&d.label) {
                labels.push(d.label.clone());
            }
        }
    }
    if labels.is_empty() {
        return Err(MetricsError::EmptyGroundTruth);
    }

    let mut rows = Vec::with_capacity(labels.len());
    for label in &labels {
        let mut ranked: Vec<Ranked> = Vec::new();
        let mut truths = 0usize;
        let mut order = 0usize;
        for image in ground_truth {
            let gt: Vec<&Detection> = image.detections.iter().filter(|d| &d.label == label).collect();
            truths += gt.len();
            let mut preds: Vec<&Detection> = predictions
                .iter()
                .filter(|p| p.image_id == image.image_id)
                .flat_map(|p| p.detections.iter())
                .filter(|d| &d.label == label)
                .collect();
            preds.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
            let mut taken = vec![false; gt.len()];
            for p in preds {
                let best = gt
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| !taken[*j])
                    .map(|(j, g)| (j, p.bbox.intersection_over_union(&g.bbox)))
                    .filter(|&(_, iou)| iou >= iou_threshold)
                    .fold(None, |acc: Option<(usize, f64)>, c| match acc {
                        Some(a) if a.1 >= c.1 => Some(a),
                        _ => Some(c),
                    });
                if let Some((j, _)) = best {
                    taken[j] = true;
                }
                ranked.push(Ranked {
                    confidence: p.confidence,
                    order,
                    hit: best.is_some(),
                });
                order += 1;
            }
        }
        // Predictions on images absent from the ground truth are false positives.
        for p in predictions {
            if ground_truth.iter().any(|g| g.image_id == p.image_id) {
                continue;
            }
            for d in p.detections.iter().filter(|d| &d.label == label) {
                ranked.push(Ranked {
                    confidence: d.confidence,
                    order,
                    hit: false,
                });
                order += 1;
            }
        }
        ranked.sort_by(|a, b| b.confidence.total_cmp(&a.confidence).then(a.order.cmp(&b.order)));
        let hits: Vec<bool> = ranked.iter().map(|r| r.hit).collect();
        let tp = hits.iter().filter(|&&h| h).count();
        rows.push(LabelMetrics {
            label: label.clone(),
            precision: if hits.is_empty() { 0.0 } else { tp as f64 / hits.len() as f64 },
            recall: if truths == 0 { 0.0 } else { tp as f64 / truths as f64 },
            map50: average_precision(&hits, truths),
            truths,
            predictions: hits.len(),
        });
    }

    let n = rows.len() as f64;
    let mean = |f: fn(&LabelMetrics) -> f64| rows.iter().map(f).sum::<f64>() / n;
    Ok(DetectionMetrics {
        precision: mean(|r| r.precision),
        recall: mean(|r| r.recall),
        map50: mean(|r| r.map50),
        labels: rows,
    })
}

/// One row per label plus an `Average` row, three decimals.
pub fn render_metrics_table(metrics: &DetectionMetrics) -> String {
    let width = metrics
        .labels
        .iter()
        .map(|r| r.label.chars().count())
        .chain([5, 7])
        .max()
        .unwrap_or(7);
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$}  {:>9}  {:>6}  {:>5}", "label", "precision", "recall", "mAP50");
    let mut row = |label: &str, p: f64, r: f64, m: f64| {
        let _ = writeln!(out, "{label:<width$}  {p:>9.3}  {r:>6.3}  {m:>5.3}");
    };
    for r in &metrics.labels {
        row(&r.label, r.precision, r.recall, r.map50);
    }
    row("Average", metrics.precision, metrics.recall, metrics.map50);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::BBox;

    fn det(label: &str, conf: f64, x: f64) -> Detection {
        Detection::new(label, conf, BBox::new(x, 0.0, x + 10.0, 10.0))
    }

    fn image(id: &str, detections: Vec<Detection>) -> ImageDetections {
        ImageDetections {
            image_id: id.into(),
            detections,
        }
    }

    #[test]
    fn perfect_predictions() {
        let truth = vec![
            image("a", vec![det("fork", 1.0, 0.0), det("cake", 1.0, 20.0)]),
            image("b", vec![det("fork", 1.0, 40.0)]),
        ];
        let m = evaluate_detections(&truth, &truth, 0.5).unwrap();
        assert_eq!((m.precision, m.recall, m.map50), (1.0, 1.0, 1.0));
        assert!(m.labels.iter().all(|r| r.precision == 1.0 && r.recall == 1.0 && r.map50 == 1.0));
    }

    #[test]
    fn one_hit_one_false_positive() {
        let truth = vec![image("a", vec![det("cup", 1.0, 0.0), det("cup", 1.0, 50.0)])];
        let pred = vec![image("a", vec![det("cup", 0.9, 0.0), det("cup", 0.8, 100.0)])];
        let m = evaluate_detections(&pred, &truth, 0.5).unwrap();
        let r = &m.labels[0];
        assert_eq!((r.precision, r.recall, r.map50), (0.5, 0.5, 0.5));
    }

    #[test]
    fn interpolated_envelope() {
        // Ranking F T T over 2 truths: points (0,0) (0.5,0.5) (1,2/3) → AP 2/3.
        let ap = average_precision(&[false, true, true], 2);
        assert!((ap - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(average_precision(&[], 3), 0.0);
    }

    #[test]
    fn label_mismatch_is_a_miss() {
        let truth = vec![image("a", vec![det("fork", 1.0, 0.0)])];
        let pred = vec![image("a", vec![det("spoon", 0.9, 0.0)])];
        let m = evaluate_detections(&pred, &truth, 0.5).unwrap();
        assert_eq!(m.labels.len(), 1);
        assert_eq!((m.labels[0].precision, m.labels[0].recall), (0.0, 0.0));
    }

    #[test]
    fn errors() {
        assert_eq!(evaluate_detections(&[], &[], 0.5), Err(MetricsError::EmptyGroundTruth));
        let truth = vec![image("a", vec![det("fork", 1.0, 0.0)])];
        assert_eq!(evaluate_detections(&[], &truth, 1.0), Err(MetricsError::InvalidThreshold(1.0)));
    }

    #[test]
    fn table_layout() {
        let m = DetectionMetrics {
            labels: vec![LabelMetrics {
                label: "banana".into(),
                precision: 1.0,
                recall: 0.988,
                map50: 0.995,
                truths: 1,
                predictions: 1,
            }],
            precision: 0.911,
            recall: 0.904,
            map50: 0.932,
        };
        let t = render_metrics_table(&m);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], "label    precision  recall  mAP50");
        assert_eq!(lines[1], "banana       1.000   0.988  0.995");
        assert_eq!(lines[2], "Average      0.911   0.904  0.932");
    }
}
