use alloc::vec;
use alloc::vec::Vec;

use super::{GeometryError, Point, Polygon};
use crate::mask::Mask;

/// Vertices closer than this to the line through their neighbours are dropped.
pub const PRUNE_TOLERANCE_PX: f64 = 0.5;

/// Outer boundary of the largest 8-connected foreground component.
///
/// The boundary follows pixel edges (vertices sit on pixel corners), so the
/// polygon area equals the pixel count of a hole-free component. Vertices
/// are emitted only where the boundary turns and are then pruned with
/// [`PRUNE_TOLERANCE_PX`].
pub fn mask_to_polygon(mask: &Mask) -> Result<Polygon, GeometryError> {
    let (labels, best) = largest_component(mask).ok_or(GeometryError::EmptyMask)?;
    let w = mask.width as i64;
    let h = mask.height as i64;
    let inside = |x: i64, y: i64| -> bool {
        x >= 0 && y >= 0 && x < w && y < h && labels[(y * w + x) as usize] == best.label
    };

    let start = (best.first.0 as i64, best.first.1 as i64);
    let mut v = start;
    let mut d = (1i64, 0i64);
    let mut ring = vec![Point::new(start.0 as f64, start.1 as f64)];
    v = (v.0 + d.0, v.1 + d.1);

    let limit = 4 * (w + 1) * (h + 1);
    let mut steps = 0;
    while v != start {
        steps += 1;
        if steps > limit {
            return Err(GeometryError::DegenerateInput("boundary trace did not close"));
        }
        // Right of travel on screen is (-dy, dx); foreground is kept there.
        let right = (-d.1, d.0);
        let left = (d.1, -d.0);
        let pixel = |o: (i64, i64)| {
            (
                (2 * v.0 + d.0 + o.0 - 1).div_euclid(2),
                (2 * v.1 + d.1 + o.1 - 1).div_euclid(2),
            )
        };
        let ahead_left = pixel(left);
        let ahead_right = pixel(right);
        let next = if inside(ahead_left.0, ahead_left.1) {
            left
        } else if inside(ahead_right.0, ahead_right.1) {
            d
        } else {
            right
        };
        if next != d {
            ring.push(Point::new(v.0 as f64, v.1 as f64));
            d = next;
        }
        v = (v.0 + d.0, v.1 + d.1);
    }

    Polygon::new(prune_collinear(&ring, PRUNE_TOLERANCE_PX))
}

/// Drops vertices whose distance to the line through the previous kept vertex
/// and the next vertex is at most `tolerance`. Never reduces below 3 vertices.
pub fn prune_collinear(vertices: &[Point], tolerance: f64) -> Vec<Point> {
    let n = vertices.len();
    if n <= 3 {
        return vertices.to_vec();
    }
    let mut kept: Vec<Point> = Vec::with_capacity(n);
    for i in 0..n {
        let prev = kept.last().copied().unwrap_or(vertices[n - 1]);
        let next = vertices[(i + 1) % n];
        if distance_to_line(vertices[i], prev, next) > tolerance {
            kept.push(vertices[i]);
        }
    }
    if kept.len() < 3 {
        vertices.to_vec()
    } else {
        kept
    }
}

fn distance_to_line(p: Point, a: Point, b: Point) -> f64 {
    let ab = b - a;
    let len = ab.norm();
    if len == 0.0 {
        return p.distance(a);
    }
    (ab.cross(p - a) / len).abs()
}

struct Component {
    label: u32,
    size: usize,
    /// First pixel in raster order, i.e. topmost then leftmost.
    first: (usize, usize),
}

fn largest_component(mask: &Mask) -> Option<(Vec<u32>, Component)> {
    let (w, h) = (mask.width, mask.height);
    let mut labels = vec![0u32; w * h];
    let mut best: Option<Component> = None;
    let mut next_label = 0u32;
    let mut stack: Vec<(usize, usize)> = Vec::new();

    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) || labels[y * w + x] != 0 {
                continue;
            }
            next_label += 1;
            labels[y * w + x] = next_label;
            stack.push((x, y));
            let mut size = 0;
            while let Some((cx, cy)) = stack.pop() {
                size += 1;
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let nx = cx as i64 + dx;
                        let ny = cy as i64 + dy;
                        if mask.at(nx, ny) {
                            let idx = ny as usize * w + nx as usize;
                            if labels[idx] == 0 {
                                labels[idx] = next_label;
                                stack.push((nx as usize, ny as usize));
                            }
                        }
                    }
                }
            }
            if best.as_ref().is_none_or(|b| size > b.size) {
                best = Some(Component {
                    label: next_label,
                    size,
                    first: (x, y),
                });
            }
        }
    }
    best.map(|b| (labels, b))
}
