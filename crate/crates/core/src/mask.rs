//! Binary rasters. Pixel `(x, y)` covers the unit square `[x, x+1) × [y, y+1)`.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::geometry::{Point, Polygon};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    /// Row-major, nonzero is foreground.
    pub data: Vec<u8>,
}

impl Mask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    /// Wraps raw row-major data; `None` if the length does not match.
    pub fn from_raw(width: usize, height: usize, data: Vec<u8>) -> Option<Self> {
        (data.len() == width * height).then_some(Self { width, height, data })
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        x < self.width && y < self.height && self.data[y * self.width + x] != 0
    }

    /// Signed lookup; anything outside the raster is background.
    pub fn at(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && self.get(x as usize, y as usize)
    }

    pub fn set(&mut self, x: usize, y: usize, on: bool) {
        if x < self.width && y < self.height {
            self.data[y * self.width + x] = if on { 255 } else { 0 };
        }
    }

    pub fn foreground_count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    /// Rasterizes a polygon: a pixel is set when its center is inside.
    pub fn from_polygon(width: usize, height: usize, polygon: &Polygon) -> Self {
        let mut mask = Mask::new(width, height);
        mask.fill_polygon(polygon);
        mask
    }

    pub fn fill_polygon(&mut self, polygon: &Polygon) {
        let (lo, hi) = polygon.bounding_box();
        let x0 = (lo.x.max(0.0) as usize).min(self.width);
        let y0 = (lo.y.max(0.0) as usize).min(self.height);
        let x1 = ((hi.x.max(0.0) as usize) + 1).min(self.width);
        let y1 = ((hi.y.max(0.0) as usize) + 1).min(self.height);
        for y in y0..y1 {
            for x in x0..x1 {
                if polygon.contains(Point::new(x as f64 + 0.5, y as f64 + 0.5)) {
                    self.set(x, y, true);
                }
            }
        }
    }
}
