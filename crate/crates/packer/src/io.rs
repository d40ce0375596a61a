//! File formats read and written by the command line: detections, PGM masks,
//! calibration points and the JSON documents exchanged between subcommands.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageReader};
use packer_core::calibration::{fit_calibration, fit_plane_map, CalibrationModel};
use packer_core::perception::{build_scene, parse_detections, Detection, Scene};
use packer_core::{Mask, Point};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Optional file in a mask directory listing mask files in index order.
pub const MASK_MANIFEST: &str = "manifest.json";

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Pretty-printed with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_detections(path: &Path) -> Result<Vec<Detection>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_detections(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Reads an 8-bit grayscale PGM; nonzero pixels are foreground.
pub fn read_mask(path: &Path) -> Result<Mask> {
    let image = ImageReader::open(path)
        .with_context(|| format!("opening {}", path.display()))?
        .with_guessed_format()?
        .decode()
        .with_context(|| format!("decoding {}", path.display()))?;
    let DynamicImage::ImageLuma8(gray) = image else {
        bail!("{}: expected an 8-bit grayscale PGM", path.display());
    };
    let (w, h) = gray.dimensions();
    Mask::from_raw(w as usize, h as usize, gray.into_raw()).context("mask size mismatch")
}

/// Writes a binary (P5) PGM with foreground at 255.
pub fn write_mask(path: &Path, mask: &Mask) -> Result<()> {
    let data: Vec<u8> = mask.data.iter().map(|&v| if v != 0 { 255 } else { 0 }).collect();
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    PnmEncoder::new(BufWriter::new(file))
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(&data, mask.width as u32, mask.height as u32, ExtendedColorType::L8)
        .with_context(|| format!("writing {}", path.display()))
}

/// Mask files in index order: the manifest if present, otherwise every
/// `<n>.pgm` sorted by `n`.
pub fn mask_paths(dir: &Path) -> Result<Vec<PathBuf>> {
    let manifest = dir.join(MASK_MANIFEST);
    if manifest.exists() {
        let names: Vec<String> = read_json(&manifest)?;
        return Ok(names.into_iter().map(|n| dir.join(n)).collect());
    }
    let mut indexed = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")) {
            let index: usize = path
                .file_stem()
                .and_then(|s| s.to_str())
                .and_then(|s| s.parse().ok())
                .with_context(|| format!("{}: mask files must be named <index>.pgm", path.display()))?;
            indexed.push((index, path));
        }
    }
    indexed.sort();
    Ok(indexed.into_iter().map(|(_, p)| p).collect())
}

pub fn read_masks(dir: &Path) -> Result<Vec<Mask>> {
    let masks: Vec<Mask> = mask_paths(dir)?.iter().map(|p| read_mask(p)).collect::<Result<_>>()?;
    if let Some(first) = masks.first() {
        if masks.iter().any(|m| (m.width, m.height) != (first.width, first.height)) {
            bail!("{}: masks differ in size", dir.display());
        }
    }
    Ok(masks)
}

/// Writes masks as `0.pgm`, `1.pgm`, ...
pub fn write_masks(dir: &Path, masks: &[Mask]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (i, m) in masks.iter().enumerate() {
        write_mask(&dir.join(format!("{i}.pgm")), m)?;
    }
    Ok(())
}

pub fn load_scene(detections: &Path, masks: &Path) -> Result<Scene> {
    Ok(build_scene(&read_detections(detections)?, &read_masks(masks)?))
}

/// One row of points.csv.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPoint {
    pub height_mm: f64,
    pub px_x: f64,
    pub px_y: f64,
    pub world_x_mm: f64,
    pub world_y_mm: f64,
}

pub fn read_points(path: &Path) -> Result<Vec<CalibrationPoint>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut points = Vec::new();
    for (i, row) in reader.deserialize().enumerate() {
        points.push(row.with_context(|| format!("{}: row {}", path.display(), i + 2))?);
    }
    Ok(points)
}

pub fn write_points(path: &Path, points: &[CalibrationPoint]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for p in points {
        writer.serialize(p)?;
    }
    writer.flush()?;
    Ok(())
}

/// Fits one plane map per distinct height and combines them.
pub fn calibrate(points: &[CalibrationPoint]) -> Result<CalibrationModel> {
    let mut by_height: BTreeMap<u64, (f64, Vec<Point>, Vec<Point>)> = BTreeMap::new();
    for p in points {
        let entry = by_height.entry(p.height_mm.to_bits()).or_insert((p.height_mm, Vec::new(), Vec::new()));
        entry.1.push(Point::new(p.px_x, p.px_y));
        entry.2.push(Point::new(p.world_x_mm, p.world_y_mm));
    }
    let planes = by_height
        .into_values()
        .map(|(h, px, world)| fit_plane_map(&px, &world, h).with_context(|| format!("plane at {h} mm")))
        .collect::<Result<Vec<_>>>()?;
    Ok(fit_calibration(planes)?)
}
