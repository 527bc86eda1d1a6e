//! Small synthetic fundus-like datasets for smoke tests and fixtures.
//!
//! Each image is a reddish disc on black with speckle noise. Grade `g` adds
//! a bright horizontal band in the `g`-th fifth of the image, so the label
//! survives horizontal flips.

use std::io::Write;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};

use super::{preprocess, DiagnosisGrade, Sample, MANIFEST_HEADER};
use crate::error::{Error, Result};
use crate::tensor::Rng;

pub fn synthetic_image(grade: DiagnosisGrade, size: usize, rng: &mut Rng) -> RgbImage {
    let s = size as f64;
    let (cx, cy) = (s / 2.0 + rng.uniform() * 2.0 - 1.0, s / 2.0 + rng.uniform() * 2.0 - 1.0);
    let radius = s * (0.44 + 0.04 * rng.uniform());
    let band_h = s / 5.0;
    let band_top = grade.index() as f64 * band_h + band_h * 0.2;
    let band_bottom = band_top + band_h * 0.6;
    let mut img = RgbImage::new(size as u32, size as u32);
    for (x, y, px) in img.enumerate_pixels_mut() {
        let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
        let inside = (fx - cx).powi(2) + (fy - cy).powi(2) <= radius * radius;
        let noise = rng.uniform() * 40.0 - 20.0;
        let base = if !inside {
            [0.0, 0.0, 0.0]
        } else if (band_top..band_bottom).contains(&fy) {
            [250.0, 225.0, 140.0]
        } else {
            [190.0, 80.0, 40.0]
        };
        let ch = |v: f64| if inside { (v + noise).clamp(0.0, 255.0) as u8 } else { 0 };
        *px = Rgb([ch(base[0]), ch(base[1]), ch(base[2])]);
    }
    img
}

/// `per_class` preprocessed samples of each grade, grades interleaved.
pub fn synthetic_samples(per_class: usize, size: usize, seed: u64) -> Result<Vec<Sample>> {
    let mut rng = Rng::new(seed);
    let mut out = Vec::with_capacity(per_class * DiagnosisGrade::COUNT);
    for i in 0..per_class {
        for grade in DiagnosisGrade::all() {
            let img = synthetic_image(grade, size, &mut rng);
            out.push(Sample::new(format!("syn{i:03}_{grade}"), preprocess(&img, size)?, grade)?);
        }
    }
    Ok(out)
}

/// Writes `<dir>/train.csv` and PNG images under `<dir>/images`, returning
/// both paths.
pub fn write_synthetic_dataset(dir: &Path, per_class: usize, size: usize, seed: u64) -> Result<(PathBuf, PathBuf)> {
    let image_dir = dir.join("images");
    std::fs::create_dir_all(&image_dir)?;
    let csv_path = dir.join("train.csv");
    let mut csv = std::fs::File::create(&csv_path)?;
    writeln!(csv, "{}", MANIFEST_HEADER.join(","))?;
    let mut rng = Rng::new(seed);
    for i in 0..per_class {
        for grade in DiagnosisGrade::all() {
            let id = format!("syn{i:03}_{grade}");
            let path = image_dir.join(format!("{id}.png"));
            synthetic_image(grade, size, &mut rng)
                .save(&path)
                .map_err(|e| Error::Image { path: path.clone(), message: e.to_string() })?;
            writeln!(csv, "{id},{grade}")?;
        }
    }
    Ok((csv_path, image_dir))
}
