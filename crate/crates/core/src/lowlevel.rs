//! Low-level visual statistics of single frames and their per-dataset spread.

use std::path::{Path, PathBuf};

use image::RgbImage;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::DatasetManifest;

pub const DEFAULT_SAMPLE_BUDGET: usize = 500;
/// Added to the mean in the coefficient of variation.
pub const SPREAD_EPSILON: f64 = 1e-9;

const MIN_SIDE: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageStats {
    pub luminance: f64,
    pub spatial_information: f64,
    pub contrast: f64,
    pub colorfulness: f64,
    pub blur: f64,
}

impl ImageStats {
    pub fn to_array(&self) -> [f64; 5] {
        [
            self.luminance,
            self.spatial_information,
            self.contrast,
            self.colorfulness,
            self.blur,
        ]
    }
}

/// BT.601 luma.
#[inline]
pub fn gray_value(p: [u8; 3]) -> f64 {
    0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64
}

fn mean_and_pop_var(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let mut n = 0usize;
    let mut sum = 0.0;
    for v in values.clone() {
        sum += v;
        n += 1;
    }
    let mean = sum / n as f64;
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    (mean, ss / n as f64)
}

/// Start offsets of 4 contiguous bands over `len`; the last band takes the remainder.
fn band_edges(len: usize) -> [usize; 5] {
    let step = len / 4;
    [0, step, 2 * step, 3 * step, len]
}

pub fn compute_image_stats(img: &RgbImage) -> Result<ImageStats> {
    let (w, h) = img.dimensions();
    if w < MIN_SIDE || h < MIN_SIDE {
        return Err(Error::InvalidParameter(format!(
            "image is {w}x{h}, needs at least {MIN_SIDE}x{MIN_SIDE}"
        )));
    }
    let (w, h) = (w as usize, h as usize);
    let gray: Vec<f64> = img.pixels().map(|p| gray_value(p.0)).collect();

    let (luminance, var) = mean_and_pop_var(gray.iter().copied());
    let sigma = var.sqrt();

    let rows = band_edges(h);
    let cols = band_edges(w);
    let mut range_sum = 0.0;
    for bi in 0..4 {
        for bj in 0..4 {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for y in rows[bi]..rows[bi + 1] {
                for &g in &gray[y * w + cols[bj]..y * w + cols[bj + 1]] {
                    lo = lo.min(g);
                    hi = hi.max(g);
                }
            }
            range_sum += hi - lo;
        }
    }
    let contrast = range_sum / (16.0 * sigma.max(1.0));

    let rg = img.pixels().map(|p| p.0[0] as f64 - p.0[1] as f64);
    let yb = img
        .pixels()
        .map(|p| 0.5 * (p.0[0] as f64 + p.0[1] as f64) - p.0[2] as f64);
    let (mu_rg, var_rg) = mean_and_pop_var(rg);
    let (mu_yb, var_yb) = mean_and_pop_var(yb);
    let colorfulness = (var_rg + var_yb).sqrt() + 0.3 * (mu_rg * mu_rg + mu_yb * mu_yb).sqrt();

    let mut response = Vec::with_capacity((h - 2) * (w - 2));
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let g = |dy: usize, dx: usize| gray[(y + dy - 1) * w + x + dx - 1];
            let gx = (g(0, 2) + 2.0 * g(1, 2) + g(2, 2)) - (g(0, 0) + 2.0 * g(1, 0) + g(2, 0));
            let gy = (g(2, 0) + 2.0 * g(2, 1) + g(2, 2)) - (g(0, 0) + 2.0 * g(0, 1) + g(0, 2));
            response.push(gx + gy);
        }
    }
    let (_, blur) = mean_and_pop_var(response.iter().copied());

    Ok(ImageStats {
        luminance,
        spatial_information: sigma,
        contrast,
        colorfulness,
        blur,
    })
}

pub fn load_image(path: &Path) -> Result<RgbImage> {
    image::open(path)
        .map(|img| img.to_rgb8())
        .map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
}

/// Population std over mean, per statistic.
pub fn normalized_spread(values: &[f64]) -> f64 {
    let (mean, var) = mean_and_pop_var(values.iter().copied());
    var.sqrt() / (mean + SPREAD_EPSILON)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowLevelSummary {
    /// Coefficient of variation of each statistic, in [`ImageStats`] field order.
    pub spreads: ImageStats,
    pub frames_sampled: usize,
    /// Sampled frames that could not be decoded, with the reason.
    pub skipped: Vec<(PathBuf, String)>,
}

pub fn spreads_of(stats: &[ImageStats]) -> Result<ImageStats> {
    if stats.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 images for a spread, got {}",
            stats.len()
        )));
    }
    let col = |f: fn(&ImageStats) -> f64| normalized_spread(&stats.iter().map(f).collect::<Vec<_>>());
    Ok(ImageStats {
        luminance: col(|s| s.luminance),
        spatial_information: col(|s| s.spatial_information),
        contrast: col(|s| s.contrast),
        colorfulness: col(|s| s.colorfulness),
        blur: col(|s| s.blur),
    })
}

/// Samples up to `sample_budget` frames uniformly over every frame reference
/// in the manifest and summarizes their statistics.
pub fn dataset_lowlevel_summary(
    manifest: &DatasetManifest,
    sample_budget: usize,
    seed: u64,
) -> Result<LowLevelSummary> {
    if sample_budget < 2 {
        return Err(Error::InvalidParameter(format!(
            "sample budget must be >= 2, got {sample_budget}"
        )));
    }
    let frames: Vec<PathBuf> = manifest
        .episodes
        .iter()
        .filter_map(|e| e.frame_refs.as_ref())
        .flatten()
        .map(|p| manifest.resolve(p))
        .collect();
    if frames.is_empty() {
        return Err(Error::Empty("manifest has no frame_refs"));
    }
    let picked: Vec<usize> = if frames.len() <= sample_budget {
        (0..frames.len()).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = rand::seq::index::sample(&mut rng, frames.len(), sample_budget).into_vec();
        idx.sort_unstable();
        idx
    };
    let results: Vec<Result<ImageStats>> = picked
        .par_iter()
        .map(|&i| load_image(&frames[i]).and_then(|img| compute_image_stats(&img)))
        .collect();
    let mut stats = Vec::with_capacity(results.len());
    let mut skipped = Vec::new();
    for (&i, r) in picked.iter().zip(results) {
        match r {
            Ok(s) => stats.push(s),
            Err(e) => skipped.push((frames[i].clone(), e.to_string())),
        }
    }
    if stats.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "only {} of {} sampled frames decoded",
            stats.len(),
            picked.len()
        )));
    }
    Ok(LowLevelSummary {
        spreads: spreads_of(&stats)?,
        frames_sampled: picked.len(),
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    fn solid(w: u32, h: u32, p: [u8; 3]) -> RgbImage {
        RgbImage::from_pixel(w, h, Rgb(p))
    }

    #[test]
    fn constant_gray() {
        let s = compute_image_stats(&solid(16, 12, [128, 128, 128])).unwrap();
        assert!((s.luminance - 128.0).abs() < 1e-12);
        assert_eq!(s.spatial_information, 0.0);
        assert_eq!(s.contrast, 0.0);
        assert_eq!(s.colorfulness, 0.0);
        assert_eq!(s.blur, 0.0);
    }

    #[test]
    fn checkerboard() {
        let img = RgbImage::from_fn(8, 8, |x, y| {
            let v = if (x + y) % 2 == 0 { 0 } else { 255 };
            Rgb([v, v, v])
        });
        let s = compute_image_stats(&img).unwrap();
        assert!((s.luminance - 127.5).abs() < 1e-9);
        assert!((s.spatial_information - 127.5).abs() < 1e-9);
        assert!((s.contrast - 2.0).abs() < 1e-9);
    }

    #[test]
    fn pure_red() {
        let s = compute_image_stats(&solid(5, 7, [255, 0, 0])).unwrap();
        let want = 0.3 * (255f64.powi(2) + 127.5f64.powi(2)).sqrt();
        assert!((s.colorfulness - want).abs() < 1e-9);
        assert!((s.colorfulness - 85.5296).abs() < 1e-3);
    }

    #[test]
    fn rejects_small_images() {
        assert!(compute_image_stats(&solid(3, 10, [0, 0, 0])).is_err());
        assert!(compute_image_stats(&solid(4, 4, [0, 0, 0])).is_ok());
    }

    #[test]
    fn remainder_goes_to_last_band() {
        assert_eq!(band_edges(4), [0, 1, 2, 3, 4]);
        assert_eq!(band_edges(7), [0, 1, 2, 3, 7]);
        assert_eq!(band_edges(10), [0, 2, 4, 6, 10]);
    }

    #[test]
    fn spread_example() {
        assert!((normalized_spread(&[100.0, 200.0]) - 1.0 / 3.0).abs() < 1e-9);
        assert_eq!(normalized_spread(&[5.0, 5.0, 5.0]), 0.0);
    }
}
