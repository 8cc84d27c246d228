//! Deterministic synthetic try-on inputs for demos and regression fixtures.
//!
//! Geometry scales with the requested size; 64x48 (height x width) is the
//! checked-in fixture resolution.

use std::path::Path;

use rand::Rng;

use crate::diffusion::seeded_rng;
use crate::error::Result;
use crate::raster::{
    save_image, save_mask, save_segmentation, BinaryMask, RasterImage, SegmentationMap,
    DEFAULT_NUM_LABELS,
};

pub const FIXTURE_HEIGHT: usize = 64;
pub const FIXTURE_WIDTH: usize = 48;

/// Inputs for one preprocess + compose run.
#[derive(Clone, Debug)]
pub struct FixtureSet {
    /// Warped garment, zero outside `garment_mask`.
    pub garment: RasterImage<f64>,
    pub garment_mask: BinaryMask,
    pub segmentation: SegmentationMap,
    /// Agnostic person image with a gray fill in the removed region.
    pub agnostic: RasterImage<f64>,
    pub agnostic_mask: BinaryMask,
}

pub const GARMENT_FILE: &str = "garment.png";
pub const GARMENT_MASK_FILE: &str = "garment_mask.png";
pub const SEGMENTATION_FILE: &str = "segmentation.png";
pub const AGNOSTIC_FILE: &str = "agnostic.png";
pub const AGNOSTIC_MASK_FILE: &str = "agnostic_mask.png";

fn frac(v: usize, num: usize, den: usize) -> usize {
    v * num / den
}

pub fn synthetic_fixture(height: usize, width: usize, seed: u64) -> Result<FixtureSet> {
    let mut rng = seeded_rng(seed);
    let (h, w) = (height, width);
    let in_rect = |i: usize, j: usize, r0: usize, r1: usize, c0: usize, c1: usize| {
        i >= frac(h, r0, 64) && i < frac(h, r1, 64) && j >= frac(w, c0, 48) && j < frac(w, c1, 48)
    };

    // DensePose-style parts: 1/2 torso, 3/4 arms, 23 head
    let segmentation = SegmentationMap::from_fn(h, w, DEFAULT_NUM_LABELS, |i, j| {
        if in_rect(i, j, 12, 56, 10, 38) {
            if j < w / 2 {
                1
            } else {
                2
            }
        } else if in_rect(i, j, 14, 44, 2, 10) {
            3
        } else if in_rect(i, j, 14, 44, 38, 46) {
            4
        } else if in_rect(i, j, 0, 12, 16, 32) {
            23
        } else {
            0
        }
    })?;

    let garment_mask = BinaryMask::from_fn(h, w, |i, j| {
        in_rect(i, j, 10, 58, 8, 40) || in_rect(i, j, 12, 40, 3, 45)
    });

    let mut noise = vec![0.0f64; h * w * 3];
    for v in &mut noise {
        *v = rng.random_range(-0.02..0.02);
    }
    let garment = RasterImage::from_fn(h, w, |i, j, c| {
        if !garment_mask.get(i, j) {
            return 0.0;
        }
        let stripe = if (i / 3) % 2 == 0 { 0.18 } else { 0.0 };
        let base = [0.55, 0.35, 0.25][c] + stripe + 0.1 * (j as f64 / w as f64);
        (base + noise[(i * w + j) * 3 + c]).clamp(0.0, 1.0)
    })?;

    let removed = BinaryMask::from_fn(h, w, |i, j| {
        in_rect(i, j, 8, 60, 6, 42) || in_rect(i, j, 10, 46, 1, 47)
    });
    let agnostic_mask = removed.not();
    let agnostic = RasterImage::from_fn(h, w, |i, j, c| {
        if removed.get(i, j) {
            0.5
        } else {
            let skin = [0.8, 0.62, 0.5][c];
            let bg = 0.9 - 0.3 * (i as f64 / h as f64);
            if segmentation.get(i, j) == 23 {
                skin
            } else {
                bg
            }
        }
    })?;

    Ok(FixtureSet {
        garment,
        garment_mask,
        segmentation,
        agnostic,
        agnostic_mask,
    })
}

/// Writes the set under the standard file names.
pub fn write_fixture_set(set: &FixtureSet, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| crate::error::Error::Io {
        path: dir.to_owned(),
        source,
    })?;
    save_image(&set.garment, dir.join(GARMENT_FILE))?;
    save_mask(&set.garment_mask, dir.join(GARMENT_MASK_FILE))?;
    save_segmentation(&set.segmentation, dir.join(SEGMENTATION_FILE))?;
    save_image(&set.agnostic, dir.join(AGNOSTIC_FILE))?;
    save_mask(&set.agnostic_mask, dir.join(AGNOSTIC_MASK_FILE))?;
    Ok(())
}
