//! Warped-garment preprocessing: torso extraction, region erosion and
//! edge-preserving smoothing, producing the preprocessed garment and its mask.

mod bilateral;
mod erosion;

pub use bilateral::{bilateral_filter, pixel_weights};
pub use erosion::{erode_garment, erode_mask};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::raster::{ensure_same_dims, BinaryMask, LabelSet, RasterImage, SegmentationMap};
use crate::scalar::{Real, Scalar};

/// Whether the pipeline runs on ground-truth garments (train) or warped ones (infer).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Mode {
    Train,
    #[default]
    Infer,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Train => "train",
            Mode::Infer => "infer",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Mode::Train),
            "infer" => Ok(Mode::Infer),
            other => Err(Error::param(
                "mode",
                format!("`{other}` is not train|infer"),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PreprocessConfig {
    pub torso_labels: LabelSet,
    pub erosion_kernel: usize,
    pub bilateral_kernel: usize,
    pub sigma_d: f64,
    pub sigma_r_train: f64,
    pub sigma_r_infer: f64,
    pub mode: Mode,
}

/// DensePose torso part indices (back and front).
pub const DEFAULT_TORSO_LABELS: [u8; 2] = [1, 2];

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            torso_labels: DEFAULT_TORSO_LABELS.into_iter().collect(),
            erosion_kernel: 21,
            bilateral_kernel: 23,
            sigma_d: 5.0,
            sigma_r_train: 0.06,
            sigma_r_infer: 0.01,
            mode: Mode::Infer,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        erosion::check_kernel("erosion_kernel", self.erosion_kernel)?;
        erosion::check_kernel("bilateral_kernel", self.bilateral_kernel)?;
        for (name, v) in [
            ("sigma_d", self.sigma_d),
            ("sigma_r_train", self.sigma_r_train),
            ("sigma_r_infer", self.sigma_r_infer),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(
                    name,
                    format!("{v} must be positive and finite"),
                ));
            }
        }
        if self.torso_labels.is_empty() {
            return Err(Error::param("torso_labels", "must not be empty"));
        }
        Ok(())
    }

    /// Range sigma for the configured mode.
    pub fn sigma_r(&self) -> f64 {
        match self.mode {
            Mode::Train => self.sigma_r_train,
            Mode::Infer => self.sigma_r_infer,
        }
    }
}

/// Keeps the part of the garment that lies on torso-labelled pixels.
pub fn extract_torso<T: Scalar>(
    garment: &RasterImage<T>,
    mask: &BinaryMask,
    seg: &SegmentationMap,
    torso_labels: &LabelSet,
) -> Result<(RasterImage<T>, BinaryMask)> {
    if torso_labels.is_empty() {
        return Err(Error::param("torso_labels", "must not be empty"));
    }
    ensure_same_dims("garment vs mask", garment.dims(), mask.dims())?;
    ensure_same_dims("garment vs segmentation", garment.dims(), seg.dims())?;
    let torso = mask.and(&seg.region(torso_labels))?;
    let image = garment.masked(&torso)?;
    Ok((image, torso))
}

/// Runs torso extraction, erosion and the bilateral filter in sequence.
pub fn preprocess_warped_garment<T: Real>(
    garment: &RasterImage<T>,
    mask: &BinaryMask,
    seg: &SegmentationMap,
    cfg: &PreprocessConfig,
) -> Result<(RasterImage<T>, BinaryMask)> {
    cfg.validate()?;
    let (torso, torso_mask) = extract_torso(garment, mask, seg, &cfg.torso_labels)?;
    let (eroded, eroded_mask) = erode_garment(&torso, &torso_mask, cfg.erosion_kernel)?;
    let smoothed = bilateral_filter(
        &eroded,
        &eroded_mask,
        cfg.bilateral_kernel,
        T::lit(cfg.sigma_d),
        T::lit(cfg.sigma_r()),
    )?;
    Ok((smoothed, eroded_mask))
}

/// Cuts the garment region out of a person image; used in place of the
/// externally warped garment when preparing training inputs.
pub fn ground_truth_garment<T: Scalar>(
    person: &RasterImage<T>,
    garment_region: &BinaryMask,
) -> Result<(RasterImage<T>, BinaryMask)> {
    ensure_same_dims(
        "person vs garment region",
        person.dims(),
        garment_region.dims(),
    )?;
    Ok((person.masked(garment_region)?, garment_region.clone()))
}
