//! Composed input formation.
//!
//! The preprocessed garment is pasted into the removed region of the
//! garment-agnostic person image:
//!
//! ```text
//! I_in = I_a + (1 - M_a) * C_w
//! M_in = M_a + (1 - M_a) * M_w
//! ```
//!
//! Both formulas are literal only when `I_a` is zero outside `M_a` and `C_w`
//! is zero outside `M_w`; those are enforced rather than silently patched.

use crate::error::{Error, Result};
use crate::raster::{ensure_same_dims, BinaryMask, RasterImage, SegmentationMap, CHANNELS};
use crate::scalar::Scalar;
use crate::tensor::{Latent, Tensor3};

/// Spatial reduction of the latent space relative to pixel space.
pub const DEFAULT_ENCODE_FACTOR: usize = 8;
pub const DEFAULT_RESIZE_THRESHOLD: f64 = 0.5;

/// Person image with the garment region removed (zero-filled) plus the keep mask.
#[derive(Clone, Debug, PartialEq)]
pub struct AgnosticPerson<T> {
    image: RasterImage<T>,
    keep_mask: BinaryMask,
}

impl<T: Scalar> AgnosticPerson<T> {
    /// Rejects images with nonzero samples in the removed region.
    pub fn new(image: RasterImage<T>, keep_mask: BinaryMask) -> Result<Self> {
        if let Some((row, col)) = image.first_nonzero_outside(&keep_mask)? {
            return Err(Error::ZeroFillViolated {
                what: "agnostic image",
                row,
                col,
            });
        }
        Ok(Self { image, keep_mask })
    }

    /// Accepts an agnostic image whose removed region carries any fill (often
    /// gray) and zeroes it.
    pub fn from_filled(image: &RasterImage<T>, keep_mask: BinaryMask) -> Result<Self> {
        let image = image.masked(&keep_mask)?;
        Ok(Self { image, keep_mask })
    }

    pub fn image(&self) -> &RasterImage<T> {
        &self.image
    }

    pub fn keep_mask(&self) -> &BinaryMask {
        &self.keep_mask
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComposedInput<T> {
    pub image: RasterImage<T>,
    pub mask: BinaryMask,
    pub warped_mask: BinaryMask,
}

pub fn compose_input<T: Scalar>(
    agnostic: &AgnosticPerson<T>,
    warped: &RasterImage<T>,
    warped_mask: &BinaryMask,
) -> Result<ComposedInput<T>> {
    let dims = agnostic.image.dims();
    ensure_same_dims("agnostic vs warped garment", dims, warped.dims())?;
    ensure_same_dims("agnostic vs warped mask", dims, warped_mask.dims())?;
    if let Some((row, col)) = warped.first_nonzero_outside(warped_mask)? {
        return Err(Error::ZeroFillViolated {
            what: "warped garment",
            row,
            col,
        });
    }

    let keep = agnostic.keep_mask.data();
    let one = T::one();
    let image: Vec<T> = agnostic
        .image
        .data()
        .chunks_exact(CHANNELS)
        .zip(warped.data().chunks_exact(CHANNELS))
        .zip(keep)
        .flat_map(|((ia, cw), &ma)| {
            let removed = one - T::indicator(ma);
            (0..CHANNELS).map(move |c| ia[c] + removed * cw[c])
        })
        .collect();
    let mask: Vec<T> = keep
        .iter()
        .zip(warped_mask.data())
        .map(|(&ma, &mw)| {
            let ma = T::indicator(ma);
            ma + (one - ma) * T::indicator(mw)
        })
        .collect();

    Ok(ComposedInput {
        image: RasterImage::new(dims.0, dims.1, image)?,
        mask: BinaryMask::from_values(dims.0, dims.1, &mask)?,
        warped_mask: warped_mask.clone(),
    })
}

/// Area-average resize followed by `>= 0.5` binarization.
pub fn resize_mask(mask: &BinaryMask, target_h: usize, target_w: usize) -> Result<BinaryMask> {
    resize_mask_with_threshold(mask, target_h, target_w, DEFAULT_RESIZE_THRESHOLD)
}

/// Area-average resize: each target cell takes the fraction of its footprint
/// covered by ones (fractional source pixels are weighted by overlap) and
/// becomes 1 when that fraction is at least `threshold`.
///
/// Coverage is accumulated in integers on a grid refined by the target size,
/// so ties are decided exactly.
pub fn resize_mask_with_threshold(
    mask: &BinaryMask,
    target_h: usize,
    target_w: usize,
    threshold: f64,
) -> Result<BinaryMask> {
    if target_h == 0 || target_w == 0 {
        return Err(Error::param("target size", "dimensions must be >= 1"));
    }
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::param(
            "resize_threshold",
            format!("{threshold} not in (0, 1]"),
        ));
    }
    let (h, w) = mask.dims();
    if h == 0 || w == 0 {
        return Err(Error::param("mask", "cannot resize an empty mask"));
    }
    if (h, w) == (target_h, target_w) {
        return Ok(mask.clone());
    }

    // Source row r covers [r*th, (r+1)*th); target row t covers [t*h, (t+1)*h).
    let overlaps = |src: usize, dst: usize| -> Vec<Vec<(usize, u64)>> {
        (0..dst)
            .map(|t| {
                let (lo, hi) = (t * src, (t + 1) * src);
                let first = lo / dst;
                let last = (hi - 1) / dst;
                (first..=last)
                    .map(|r| {
                        let a = (r * dst).max(lo);
                        let b = ((r + 1) * dst).min(hi);
                        (r, (b - a) as u64)
                    })
                    .collect()
            })
            .collect()
    };
    let rows = overlaps(h, target_h);
    let cols = overlaps(w, target_w);
    let area = (h * w) as u64;

    let data = rows
        .iter()
        .flat_map(|row_span| {
            cols.iter().map(move |col_span| {
                let mut covered = 0u64;
                for &(r, wr) in row_span {
                    for &(c, wc) in col_span {
                        if mask.get(r, c) {
                            covered += wr * wc;
                        }
                    }
                }
                covered as f64 / area as f64 >= threshold
            })
        })
        .collect();
    BinaryMask::new(target_h, target_w, data)
}

/// Zero-pads a tensor on the bottom and right up to multiples of `factor`.
pub fn pad_to_multiple<T: Scalar>(t: &Tensor3<T>, factor: usize) -> Result<Tensor3<T>> {
    if factor == 0 {
        return Err(Error::param("encode_factor", "must be >= 1"));
    }
    let (c, h, w) = t.shape();
    let (ph, pw) = (h.div_ceil(factor) * factor, w.div_ceil(factor) * factor);
    if (ph, pw) == (h, w) {
        return Ok(t.clone());
    }
    Tensor3::from_fn(c, ph, pw, |ch, i, j| {
        if i < h && j < w {
            t.get(ch, i, j)
        } else {
            T::zero()
        }
    })
}

/// Deterministic stand-in for the latent encoder: per-channel block mean over
/// `factor x factor` tiles. Linear in its input.
pub fn encode_stub<T: Scalar>(t: &Tensor3<T>, factor: usize) -> Result<Latent<T>> {
    if factor == 0 {
        return Err(Error::param("encode_factor", "must be >= 1"));
    }
    let (c, h, w) = t.shape();
    if h % factor != 0 || w % factor != 0 {
        return Err(Error::dims(
            "encoder input (pad to a multiple of the factor first)",
            format!("multiples of {factor}"),
            format!("{h}x{w}"),
        ));
    }
    if factor == 1 {
        return Ok(t.clone());
    }
    let (lh, lw) = (h / factor, w / factor);
    let denom = T::from_count(factor * factor);
    Tensor3::from_fn(c, lh, lw, |ch, bi, bj| {
        let mut acc = T::zero();
        for i in bi * factor..(bi + 1) * factor {
            for j in bj * factor..(bj + 1) * factor {
                acc = acc + t.get(ch, i, j);
            }
        }
        acc / denom
    })
}

/// Encodes an RGB image to a `3 x H/f x W/f` latent.
pub fn encode_image<T: Scalar>(img: &RasterImage<T>, factor: usize) -> Result<Latent<T>> {
    encode_stub(&img.to_planar(), factor)
}

/// Everything the denoiser sees at one timestep.
#[derive(Clone, Debug, PartialEq)]
pub struct DenoiserInputStack<T> {
    pub noisy_latent: Latent<T>,
    pub encoded_input: Latent<T>,
    pub resized_input_mask: BinaryMask,
    pub resized_warped_mask: BinaryMask,
    pub encoded_seg: Latent<T>,
    pub timestep: usize,
}

impl<T: Scalar> DenoiserInputStack<T> {
    /// Channel concatenation in field order.
    pub fn to_channels(&self) -> Result<Tensor3<T>> {
        Tensor3::concat_channels(&[
            &self.noisy_latent,
            &self.encoded_input,
            &self.resized_input_mask.to_tensor(),
            &self.resized_warped_mask.to_tensor(),
            &self.encoded_seg,
        ])
    }
}

pub fn assemble_stack<T: Scalar>(
    composed: &ComposedInput<T>,
    seg: &SegmentationMap,
    z_t: &Latent<T>,
    t: usize,
    factor: usize,
) -> Result<DenoiserInputStack<T>> {
    let dims = composed.image.dims();
    ensure_same_dims("composed input vs segmentation", dims, seg.dims())?;
    ensure_same_dims("composed image vs mask", dims, composed.mask.dims())?;
    ensure_same_dims(
        "composed image vs warped mask",
        dims,
        composed.warped_mask.dims(),
    )?;
    let encoded_input = encode_image(&composed.image, factor)?;
    let (lh, lw) = (encoded_input.height(), encoded_input.width());
    if (z_t.height(), z_t.width()) != (lh, lw) {
        return Err(Error::dims(
            "noisy latent spatial size",
            format!("{lh}x{lw}"),
            format!("{}x{}", z_t.height(), z_t.width()),
        ));
    }
    Ok(DenoiserInputStack {
        noisy_latent: z_t.clone(),
        encoded_input,
        resized_input_mask: resize_mask(&composed.mask, lh, lw)?,
        resized_warped_mask: resize_mask(&composed.warped_mask, lh, lw)?,
        encoded_seg: encode_stub(&seg.one_hot(), factor)?,
        timestep: t,
    })
}
