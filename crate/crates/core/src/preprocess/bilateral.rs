//! Masked, per-channel bilateral filter.
//!
//! For an in-mask pixel `(i, j)` and channel `c` the neighbour `(k, l)` gets
//!
//! ```text
//! w = A * exp(-((i-k)^2 + (j-l)^2) / (2 sd^2) - (I_c(i,j) - I_c(k,l))^2 / (2 sr^2))
//! ```
//!
//! Only in-mask neighbours inside the window contribute, and `A` normalizes
//! their weights to one. Pixels outside the mask are written as zero.

use rayon::prelude::*;

use super::erosion::check_kernel;
use crate::error::{Error, Result};
use crate::raster::{ensure_same_dims, BinaryMask, RasterImage, CHANNELS};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug)]
struct Params<T> {
    radius: usize,
    inv_two_sd2: T,
    inv_two_sr2: T,
}

fn params<T: Real>(kernel: usize, sigma_d: T, sigma_r: T) -> Result<Params<T>> {
    check_kernel("bilateral_kernel", kernel)?;
    for (name, s) in [("sigma_d", sigma_d), ("sigma_r", sigma_r)] {
        if !(s > T::zero() && s.is_finite()) {
            return Err(Error::param(
                name,
                format!("{s} must be positive and finite"),
            ));
        }
    }
    let two = T::lit(2.0);
    Ok(Params {
        radius: kernel / 2,
        inv_two_sd2: T::one() / (two * sigma_d * sigma_d),
        inv_two_sr2: T::one() / (two * sigma_r * sigma_r),
    })
}

fn window(center: usize, radius: usize, len: usize) -> std::ops::Range<usize> {
    center.saturating_sub(radius)..(center + radius + 1).min(len)
}

/// Normalized weights of every in-mask neighbour of `(row, col)` in `channel`.
///
/// Empty when the centre is outside the mask.
#[allow(clippy::too_many_arguments)]
pub fn pixel_weights<T: Real>(
    garment: &RasterImage<T>,
    mask: &BinaryMask,
    kernel: usize,
    sigma_d: T,
    sigma_r: T,
    row: usize,
    col: usize,
    channel: usize,
) -> Result<Vec<((usize, usize), T)>> {
    ensure_same_dims("garment vs mask", garment.dims(), mask.dims())?;
    let p = params(kernel, sigma_d, sigma_r)?;
    if !mask.get(row, col) {
        return Ok(Vec::new());
    }
    let (h, w) = garment.dims();
    let center = garment.get(row, col, channel);
    let mut out = Vec::new();
    let mut total = T::zero();
    for k in window(row, p.radius, h) {
        for l in window(col, p.radius, w) {
            if !mask.get(k, l) {
                continue;
            }
            let wt = weight(&p, row, col, k, l, center, garment.get(k, l, channel));
            total = total + wt;
            out.push(((k, l), wt));
        }
    }
    for (_, wt) in &mut out {
        *wt = *wt / total;
    }
    Ok(out)
}

#[inline]
fn weight<T: Real>(p: &Params<T>, i: usize, j: usize, k: usize, l: usize, center: T, v: T) -> T {
    let di = T::from_count(i.abs_diff(k));
    let dj = T::from_count(j.abs_diff(l));
    let diff = center - v;
    (-(di * di + dj * dj) * p.inv_two_sd2 - diff * diff * p.inv_two_sr2).exp()
}

pub fn bilateral_filter<T: Real>(
    garment: &RasterImage<T>,
    mask: &BinaryMask,
    kernel: usize,
    sigma_d: T,
    sigma_r: T,
) -> Result<RasterImage<T>> {
    ensure_same_dims("garment vs mask", garment.dims(), mask.dims())?;
    let p = params(kernel, sigma_d, sigma_r)?;
    let (h, w) = garment.dims();
    let mut out = vec![T::zero(); h * w * CHANNELS];
    if w == 0 {
        return Ok(RasterImage::from_raw(h, w, out));
    }

    out.par_chunks_mut(w * CHANNELS)
        .enumerate()
        .for_each(|(i, row_out)| {
            for j in 0..w {
                if !mask.get(i, j) {
                    continue;
                }
                for c in 0..CHANNELS {
                    let center = garment.get(i, j, c);
                    let mut num = T::zero();
                    let mut den = T::zero();
                    let mut lo = center;
                    let mut hi = center;
                    for k in window(i, p.radius, h) {
                        for l in window(j, p.radius, w) {
                            if !mask.get(k, l) {
                                continue;
                            }
                            let v = garment.get(k, l, c);
                            let wt = weight(&p, i, j, k, l, center, v);
                            num = num + wt * v;
                            den = den + wt;
                            lo = lo.min(v);
                            hi = hi.max(v);
                        }
                    }
                    // den >= 1: the centre always contributes exp(0)
                    row_out[j * CHANNELS + c] = (num / den).max(lo).min(hi);
                }
            }
        });
    Ok(RasterImage::from_raw(h, w, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_unchanged() {
        let img = RasterImage::filled(6, 7, 0.3f64).unwrap();
        let m = BinaryMask::ones(6, 7);
        for sr in [0.01, 0.06, 10.0] {
            let out = bilateral_filter(&img, &m, 5, 2.0, sr).unwrap();
            for &v in out.data() {
                assert!((v - 0.3).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn outside_mask_is_zero() {
        let img = RasterImage::filled(4, 4, 0.9).unwrap();
        let m = BinaryMask::from_fn(4, 4, |_, j| j < 2);
        let out = bilateral_filter(&img, &m, 3, 1.0, 0.1).unwrap();
        for i in 0..4 {
            for j in 2..4 {
                assert_eq!(out.pixel(i, j), [0.0; 3]);
            }
        }
    }

    #[test]
    fn weights_sum_to_one() {
        let img = RasterImage::from_fn(5, 5, |i, j, c| ((i * 5 + j + c) % 7) as f64 / 7.0).unwrap();
        let m = BinaryMask::from_fn(5, 5, |i, j| (i + j) % 3 != 0);
        let ws = pixel_weights(&img, &m, 5, 2.0, 0.1, 2, 2, 1).unwrap();
        let s: f64 = ws.iter().map(|(_, w)| w).sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(ws.iter().all(|((k, l), _)| m.get(*k, *l)));
        let off = (0..5)
            .flat_map(|i| (0..5).map(move |j| (i, j)))
            .find(|&(i, j)| !m.get(i, j))
            .unwrap();
        assert!(pixel_weights(&img, &m, 5, 2.0, 0.1, off.0, off.1, 0)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn parameter_validation() {
        let img = RasterImage::<f64>::zeros(3, 3);
        let m = BinaryMask::ones(3, 3);
        assert!(bilateral_filter(&img, &m, 4, 1.0, 1.0).is_err());
        assert!(bilateral_filter(&img, &m, 3, 0.0, 1.0).is_err());
        assert!(bilateral_filter(&img, &m, 3, 1.0, -1.0).is_err());
        assert!(bilateral_filter(&img, &BinaryMask::ones(3, 2), 3, 1.0, 1.0).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let img = RasterImage::from_fn(6, 6, |i, j, _| ((i + 2 * j) % 5) as f32 / 5.0).unwrap();
        let out = bilateral_filter(&img, &BinaryMask::ones(6, 6), 3, 1.0f32, 0.2f32).unwrap();
        assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
