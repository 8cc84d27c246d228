use crate::error::{Error, Result};
use crate::raster::{BinaryMask, RasterImage};
use crate::scalar::Scalar;

pub(crate) fn check_kernel(name: &'static str, kernel: usize) -> Result<()> {
    if kernel == 0 || kernel.is_multiple_of(2) {
        return Err(Error::param(name, format!("{kernel} must be odd and >= 1")));
    }
    Ok(())
}

/// 1-D pass: `out[x] = all(line[x-r ..= x+r])`, out-of-range samples count as 0.
fn min_line(line: &[bool], radius: usize, out: &mut [bool], prefix: &mut Vec<usize>) {
    let n = line.len();
    prefix.clear();
    prefix.push(0);
    let mut acc = 0;
    for &b in line {
        acc += b as usize;
        prefix.push(acc);
    }
    let full = 2 * radius + 1;
    for (x, o) in out.iter_mut().enumerate() {
        *o = if x < radius || x + radius >= n {
            false
        } else {
            prefix[x + radius + 1] - prefix[x - radius] == full
        };
    }
}

/// Minimum filter over a `kernel x kernel` window centred on each pixel, zero padded.
///
/// The square window is separable, so this runs one horizontal and one vertical
/// pass of running counts.
pub fn erode_mask(mask: &BinaryMask, kernel: usize) -> Result<BinaryMask> {
    check_kernel("erosion_kernel", kernel)?;
    if kernel == 1 {
        return Ok(mask.clone());
    }
    let (h, w) = mask.dims();
    let r = kernel / 2;
    let mut prefix = Vec::with_capacity(h.max(w) + 1);

    let mut rows = vec![false; h * w];
    for i in 0..h {
        min_line(
            &mask.data()[i * w..(i + 1) * w],
            r,
            &mut rows[i * w..(i + 1) * w],
            &mut prefix,
        );
    }

    let mut out = vec![false; h * w];
    let mut column = vec![false; h];
    let mut col_out = vec![false; h];
    for j in 0..w {
        for i in 0..h {
            column[i] = rows[i * w + j];
        }
        min_line(&column, r, &mut col_out, &mut prefix);
        for i in 0..h {
            out[i * w + j] = col_out[i];
        }
    }
    BinaryMask::new(h, w, out)
}

/// Erodes the mask and keeps only the garment samples under the eroded mask.
pub fn erode_garment<T: Scalar>(
    garment: &RasterImage<T>,
    mask: &BinaryMask,
    kernel: usize,
) -> Result<(RasterImage<T>, BinaryMask)> {
    crate::raster::ensure_same_dims("garment vs mask", garment.dims(), mask.dims())?;
    let eroded = erode_mask(mask, kernel)?;
    let image = garment.masked(&eroded)?;
    Ok((image, eroded))
}
