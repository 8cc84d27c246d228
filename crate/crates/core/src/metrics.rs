//! Structural similarity with Gaussian-weighted local statistics.
//!
//! Windows are evaluated only where they fit entirely inside the image; the
//! score is the mean of the local SSIM map over those positions and the three
//! channels.

use crate::error::{Error, Result};
use crate::raster::{ensure_same_dims, RasterImage, CHANNELS};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct SsimParams {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 1.0,
        }
    }
}

impl SsimParams {
    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window.is_multiple_of(2) {
            return Err(Error::param(
                "window",
                format!("{} must be odd and >= 3", self.window),
            ));
        }
        for (name, v) in [
            ("sigma", self.sigma),
            ("k1", self.k1),
            ("k2", self.k2),
            ("dynamic_range", self.dynamic_range),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("{v} must be positive")));
            }
        }
        Ok(())
    }

    pub fn c1(&self) -> f64 {
        (self.k1 * self.dynamic_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.dynamic_range).powi(2)
    }

    /// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
    pub fn taps<T: Real>(&self) -> Vec<T> {
        let r = (self.window / 2) as f64;
        let raw: Vec<f64> = (0..self.window)
            .map(|k| {
                let d = k as f64 - r;
                (-d * d / (2.0 * self.sigma * self.sigma)).exp()
            })
            .collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|v| T::lit(v / total)).collect()
    }
}

/// Valid-mode separable filtering of one plane (`h x w` -> `(h-n+1) x (w-n+1)`).
fn filter_valid<T: Real>(plane: &[T], h: usize, w: usize, taps: &[T]) -> Vec<T> {
    let n = taps.len();
    let (oh, ow) = (h + 1 - n, w + 1 - n);
    let mut horiz = vec![T::zero(); h * ow];
    for i in 0..h {
        for j in 0..ow {
            let mut acc = T::zero();
            for (k, &t) in taps.iter().enumerate() {
                acc = acc + t * plane[i * w + j + k];
            }
            horiz[i * ow + j] = acc;
        }
    }
    let mut out = vec![T::zero(); oh * ow];
    for i in 0..oh {
        for j in 0..ow {
            let mut acc = T::zero();
            for (k, &t) in taps.iter().enumerate() {
                acc = acc + t * horiz[(i + k) * ow + j];
            }
            out[i * ow + j] = acc;
        }
    }
    out
}

/// Mean SSIM over all valid window positions and channels.
pub fn ssim<T: Real>(a: &RasterImage<T>, b: &RasterImage<T>, params: &SsimParams) -> Result<T> {
    ensure_same_dims("ssim inputs", a.dims(), b.dims())?;
    params.validate()?;
    let (h, w) = a.dims();
    if h < params.window || w < params.window {
        return Err(Error::dims(
            "ssim image size",
            format!("at least {0}x{0}", params.window),
            format!("{h}x{w}"),
        ));
    }
    let taps = params.taps::<T>();
    let c1 = T::lit(params.c1());
    let c2 = T::lit(params.c2());
    let two = T::lit(2.0);
    let pa = a.to_planar();
    let pb = b.to_planar();
    let plane = h * w;

    let mut total = T::zero();
    let mut count = 0usize;
    for c in 0..CHANNELS {
        let x = &pa.data()[c * plane..(c + 1) * plane];
        let y = &pb.data()[c * plane..(c + 1) * plane];
        let xx: Vec<T> = x.iter().map(|&v| v * v).collect();
        let yy: Vec<T> = y.iter().map(|&v| v * v).collect();
        let xy: Vec<T> = x.iter().zip(y).map(|(&p, &q)| p * q).collect();
        let mu_x = filter_valid(x, h, w, &taps);
        let mu_y = filter_valid(y, h, w, &taps);
        let e_xx = filter_valid(&xx, h, w, &taps);
        let e_yy = filter_valid(&yy, h, w, &taps);
        let e_xy = filter_valid(&xy, h, w, &taps);
        for k in 0..mu_x.len() {
            let (mx, my) = (mu_x[k], mu_y[k]);
            let var_x = e_xx[k] - mx * mx;
            let var_y = e_yy[k] - my * my;
            let cov = e_xy[k] - mx * my;
            let num = (two * mx * my + c1) * (two * cov + c2);
            let den = (mx * mx + my * my + c1) * (var_x + var_y + c2);
            total = total + num / den;
            count += 1;
        }
    }
    Ok(total / T::from_count(count))
}
