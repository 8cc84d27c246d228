//! Independent reference implementations. Each is a direct transcription of
//! the defining formula with naive loops; none calls into the code under test
//! beyond the plain data types.

#![allow(dead_code, clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use tryon_core::{BinaryMask, NoiseSchedule, RasterImage, Tensor3, Tokens};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_image(rng: &mut impl Rng, h: usize, w: usize) -> RasterImage<f64> {
    RasterImage::from_fn(h, w, |_, _, _| rng.random::<f64>()).unwrap()
}

pub fn random_mask(rng: &mut impl Rng, h: usize, w: usize, p_one: f64) -> BinaryMask {
    BinaryMask::from_fn(h, w, |_, _| rng.random::<f64>() < p_one)
}

pub fn random_tensor(rng: &mut impl Rng, c: usize, h: usize, w: usize) -> Tensor3<f64> {
    Tensor3::from_fn(c, h, w, |_, _, _| {
        let v: f64 = StandardNormal.sample(rng);
        v
    })
    .unwrap()
}

/// Quadruple loop over pixels, channels and window offsets.
pub fn bilateral_oracle(
    img: &RasterImage<f64>,
    mask: &BinaryMask,
    kernel: usize,
    sigma_d: f64,
    sigma_r: f64,
) -> Vec<f64> {
    let (h, w) = img.dims();
    let r = (kernel / 2) as i64;
    let mut out = vec![0.0; h * w * 3];
    for i in 0..h as i64 {
        for j in 0..w as i64 {
            if !mask.get(i as usize, j as usize) {
                continue;
            }
            for c in 0..3 {
                let center = img.get(i as usize, j as usize, c);
                let (mut num, mut den) = (0.0, 0.0);
                for k in i - r..=i + r {
                    for l in j - r..=j + r {
                        if k < 0 || l < 0 || k >= h as i64 || l >= w as i64 {
                            continue;
                        }
                        if !mask.get(k as usize, l as usize) {
                            continue;
                        }
                        let v = img.get(k as usize, l as usize, c);
                        let d2 = ((i - k) * (i - k) + (j - l) * (j - l)) as f64;
                        let wt = (-d2 / (2.0 * sigma_d * sigma_d)
                            - (center - v) * (center - v) / (2.0 * sigma_r * sigma_r))
                            .exp();
                        num += wt * v;
                        den += wt;
                    }
                }
                out[((i as usize) * w + j as usize) * 3 + c] = num / den;
            }
        }
    }
    out
}

/// Normalized spatial Gaussian over in-mask neighbours only.
pub fn masked_gaussian_oracle(
    img: &RasterImage<f64>,
    mask: &BinaryMask,
    kernel: usize,
    sigma_d: f64,
) -> Vec<f64> {
    let (h, w) = img.dims();
    let r = (kernel / 2) as i64;
    let mut out = vec![0.0; h * w * 3];
    for i in 0..h as i64 {
        for j in 0..w as i64 {
            if !mask.get(i as usize, j as usize) {
                continue;
            }
            for c in 0..3 {
                let (mut num, mut den) = (0.0, 0.0);
                for di in -r..=r {
                    for dj in -r..=r {
                        let (k, l) = (i + di, j + dj);
                        if k < 0 || l < 0 || k >= h as i64 || l >= w as i64 {
                            continue;
                        }
                        if !mask.get(k as usize, l as usize) {
                            continue;
                        }
                        let g = (-((di * di + dj * dj) as f64) / (2.0 * sigma_d * sigma_d)).exp();
                        num += g * img.get(k as usize, l as usize, c);
                        den += g;
                    }
                }
                out[((i as usize) * w + j as usize) * 3 + c] = num / den;
            }
        }
    }
    out
}

/// Window minimum with out-of-bounds samples read as 0.
pub fn erosion_oracle(mask: &BinaryMask, kernel: usize) -> BinaryMask {
    let (h, w) = mask.dims();
    let r = (kernel / 2) as i64;
    BinaryMask::from_fn(h, w, |i, j| {
        let mut min = 1u8;
        for k in i as i64 - r..=i as i64 + r {
            for l in j as i64 - r..=j as i64 + r {
                let v = if k < 0 || l < 0 || k >= h as i64 || l >= w as i64 {
                    0
                } else {
                    mask.get(k as usize, l as usize) as u8
                };
                min = min.min(v);
            }
        }
        min == 1
    })
}

/// Elementwise evaluation of the two composition formulas.
pub fn compose_oracle(
    ia: &RasterImage<f64>,
    ma: &BinaryMask,
    cw: &RasterImage<f64>,
    mw: &BinaryMask,
) -> (Vec<f64>, Vec<f64>) {
    let (h, w) = ia.dims();
    let mut img = Vec::with_capacity(h * w * 3);
    let mut mask = Vec::with_capacity(h * w);
    for i in 0..h {
        for j in 0..w {
            let a = if ma.get(i, j) { 1.0 } else { 0.0 };
            let m = if mw.get(i, j) { 1.0 } else { 0.0 };
            for c in 0..3 {
                img.push(ia.get(i, j, c) + (1.0 - a) * cw.get(i, j, c));
            }
            mask.push(a + (1.0 - a) * m);
        }
    }
    (img, mask)
}

pub fn block_mean_oracle(t: &Tensor3<f64>, f: usize) -> Vec<f64> {
    let (c, h, w) = t.shape();
    let mut out = Vec::new();
    for ch in 0..c {
        for bi in 0..h / f {
            for bj in 0..w / f {
                let mut s = 0.0;
                for di in 0..f {
                    for dj in 0..f {
                        s += t.get(ch, bi * f + di, bj * f + dj);
                    }
                }
                out.push(s / (f * f) as f64);
            }
        }
    }
    out
}

/// Naive softmax attention, one query position at a time.
pub fn attention_oracle(q: &Tensor3<f64>, keys: &Tokens<f64>, values: &Tokens<f64>) -> Vec<f64> {
    let (c, h, w) = q.shape();
    let n = keys.count();
    let oc = values.width();
    let mut out = vec![0.0; oc * h * w];
    for i in 0..h {
        for j in 0..w {
            let mut logits = vec![0.0; n];
            for (k, logit) in logits.iter_mut().enumerate() {
                let mut s = 0.0;
                for ch in 0..c {
                    s += q.get(ch, i, j) * keys.token(k)[ch];
                }
                *logit = s / (c as f64).sqrt();
            }
            let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = logits.iter().map(|l| (l - m).exp()).sum();
            for oc_i in 0..oc {
                let mut s = 0.0;
                for k in 0..n {
                    s += (logits[k] - m).exp() / z * values.token(k)[oc_i];
                }
                out[(oc_i * h + i) * w + j] = s;
            }
        }
    }
    out
}

/// Gaussian taps normalized to one.
fn gaussian_taps(n: usize, sigma: f64) -> Vec<f64> {
    let r = (n / 2) as f64;
    let raw: Vec<f64> = (0..n)
        .map(|k| (-(k as f64 - r).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

/// Per-window weighted statistics with an explicit 2-D weight table.
pub fn ssim_oracle(
    a: &RasterImage<f64>,
    b: &RasterImage<f64>,
    n: usize,
    sigma: f64,
    k1: f64,
    k2: f64,
    range: f64,
) -> f64 {
    let g = gaussian_taps(n, sigma);
    let (h, w) = a.dims();
    let c1 = (k1 * range).powi(2);
    let c2 = (k2 * range).powi(2);
    let mut total = 0.0;
    let mut count = 0;
    for c in 0..3 {
        for i in 0..=h - n {
            for j in 0..=w - n {
                let (mut mx, mut my) = (0.0, 0.0);
                for di in 0..n {
                    for dj in 0..n {
                        let wt = g[di] * g[dj];
                        mx += wt * a.get(i + di, j + dj, c);
                        my += wt * b.get(i + di, j + dj, c);
                    }
                }
                let (mut vx, mut vy, mut cov) = (0.0, 0.0, 0.0);
                for di in 0..n {
                    for dj in 0..n {
                        let wt = g[di] * g[dj];
                        let x = a.get(i + di, j + dj, c) - mx;
                        let y = b.get(i + di, j + dj, c) - my;
                        vx += wt * x * x;
                        vy += wt * y * y;
                        cov += wt * x * y;
                    }
                }
                total += ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                    / ((mx * mx + my * my + c1) * (vx + vy + c2));
                count += 1;
            }
        }
    }
    total / count as f64
}

/// First-order deterministic sampler visiting every timestep from `t_start`
/// down to 0, then stepping to the clean sample.
pub fn first_order_reference(
    z_start: &[f64],
    t_start: usize,
    schedule: &NoiseSchedule,
    eps: impl Fn(&[f64], usize) -> Vec<f64>,
) -> Vec<f64> {
    let mut z = z_start.to_vec();
    for t in (0..=t_start).rev() {
        let ab = schedule.alpha_bar(t);
        let ab_prev = if t == 0 {
            1.0
        } else {
            schedule.alpha_bar(t - 1)
        };
        let e = eps(&z, t);
        for (zi, ei) in z.iter_mut().zip(&e) {
            let x0 = (*zi - (1.0 - ab).sqrt() * ei) / ab.sqrt();
            *zi = ab_prev.sqrt() * x0 + (1.0 - ab_prev).sqrt() * ei;
        }
    }
    z
}

/// Optimal noise prediction for standard normal data, written out directly.
pub fn gaussian_eps(schedule: &NoiseSchedule) -> impl Fn(&[f64], usize) -> Vec<f64> + '_ {
    move |z, t| {
        let ab = schedule.alpha_bar(t);
        z.iter()
            .map(|v| (1.0 - ab).sqrt() * v / (ab + (1.0 - ab)))
            .collect()
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
