use crate::error::{Error, Result};

pub const DEFAULT_TRAIN_STEPS: usize = 1000;
pub const DEFAULT_BETA_START: f64 = 1e-4;
pub const DEFAULT_BETA_END: f64 = 0.02;

/// Per-timestep `beta_t` and cumulative `alpha_bar_t = prod_{s<=t} (1 - beta_s)`.
///
/// Kept in `f64` regardless of the latent scalar type.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

impl NoiseSchedule {
    pub fn from_betas(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::param("betas", "schedule needs at least one step"));
        }
        if let Some(b) = betas.iter().find(|&&b| !(b > 0.0 && b < 1.0)) {
            return Err(Error::param("betas", format!("{b} not in (0, 1)")));
        }
        if betas.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::param("betas", "must be non-decreasing"));
        }
        let alpha_bars = cumulative_keep_products(&betas);
        Ok(Self { betas, alpha_bars })
    }

    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t]
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bars[t]
    }

    pub(crate) fn check_timestep(&self, t: usize) -> Result<()> {
        if t >= self.steps() {
            return Err(Error::param(
                "timestep",
                format!("{t} outside 0..{}", self.steps()),
            ));
        }
        Ok(())
    }
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        make_linear_schedule(DEFAULT_TRAIN_STEPS, DEFAULT_BETA_START, DEFAULT_BETA_END)
            .expect("default schedule is valid")
    }
}

/// Error-free sum: `a + b == s + e` exactly.
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Running products of `1 - beta` carried as double-double (hi + lo) values,
/// rounded to `f64` only when stored.
fn cumulative_keep_products(betas: &[f64]) -> Vec<f64> {
    let (mut hi, mut lo) = (1.0f64, 0.0f64);
    betas
        .iter()
        .map(|&b| {
            let (xh, xl) = two_sum(1.0, -b);
            let p = hi * xh;
            let err = hi.mul_add(xh, -p) + (hi * xl + lo * xh);
            let s = p + err;
            lo = err - (s - p);
            hi = s;
            hi + lo
        })
        .collect()
}

/// `beta_t` linearly interpolated from `beta_start` (t = 0) to `beta_end` (t = T-1).
pub fn make_linear_schedule(steps: usize, beta_start: f64, beta_end: f64) -> Result<NoiseSchedule> {
    if steps == 0 {
        return Err(Error::param("diffusion_steps", "must be >= 1"));
    }
    if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
        return Err(Error::param(
            "beta bounds",
            format!("need 0 < {beta_start} <= {beta_end} < 1"),
        ));
    }
    let betas = (0..steps)
        .map(|t| {
            if steps == 1 {
                beta_start
            } else {
                let frac = t as f64 / (steps - 1) as f64;
                (beta_start + frac * (beta_end - beta_start)).min(beta_end)
            }
        })
        .collect();
    NoiseSchedule::from_betas(betas)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extended_product_tracks_exact_value() {
        // (1 - b)^n evaluated with 300-bit arithmetic, rounded to f64
        let cases: [(f64, [(usize, f64); 5]); 2] = [
            (
                1e-4,
                [
                    (1, 0.9999),
                    (10, 0.999000449880021),
                    (100, 0.9900493386913708),
                    (419, 0.9589636631801262),
                    (1000, 0.9048328935585462),
                ],
            ),
            (
                0.02,
                [
                    (1, 0.98),
                    (10, 0.8170728068875469),
                    (100, 0.1326195558947532),
                    (419, 0.00021072968363434482),
                    (1000, 1.682967357215955e-09),
                ],
            ),
        ];
        for (b, refs) in cases {
            let bars = cumulative_keep_products(&vec![b; 1000]);
            for (n, reference) in refs {
                let v = bars[n - 1];
                assert!(
                    (v - reference).abs() <= f64::EPSILON * reference,
                    "{b} {n}: {v}"
                );
            }
        }
    }

    #[test]
    fn single_step() {
        let s = make_linear_schedule(1, 0.3, 0.5).unwrap();
        assert_eq!(s.betas(), &[0.3]);
        assert_eq!(s.alpha_bar(0), 0.7);
    }

    #[test]
    fn constant_beta_closed_form() {
        let b = 0.01;
        let s = make_linear_schedule(200, b, b).unwrap();
        for t in 0..200 {
            let expect = (1.0 - b).powi(t as i32 + 1);
            assert!((s.alpha_bar(t) - expect).abs() <= 1e-14 * expect);
        }
    }

    #[test]
    fn default_schedule_shape() {
        let s = NoiseSchedule::default();
        assert_eq!(s.steps(), 1000);
        assert_eq!(s.beta(0), 1e-4);
        assert_eq!(s.beta(999), 0.02);
        assert!(s.alpha_bars().windows(2).all(|w| w[1] < w[0]));
        assert!(s.alpha_bar(999) < 1e-4);
    }

    #[test]
    fn invalid_bounds() {
        assert!(make_linear_schedule(0, 0.1, 0.2).is_err());
        assert!(make_linear_schedule(10, 0.0, 0.2).is_err());
        assert!(make_linear_schedule(10, 0.3, 0.2).is_err());
        assert!(make_linear_schedule(10, 0.1, 1.0).is_err());
        assert!(NoiseSchedule::from_betas(vec![0.2, 0.1]).is_err());
    }
}
