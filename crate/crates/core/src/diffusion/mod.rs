//! Forward diffusion, SDEdit-style starting points and multistep sampling.

mod sampler;
mod schedule;

pub use sampler::{
    multistep_weights, plms_sample, sampling_timesteps, NoisePredictor, PlmsSampler, SamplerState,
    DEFAULT_SAMPLING_STEPS, MAX_ORDER,
};
pub use schedule::{
    make_linear_schedule, NoiseSchedule, DEFAULT_BETA_END, DEFAULT_BETA_START, DEFAULT_TRAIN_STEPS,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::{Latent, Tensor3};

/// `sqrt(ab_t) * z0 + sqrt(1 - ab_t) * noise`.
pub fn forward_diffuse<T: Real>(
    z0: &Latent<T>,
    t: usize,
    noise: &Latent<T>,
    schedule: &NoiseSchedule,
) -> Result<Latent<T>> {
    schedule.check_timestep(t)?;
    let ab = schedule.alpha_bar(t);
    z0.axpby(T::lit(ab.sqrt()), noise, T::lit((1.0 - ab).sqrt()))
}

/// Unit-normal tensor drawn from `rng`.
pub fn standard_normal<T: Real>(rng: &mut impl Rng, shape: (usize, usize, usize)) -> Latent<T> {
    let (c, h, w) = shape;
    let data = (0..c * h * w)
        .map(|_| {
            let v: f64 = StandardNormal.sample(rng);
            T::lit(v)
        })
        .collect();
    Tensor3::new(c, h, w, data).expect("normal samples are finite")
}

/// The generator behind every seeded draw in the crate.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Unit-normal tensor fully determined by `seed`.
pub fn seeded_noise<T: Real>(shape: (usize, usize, usize), seed: u64) -> Latent<T> {
    standard_normal(&mut seeded_rng(seed), shape)
}

/// First timestep for a given denoising strength: `round(strength * (T - 1))`.
pub fn start_timestep(strength: f64, schedule: &NoiseSchedule) -> Result<usize> {
    if !(0.0..=1.0).contains(&strength) {
        return Err(Error::param(
            "strength",
            format!("{strength} not in [0, 1]"),
        ));
    }
    Ok((strength * (schedule.steps() - 1) as f64).round() as usize)
}

/// Perturbs an encoded guide image to the timestep selected by `strength`.
///
/// Strength 0 returns the input untouched at timestep 0. Otherwise the noise
/// is `seeded_noise(shape, seed)`.
pub fn sdedit_init<T: Real>(
    encoded_input: &Latent<T>,
    strength: f64,
    schedule: &NoiseSchedule,
    seed: u64,
) -> Result<(Latent<T>, usize)> {
    let t0 = start_timestep(strength, schedule)?;
    if strength == 0.0 {
        return Ok((encoded_input.clone(), 0));
    }
    let noise = seeded_noise(encoded_input.shape(), seed);
    Ok((forward_diffuse(encoded_input, t0, &noise, schedule)?, t0))
}

/// Exact noise predictor when the clean data are `N(0, variance * I)`:
/// `eps(z, t) = sqrt(1 - ab_t) * z / (ab_t * variance + 1 - ab_t)`.
#[derive(Clone, Debug)]
pub struct GaussianDenoiser {
    alpha_bars: Vec<f64>,
    variance: f64,
}

impl GaussianDenoiser {
    pub fn new(schedule: &NoiseSchedule, variance: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::param("variance", "must be positive"));
        }
        Ok(Self {
            alpha_bars: schedule.alpha_bars().to_vec(),
            variance,
        })
    }

    /// Unit-variance data.
    pub fn standard(schedule: &NoiseSchedule) -> Self {
        Self::new(schedule, 1.0).expect("unit variance is valid")
    }

    pub fn coefficient(&self, t: usize) -> f64 {
        let ab = self.alpha_bars[t];
        (1.0 - ab).sqrt() / (ab * self.variance + (1.0 - ab))
    }
}

impl<T: Real> NoisePredictor<T> for GaussianDenoiser {
    fn predict(&mut self, latent: &Latent<T>, timestep: usize) -> Latent<T> {
        latent.scale(T::lit(self.coefficient(timestep)))
    }
}

/// Predicts zero noise everywhere.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroDenoiser;

impl<T: Real> NoisePredictor<T> for ZeroDenoiser {
    fn predict(&mut self, latent: &Latent<T>, _timestep: usize) -> Latent<T> {
        Tensor3::zeros(latent.channels(), latent.height(), latent.width())
    }
}
