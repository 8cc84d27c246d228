//! Pseudo linear multistep sampling.
//!
//! Noise predictions from the most recent steps are blended with
//! Adams-Bashforth weights (orders 1 to 4, lower orders while the history
//! fills up) and each transfer applies the deterministic implicit update
//!
//! ```text
//! z_prev = sqrt(ab_prev / ab_t) * (z_t - sqrt(1 - ab_t) * eps) + sqrt(1 - ab_prev) * eps
//! ```
//!
//! The last transfer lands on the clean sample (`ab_prev = 1`).

use std::collections::VecDeque;

use super::schedule::NoiseSchedule;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::{Latent, Tensor3};

pub const DEFAULT_SAMPLING_STEPS: usize = 50;
pub const MAX_ORDER: usize = 4;

/// Anything that predicts the noise in a latent at a timestep.
pub trait NoisePredictor<T> {
    fn predict(&mut self, latent: &Latent<T>, timestep: usize) -> Latent<T>;
}

impl<T, F> NoisePredictor<T> for F
where
    F: FnMut(&Latent<T>, usize) -> Latent<T>,
{
    fn predict(&mut self, latent: &Latent<T>, timestep: usize) -> Latent<T> {
        self(latent, timestep)
    }
}

/// Adams-Bashforth weights, newest prediction first.
pub fn multistep_weights(order: usize) -> &'static [f64] {
    const W1: [f64; 1] = [1.0];
    const W2: [f64; 2] = [3.0 / 2.0, -1.0 / 2.0];
    const W3: [f64; 3] = [23.0 / 12.0, -16.0 / 12.0, 5.0 / 12.0];
    const W4: [f64; 4] = [55.0 / 24.0, -59.0 / 24.0, 37.0 / 24.0, -9.0 / 24.0];
    match order {
        1 => &W1,
        2 => &W2,
        3 => &W3,
        _ => &W4,
    }
}

/// `num_steps` evenly spaced timesteps from `t_start` down to 0 (duplicates
/// dropped when `t_start + 1 < num_steps`).
pub fn sampling_timesteps(t_start: usize, num_steps: usize) -> Result<Vec<usize>> {
    if num_steps == 0 {
        return Err(Error::param("steps", "empty timestep sequence"));
    }
    if num_steps == 1 {
        return Ok(vec![t_start]);
    }
    let span = num_steps - 1;
    let mut ts: Vec<usize> = (0..num_steps)
        .map(|k| (t_start * (span - k) * 2 + span) / (2 * span))
        .collect();
    ts.dedup();
    Ok(ts)
}

/// Mutable part of one trajectory.
#[derive(Clone, Debug)]
pub struct SamplerState<T> {
    /// Newest first, at most [`MAX_ORDER`] entries.
    pub eps_history: VecDeque<Latent<T>>,
    pub latent: Latent<T>,
    /// Index into the timestep sequence of the next evaluation.
    pub step: usize,
}

#[derive(Clone, Debug)]
pub struct PlmsSampler<'s, T> {
    schedule: &'s NoiseSchedule,
    timesteps: Vec<usize>,
    max_order: usize,
    state: SamplerState<T>,
}

impl<'s, T: Real> PlmsSampler<'s, T> {
    pub fn new(
        schedule: &'s NoiseSchedule,
        z_start: Latent<T>,
        t_start: usize,
        num_steps: usize,
    ) -> Result<Self> {
        schedule.check_timestep(t_start)?;
        Ok(Self {
            schedule,
            timesteps: sampling_timesteps(t_start, num_steps)?,
            max_order: MAX_ORDER,
            state: SamplerState {
                eps_history: VecDeque::with_capacity(MAX_ORDER),
                latent: z_start,
                step: 0,
            },
        })
    }

    /// Caps the multistep order; 1 gives plain deterministic implicit steps.
    pub fn with_max_order(mut self, order: usize) -> Result<Self> {
        if !(1..=MAX_ORDER).contains(&order) {
            return Err(Error::param("order", format!("{order} not in 1..=4")));
        }
        self.max_order = order;
        Ok(self)
    }

    pub fn timesteps(&self) -> &[usize] {
        &self.timesteps
    }

    pub fn state(&self) -> &SamplerState<T> {
        &self.state
    }

    pub fn is_done(&self) -> bool {
        self.state.step >= self.timesteps.len()
    }

    /// Performs one denoiser evaluation and transfer.
    pub fn step(&mut self, denoiser: &mut impl NoisePredictor<T>) -> Result<()> {
        let step = self.state.step;
        let Some(&t) = self.timesteps.get(step) else {
            return Err(Error::param("step", "sampler already finished"));
        };
        let diverged = Error::Diverged { step, timestep: t };
        let eps = denoiser.predict(&self.state.latent, t);
        if eps.shape() != self.state.latent.shape() {
            return Err(Error::dims(
                "noise prediction",
                format!("{:?}", self.state.latent.shape()),
                format!("{:?}", eps.shape()),
            ));
        }
        if !eps.is_finite() {
            return Err(diverged);
        }

        let history = &mut self.state.eps_history;
        history.push_front(eps);
        history.truncate(self.max_order);
        let weights = multistep_weights(history.len());
        let mut combined = vec![T::zero(); self.state.latent.len()];
        for (w, e) in weights.iter().zip(history.iter()) {
            let w = T::lit(*w);
            for (acc, &v) in combined.iter_mut().zip(e.data()) {
                *acc = *acc + w * v;
            }
        }

        let ab_t = self.schedule.alpha_bar(t);
        let ab_prev = self
            .timesteps
            .get(step + 1)
            .map_or(1.0, |&tp| self.schedule.alpha_bar(tp));
        let ratio = T::lit((ab_prev / ab_t).sqrt());
        let noise_t = T::lit((1.0 - ab_t).sqrt());
        let noise_prev = T::lit((1.0 - ab_prev).sqrt());
        let (c, h, w) = self.state.latent.shape();
        let next: Vec<T> = self
            .state
            .latent
            .data()
            .iter()
            .zip(&combined)
            .map(|(&z, &e)| ratio * (z - noise_t * e) + noise_prev * e)
            .collect();
        if next.iter().any(|v| !v.is_finite()) {
            return Err(diverged);
        }
        self.state.latent = Tensor3::new(c, h, w, next)?;
        self.state.step += 1;
        Ok(())
    }

    pub fn run(mut self, denoiser: &mut impl NoisePredictor<T>) -> Result<Latent<T>> {
        while !self.is_done() {
            self.step(denoiser)?;
        }
        Ok(self.state.latent)
    }
}

/// Samples from `z_start` at `t_start` down to a clean latent in `num_steps`
/// denoiser evaluations.
pub fn plms_sample<T: Real>(
    denoiser: &mut impl NoisePredictor<T>,
    z_start: &Latent<T>,
    t_start: usize,
    schedule: &NoiseSchedule,
    num_steps: usize,
) -> Result<Latent<T>> {
    PlmsSampler::new(schedule, z_start.clone(), t_start, num_steps)?.run(denoiser)
}
