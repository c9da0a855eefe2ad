//! Deterministic DDIM sampling (eta = 0) with classifier-free guidance.
//!
//! The sampler treats the denoiser as an opaque noise predictor over the fourth slot of
//! a four-frame context pack. Timesteps are taken with a trailing uniform stride so
//! that the first step always starts at the noisiest training timestep.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::action::ActionLabel;
use crate::error::{Error, Result};

/// Dense `height x width x channels` buffer; one frame of the context pack.
#[derive(Debug, Clone, PartialEq)]
pub struct Slot {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Slot {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width * channels {
            return Err(Error::ShapeMismatch(format!(
                "{} elements for a {height}x{width}x{channels} slot",
                data.len()
            )));
        }
        Ok(Self { height, width, channels, data })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self { height, width, channels, data: vec![0.0; height * width * channels] }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Seeded standard-normal sample of the given shape.
    pub fn gaussian(height: usize, width: usize, channels: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..height * width * channels).map(|_| StandardNormal.sample(&mut rng)).collect();
        Self { height, width, channels, data }
    }

    pub fn max_abs_diff(&self, other: &Slot) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// `[t-2, t-1, t, t+1]`, oldest first; the last slot holds noise or a partial sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextPack {
    slots: [Slot; 4],
}

impl ContextPack {
    pub fn shape(&self) -> (usize, usize, usize) {
        self.slots[0].shape()
    }

    pub fn slots(&self) -> &[Slot; 4] {
        &self.slots
    }

    pub fn context(&self) -> &[Slot] {
        &self.slots[..3]
    }

    pub fn next(&self) -> &Slot {
        &self.slots[3]
    }

    pub fn unpack(self) -> ([Slot; 3], Slot) {
        let [a, b, c, d] = self.slots;
        ([a, b, c], d)
    }
}

/// Stacks three context slots and the next-frame slot along the frame dimension.
pub fn pack_context(context: [Slot; 3], next: Slot) -> Result<ContextPack> {
    let shape = next.shape();
    if let Some(bad) = context.iter().find(|s| s.shape() != shape) {
        return Err(Error::ShapeMismatch(format!("slot {:?} vs next-frame slot {:?}", bad.shape(), shape)));
    }
    let [a, b, c] = context;
    Ok(ContextPack { slots: [a, b, c, next] })
}

/// Conditioning token passed to the denoiser.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Conditioning {
    Action(ActionLabel),
    Unconditional,
}

/// Noise predictor for the fourth slot. Must be deterministic in its inputs.
pub trait Denoiser: Send + Sync {
    fn evaluate(&self, pack: &ContextPack, timestep: usize, cond: Conditioning) -> Result<Slot>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScheduleConfig {
    pub train_steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub sampling_steps: usize,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self { train_steps: 1000, beta_start: 1e-4, beta_end: 0.02, sampling_steps: 10 }
    }
}

/// Linear-beta noise schedule with a strictly decreasing sampling subsequence.
#[derive(Debug, Clone, PartialEq)]
pub struct DdimSchedule {
    betas: Vec<f64>,
    alphas_cumprod: Vec<f64>,
    timesteps: Vec<usize>,
}

impl DdimSchedule {
    pub fn new(config: &ScheduleConfig) -> Result<Self> {
        let n = config.train_steps;
        let k = config.sampling_steps;
        if n < 1 || k < 1 || k > n {
            return Err(Error::InvalidArgument(format!("schedule with {n} train / {k} sampling steps")));
        }
        let ok = |b: f64| b > 0.0 && b < 1.0;
        if !ok(config.beta_start) || !ok(config.beta_end) || config.beta_end < config.beta_start {
            return Err(Error::InvalidArgument(format!(
                "betas must satisfy 0 < start <= end < 1, got {} .. {}",
                config.beta_start, config.beta_end
            )));
        }
        let betas: Vec<f64> = (0..n)
            .map(|i| {
                if n == 1 {
                    config.beta_start
                } else {
                    config.beta_start + (config.beta_end - config.beta_start) * i as f64 / (n - 1) as f64
                }
            })
            .collect();
        let mut prod = 1.0;
        let alphas_cumprod = betas
            .iter()
            .map(|b| {
                prod *= 1.0 - b;
                prod
            })
            .collect();
        let stride = n as f64 / k as f64;
        let timesteps = (0..k).map(|i| n - 1 - (i as f64 * stride).round() as usize).collect();
        Ok(Self { betas, alphas_cumprod, timesteps })
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alphas_cumprod(&self) -> &[f64] {
        &self.alphas_cumprod
    }

    /// Sampling timesteps, strictly decreasing.
    pub fn timesteps(&self) -> &[usize] {
        &self.timesteps
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alphas_cumprod[t]
    }
}

/// `eps_u + w * (eps_c - eps_u)`.
pub fn guided_noise(cond: &Slot, uncond: &Slot, guidance_w: f64) -> Slot {
    let data = cond.data.iter().zip(&uncond.data).map(|(c, u)| u + guidance_w * (c - u)).collect();
    Slot { data, ..*cond }
}

fn check_finite(slot: &Slot, what: &str) -> Result<()> {
    if slot.data.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

/// Runs the deterministic DDIM update over the schedule and returns the final clean
/// estimate of the fourth slot.
pub fn ddim_sample(
    denoiser: &dyn Denoiser,
    schedule: &DdimSchedule,
    context: [Slot; 3],
    action: ActionLabel,
    guidance_w: f64,
    seed: u64,
) -> Result<Slot> {
    if !(guidance_w >= 0.0) || !guidance_w.is_finite() {
        return Err(Error::InvalidArgument(format!("guidance weight {guidance_w}")));
    }
    let (h, w, c) = context[0].shape();
    let noise = Slot::gaussian(h, w, c, seed);
    let mut pack = pack_context(context, noise)?;
    let steps = schedule.timesteps();
    let mut x0 = Slot::zeros(h, w, c);
    for (i, &t) in steps.iter().enumerate() {
        let eps_c = denoiser.evaluate(&pack, t, Conditioning::Action(action))?;
        check_finite(&eps_c, "denoiser (conditional)")?;
        if eps_c.shape() != pack.next().shape() {
            return Err(Error::ShapeMismatch(format!("denoiser returned {:?}", eps_c.shape())));
        }
        let eps = if guidance_w == 1.0 {
            eps_c
        } else {
            let eps_u = denoiser.evaluate(&pack, t, Conditioning::Unconditional)?;
            check_finite(&eps_u, "denoiser (unconditional)")?;
            guided_noise(&eps_c, &eps_u, guidance_w)
        };
        let ab = schedule.alpha_bar(t);
        let ab_prev = steps.get(i + 1).map_or(1.0, |&tp| schedule.alpha_bar(tp));
        let (sa, sb) = (ab.sqrt(), (1.0 - ab).sqrt());
        let (sa_prev, sb_prev) = (ab_prev.sqrt(), (1.0 - ab_prev).sqrt());
        let x = &pack.slots[3].data;
        x0.data = x.iter().zip(&eps.data).map(|(x, e)| (x - sb * e) / sa).collect();
        let next: Vec<f64> = x0.data.iter().zip(&eps.data).map(|(x0, e)| sa_prev * x0 + sb_prev * e).collect();
        pack.slots[3].data = next;
        check_finite(&x0, "sampler update")?;
    }
    Ok(x0)
}

/// Denoiser that knows the clean target and returns the exact noise implied by its input.
#[derive(Debug, Clone)]
pub struct TargetDenoiser {
    pub target: Slot,
    pub alphas_cumprod: Vec<f64>,
}

impl TargetDenoiser {
    pub fn new(target: Slot, schedule: &DdimSchedule) -> Self {
        Self { target, alphas_cumprod: schedule.alphas_cumprod().to_vec() }
    }
}

impl Denoiser for TargetDenoiser {
    fn evaluate(&self, pack: &ContextPack, timestep: usize, _cond: Conditioning) -> Result<Slot> {
        let ab = self.alphas_cumprod[timestep];
        let (sa, sb) = (ab.sqrt(), (1.0 - ab).sqrt());
        let data = pack.next().data.iter().zip(&self.target.data).map(|(x, x0)| (x - sa * x0) / sb).collect();
        Slot::new(self.target.height, self.target.width, self.target.channels, data)
    }
}
