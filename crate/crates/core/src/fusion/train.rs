//! Minibatch training with momentum, and a finite-difference gradient check.

use alloc::vec;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::loss::loss_terms;
use super::net::FusionNet;
use super::pyramid::{extract_features, information_measure, preservation_degrees, PreservationWeights};
use super::ssim::WINDOW;
use crate::{Error, Executor, ImageF, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// MSE weight in the loss.
    pub alpha: f64,
    /// Softmax temperature for the preservation weights; `None` uses the
    /// mean information measure over the dataset.
    pub temperature: Option<f64>,
    pub rng_seed: u64,
    /// Train on one fixed random `p × p` crop per pair instead of the whole
    /// pair. Weights are still measured on the whole pair.
    pub patch_size: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            momentum: 0.9,
            epochs: 50,
            batch_size: 8,
            alpha: 20.0,
            temperature: None,
            rng_seed: 0,
            patch_size: Some(32),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::param("learning rate must be finite and nonnegative"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::param("momentum must lie in [0, 1)"));
        }
        if self.batch_size == 0 {
            return Err(Error::param("batch size must be positive"));
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::param("alpha must be finite and nonnegative"));
        }
        if let Some(c) = self.temperature {
            if !(c > 0.0) || !c.is_finite() {
                return Err(Error::param("temperature must be positive"));
            }
        }
        if let Some(p) = self.patch_size {
            if p < WINDOW {
                return Err(Error::param("patch size must be at least the SSIM window"));
            }
        }
        Ok(())
    }
}

/// Two co-located 1-channel sub-images of one block.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub first: ImageF,
    pub second: ImageF,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub net: FusionNet,
    /// Mean loss per epoch.
    pub loss_history: Vec<f64>,
    /// Temperature actually used for the preservation weights.
    pub temperature: f64,
}

/// Gradient of the loss split into the SSIM part and the α-scaled MSE part.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterGradients {
    pub value: f64,
    pub ssim: Vec<f64>,
    pub mse: Vec<f64>,
}

impl ParameterGradients {
    pub fn total(&self) -> Vec<f64> {
        self.ssim.iter().zip(&self.mse).map(|(a, b)| a + b).collect()
    }
}

fn sample_loss(net: &FusionNet, first: &ImageF, second: &ImageF, w: &PreservationWeights, alpha: f64) -> Result<f64> {
    let fused = net.fuse(first, second)?;
    Ok(loss_terms(&fused, first, second, w, alpha)?.value())
}

fn sample_gradient(
    net: &FusionNet,
    first: &ImageF,
    second: &ImageF,
    w: &PreservationWeights,
    alpha: f64,
) -> Result<(f64, Vec<f64>)> {
    let act = net.forward(first, second)?;
    if act.output().iter().any(|v| !v.is_finite()) {
        return Ok((f64::NAN, Vec::new()));
    }
    let (h, wd) = first.size();
    let mask = first.mask().iter().zip(second.mask()).map(|(&a, &b)| a && b).collect();
    let fused = ImageF::from_data(h, wd, 1, act.output().to_vec())?.with_mask(mask)?;
    let terms = loss_terms(&fused, first, second, w, alpha)?;
    Ok((terms.value(), net.backward(&act, &terms.gradient())))
}

/// Loss and its parameter gradient, decomposed into SSIM and MSE parts.
pub fn parameter_gradients(
    net: &FusionNet,
    first: &ImageF,
    second: &ImageF,
    w: &PreservationWeights,
    alpha: f64,
) -> Result<ParameterGradients> {
    let act = net.forward(first, second)?;
    let (h, wd) = first.size();
    let fused = ImageF::from_data(h, wd, 1, act.output().to_vec())?;
    let terms = loss_terms(&fused, first, second, w, alpha)?;
    let mse: Vec<f64> = terms.mse_gradient.iter().map(|g| alpha * g).collect();
    Ok(ParameterGradients {
        value: terms.value(),
        ssim: net.backward(&act, &terms.ssim_gradient),
        mse: net.backward(&act, &mse),
    })
}

/// Largest relative difference between the analytic parameter gradient and
/// central differences (step 1e-4) over `samples` random parameters.
/// Relative error is `|a − n| / max(|a|, |n|, 1e-6)`.
pub fn gradient_check(
    net: &FusionNet,
    first: &ImageF,
    second: &ImageF,
    w: &PreservationWeights,
    alpha: f64,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let analytic = parameter_gradients(net, first, second, w, alpha)?.total();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    let mut probe = net.clone();
    for _ in 0..samples {
        let k = rng.gen_range(0..net.parameter_count());
        let p0 = net.parameters()[k];
        probe.parameters_mut()[k] = p0 + h;
        let up = sample_loss(&probe, first, second, w, alpha)?;
        probe.parameters_mut()[k] = p0 - h;
        let down = sample_loss(&probe, first, second, w, alpha)?;
        probe.parameters_mut()[k] = p0;
        let numeric = (up - down) / (2.0 * h);
        let a = analytic[k];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    Ok(worst)
}

struct Sample {
    first: ImageF,
    second: ImageF,
    weights: PreservationWeights,
}

fn crop_pair(pair: &TrainingPair, patch: usize, rng: &mut ChaCha8Rng) -> (ImageF, ImageF) {
    let (h, w) = pair.first.size();
    if patch >= h || patch >= w {
        return (pair.first.clone(), pair.second.clone());
    }
    let mut best = (0, 0, -1.0);
    for _ in 0..16 {
        let (y, x) = (rng.gen_range(0..=h - patch), rng.gen_range(0..=w - patch));
        let cov = pair.first.crop(y, x, patch, patch).valid_fraction().min(pair.second.crop(y, x, patch, patch).valid_fraction());
        if cov > best.2 {
            best = (y, x, cov);
        }
        if cov >= 1.0 {
            break;
        }
    }
    let (y, x, _) = best;
    (pair.first.crop(y, x, patch, patch), pair.second.crop(y, x, patch, patch))
}

/// Information measures of both images of every pair.
pub fn pair_measures<E: Executor>(data: &[TrainingPair], exec: &E) -> Result<Vec<(f64, f64)>> {
    exec.map(data.len(), |k| {
        let p = &data[k];
        Ok((
            information_measure(&extract_features(&p.first)?),
            information_measure(&extract_features(&p.second)?),
        ))
    })
    .into_iter()
    .collect()
}

/// Trains a copy of `net` on `data`. Preservation weights are measured once
/// per pair on the full pair and held constant. Per-sample gradients are
/// computed through `exec` and summed in sample order, so results do not
/// depend on the executor.
pub fn train<E: Executor>(net: &FusionNet, config: &TrainConfig, data: &[TrainingPair], exec: &E) -> Result<TrainOutcome> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::param("training dataset is empty"));
    }
    for p in data {
        if p.first.size() != p.second.size() || p.first.channels() != 1 || p.second.channels() != 1 {
            return Err(Error::param("training pairs must be equal-size 1-channel images"));
        }
    }
    let measures = pair_measures(data, exec)?;
    let temperature = match config.temperature {
        Some(c) => c,
        None => {
            let mean = measures.iter().map(|(a, b)| a + b).sum::<f64>() / (2 * measures.len()) as f64;
            if mean > 0.0 {
                mean
            } else {
                1.0
            }
        }
    };
    let mut crop_rng = ChaCha8Rng::seed_from_u64(config.rng_seed ^ 0x5eed_c0de);
    let mut samples = Vec::with_capacity(data.len());
    for (pair, &(hi, hj)) in data.iter().zip(&measures) {
        let weights = preservation_degrees(hi, hj, temperature)?;
        let (first, second) = match config.patch_size {
            Some(p) => crop_pair(pair, p, &mut crop_rng),
            None => (pair.first.clone(), pair.second.clone()),
        };
        samples.push(Sample { first, second, weights });
    }

    let mut net = net.clone();
    let mut velocity = vec![0.0; net.parameter_count()];
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut history = Vec::with_capacity(config.epochs);
    let mut losses = vec![0.0; samples.len()];
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for (batch, idx) in order.chunks(config.batch_size).enumerate() {
            let results = exec.map(idx.len(), |k| {
                let s = &samples[idx[k]];
                sample_gradient(&net, &s.first, &s.second, &s.weights, config.alpha)
            });
            let mut grad = vec![0.0; net.parameter_count()];
            for (k, r) in results.into_iter().enumerate() {
                let (value, g) = r?;
                if !value.is_finite() {
                    return Err(Error::TrainingDiverged { epoch, batch });
                }
                losses[idx[k]] = value;
                grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
            }
            let scale = config.learning_rate / idx.len() as f64;
            for ((p, v), g) in net.parameters_mut().iter_mut().zip(&mut velocity).zip(&grad) {
                *v = config.momentum * *v - scale * g;
                *p += *v;
            }
            if net.parameters().iter().any(|p| !p.is_finite()) {
                return Err(Error::TrainingDiverged { epoch, batch });
            }
        }
        history.push(losses.iter().sum::<f64>() / losses.len() as f64);
    }
    Ok(TrainOutcome {
        net,
        loss_history: history,
        temperature,
    })
}
