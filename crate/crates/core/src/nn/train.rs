use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{loss, loss_and_grad, predict, Decision, Linear, NetParams, Sample};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon_adam: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon_adam: 1e-8,
            batch_size: 128,
            epochs: 20,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::param(format!(
                "learning rate must be non-negative, got {}",
                self.lr
            )));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::param(format!("{name} must lie in (0, 1), got {b}")));
            }
        }
        if !(self.epsilon_adam > 0.0) {
            return Err(Error::param("epsilon_adam must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::param("batch size must be at least 1"));
        }
        Ok(())
    }
}

/// Adam over a flat parameter vector; masked coordinates are never touched.
struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    fn update(&mut self, cfg: &TrainConfig, theta: &mut [f64], grad: &[f64], frozen: Option<&[bool]>) {
        self.step += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.step);
        let c2 = 1.0 - cfg.beta2.powi(self.step);
        for i in 0..theta.len() {
            if frozen.is_some_and(|f| f[i]) {
                continue;
            }
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * grad[i];
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            let mhat = self.m[i] / c1;
            let vhat = self.v[i] / c2;
            theta[i] -= cfg.lr * mhat / (vhat.sqrt() + cfg.epsilon_adam);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: NetParams,
    /// Mean training loss per epoch.
    pub history: Vec<f64>,
}

fn check_dataset(data: &[Sample], n_classes: usize) -> Result<()> {
    if data.is_empty() {
        return Err(Error::param("training set is empty"));
    }
    let mut seen = vec![false; n_classes];
    for s in data {
        if s.label >= n_classes {
            return Err(Error::param(format!("label {} outside {n_classes} classes", s.label)));
        }
        seen[s.label] = true;
    }
    if seen.iter().filter(|v| **v).count() < 2 {
        return Err(Error::param("training set must contain at least 2 classes"));
    }
    Ok(())
}

fn train_masked(data: &[Sample], cfg: &TrainConfig, init: NetParams, frozen: Option<&[bool]>) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_dataset(data, init.arch.n_classes)?;
    let mut params = init;
    let mut theta = params.to_flat();
    let mut adam = Adam::new(theta.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &data[i]).collect();
            let (l, g) = loss_and_grad(&params, &batch)?;
            epoch_loss += l * batch.len() as f64;
            adam.update(cfg, &mut theta, &g.to_flat(), frozen);
            params.set_flat(&theta);
        }
        history.push(epoch_loss / data.len() as f64);
    }
    Ok(TrainOutcome { params, history })
}

/// Mini-batch Adam on mean cross-entropy. The shuffle schedule depends only
/// on `cfg.seed`.
pub fn train(data: &[Sample], cfg: &TrainConfig, init: NetParams) -> Result<TrainOutcome> {
    train_masked(data, cfg, init, None)
}

/// Copies and freezes the pretrained attention branch, re-initializes
/// `classifier2` for `n_classes` outputs from `cfg.seed`, and fine-tunes
/// everything else on `data`.
pub fn sat_transfer(
    pretrained: &NetParams,
    data: &[Sample],
    n_classes: usize,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    if pretrained.branch.is_none() {
        return Err(Error::param("transfer needs a pretrained attention branch"));
    }
    if n_classes < 2 {
        return Err(Error::param("target task needs at least 2 classes"));
    }
    let mut p = pretrained.clone();
    p.arch.n_classes = n_classes;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5A7_0000);
    p.classifier2 = Linear::init(p.arch.logit_dim, n_classes, &mut rng);
    if cfg.epochs == 0 {
        return Ok(TrainOutcome {
            params: p,
            history: Vec::new(),
        });
    }
    let mask = p.branch_mask();
    train_masked(data, cfg, p, Some(&mask))
}

pub fn accuracy(p: &NetParams, data: &[Sample], decision: Decision) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::param("cannot score an empty set"));
    }
    let mut hits = 0;
    for s in data {
        if predict(p, s, decision)? == s.label {
            hits += 1;
        }
    }
    Ok(hits as f64 / data.len() as f64)
}

/// Largest relative difference between analytic gradients and central
/// differences `(f(θ+h) − f(θ−h))/2h` over `coords` random coordinates
/// (all of them if the model is smaller).
pub fn grad_check(p: &NetParams, batch: &[Sample], h: f64, coords: usize, seed: u64) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::param("gradient check needs a nonempty batch"));
    }
    let refs: Vec<&Sample> = batch.iter().collect();
    let (_, g) = loss_and_grad(p, &refs)?;
    let analytic = g.to_flat();
    let theta = p.to_flat();
    let n = theta.len();
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if coords < n {
        idx.shuffle(&mut rng);
        idx.truncate(coords);
        idx.sort_unstable();
    }
    let mut probe = p.clone();
    let mut worst: f64 = 0.0;
    let mut shifted = theta.clone();
    for &i in &idx {
        shifted[i] = theta[i] + h;
        probe.set_flat(&shifted);
        let up = loss(&probe, &refs)?;
        shifted[i] = theta[i] - h;
        probe.set_flat(&shifted);
        let down = loss(&probe, &refs)?;
        shifted[i] = theta[i];
        let numeric = (up - down) / (2.0 * h);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((analytic[i] - numeric).abs() / denom);
    }
    Ok(worst)
}
