//! Two-stage toy training over procedurally generated quadruplets.
//!
//! Stage 1 trains a per-pixel three-class zone classifier on
//! (constructed model image, garment image) → tri-zone GT. Stage 2 trains
//! the toy denoiser under the flow-matching loss to predict the real
//! model image conditioned on the constructed image, the garment, and the
//! zones predicted by stage 1. Plain SGD with momentum; everything is
//! deterministic under the configured seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::{flow_loss, DenoiserConfig, FlowError, FlowModel, FlowSample, Tensor, ToyDenoiser};
use crate::maskcore::{RgbImage, TriZoneMask, Zone};

/// Batch size used for full-scale training of the reference system.
/// Recorded for context; the toy trainer runs desk-scale settings below.
pub const FULL_SCALE_BATCH_SIZE: usize = 32;
/// AdamW learning rate used at full scale. The toy uses SGD + momentum.
pub const FULL_SCALE_LEARNING_RATE: f64 = 3e-5;
pub const FULL_SCALE_OPTIMIZER: &str = "AdamW";

/// One toy training record.
#[derive(Debug, Clone)]
pub struct ToyQuadruplet {
    /// Constructed (synthetic) model image — input.
    pub p_c: RgbImage,
    /// Real model image — supervision target.
    pub p_g: RgbImage,
    /// Ground-truth garment image.
    pub g_g: RgbImage,
    /// Tri-zone ground truth for p_c → p_g.
    pub m3g: TriZoneMask,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub seed: u64,
    pub stage1_steps: usize,
    pub stage2_steps: usize,
    pub batch_size: usize,
    pub stage1_lr: f64,
    pub stage2_lr: f64,
    pub momentum: f64,
    /// Fraction of the dataset held out for the stage-1 accuracy check.
    pub holdout_fraction: f64,
    pub hidden: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            stage1_steps: 300,
            stage2_steps: 100,
            batch_size: 8,
            stage1_lr: 0.5,
            stage2_lr: 0.05,
            momentum: 0.9,
            holdout_fraction: 0.1,
            hidden: 16,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainingReport {
    pub stage1_losses: Vec<f64>,
    pub stage2_losses: Vec<f64>,
    pub stage1_holdout_accuracy: f64,
    pub train_records: usize,
    pub holdout_records: usize,
}

impl TrainingReport {
    /// Loss curves as CSV: stage,step,loss.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("stage,step,loss\n");
        for (i, l) in self.stage1_losses.iter().enumerate() {
            out.push_str(&format!("1,{i},{l}\n"));
        }
        for (i, l) in self.stage2_losses.iter().enumerate() {
            out.push_str(&format!("2,{i},{l}\n"));
        }
        out
    }

    pub fn summary(&self) -> String {
        format!(
            "stage1: {} steps, loss {:.6} -> {:.6}; stage2: {} steps, loss {:.6} -> {:.6}; \
             stage1 holdout zone accuracy {:.4} ({} train / {} holdout records)",
            self.stage1_losses.len().saturating_sub(1),
            self.stage1_losses.first().copied().unwrap_or(f64::NAN),
            self.stage1_losses.last().copied().unwrap_or(f64::NAN),
            self.stage2_losses.len().saturating_sub(1),
            self.stage2_losses.first().copied().unwrap_or(f64::NAN),
            self.stage2_losses.last().copied().unwrap_or(f64::NAN),
            self.stage1_holdout_accuracy,
            self.train_records,
            self.holdout_records,
        )
    }
}

// ---------------------------------------------------------------------
// Stage 1: per-pixel zone classifier (shared-weight MLP over features)
// ---------------------------------------------------------------------

const STAGE1_FEATURES: usize = 8; // p_c rgb, g_g mean rgb, row frac, col frac
const ZONES: usize = 3;

/// Per-pixel MLP: features → hidden (tanh) → 3 logits.
pub(crate) struct ZoneClassifier {
    hidden: usize,
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
}

fn mean_rgb(img: &RgbImage) -> [f64; 3] {
    let mut sum = [0.0f64; 3];
    for px in img.pixels().chunks(3) {
        for k in 0..3 {
            sum[k] += px[k] as f64;
        }
    }
    let n = (img.pixels().len() / 3) as f64;
    [sum[0] / n / 255.0, sum[1] / n / 255.0, sum[2] / n / 255.0]
}

fn pixel_features(q: &ToyQuadruplet, row: u32, col: u32, garment_mean: &[f64; 3]) -> [f64; STAGE1_FEATURES] {
    let g = q.p_c.grid();
    let rgb = q.p_c.get(row, col);
    [
        rgb[0] as f64 / 255.0,
        rgb[1] as f64 / 255.0,
        rgb[2] as f64 / 255.0,
        garment_mean[0],
        garment_mean[1],
        garment_mean[2],
        row as f64 / (g.height - 1).max(1) as f64,
        col as f64 / (g.width - 1).max(1) as f64,
    ]
}

impl ZoneClassifier {
    fn new(hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let scale = (1.0 / STAGE1_FEATURES as f64).sqrt();
        let mut draw = |n: usize| (0..n).map(|_| rng.gen_range(-scale..scale)).collect::<Vec<_>>();
        Self {
            hidden,
            w1: draw(hidden * STAGE1_FEATURES),
            b1: vec![0.0; hidden],
            w2: draw(ZONES * hidden),
            b2: vec![0.0; ZONES],
        }
    }

    fn logits(&self, f: &[f64; STAGE1_FEATURES]) -> (Vec<f64>, Vec<f64>) {
        let h = self.hidden;
        let mut a = vec![0.0; h];
        for i in 0..h {
            let mut s = self.b1[i];
            for j in 0..STAGE1_FEATURES {
                s += self.w1[i * STAGE1_FEATURES + j] * f[j];
            }
            a[i] = s.tanh();
        }
        let mut z = vec![0.0; ZONES];
        for i in 0..ZONES {
            let mut s = self.b2[i];
            for j in 0..h {
                s += self.w2[i * h + j] * a[j];
            }
            z[i] = s;
        }
        (a, z)
    }

    pub(crate) fn predict_zone(&self, f: &[f64; STAGE1_FEATURES]) -> Zone {
        let (_, z) = self.logits(f);
        let mut best = 0;
        for i in 1..ZONES {
            if z[i] > z[best] {
                best = i;
            }
        }
        Zone::from_code(best as u8).unwrap()
    }

    /// Mean softmax cross-entropy over the batch, no update.
    fn eval_loss(&self, batch: &[(Vec<[f64; STAGE1_FEATURES]>, Vec<Zone>)]) -> f64 {
        let total_px: usize = batch.iter().map(|(f, _)| f.len()).sum();
        let inv = 1.0 / total_px.max(1) as f64;
        let mut loss = 0.0;
        for (features, targets) in batch {
            for (f, &target) in features.iter().zip(targets) {
                let (_, z) = self.logits(f);
                let zmax = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let sum: f64 = z.iter().map(|&v| (v - zmax).exp()).sum();
                let p = (z[target.code() as usize] - zmax).exp() / sum;
                loss -= p.max(1e-12).ln() * inv;
            }
        }
        loss
    }

    /// Mean softmax cross-entropy over the batch, with SGD applied in place.
    fn train_step(
        &mut self,
        batch: &[(Vec<[f64; STAGE1_FEATURES]>, Vec<Zone>)],
        lr: f64,
        momentum: f64,
        vel: &mut Stage1Velocity,
    ) -> f64 {
        let h = self.hidden;
        let mut gw1 = vec![0.0; self.w1.len()];
        let mut gb1 = vec![0.0; self.b1.len()];
        let mut gw2 = vec![0.0; self.w2.len()];
        let mut gb2 = vec![0.0; self.b2.len()];
        let total_px: usize = batch.iter().map(|(f, _)| f.len()).sum();
        let inv = 1.0 / total_px as f64;
        let mut loss = 0.0;
        for (features, targets) in batch {
            for (f, &target) in features.iter().zip(targets) {
                let (a, z) = self.logits(f);
                let zmax = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = z.iter().map(|&v| (v - zmax).exp()).collect();
                let sum: f64 = exps.iter().sum();
                let probs: Vec<f64> = exps.iter().map(|&e| e / sum).collect();
                let ti = target.code() as usize;
                loss -= (probs[ti].max(1e-12)).ln() * inv;

                let mut dz = probs;
                dz[ti] -= 1.0;
                for v in &mut dz {
                    *v *= inv;
                }
                let mut da = vec![0.0; h];
                for i in 0..ZONES {
                    gb2[i] += dz[i];
                    for j in 0..h {
                        gw2[i * h + j] += dz[i] * a[j];
                        da[j] += self.w2[i * h + j] * dz[i];
                    }
                }
                for i in 0..h {
                    let ds = da[i] * (1.0 - a[i] * a[i]);
                    gb1[i] += ds;
                    for j in 0..STAGE1_FEATURES {
                        gw1[i * STAGE1_FEATURES + j] += ds * f[j];
                    }
                }
            }
        }
        sgd(&mut self.w1, &gw1, &mut vel.w1, lr, momentum);
        sgd(&mut self.b1, &gb1, &mut vel.b1, lr, momentum);
        sgd(&mut self.w2, &gw2, &mut vel.w2, lr, momentum);
        sgd(&mut self.b2, &gb2, &mut vel.b2, lr, momentum);
        loss
    }
}

struct Stage1Velocity {
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
}

fn sgd(params: &mut [f64], grads: &[f64], vel: &mut [f64], lr: f64, momentum: f64) {
    for ((p, &g), v) in params.iter_mut().zip(grads).zip(vel.iter_mut()) {
        *v = momentum * *v - lr * g;
        *p += *v;
    }
}

// ---------------------------------------------------------------------
// Stage 2: flow-matching try-on predictor on downsampled rasters
// ---------------------------------------------------------------------

const STAGE2_GRID: u32 = 8; // images are pooled to 8×8 luminance
const STAGE2_TOKEN_DIM: usize = 8;

/// Area-averaged luminance downsample to `STAGE2_GRID`², scaled to [0,1].
fn downsample_luma(img: &RgbImage) -> Vec<f64> {
    let g = img.grid();
    let mut out = vec![0.0; (STAGE2_GRID * STAGE2_GRID) as usize];
    let mut counts = vec![0usize; out.len()];
    for row in 0..g.height {
        for col in 0..g.width {
            let [r, gg, b] = img.get(row, col);
            let luma = (0.299 * r as f64 + 0.587 * gg as f64 + 0.114 * b as f64) / 255.0;
            let br = (row as u64 * STAGE2_GRID as u64 / g.height as u64) as usize;
            let bc = (col as u64 * STAGE2_GRID as u64 / g.width as u64) as usize;
            let idx = br * STAGE2_GRID as usize + bc;
            out[idx] += luma;
            counts[idx] += 1;
        }
    }
    for (v, &c) in out.iter_mut().zip(&counts) {
        if c > 0 {
            *v /= c as f64;
        }
    }
    out
}

/// Downsampled zone map scaled to [0,1] (recon 0, imagi ½, tryon 1).
fn downsample_zones(zones: &[Zone], grid: crate::maskcore::ImageGrid) -> Vec<f64> {
    let mut out = vec![0.0; (STAGE2_GRID * STAGE2_GRID) as usize];
    let mut counts = vec![0usize; out.len()];
    for row in 0..grid.height {
        for col in 0..grid.width {
            let z = zones[(row * grid.width + col) as usize];
            let br = (row as u64 * STAGE2_GRID as u64 / grid.height as u64) as usize;
            let bc = (col as u64 * STAGE2_GRID as u64 / grid.width as u64) as usize;
            let idx = br * STAGE2_GRID as usize + bc;
            out[idx] += z.code() as f64 / 2.0;
            counts[idx] += 1;
        }
    }
    for (v, &c) in out.iter_mut().zip(&counts) {
        if c > 0 {
            *v /= c as f64;
        }
    }
    out
}

fn stage1_features_of(q: &ToyQuadruplet) -> (Vec<[f64; STAGE1_FEATURES]>, Vec<Zone>) {
    let g = q.p_c.grid();
    let gm = mean_rgb(&q.g_g);
    let mut feats = Vec::with_capacity(g.area());
    let mut zones = Vec::with_capacity(g.area());
    for row in 0..g.height {
        for col in 0..g.width {
            feats.push(pixel_features(q, row, col, &gm));
            zones.push(q.m3g.get(row, col));
        }
    }
    (feats, zones)
}

/// Condition vector for stage 2: pooled p_c, pooled g_g, pooled predicted
/// zones — 3 × 64 values = 24 garment tokens of dim 8.
fn stage2_cond(q: &ToyQuadruplet, predicted: &[Zone]) -> Tensor {
    let mut v = downsample_luma(&q.p_c);
    v.extend(downsample_luma(&q.g_g));
    v.extend(downsample_zones(predicted, q.p_c.grid()));
    Tensor::new(vec![v.len()], v).unwrap()
}

fn check_finite(loss: f64, step: usize) -> Result<(), FlowError> {
    if !loss.is_finite() {
        return Err(FlowError::Diverged { step, loss });
    }
    Ok(())
}

/// Runs both training stages over `dataset` and reports loss curves plus
/// the stage-1 held-out zone accuracy.
pub fn train_toy_two_stage(
    dataset: &[ToyQuadruplet],
    config: &TrainConfig,
) -> Result<TrainingReport, FlowError> {
    if dataset.is_empty() {
        return Err(FlowError::EmptyDataset);
    }
    let holdout_n = ((dataset.len() as f64 * config.holdout_fraction) as usize)
        .min(dataset.len().saturating_sub(1));
    let split = dataset.len() - holdout_n;
    let (train, holdout) = dataset.split_at(split);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    // ---- stage 1 ----
    let mut clf = ZoneClassifier::new(config.hidden, &mut rng);
    let mut vel = Stage1Velocity {
        w1: vec![0.0; clf.w1.len()],
        b1: vec![0.0; clf.b1.len()],
        w2: vec![0.0; clf.w2.len()],
        b2: vec![0.0; clf.b2.len()],
    };
    let prepared: Vec<_> = train.iter().map(stage1_features_of).collect();
    let mut stage1_losses = Vec::with_capacity(config.stage1_steps + 1);
    for step in 0..=config.stage1_steps {
        let mut batch = Vec::with_capacity(config.batch_size);
        for _ in 0..config.batch_size.min(prepared.len()) {
            batch.push(prepared[rng.gen_range(0..prepared.len())].clone());
        }
        let loss = if step == config.stage1_steps {
            clf.eval_loss(&batch)
        } else {
            clf.train_step(&batch, config.stage1_lr, config.momentum, &mut vel)
        };
        check_finite(loss, step)?;
        stage1_losses.push(loss);
    }

    // held-out zone accuracy of the trained classifier
    let eval_set = if holdout.is_empty() { train } else { holdout };
    let mut correct = 0usize;
    let mut total = 0usize;
    for q in eval_set {
        let (feats, zones) = stage1_features_of(q);
        for (f, &z) in feats.iter().zip(&zones) {
            if clf.predict_zone(f) == z {
                correct += 1;
            }
            total += 1;
        }
    }
    let stage1_holdout_accuracy = correct as f64 / total.max(1) as f64;

    // ---- stage 2 ----
    let denoiser_cfg = DenoiserConfig {
        token_dim: STAGE2_TOKEN_DIM,
        latent_tokens: (STAGE2_GRID * STAGE2_GRID) as usize / STAGE2_TOKEN_DIM,
        garment_tokens: 3 * (STAGE2_GRID * STAGE2_GRID) as usize / STAGE2_TOKEN_DIM,
        hidden: config.hidden,
    };
    let mut model = ToyDenoiser::new(denoiser_cfg, config.seed ^ 0x5157_a9e3);
    let mut vel2 = vec![0.0; model.param_count()];
    // stage-2 conditions use the stage-1 predictions, not the GT zones
    let conds: Vec<(Tensor, Tensor)> = train
        .iter()
        .map(|q| {
            let (feats, _) = stage1_features_of(q);
            let predicted: Vec<Zone> = feats.iter().map(|f| clf.predict_zone(f)).collect();
            let z0 = Tensor::new(vec![denoiser_cfg.latent_len()], downsample_luma(&q.p_g)).unwrap();
            (z0, stage2_cond(q, &predicted))
        })
        .collect();

    let mut stage2_losses = Vec::with_capacity(config.stage2_steps + 1);
    for step in 0..=config.stage2_steps {
        let mut batch = Vec::with_capacity(config.batch_size);
        for _ in 0..config.batch_size.min(conds.len()) {
            let (z0, cond) = &conds[rng.gen_range(0..conds.len())];
            let eps: Vec<f64> =
                (0..z0.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
            let eps = Tensor::new(vec![z0.len()], eps).unwrap();
            let t: f64 = rng.gen_range(0.0..=1.0);
            batch.push(FlowSample::new(z0.clone(), eps, t, cond.clone())?);
        }
        let (loss, grads) = flow_loss(&model, &batch, |_| 1.0)?;
        check_finite(loss, step)?;
        stage2_losses.push(loss);
        if step < config.stage2_steps {
            sgd(model.params_mut(), &grads, &mut vel2, config.stage2_lr, config.momentum);
        }
    }

    Ok(TrainingReport {
        stage1_losses,
        stage2_losses,
        stage1_holdout_accuracy,
        train_records: train.len(),
        holdout_records: holdout.len(),
    })
}
