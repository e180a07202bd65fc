//! Desk-scale implementation of the training mathematics: the
//! flow-matching objective on the linear noise interpolation, K/V-concat
//! attention fusion, and a tiny two-stage tri-zone→try-on demonstrator.
//! All gradients are hand-rolled reverse-mode accumulation; there is no
//! autodiff dependency, and analytic gradients are checked against
//! central finite differences in the tests.

mod attention;
mod model;
mod train;

pub use attention::{attention_weights, kv_concat_attention, AttentionParams};
pub use model::{DenoiserConfig, ToyDenoiser};
pub use train::{
    train_toy_two_stage, ToyQuadruplet, TrainConfig, TrainingReport, FULL_SCALE_BATCH_SIZE,
    FULL_SCALE_LEARNING_RATE, FULL_SCALE_OPTIMIZER,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FlowError {
    #[error("shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch(Vec<usize>, Vec<usize>),
    #[error("t = {0} outside [0, 1]")]
    TimeOutOfRange(f64),
    #[error("batch is empty")]
    EmptyBatch,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("training diverged at step {step}: loss = {loss}")]
    Diverged { step: usize, loss: f64 },
    #[error("bad tensor: {0} values for shape {1:?}")]
    BadTensor(usize, Vec<usize>),
}

/// Dense row-major tensor of f64 values.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self, FlowError> {
        let want: usize = shape.iter().product();
        if values.len() != want {
            return Err(FlowError::BadTensor(values.len(), shape));
        }
        Ok(Self { shape, values })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self { shape, values: vec![0.0; n] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// One training sample for the flow-matching objective.
#[derive(Debug, Clone)]
pub struct FlowSample {
    /// Clean latent.
    pub z0: Tensor,
    /// Standard normal draw, same shape as `z0`.
    pub eps: Tensor,
    /// Interpolation time in [0, 1].
    pub t: f64,
    /// Condition vector.
    pub cond: Tensor,
}

impl FlowSample {
    pub fn new(z0: Tensor, eps: Tensor, t: f64, cond: Tensor) -> Result<Self, FlowError> {
        if z0.shape != eps.shape {
            return Err(FlowError::ShapeMismatch(z0.shape.clone(), eps.shape.clone()));
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(FlowError::TimeOutOfRange(t));
        }
        Ok(Self { z0, eps, t, cond })
    }

    /// The noisy latent at this sample's time.
    pub fn noisy_latent(&self) -> Tensor {
        interpolate(&self.z0, &self.eps, self.t).expect("shapes checked at construction")
    }
}

/// Elementwise `(1 − t)·z0 + t·eps`.
pub fn interpolate(z0: &Tensor, eps: &Tensor, t: f64) -> Result<Tensor, FlowError> {
    if z0.shape != eps.shape {
        return Err(FlowError::ShapeMismatch(z0.shape.clone(), eps.shape.clone()));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(FlowError::TimeOutOfRange(t));
    }
    let values = z0
        .values
        .iter()
        .zip(&eps.values)
        .map(|(&a, &b)| (1.0 - t) * a + t * b)
        .collect();
    Ok(Tensor { shape: z0.shape.clone(), values })
}

/// A noise predictor trainable under the flow-matching loss.
pub trait FlowModel {
    /// Predicted noise for one sample, shaped like `eps`.
    fn predict(&self, sample: &FlowSample) -> Result<Tensor, FlowError>;

    fn param_count(&self) -> usize;

    /// Accumulates dLoss/dParams into `grads` given the upstream gradient
    /// on this sample's prediction.
    fn accumulate_grads(
        &self,
        sample: &FlowSample,
        d_pred: &Tensor,
        grads: &mut [f64],
    ) -> Result<(), FlowError>;
}

/// Weighted noise-prediction loss over a batch:
/// `mean_b w(t_b) · ||prediction_b − eps_b||²`, with gradients for every
/// model parameter.
pub fn flow_loss<M: FlowModel>(
    model: &M,
    batch: &[FlowSample],
    weight: impl Fn(f64) -> f64,
) -> Result<(f64, Vec<f64>), FlowError> {
    if batch.is_empty() {
        return Err(FlowError::EmptyBatch);
    }
    let inv_b = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    let mut grads = vec![0.0; model.param_count()];
    for sample in batch {
        let pred = model.predict(sample)?;
        if pred.shape != sample.eps.shape {
            return Err(FlowError::ShapeMismatch(pred.shape, sample.eps.shape.clone()));
        }
        let w = weight(sample.t);
        let mut sq = 0.0;
        let mut d_pred = Vec::with_capacity(pred.len());
        for (&p, &e) in pred.values.iter().zip(&sample.eps.values) {
            let r = p - e;
            sq += r * r;
            d_pred.push(2.0 * w * inv_b * r);
        }
        loss += w * sq * inv_b;
        let d_pred = Tensor { shape: pred.shape.clone(), values: d_pred };
        model.accumulate_grads(sample, &d_pred, &mut grads)?;
    }
    Ok((loss, grads))
}

/// Loss only, without gradient accumulation.
pub fn flow_loss_value<M: FlowModel>(
    model: &M,
    batch: &[FlowSample],
    weight: impl Fn(f64) -> f64,
) -> Result<f64, FlowError> {
    if batch.is_empty() {
        return Err(FlowError::EmptyBatch);
    }
    let inv_b = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    for sample in batch {
        let pred = model.predict(sample)?;
        let w = weight(sample.t);
        let sq: f64 = pred
            .values
            .iter()
            .zip(&sample.eps.values)
            .map(|(&p, &e)| (p - e) * (p - e))
            .sum();
        loss += w * sq * inv_b;
    }
    Ok(loss)
}

#[cfg(test)]
mod tests;
