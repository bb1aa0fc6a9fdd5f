//! Losses, the adaptive-moment optimizer, and the seeded training loop.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::network::{Gradients, Network};
use super::tensor::Tensor;
use super::NeuralError;
use crate::stats::splitmix64;

/// Loss applied to the network output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossKind {
    Mse,
    CrossEntropy,
}

/// Supervision target for one sample.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Scalar(f64),
    Class(usize),
}

/// Loss value and gradient with respect to the network output.
pub fn loss_and_grad(
    kind: LossKind,
    output: &[f64],
    target: &Target,
) -> Result<(f64, Vec<f64>), NeuralError> {
    match (kind, target) {
        (LossKind::Mse, Target::Scalar(t)) => {
            if output.len() != 1 {
                return Err(NeuralError::Shape(format!(
                    "MSE with scalar target needs 1 output, got {}",
                    output.len()
                )));
            }
            let diff = output[0] - t;
            Ok((diff * diff, vec![2.0 * diff]))
        }
        (LossKind::CrossEntropy, Target::Class(class)) => {
            if *class >= output.len() {
                return Err(NeuralError::Shape(format!(
                    "class {class} out of range for {} outputs",
                    output.len()
                )));
            }
            let probs = softmax(output);
            let loss = -probs[*class].max(1e-300).ln();
            let mut grad = probs;
            grad[*class] -= 1.0;
            Ok((loss, grad))
        }
        _ => Err(NeuralError::Shape("loss kind does not match target kind".into())),
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exps: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Loss gradients for one sample with respect to every parameter and the
/// input, computed by an exact reverse pass. Dropout is disabled, so the
/// result is deterministic and directly comparable to finite differences.
pub fn backward(
    net: &Network,
    loss: LossKind,
    x: &Tensor,
    target: &Target,
) -> Result<(f64, Gradients, Tensor), NeuralError> {
    let tape = net.forward_tape(x, None)?;
    let (value, output_grad) = loss_and_grad(loss, tape.output.data(), target)?;
    let (grads, input_grad) = net.backward(&tape, &output_grad)?;
    Ok((value, grads, input_grad))
}

/// Adaptive-moment estimation state, one moment pair per parameter tensor.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new(net: &Network) -> Self {
        let m = net.param_slices().iter().map(|p| vec![0.0; p.len()]).collect::<Vec<_>>();
        AdamState { v: m.clone(), m, step: 0 }
    }

    pub fn step(
        &mut self,
        net: &mut Network,
        grads: &Gradients,
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
    ) {
        self.step += 1;
        let t = self.step as i32;
        let correction1 = 1.0 - beta1.powi(t);
        let correction2 = 1.0 - beta2.powi(t);
        for ((param, grad), (m, v)) in net
            .param_slices_mut()
            .into_iter()
            .zip(&grads.0)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for i in 0..param.len() {
                let g = grad[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                let m_hat = m[i] / correction1;
                let v_hat = v[i] / correction2;
                param[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

/// Training hyperparameters. Defaults follow the surrogate recipe: learning
/// rate 0.001, Adam (0.9, 0.999, 1e-8), 20% validation split.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            epochs: 30,
            batch_size: 64,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            validation_fraction: 0.2,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self
    }

    pub fn with_learning_rate(mut self, lr: f64) -> Self {
        self.learning_rate = lr;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Per-epoch losses plus the index of the best validation checkpoint, which
/// is the parameter set the network holds after training returns.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingReport {
    pub train_losses: Vec<f64>,
    pub val_losses: Vec<f64>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

/// Seeded validation/train index split, shared by [`train`] and callers that
/// score the held-out set afterwards.
pub fn holdout_split(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed, 0x51));
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut rng);
    let val_len = (((n as f64) * fraction).round() as usize).min(n.saturating_sub(1));
    let (val, train) = indices.split_at(val_len);
    (val.to_vec(), train.to_vec())
}

// Fixed chunk width for intra-batch parallelism. Chunk boundaries do not
// depend on the worker count, so gradient sums are bit-reproducible.
const GRAD_CHUNK: usize = 16;

/// Trains `net` in place with shuffled seeded batches and adaptive-moment
/// updates, holding out a validation split. The network ends up with the
/// parameters of the best validation epoch.
pub fn train(
    net: &mut Network,
    dataset: &[(Tensor, Target)],
    loss: LossKind,
    config: &TrainConfig,
) -> Result<TrainingReport, NeuralError> {
    if dataset.is_empty() {
        return Err(NeuralError::EmptyDataset);
    }
    if !(0.0..1.0).contains(&config.validation_fraction) {
        return Err(NeuralError::Shape("validation fraction out of range".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(config.seed, 0xE90C));
    let (val_idx, mut train_idx) =
        holdout_split(dataset.len(), config.validation_fraction, config.seed);

    let mut adam = AdamState::new(net);
    let mut report = TrainingReport {
        train_losses: Vec::with_capacity(config.epochs),
        val_losses: Vec::with_capacity(config.epochs),
        best_epoch: 0,
        best_val_loss: f64::INFINITY,
    };
    let mut best_params = net.snapshot_params();

    for epoch in 0..config.epochs {
        train_idx.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in train_idx.chunks(config.batch_size) {
            let batch_seed = splitmix64(config.seed ^ 0x5eed_0001, epoch as u64);
            let chunk_results: Vec<(f64, Gradients)> = batch
                .par_chunks(GRAD_CHUNK)
                .enumerate()
                .map(|(chunk_no, chunk)| {
                    let mut sum: Option<Gradients> = None;
                    let mut loss_sum = 0.0;
                    for (offset, &idx) in chunk.iter().enumerate() {
                        let (x, target) = &dataset[idx];
                        let sample_tag =
                            (chunk_no * GRAD_CHUNK + offset) as u64 ^ (idx as u64) << 20;
                        let mut sample_rng = ChaCha8Rng::seed_from_u64(splitmix64(
                            batch_seed, sample_tag,
                        ));
                        let tape = net
                            .forward_tape(x, Some(&mut sample_rng))
                            .expect("shapes validated before training");
                        let (value, output_grad) = loss_and_grad(loss, tape.output.data(), target)
                            .expect("loss target validated before training");
                        let (grads, _) =
                            net.backward(&tape, &output_grad).expect("backward matches forward");
                        loss_sum += value;
                        match &mut sum {
                            Some(acc) => acc.add_assign(&grads),
                            None => sum = Some(grads),
                        }
                    }
                    (loss_sum, sum.expect("chunks are non-empty"))
                })
                .collect();

            let mut batch_grads = Gradients::zeros_like(net);
            let mut batch_loss = 0.0;
            for (value, grads) in &chunk_results {
                batch_loss += value;
                batch_grads.add_assign(grads);
            }
            batch_grads.scale(1.0 / batch.len() as f64);
            epoch_loss += batch_loss;
            adam.step(
                net,
                &batch_grads,
                config.learning_rate,
                config.adam_beta1,
                config.adam_beta2,
                config.adam_eps,
            );
        }
        report.train_losses.push(epoch_loss / train_idx.len().max(1) as f64);

        let val_loss = if val_idx.is_empty() {
            *report.train_losses.last().expect("at least one epoch")
        } else {
            evaluate_loss(net, dataset, &val_idx, loss)?
        };
        report.val_losses.push(val_loss);
        if val_loss < report.best_val_loss {
            report.best_val_loss = val_loss;
            report.best_epoch = epoch;
            best_params = net.snapshot_params();
        }
    }

    net.restore_params(&best_params);
    Ok(report)
}

/// Mean loss over the indexed samples, inference mode.
pub fn evaluate_loss(
    net: &Network,
    dataset: &[(Tensor, Target)],
    indices: &[usize],
    loss: LossKind,
) -> Result<f64, NeuralError> {
    let total: f64 = indices
        .par_iter()
        .map(|&idx| {
            let (x, target) = &dataset[idx];
            let y = net.forward(x).expect("shapes validated");
            loss_and_grad(loss, y.data(), target).expect("targets validated").0
        })
        .sum();
    Ok(total / indices.len().max(1) as f64)
}

/// Fraction of samples whose argmax output matches the class target.
pub fn classification_accuracy(
    net: &Network,
    dataset: &[(Tensor, Target)],
    indices: &[usize],
) -> f64 {
    let hits: usize = indices
        .par_iter()
        .filter(|&&idx| {
            let (x, target) = &dataset[idx];
            let y = net.forward(x).expect("shapes validated");
            let best = y
                .data()
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite logits"))
                .map(|(i, _)| i)
                .expect("non-empty output");
            matches!(target, Target::Class(c) if *c == best)
        })
        .count();
    hits as f64 / indices.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::network::{LayerSpec, NetworkSpec};

    #[test]
    fn dense_mse_closed_form_gradient() {
        // y = w x, L = (y - t)^2, dL/dw = 2 (w x - t) x.
        let spec = NetworkSpec::new(vec![1], vec![LayerSpec::Dense { out_dim: 1 }]);
        let mut net = Network::init(spec, 0).unwrap();
        {
            let mut params = net.param_slices_mut();
            params[0].copy_from_slice(&[1.5]);
            params[1].copy_from_slice(&[0.0]);
        }
        let x = Tensor::scalar(2.0);
        let (_, grads, input_grad) =
            backward(&net, LossKind::Mse, &x, &Target::Scalar(1.0)).unwrap();
        let expected_w = 2.0 * (1.5 * 2.0 - 1.0) * 2.0;
        assert!((grads.0[0][0] - expected_w).abs() < 1e-12);
        let expected_x = 2.0 * (1.5 * 2.0 - 1.0) * 1.5;
        assert!((input_grad.data()[0] - expected_x).abs() < 1e-12);
    }

    #[test]
    fn fit_scalar_line() {
        let spec = NetworkSpec::new(vec![1], vec![LayerSpec::Dense { out_dim: 1 }]);
        let mut net = Network::init(spec, 3).unwrap();
        let dataset: Vec<(Tensor, Target)> = (0..100)
            .map(|i| {
                let x = (i as f64) / 50.0 - 1.0;
                (Tensor::scalar(x), Target::Scalar(2.0 * x))
            })
            .collect();
        let config = TrainConfig {
            epochs: 400,
            batch_size: 16,
            learning_rate: 0.05,
            ..TrainConfig::default()
        };
        let report = train(&mut net, &dataset, LossKind::Mse, &config).unwrap();
        assert!(report.best_val_loss < 1e-6, "val loss {}", report.best_val_loss);
    }

    #[test]
    fn training_is_deterministic() {
        let make = || {
            let spec = NetworkSpec::new(
                vec![2],
                vec![
                    LayerSpec::Dense { out_dim: 8 },
                    LayerSpec::LeakyRelu,
                    LayerSpec::Dropout { p: 0.2 },
                    LayerSpec::Dense { out_dim: 1 },
                ],
            );
            let mut net = Network::init(spec, 11).unwrap();
            let dataset: Vec<(Tensor, Target)> = (0..64)
                .map(|i| {
                    let a = (i % 8) as f64 / 8.0;
                    let b = (i / 8) as f64 / 8.0;
                    (
                        Tensor::new(vec![2], vec![a, b]).unwrap(),
                        Target::Scalar(a + 0.5 * b),
                    )
                })
                .collect();
            let config = TrainConfig { epochs: 5, batch_size: 16, ..TrainConfig::default() };
            train(&mut net, &dataset, LossKind::Mse, &config).unwrap()
        };
        let a = make();
        let b = make();
        assert_eq!(a.train_losses, b.train_losses);
        assert_eq!(a.val_losses, b.val_losses);
    }

    #[test]
    fn adam_zero_gradient_is_noop() {
        let spec = NetworkSpec::new(vec![2], vec![LayerSpec::Dense { out_dim: 2 }]);
        let mut net = Network::init(spec, 7).unwrap();
        let before = net.snapshot_params();
        let mut adam = AdamState::new(&net);
        let grads = Gradients::zeros_like(&net);
        for _ in 0..3 {
            adam.step(&mut net, &grads, 0.01, 0.9, 0.999, 1e-8);
        }
        assert_eq!(net.snapshot_params(), before);
    }

    #[test]
    fn empty_dataset_rejected() {
        let spec = NetworkSpec::new(vec![1], vec![LayerSpec::Dense { out_dim: 1 }]);
        let mut net = Network::init(spec, 0).unwrap();
        let err = train(&mut net, &[], LossKind::Mse, &TrainConfig::default());
        assert!(matches!(err, Err(NeuralError::EmptyDataset)));
    }

    #[test]
    fn softmax_uniform_on_equal_logits() {
        let probs = softmax(&[0.3, 0.3, 0.3, 0.3]);
        for p in probs {
            assert!((p - 0.25).abs() < 1e-12);
        }
    }
}
