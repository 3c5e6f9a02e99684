//! Feedforward Q-network: rectifier hidden layers, identity output head,
//! trained by full-batch gradient descent on squared error.
//!
//! One output unit per asset; the network maps a state vector to N
//! Q-values in a single pass. Everything is plain `f64` so a fixed seed
//! gives a bit-stable parameter trajectory on one platform.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Layer {
    in_dim: usize,
    out_dim: usize,
    /// Row-major `out_dim x in_dim`.
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl Layer {
    fn zeros_like(&self) -> Layer {
        Layer {
            in_dim: self.in_dim,
            out_dim: self.out_dim,
            weights: vec![0.0; self.weights.len()],
            biases: vec![0.0; self.biases.len()],
        }
    }

    fn affine(&self, input: &[f64], output: &mut Vec<f64>) {
        output.clear();
        for o in 0..self.out_dim {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = self.biases[o];
            for (w, x) in row.iter().zip(input) {
                acc += w * x;
            }
            output.push(acc);
        }
    }
}

/// Multi-head Q-network over a shared trunk.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    dims: Vec<usize>,
    layers: Vec<Layer>,
    seed: u64,
}

/// One training batch: `B` states against `B` per-asset target rows.
#[derive(Debug, Clone)]
pub struct TrainBatch {
    states: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
}

impl TrainBatch {
    pub fn new(states: Vec<Vec<f64>>, targets: Vec<Vec<f64>>) -> Result<Self> {
        if states.is_empty() || states.len() != targets.len() {
            return Err(Error::DimensionMismatch {
                context: "batch states vs targets".into(),
                expected: states.len().max(1),
                actual: targets.len(),
            });
        }
        let d = states[0].len();
        let n = targets[0].len();
        for row in &states {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    context: "batch state width".into(),
                    expected: d,
                    actual: row.len(),
                });
            }
        }
        for row in &targets {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    context: "batch target width".into(),
                    expected: n,
                    actual: row.len(),
                });
            }
        }
        Ok(Self { states, targets })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn targets(&self) -> &[Vec<f64>] {
        &self.targets
    }
}

impl QNetwork {
    /// Initialize with uniform weights in ±sqrt(6 / (fan_in + fan_out))
    /// and zero biases, deterministically from `seed`.
    pub fn init(dims: &[usize], seed: u64) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::InvalidArgument(
                "network needs an input and an output dimension".into(),
            ));
        }
        if dims.contains(&0) {
            return Err(Error::InvalidArgument(
                "layer widths must be positive".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for pair in dims.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let weights = (0..fan_in * fan_out)
                .map(|_| rng.gen_range(-limit..=limit))
                .collect();
            layers.push(Layer {
                in_dim: fan_in,
                out_dim: fan_out,
                weights,
                biases: vec![0.0; fan_out],
            });
        }
        Ok(Self {
            dims: dims.to_vec(),
            layers,
            seed,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    pub fn weights(&self, layer: usize) -> &[f64] {
        &self.layers[layer].weights
    }

    pub fn biases(&self, layer: usize) -> &[f64] {
        &self.layers[layer].biases
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut [f64] {
        &mut self.layers[layer].weights
    }

    pub fn biases_mut(&mut self, layer: usize) -> &mut [f64] {
        &mut self.layers[layer].biases
    }

    /// Q-values for one state: affine/rectifier trunk, identity head.
    pub fn forward(&self, state: &[f64]) -> Result<Vec<f64>> {
        if state.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "forward input".into(),
                expected: self.input_dim(),
                actual: state.len(),
            });
        }
        let mut current = state.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (idx, layer) in self.layers.iter().enumerate() {
            layer.affine(&current, &mut next);
            if idx != last {
                for v in next.iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            std::mem::swap(&mut current, &mut next);
        }
        Ok(current)
    }

    /// Post-activation values of every layer (input included) for one state.
    fn forward_trace(&self, state: &[f64]) -> Vec<Vec<f64>> {
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(state.to_vec());
        let last = self.layers.len() - 1;
        for (idx, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::new();
            layer.affine(activations.last().unwrap(), &mut out);
            if idx != last {
                for v in out.iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            activations.push(out);
        }
        activations
    }

    fn check_batch(&self, batch: &TrainBatch) -> Result<()> {
        if batch.states[0].len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "batch state width vs network input".into(),
                expected: self.input_dim(),
                actual: batch.states[0].len(),
            });
        }
        if batch.targets[0].len() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                context: "batch target width vs network output".into(),
                expected: self.output_dim(),
                actual: batch.targets[0].len(),
            });
        }
        Ok(())
    }

    /// Mean squared error over the batch plus analytic parameter gradients.
    /// Shared by `train_batch` and `gradient_check`; the finite-difference
    /// side of the check never touches this path.
    #[allow(clippy::needless_range_loop)]
    fn loss_and_gradients(&self, batch: &TrainBatch) -> Result<(f64, Vec<Layer>)> {
        self.check_batch(batch)?;
        let b = batch.len() as f64;
        let n = self.output_dim() as f64;
        let scale = 1.0 / (b * n);

        let mut grads: Vec<Layer> = self.layers.iter().map(Layer::zeros_like).collect();
        let mut loss = 0.0;

        for (sample_idx, (state, target)) in batch.states.iter().zip(&batch.targets).enumerate() {
            let activations = self.forward_trace(state);
            let output = activations.last().unwrap();

            let mut sample_loss = 0.0;
            let mut delta: Vec<f64> = output
                .iter()
                .zip(target)
                .map(|(q, t)| {
                    let diff = q - t;
                    sample_loss += diff * diff;
                    2.0 * diff * scale
                })
                .collect();
            if !sample_loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    batch_index: sample_idx,
                });
            }
            loss += sample_loss * scale;

            for layer_idx in (0..self.layers.len()).rev() {
                let layer = &self.layers[layer_idx];
                let input = &activations[layer_idx];
                let grad = &mut grads[layer_idx];
                for o in 0..layer.out_dim {
                    let d = delta[o];
                    grad.biases[o] += d;
                    let row = &mut grad.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                    for (g, x) in row.iter_mut().zip(input) {
                        *g += d * x;
                    }
                }
                if layer_idx > 0 {
                    // Backprop through the rectifier: the stored activation is
                    // post-ReLU, so a zero activation means a clamped unit.
                    let mut prev = vec![0.0; layer.in_dim];
                    for o in 0..layer.out_dim {
                        let d = delta[o];
                        let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                        for (p, w) in prev.iter_mut().zip(row) {
                            *p += d * w;
                        }
                    }
                    for (p, a) in prev.iter_mut().zip(input) {
                        if *a <= 0.0 {
                            *p = 0.0;
                        }
                    }
                    delta = prev;
                }
            }
        }
        Ok((loss, grads))
    }

    /// One full-batch gradient-descent step. Returns the pre-step loss.
    pub fn train_batch(&mut self, batch: &TrainBatch, learning_rate: f64) -> Result<f64> {
        let (loss, grads) = self.loss_and_gradients(batch)?;
        for (layer, grad) in self.layers.iter_mut().zip(&grads) {
            for (w, g) in layer.weights.iter_mut().zip(&grad.weights) {
                *w -= learning_rate * g;
            }
            for (b, g) in layer.biases.iter_mut().zip(&grad.biases) {
                *b -= learning_rate * g;
            }
        }
        for layer in &self.layers {
            if layer.weights.iter().chain(&layer.biases).any(|p| !p.is_finite()) {
                return Err(Error::NonFinite("parameter update".into()));
            }
        }
        Ok(loss)
    }

    /// Batch loss only, used by the finite-difference oracle.
    fn batch_loss(&self, batch: &TrainBatch) -> Result<f64> {
        self.check_batch(batch)?;
        let scale = 1.0 / (batch.len() as f64 * self.output_dim() as f64);
        let mut loss = 0.0;
        for (state, target) in batch.states.iter().zip(&batch.targets) {
            let q = self.forward(state)?;
            loss += q
                .iter()
                .zip(target)
                .map(|(q, t)| (q - t) * (q - t))
                .sum::<f64>()
                * scale;
        }
        Ok(loss)
    }

    /// Compare analytic gradients against central finite differences,
    /// parameter by parameter. Returns max |analytic - numeric| / max(1, |numeric|).
    /// Meant for small diagnostic nets; cost is quadratic in parameter count.
    #[allow(clippy::needless_range_loop)]
    pub fn gradient_check(&self, batch: &TrainBatch, epsilon: f64) -> Result<f64> {
        if epsilon.is_nan() || epsilon <= 0.0 {
            return Err(Error::InvalidArgument("epsilon must be positive".into()));
        }
        let (_, grads) = self.loss_and_gradients(batch)?;
        let mut max_rel = 0.0f64;

        for layer in 0..self.layers.len() {
            for i in 0..self.layers[layer].weights.len() {
                let mut plus = self.clone();
                let mut minus = self.clone();
                plus.layers[layer].weights[i] += epsilon;
                minus.layers[layer].weights[i] -= epsilon;
                let numeric =
                    (plus.batch_loss(batch)? - minus.batch_loss(batch)?) / (2.0 * epsilon);
                let rel = (grads[layer].weights[i] - numeric).abs() / numeric.abs().max(1.0);
                if rel > max_rel {
                    max_rel = rel;
                }
            }
            for i in 0..self.layers[layer].biases.len() {
                let mut plus = self.clone();
                let mut minus = self.clone();
                plus.layers[layer].biases[i] += epsilon;
                minus.layers[layer].biases[i] -= epsilon;
                let numeric =
                    (plus.batch_loss(batch)? - minus.batch_loss(batch)?) / (2.0 * epsilon);
                let rel = (grads[layer].biases[i] - numeric).abs() / numeric.abs().max(1.0);
                if rel > max_rel {
                    max_rel = rel;
                }
            }
        }
        Ok(max_rel)
    }

    /// Write a versioned JSON checkpoint. The round-trip is bit-exact on
    /// one platform (floats serialize via shortest round-trip encoding).
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = CheckpointFile {
            version: CHECKPOINT_VERSION,
            dims: self.dims.clone(),
            seed: self.seed,
            layers: self.layers.clone(),
        };
        let json = serde_json::to_vec_pretty(&file)?;
        std::fs::write(path, json).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let file: CheckpointFile = serde_json::from_slice(&bytes)?;
        if file.version != CHECKPOINT_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported checkpoint version {}",
                file.version
            )));
        }
        if file.layers.len() + 1 != file.dims.len() {
            return Err(Error::InvalidArgument(
                "checkpoint layers inconsistent with dims".into(),
            ));
        }
        for (layer, pair) in file.layers.iter().zip(file.dims.windows(2)) {
            if layer.in_dim != pair[0]
                || layer.out_dim != pair[1]
                || layer.weights.len() != pair[0] * pair[1]
                || layer.biases.len() != pair[1]
            {
                return Err(Error::InvalidArgument(
                    "checkpoint layer shapes inconsistent with dims".into(),
                ));
            }
        }
        Ok(Self {
            dims: file.dims,
            layers: file.layers,
            seed: file.seed,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    dims: Vec<usize>,
    seed: u64,
    layers: Vec<Layer>,
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_batch(rng: &mut ChaCha8Rng, b: usize, d: usize, n: usize) -> TrainBatch {
        let states = (0..b)
            .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let targets = (0..b)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        TrainBatch::new(states, targets).unwrap()
    }

    #[test]
    fn same_seed_gives_identical_parameters() {
        let a = QNetwork::init(&[6, 4, 3], 99).unwrap();
        let b = QNetwork::init(&[6, 4, 3], 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_differ() {
        let a = QNetwork::init(&[6, 4, 3], 1).unwrap();
        let b = QNetwork::init(&[6, 4, 3], 2).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn parameter_count_matches_closed_form() {
        let dims = [840usize, 128, 64, 28];
        let net = QNetwork::init(&dims, 0).unwrap();
        // Closed-form oracle: sum of (fan_in * fan_out + fan_out) per layer.
        let expected: usize = dims.windows(2).map(|p| p[0] * p[1] + p[1]).sum();
        assert_eq!(expected, 117_724);
        assert_eq!(net.num_params(), expected);
    }

    #[test]
    fn init_rejects_zero_width() {
        assert!(QNetwork::init(&[4, 0, 2], 0).is_err());
        assert!(QNetwork::init(&[4], 0).is_err());
    }

    #[test]
    fn zero_parameters_give_zero_output() {
        let mut net = QNetwork::init(&[3, 2, 2], 5).unwrap();
        for l in 0..net.num_layers() {
            net.weights_mut(l).fill(0.0);
            net.biases_mut(l).fill(0.0);
        }
        assert_eq!(net.forward(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn output_bias_passes_through_zero_trunk() {
        let mut net = QNetwork::init(&[3, 2, 2], 5).unwrap();
        for l in 0..net.num_layers() {
            net.weights_mut(l).fill(0.0);
        }
        let last = net.num_layers() - 1;
        net.biases_mut(last).copy_from_slice(&[0.25, -0.5]);
        assert_eq!(net.forward(&[9.0, 9.0, 9.0]).unwrap(), vec![0.25, -0.5]);
    }

    #[test]
    fn forward_matches_straight_line_oracle() {
        // Independent re-evaluation with explicit matrix arithmetic.
        let net = QNetwork::init(&[4, 3, 2], 13).unwrap();
        let state = [0.3, -0.7, 1.1, 0.05];

        let mut hidden = [0.0; 3];
        for o in 0..3 {
            let mut acc = net.biases(0)[o];
            for i in 0..4 {
                acc += net.weights(0)[o * 4 + i] * state[i];
            }
            hidden[o] = acc.max(0.0);
        }
        let mut expected = [0.0; 2];
        for o in 0..2 {
            let mut acc = net.biases(1)[o];
            for i in 0..3 {
                acc += net.weights(1)[o * 3 + i] * hidden[i];
            }
            expected[o] = acc;
        }

        let actual = net.forward(&state).unwrap();
        for (a, e) in actual.iter().zip(&expected) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_rejects_dimension_mismatch() {
        let net = QNetwork::init(&[4, 2], 0).unwrap();
        assert!(matches!(
            net.forward(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn training_on_matching_targets_is_a_fixed_point() {
        let mut net = QNetwork::init(&[5, 4, 3], 21).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let states: Vec<Vec<f64>> = (0..8)
            .map(|_| (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let targets: Vec<Vec<f64>> = states.iter().map(|s| net.forward(s).unwrap()).collect();
        let batch = TrainBatch::new(states, targets).unwrap();
        let before = net.clone();
        let loss = net.train_batch(&batch, 0.1).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(net, before);
    }

    #[test]
    fn single_linear_unit_descent_step() {
        // One weight, state 1, target 1, w = 0, lr = 0.5:
        // d/dw (w - 1)^2 = 2(w - 1) = -2, so w' = 0 - 0.5 * (-2) = 1.
        let mut net = QNetwork::init(&[1, 1], 0).unwrap();
        net.weights_mut(0)[0] = 0.0;
        net.biases_mut(0)[0] = 0.0;
        let batch = TrainBatch::new(vec![vec![1.0]], vec![vec![1.0]]).unwrap();
        let loss = net.train_batch(&batch, 0.5).unwrap();
        assert_eq!(loss, 1.0);
        assert_eq!(net.weights(0)[0], 1.0);
    }

    #[test]
    fn repeated_training_is_non_increasing() {
        let mut net = QNetwork::init(&[6, 8, 4], 17).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let batch = random_batch(&mut rng, 16, 6, 4);
        let mut prev = f64::INFINITY;
        for _ in 0..100 {
            let loss = net.train_batch(&batch, 1e-3).unwrap();
            assert!(loss <= prev + 1e-12, "loss increased: {prev} -> {loss}");
            prev = loss;
        }
    }

    #[test]
    fn non_finite_loss_reports_batch_index() {
        let mut net = QNetwork::init(&[2, 2], 4).unwrap();
        let batch = TrainBatch::new(
            vec![vec![1.0, 1.0], vec![f64::INFINITY, 1.0]],
            vec![vec![0.0, 0.0], vec![0.0, 0.0]],
        )
        .unwrap();
        assert!(matches!(
            net.train_batch(&batch, 0.1),
            Err(Error::NonFiniteLoss { batch_index: 1 })
        ));
    }

    #[test]
    fn gradient_check_small_net() {
        let net = QNetwork::init(&[5, 4, 3], 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let batch = random_batch(&mut rng, 6, 5, 3);
        let err = net.gradient_check(&batch, 1e-5).unwrap();
        assert!(err < 1e-4, "gradient check error {err}");
    }

    #[test]
    fn gradient_check_linear_net_is_exact() {
        // No hidden layers: the loss is quadratic, so central differences
        // agree with backprop up to rounding.
        let net = QNetwork::init(&[4, 3], 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let batch = random_batch(&mut rng, 5, 4, 3);
        let err = net.gradient_check(&batch, 1e-5).unwrap();
        assert!(err < 1e-9, "linear net gradient error {err}");
    }

    #[test]
    fn gradient_check_detects_perturbed_backprop() {
        // Mutation test: scaling the analytic gradient by 1% must blow the
        // relative error well past the acceptance threshold.
        let net = QNetwork::init(&[5, 4, 3], 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let batch = random_batch(&mut rng, 6, 5, 3);
        let (_, grads) = net.loss_and_gradients(&batch).unwrap();
        let eps = 1e-5;

        let mut max_rel = 0.0f64;
        for layer in 0..net.num_layers() {
            for i in 0..net.weights(layer).len() {
                let mut plus = net.clone();
                let mut minus = net.clone();
                plus.weights_mut(layer)[i] += eps;
                minus.weights_mut(layer)[i] -= eps;
                let numeric =
                    (plus.batch_loss(&batch).unwrap() - minus.batch_loss(&batch).unwrap())
                        / (2.0 * eps);
                let perturbed = grads[layer].weights[i] * 1.01;
                let rel = (perturbed - numeric).abs() / numeric.abs().max(1.0);
                max_rel = max_rel.max(rel);
            }
        }
        assert!(max_rel > 1e-4, "mutated gradient passed: {max_rel}");
    }

    #[test]
    fn checkpoint_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.json");
        let mut net = QNetwork::init(&[6, 4, 2], 77).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let batch = random_batch(&mut rng, 4, 6, 2);
        net.train_batch(&batch, 0.01).unwrap();

        net.save(&path).unwrap();
        let back = QNetwork::load(&path).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn load_rejects_inconsistent_checkpoint() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(
            &path,
            r#"{"version":1,"dims":[2,3],"seed":0,"layers":[{"in_dim":2,"out_dim":3,"weights":[0.0],"biases":[0.0,0.0,0.0]}]}"#,
        )
        .unwrap();
        assert!(QNetwork::load(&path).is_err());
    }
}
