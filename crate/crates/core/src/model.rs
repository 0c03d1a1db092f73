//! The hybrid network: three conv blocks, a linear reduction to the qubit
//! count, the quantum layer, and a linear classifier head.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::datagen::{Heatmap, CELLS, GRID};
use crate::encodings::{AnsatzSpec, FeatureMapSpec};
use crate::error::{Error, Result};
use crate::nn::ops::{self, KERNEL};
use crate::nn::{checkpoint, Tensor};
use crate::qnn::{Observables, QnnGrad, QnnLayer};

pub const CHANNELS: [usize; 4] = [1, 16, 32, 64];
pub const NUM_CLASSES: usize = 3;
pub const DROPOUT: f64 = 0.5;
const INPUT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub n_qubits: usize,
    pub feature_map: FeatureMapSpec,
    pub ansatz: AnsatzSpec,
    pub observables: Observables,
    pub dropout: f64,
}

#[derive(Debug, Clone)]
pub struct Dense {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Dense {
    fn init(n_in: usize, n_out: usize, rng: &mut impl Rng) -> Self {
        let bound = (1.0 / n_in as f64).sqrt();
        Dense { weight: Tensor::uniform(vec![n_out, n_in], bound, rng), bias: Tensor::uniform(vec![n_out], bound, rng) }
    }
}

#[derive(Debug, Clone)]
pub struct Conv {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Conv {
    fn init(c_in: usize, c_out: usize, rng: &mut impl Rng) -> Self {
        let bound = (1.0 / (c_in * KERNEL * KERNEL) as f64).sqrt();
        Conv {
            weight: Tensor::uniform(vec![c_out, c_in, KERNEL, KERNEL], bound, rng),
            bias: Tensor::uniform(vec![c_out], bound, rng),
        }
    }
}

/// Per-sample embeddings at the three analysis stages.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageCapture {
    /// Input to the quantum layer (`n_qubits` values).
    pub classical: Vec<Vec<f64>>,
    /// Measurement probabilities of the feature-map-only state (`2^n`).
    pub feature_map: Vec<Vec<f64>>,
    /// Quantum layer outputs.
    pub qnn: Vec<Vec<f64>>,
}

struct BlockCache {
    input: Tensor,
    pre_relu: Tensor,
    pooled_shape: Vec<usize>,
    argmax: Vec<usize>,
    mask: Vec<f64>,
}

/// Everything the backward pass needs from one training forward pass.
pub struct ForwardCache {
    blocks: Vec<BlockCache>,
    conv_out_shape: Vec<usize>,
    flat: Tensor,
    reduced: Tensor,
    qnn_grads: Vec<QnnGrad>,
    quantum_out: Tensor,
    pub logits: Tensor,
}

#[derive(Debug, Clone)]
pub struct HqcnnModel {
    pub config: ModelConfig,
    pub convs: Vec<Conv>,
    pub reduce: Dense,
    pub qnn: QnnLayer,
    pub head: Dense,
    /// Gradient of the last backward pass with respect to `qnn.weights`.
    pub quantum_grad: Vec<f64>,
}

/// Stacks heatmaps into a `[B, 1, 8, 8]` tensor.
pub fn batch_tensor(samples: &[&Heatmap]) -> Tensor {
    let mut data = Vec::with_capacity(samples.len() * CELLS);
    for s in samples {
        data.extend_from_slice(&s.grid);
    }
    Tensor::new(vec![samples.len(), 1, GRID, GRID], data).expect("consistent batch shape")
}

impl HqcnnModel {
    /// Seeded initialization: conv and linear weights and biases uniform in
    /// `±√(1/fan_in)`, quantum weights uniform in `[−π, π]`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&config.dropout) {
            return Err(Error::Config(format!("dropout must be in [0, 1), got {}", config.dropout)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let convs = CHANNELS.windows(2).map(|w| Conv::init(w[0], w[1], &mut rng)).collect();
        let reduce = Dense::init(CHANNELS[3], config.n_qubits, &mut rng);
        let feature_map = config.feature_map.build(config.n_qubits)?;
        let ansatz = config.ansatz.build(config.n_qubits)?;
        let mut qnn = QnnLayer::new(feature_map, &ansatz, config.observables)?;
        for w in qnn.weights.iter_mut() {
            *w = rng.random_range(-PI..PI);
        }
        let head = Dense::init(qnn.output_dim(), NUM_CLASSES, &mut rng);
        let quantum_grad = vec![0.0; qnn.weights.len()];
        Ok(HqcnnModel { config, convs, reduce, qnn, head, quantum_grad })
    }

    pub fn validate_input(batch: &Tensor) -> Result<()> {
        if batch.shape().len() != 4 || batch.shape()[1..] != [1, GRID, GRID] {
            return Err(Error::Shape(format!("expected input [B, 1, {GRID}, {GRID}], got {:?}", batch.shape())));
        }
        if let Some(v) = batch
            .data
            .iter()
            .find(|v| !(v.is_finite() && **v >= -INPUT_TOLERANCE && **v <= 1.0 + INPUT_TOLERANCE))
        {
            return Err(Error::Validation(format!("input value {v} outside [0, 1]")));
        }
        Ok(())
    }

    fn features(&self, batch: &Tensor, training: bool, rng: &mut impl Rng) -> Result<(Vec<BlockCache>, Vec<usize>, Tensor, Tensor)> {
        Self::validate_input(batch)?;
        let mut x = batch.clone();
        let mut blocks = Vec::with_capacity(self.convs.len());
        for conv in &self.convs {
            let pre_relu = ops::conv2d(&x, &conv.weight, &conv.bias)?;
            let act = ops::relu(&pre_relu);
            let (pooled, argmax) = ops::maxpool2(&act)?;
            let (dropped, mask) = ops::dropout(&pooled, self.config.dropout, training, rng)?;
            blocks.push(BlockCache { input: x, pre_relu, pooled_shape: pooled.shape().to_vec(), argmax, mask });
            x = dropped;
        }
        let conv_out_shape = x.shape().to_vec();
        let flat = ops::flatten(&x)?;
        let reduced = ops::linear(&flat, &self.reduce.weight, &self.reduce.bias)?;
        Ok((blocks, conv_out_shape, flat, reduced))
    }

    fn rows(t: &Tensor) -> impl Iterator<Item = &[f64]> {
        t.data.chunks(t.shape()[1])
    }

    /// Inference-style forward pass. With `capture`, also returns the stage
    /// embeddings of every sample.
    pub fn forward(
        &self,
        batch: &Tensor,
        training: bool,
        capture: bool,
        rng: &mut impl Rng,
    ) -> Result<(Tensor, Option<StageCapture>)> {
        let (_, _, _, reduced) = self.features(batch, training, rng)?;
        let rows: Vec<&[f64]> = Self::rows(&reduced).collect();
        let q: Vec<Vec<f64>> = rows.par_iter().map(|x| self.qnn.forward(x)).collect::<Result<_>>()?;
        let quantum_out = Tensor::new(vec![rows.len(), self.qnn.output_dim()], q.concat())?;
        let logits = ops::linear(&quantum_out, &self.head.weight, &self.head.bias)?;
        let captured = if capture {
            let feature_map =
                rows.par_iter().map(|x| self.qnn.feature_map_probabilities(x)).collect::<Result<_>>()?;
            Some(StageCapture { classical: rows.iter().map(|r| r.to_vec()).collect(), feature_map, qnn: q })
        } else {
            None
        };
        Ok((logits, captured))
    }

    /// Forward pass that also records what [`backward`](Self::backward)
    /// needs, including the quantum Jacobians of every sample.
    pub fn forward_train(&self, batch: &Tensor, training: bool, rng: &mut impl Rng) -> Result<ForwardCache> {
        let (blocks, conv_out_shape, flat, reduced) = self.features(batch, training, rng)?;
        let rows: Vec<&[f64]> = Self::rows(&reduced).collect();
        let qnn_grads: Vec<QnnGrad> = rows.par_iter().map(|x| self.qnn.grad(x)).collect::<Result<_>>()?;
        let q: Vec<f64> = qnn_grads.iter().flat_map(|g| g.outputs.iter().copied()).collect();
        let quantum_out = Tensor::new(vec![rows.len(), self.qnn.output_dim()], q)?;
        let logits = ops::linear(&quantum_out, &self.head.weight, &self.head.bias)?;
        Ok(ForwardCache { blocks, conv_out_shape, flat, reduced, qnn_grads, quantum_out, logits })
    }

    /// Back-propagates `d_logits` and stores parameter gradients on every
    /// tensor and in `quantum_grad`.
    pub fn backward(&mut self, cache: &ForwardCache, d_logits: &Tensor) -> Result<()> {
        let head = ops::linear_backward(&cache.quantum_out, &self.head.weight, d_logits)?;
        self.head.weight.set_grad(head.weights)?;
        self.head.bias.set_grad(head.bias)?;

        let n_out = self.qnn.output_dim();
        let n_feat = self.qnn.n_features();
        let batch = cache.qnn_grads.len();
        let mut q_grad = vec![0.0; self.qnn.weights.len()];
        let mut d_reduced = vec![0.0; batch * n_feat];
        for (b, g) in cache.qnn_grads.iter().enumerate() {
            let d_q = &head.input.data[b * n_out..][..n_out];
            for o in 0..n_out {
                for (w, d) in q_grad.iter_mut().zip(&g.d_weights[o]) {
                    *w += d_q[o] * d;
                }
                for (x, d) in d_reduced[b * n_feat..][..n_feat].iter_mut().zip(&g.d_features[o]) {
                    *x += d_q[o] * d;
                }
            }
        }
        self.quantum_grad = q_grad;
        let d_reduced = Tensor::new(vec![batch, n_feat], d_reduced)?;
        debug_assert_eq!(d_reduced.shape(), cache.reduced.shape());

        let red = ops::linear_backward(&cache.flat, &self.reduce.weight, &d_reduced)?;
        self.reduce.weight.set_grad(red.weights)?;
        self.reduce.bias.set_grad(red.bias)?;

        let mut grad = red.input.reshape(cache.conv_out_shape.clone())?;
        for (conv, block) in self.convs.iter_mut().zip(&cache.blocks).rev() {
            let g = ops::dropout_backward(&block.mask, &grad);
            debug_assert_eq!(g.shape(), &block.pooled_shape[..]);
            let g = ops::maxpool2_backward(block.pre_relu.shape(), &block.argmax, &g);
            let g = ops::relu_backward(&block.pre_relu, &g);
            let cg = ops::conv2d_backward(&block.input, &conv.weight, &g)?;
            conv.weight.set_grad(cg.weights)?;
            conv.bias.set_grad(cg.bias)?;
            grad = cg.input;
        }
        Ok(())
    }

    /// `(values, grads)` for every trainable group, in a fixed order:
    /// conv blocks, reduction, quantum weights, head.
    pub fn param_groups(&mut self) -> Result<Vec<(&mut [f64], &[f64])>> {
        let missing = || Error::Shape("parameter has no gradient; run backward first".into());
        let mut groups = Vec::new();
        for conv in self.convs.iter_mut() {
            groups.push(conv.weight.value_and_grad().ok_or_else(missing)?);
            groups.push(conv.bias.value_and_grad().ok_or_else(missing)?);
        }
        groups.push(self.reduce.weight.value_and_grad().ok_or_else(missing)?);
        groups.push(self.reduce.bias.value_and_grad().ok_or_else(missing)?);
        groups.push((self.qnn.weights.as_mut_slice(), self.quantum_grad.as_slice()));
        groups.push(self.head.weight.value_and_grad().ok_or_else(missing)?);
        groups.push(self.head.bias.value_and_grad().ok_or_else(missing)?);
        Ok(groups)
    }

    pub fn named_tensors(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        for (i, c) in self.convs.iter().enumerate() {
            out.push((format!("conv{}.weight", i + 1), c.weight.clone()));
            out.push((format!("conv{}.bias", i + 1), c.bias.clone()));
        }
        out.push(("reduce.weight".into(), self.reduce.weight.clone()));
        out.push(("reduce.bias".into(), self.reduce.bias.clone()));
        let qw = Tensor::new(vec![self.qnn.weights.len()], self.qnn.weights.clone()).expect("vector shape");
        out.push(("quantum.weights".into(), qw));
        out.push(("head.weight".into(), self.head.weight.clone()));
        out.push(("head.bias".into(), self.head.bias.clone()));
        out
    }

    pub fn checkpoint_bytes(&self) -> Vec<u8> {
        let named = self.named_tensors();
        let refs: Vec<(&str, &Tensor)> = named.iter().map(|(n, t)| (n.as_str(), t)).collect();
        checkpoint::encode(&refs)
    }

    /// Overwrites parameters from a checkpoint's tensors; names and shapes
    /// must match this model exactly.
    pub fn load_tensors(&mut self, tensors: &[(String, Tensor)]) -> Result<()> {
        let expected = self.named_tensors();
        if tensors.len() != expected.len() {
            return Err(Error::Shape(format!("checkpoint has {} tensors, model has {}", tensors.len(), expected.len())));
        }
        for ((name, t), (ename, et)) in tensors.iter().zip(&expected) {
            if name != ename || t.shape() != et.shape() {
                return Err(Error::Shape(format!(
                    "checkpoint tensor {name} {:?} does not match model tensor {ename} {:?}",
                    t.shape(),
                    et.shape()
                )));
            }
        }
        let mut it = tensors.iter().map(|(_, t)| t.clone());
        let mut next = || it.next().expect("length checked");
        for c in self.convs.iter_mut() {
            c.weight = next();
            c.bias = next();
        }
        self.reduce.weight = next();
        self.reduce.bias = next();
        self.qnn.weights = next().data;
        self.head.weight = next();
        self.head.bias = next();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encodings::Entanglement;
    use crate::nn::softmax_cross_entropy;

    pub(crate) fn small_config(feature_map: FeatureMapSpec) -> ModelConfig {
        ModelConfig {
            n_qubits: 3,
            feature_map,
            ansatz: AnsatzSpec { reps: 1 },
            observables: Observables::PerQubitZ,
            dropout: DROPOUT,
        }
    }

    fn random_batch(b: usize, seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..b * CELLS).map(|_| rng.random::<f64>()).collect();
        Tensor::new(vec![b, 1, GRID, GRID], data).unwrap()
    }

    #[test]
    fn shape_pipeline() {
        let m = HqcnnModel::new(small_config(FeatureMapSpec::z(1)), 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (blocks, conv_shape, flat, reduced) = m.features(&random_batch(2, 1), false, &mut rng).unwrap();
        assert_eq!(blocks[0].pre_relu.shape(), &[2, 16, 8, 8]);
        assert_eq!(blocks[1].pre_relu.shape(), &[2, 32, 4, 4]);
        assert_eq!(blocks[2].pre_relu.shape(), &[2, 64, 2, 2]);
        assert_eq!(conv_shape, vec![2, 64, 1, 1]);
        assert_eq!(flat.shape(), &[2, 64]);
        assert_eq!(reduced.shape(), &[2, 3]);
    }

    #[test]
    fn zero_head_gives_equal_logits() {
        let mut m = HqcnnModel::new(small_config(FeatureMapSpec::zz(1, Entanglement::Linear)), 1).unwrap();
        m.head.weight = Tensor::zeros(m.head.weight.shape().to_vec());
        m.head.bias = Tensor::zeros(vec![NUM_CLASSES]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = Tensor::zeros(vec![1, 1, GRID, GRID]);
        let (logits, _) = m.forward(&x, false, false, &mut rng).unwrap();
        assert!(logits.data.iter().all(|&v| v == logits.data[0]));
    }

    #[test]
    fn batch_rows_match_single_calls() {
        let m = HqcnnModel::new(small_config(FeatureMapSpec::z(2)), 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let batch = random_batch(2, 5);
        let (both, _) = m.forward(&batch, false, false, &mut rng).unwrap();
        for b in 0..2 {
            let one = Tensor::new(vec![1, 1, GRID, GRID], batch.data[b * CELLS..][..CELLS].to_vec()).unwrap();
            let (single, _) = m.forward(&one, false, false, &mut rng).unwrap();
            assert_eq!(&both.data[b * 3..][..3], &single.data[..]);
        }
    }

    #[test]
    fn captures_are_consistent() {
        let m = HqcnnModel::new(small_config(FeatureMapSpec::pauli(&["X", "Y", "Z"], 1, Entanglement::Linear).unwrap()), 3)
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (logits, cap) = m.forward(&random_batch(4, 9), false, true, &mut rng).unwrap();
        assert!(logits.data.iter().all(|v| v.is_finite()));
        let cap = cap.unwrap();
        assert_eq!(cap.feature_map[0].len(), 8);
        assert!((cap.feature_map[0].iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (x, q) in cap.classical.iter().zip(&cap.qnn) {
            assert_eq!(&m.qnn.forward(x).unwrap(), q);
            assert!(q.iter().all(|v| (-1.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn rejects_unnormalized_input() {
        let m = HqcnnModel::new(small_config(FeatureMapSpec::z(1)), 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut x = Tensor::zeros(vec![1, 1, GRID, GRID]);
        x.data[5] = 1.0 + 1e-6;
        assert!(matches!(m.forward(&x, false, false, &mut rng), Err(Error::Validation(_))));
        x.data[5] = 1.0 + 1e-10;
        assert!(m.forward(&x, false, false, &mut rng).is_ok());
        assert!(matches!(m.forward(&Tensor::zeros(vec![1, 1, 4, 4]), false, false, &mut rng), Err(Error::Shape(_))));
    }

    #[test]
    fn train_cache_logits_match_forward() {
        let m = HqcnnModel::new(small_config(FeatureMapSpec::z(1)), 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = random_batch(3, 2);
        let cache = m.forward_train(&x, false, &mut rng).unwrap();
        let (logits, _) = m.forward(&x, false, false, &mut rng).unwrap();
        assert_eq!(cache.logits, logits);
        let mut m2 = m.clone();
        let (_, d) = softmax_cross_entropy(&cache.logits, &[0, 1, 2]).unwrap();
        m2.backward(&cache, &d).unwrap();
        assert_eq!(m2.param_groups().unwrap().len(), 6 + 2 + 1 + 2);
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = HqcnnModel::new(small_config(FeatureMapSpec::z(1)), 7).unwrap();
        let bytes = m.checkpoint_bytes();
        let tensors = checkpoint::decode(&bytes, std::path::Path::new("mem")).unwrap();
        let mut other = HqcnnModel::new(small_config(FeatureMapSpec::z(1)), 8).unwrap();
        other.load_tensors(&tensors).unwrap();
        assert_eq!(other.qnn.weights, m.qnn.weights);
        assert_eq!(other.head.weight, m.head.weight);
        let mut wrong = HqcnnModel::new(ModelConfig { n_qubits: 4, ..small_config(FeatureMapSpec::z(1)) }, 0).unwrap();
        assert!(wrong.load_tensors(&tensors).is_err());
    }
}
