//! Mini-batch training, evaluation and the per-epoch run log.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::datagen::{Dataset, Heatmap};
use crate::error::{Error, Result};
use crate::model::{batch_tensor, HqcnnModel};
use crate::nn::{softmax_cross_entropy, SgdNesterov, Tensor};

const SHUFFLE_STREAM: u64 = 1;
const DROPOUT_STREAM: u64 = 2;
const EVAL_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 500, batch: 64, lr: 0.01, momentum: 0.95, weight_decay: 1e-4, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_acc: f64,
    pub val_acc: f64,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunLog {
    pub seed: u64,
    /// `key = value` pairs describing the run, in insertion order.
    pub config: Vec<(String, String)>,
    pub epochs: Vec<EpochRecord>,
}

pub const RUN_LOG_HEADER: &str = "epoch,train_acc,val_acc,train_loss,val_loss";

impl RunLog {
    pub fn train_acc(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.train_acc).collect()
    }

    pub fn val_acc(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.val_acc).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{RUN_LOG_HEADER}\n");
        for e in &self.epochs {
            writeln!(
                out,
                "{},{:.6},{:.6},{:.6},{:.6}",
                e.epoch, e.train_acc, e.val_acc, e.train_loss, e.val_loss
            )
            .expect("writing to a String");
        }
        out
    }

    /// Parses the CSV written by [`to_csv`](Self::to_csv). Config and seed
    /// are not part of the CSV and come back empty.
    pub fn parse_csv(text: &str, path: &Path) -> Result<RunLog> {
        let err = |line: usize, msg: String| Error::Format { path: path.to_path_buf(), line, msg };
        let mut lines = text.lines();
        if lines.next() != Some(RUN_LOG_HEADER) {
            return Err(err(1, format!("expected header '{RUN_LOG_HEADER}'")));
        }
        let mut epochs = Vec::new();
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(err(line_no, format!("expected 5 fields, found {}", fields.len())));
            }
            let epoch = fields[0].parse().map_err(|_| err(line_no, format!("bad epoch '{}'", fields[0])))?;
            let mut v = [0.0; 4];
            for (slot, f) in v.iter_mut().zip(&fields[1..]) {
                *slot = f.parse().map_err(|_| err(line_no, format!("bad number '{f}'")))?;
            }
            epochs.push(EpochRecord { epoch, train_acc: v[0], val_acc: v[1], train_loss: v[2], val_loss: v[3] });
        }
        Ok(RunLog { seed: 0, config: Vec::new(), epochs })
    }
}

/// Argmax with ties resolved to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Fraction of rows of `[B, C]` logits whose argmax equals the target.
pub fn accuracy_of_logits(logits: &Tensor, targets: &[usize]) -> Result<f64> {
    logits.expect_rank(2, "logits")?;
    let c = logits.shape()[1];
    if targets.is_empty() || targets.len() * c != logits.len() {
        return Err(Error::Shape(format!("{} targets for logits {:?}", targets.len(), logits.shape())));
    }
    let hits = logits.data.chunks(c).zip(targets).filter(|(row, &t)| argmax(row) == t).count();
    Ok(hits as f64 / targets.len() as f64)
}

/// `(accuracy, mean loss)` in eval mode.
pub fn evaluate_with_loss(model: &HqcnnModel, samples: &[&Heatmap]) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::Validation("cannot evaluate on an empty sample set".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (mut hits, mut loss_sum) = (0.0, 0.0);
    for chunk in samples.chunks(EVAL_CHUNK) {
        let targets: Vec<usize> = chunk.iter().map(|s| s.label.class_index()).collect();
        let (logits, _) = model.forward(&batch_tensor(chunk), false, false, &mut rng)?;
        let (loss, _) = softmax_cross_entropy(&logits, &targets)?;
        hits += accuracy_of_logits(&logits, &targets)? * chunk.len() as f64;
        loss_sum += loss * chunk.len() as f64;
    }
    let n = samples.len() as f64;
    Ok((hits / n, loss_sum / n))
}

pub fn evaluate(model: &HqcnnModel, samples: &[&Heatmap]) -> Result<f64> {
    evaluate_with_loss(model, samples).map(|(acc, _)| acc)
}

/// Trains in place and returns one record per completed epoch. Mini-batches
/// are reshuffled every epoch; the last batch may be smaller.
pub fn train(model: &mut HqcnnModel, dataset: &Dataset, cfg: &TrainConfig) -> Result<RunLog> {
    let train_set = dataset.train_samples();
    let val_set = dataset.val_samples();
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Validation("training needs nonempty train and validation splits".into()));
    }
    if cfg.batch == 0 || cfg.batch > train_set.len() {
        return Err(Error::Config(format!(
            "batch must be in 1..={} (training set size), got {}",
            train_set.len(),
            cfg.batch
        )));
    }
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(SHUFFLE_STREAM);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    dropout_rng.set_stream(DROPOUT_STREAM);
    let mut opt = SgdNesterov::new(cfg.lr, cfg.momentum, cfg.weight_decay);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut log = RunLog { seed: cfg.seed, config: Vec::new(), epochs: Vec::with_capacity(cfg.epochs) };
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        for idx in order.chunks(cfg.batch) {
            let batch: Vec<&Heatmap> = idx.iter().map(|&i| train_set[i]).collect();
            train_step(model, &mut opt, &batch, &mut dropout_rng)?;
        }
        let (train_acc, train_loss) = evaluate_with_loss(model, &train_set)?;
        let (val_acc, val_loss) = evaluate_with_loss(model, &val_set)?;
        log.epochs.push(EpochRecord { epoch, train_acc, val_acc, train_loss, val_loss });
    }
    Ok(log)
}

/// One forward/backward/update on a mini-batch with dropout on. Returns
/// the batch loss.
pub fn train_step(
    model: &mut HqcnnModel,
    opt: &mut SgdNesterov,
    batch: &[&Heatmap],
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let targets: Vec<usize> = batch.iter().map(|s| s.label.class_index()).collect();
    let cache = model.forward_train(&batch_tensor(batch), true, rng)?;
    let (loss, d_logits) = softmax_cross_entropy(&cache.logits, &targets)?;
    model.backward(&cache, &d_logits)?;
    opt.step(&mut model.param_groups()?)?;
    Ok(loss)
}

/// Copy of `dataset` with labels permuted across samples, for chance-level
/// control runs. The split is kept.
pub fn shuffle_labels(dataset: &Dataset, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(3);
    let mut labels: Vec<_> = dataset.samples.iter().map(|s| s.label).collect();
    labels.shuffle(&mut rng);
    let mut out = dataset.clone();
    for (s, l) in out.samples.iter_mut().zip(labels) {
        s.label = l;
    }
    out
}
