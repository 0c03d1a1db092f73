//! Experiment runner behind the `hqcnn` binary: config files, run
//! directories, sweeps and offline analysis.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::{make_dataset, CausalLabel, Dataset, Heatmap, MIN_PER_CLASS};
use crate::diagnostics::{self, FdrTable, DEFAULT_THRESHOLD, EARLY_EPOCHS};
use crate::encodings::{AnsatzSpec, Entanglement, FeatureMapSpec};
use crate::error::{Error, Result};
use crate::model::{batch_tensor, HqcnnModel, ModelConfig, StageCapture, DROPOUT};
use crate::qnn::Observables;
use crate::train::{self, RunLog, TrainConfig};

pub const SEED_ENV: &str = "HQCNN_SEED";

pub const TRAINING_LOG: &str = "training_log.csv";
pub const METRICS_JSON: &str = "metrics.json";
pub const METRICS_TXT: &str = "metrics.txt";
pub const CHECKPOINT: &str = "model.ckpt";
pub const CONFIG_ECHO: &str = "config.txt";
pub const PCA_SUMMARY: &str = "pca_summary.csv";
pub const ACCURACY_PLOT: &str = "accuracy.svg";
pub const SWEEP_SUMMARY: &str = "summary.csv";

pub const STAGES: [&str; 3] = ["classical", "feature_map", "qnn"];
const PCA_COMPONENTS: usize = 2;

/// Every knob of one training run. Defaults are desk-scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub n_qubits: usize,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub ansatz_reps: usize,
    pub feature_map: FeatureMapSpec,
    pub observables: Observables,
    /// Dataset file; when absent, data is generated from `per_class` and `seed`.
    pub data: Option<PathBuf>,
    pub per_class: usize,
    pub out_dir: PathBuf,
    /// Permute labels before training (chance-level control).
    pub shuffle_labels: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        ExperimentConfig {
            seed: 0,
            n_qubits: 4,
            epochs: 60,
            batch: t.batch,
            lr: t.lr,
            momentum: t.momentum,
            weight_decay: t.weight_decay,
            ansatz_reps: 2,
            feature_map: FeatureMapSpec::pauli(&["X", "Y", "Z"], 1, Entanglement::Linear).expect("valid letters"),
            observables: Observables::PerQubitZ,
            data: None,
            per_class: 40,
            out_dir: PathBuf::from("runs/default"),
            shuffle_labels: false,
        }
    }
}

pub const CONFIG_KEYS: [&str; 14] = [
    "seed",
    "n_qubits",
    "epochs",
    "batch",
    "lr",
    "momentum",
    "weight_decay",
    "ansatz_reps",
    "feature_map",
    "observables",
    "data",
    "per_class",
    "out_dir",
    "shuffle_labels",
];

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("{key}: cannot parse '{value}'")))
}

fn check(ok: bool, key: &str, value: impl std::fmt::Display, range: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!("{key} = {value} is outside {range}")))
    }
}

impl ExperimentConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "seed" => self.seed = parse_num(key, value)?,
            "n_qubits" => self.n_qubits = parse_num(key, value)?,
            "epochs" => self.epochs = parse_num(key, value)?,
            "batch" => self.batch = parse_num(key, value)?,
            "lr" => self.lr = parse_num(key, value)?,
            "momentum" => self.momentum = parse_num(key, value)?,
            "weight_decay" => self.weight_decay = parse_num(key, value)?,
            "ansatz_reps" => self.ansatz_reps = parse_num(key, value)?,
            "feature_map" => self.feature_map = value.parse()?,
            "observables" => self.observables = value.parse()?,
            "data" => self.data = if value.is_empty() { None } else { Some(PathBuf::from(value)) },
            "per_class" => self.per_class = parse_num(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "shuffle_labels" => self.shuffle_labels = parse_num(key, value)?,
            _ => return Err(Error::Config(format!("unknown config key '{key}'; known keys: {}", CONFIG_KEYS.join(", ")))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "seed" => self.seed.to_string(),
            "n_qubits" => self.n_qubits.to_string(),
            "epochs" => self.epochs.to_string(),
            "batch" => self.batch.to_string(),
            "lr" => self.lr.to_string(),
            "momentum" => self.momentum.to_string(),
            "weight_decay" => self.weight_decay.to_string(),
            "ansatz_reps" => self.ansatz_reps.to_string(),
            "feature_map" => self.feature_map.to_string(),
            "observables" => self.observables.to_string(),
            "data" => self.data.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
            "per_class" => self.per_class.to_string(),
            "out_dir" => self.out_dir.display().to_string(),
            "shuffle_labels" => self.shuffle_labels.to_string(),
            _ => return None,
        })
    }

    /// Applies `key = value` lines. Blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str, path: &Path) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Format {
                path: path.to_path_buf(),
                line: i + 1,
                msg: "expected 'key = value'".into(),
            })?;
            self.set(k.trim(), v).map_err(|e| match e {
                Error::Config(msg) => Error::Config(format!("{}:{}: {msg}", path.display(), i + 1)),
                other => other,
            })?;
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override '{assignment}' is not key=value")))?;
        self.set(k.trim(), v)
    }

    /// Defaults, then `env_seed`, then the config file, then overrides.
    pub fn load(file: Option<&Path>, overrides: &[String], env_seed: Option<&str>) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        if let Some(s) = env_seed {
            cfg.seed = parse_num(SEED_ENV, s)?;
        }
        if let Some(path) = file {
            let text = fs::read_to_string(path).map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => Error::Config(format!("config file {} not found", path.display())),
                _ => Error::io(path, e),
            })?;
            cfg.apply_text(&text, path)?;
        }
        for o in overrides {
            cfg.apply_override(o)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        check((1..=12).contains(&self.n_qubits), "n_qubits", self.n_qubits, "1..=12")?;
        check((1..=100_000).contains(&self.epochs), "epochs", self.epochs, "1..=100000")?;
        check(self.batch >= 1, "batch", self.batch, "1..")?;
        check(self.lr.is_finite() && self.lr > 0.0, "lr", self.lr, "(0, ∞)")?;
        check((0.0..1.0).contains(&self.momentum), "momentum", self.momentum, "[0, 1)")?;
        check((0.0..1.0).contains(&self.weight_decay), "weight_decay", self.weight_decay, "[0, 1)")?;
        check(self.ansatz_reps <= 10, "ansatz_reps", self.ansatz_reps, "0..=10")?;
        check((1..=10).contains(&self.feature_map.reps), "feature_map reps", self.feature_map.reps, "1..=10")?;
        if self.per_class < MIN_PER_CLASS {
            return Err(Error::Config(format!(
                "per_class must be at least {MIN_PER_CLASS}, got {}",
                self.per_class
            )));
        }
        // Surface structural problems (e.g. a ZZ map on one qubit) early.
        self.feature_map.build(self.n_qubits)?;
        Ok(())
    }

    /// `key = value` lines for every key, in [`CONFIG_KEYS`] order.
    pub fn to_text(&self) -> String {
        CONFIG_KEYS.iter().map(|k| format!("{k} = {}\n", self.get(k).expect("known key"))).collect()
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            n_qubits: self.n_qubits,
            feature_map: self.feature_map.clone(),
            ansatz: AnsatzSpec { reps: self.ansatz_reps },
            observables: self.observables,
            dropout: DROPOUT,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch: self.batch,
            lr: self.lr,
            momentum: self.momentum,
            weight_decay: self.weight_decay,
            seed: self.seed,
        }
    }

    /// Loads or generates the dataset this config describes.
    pub fn dataset(&self) -> Result<Dataset> {
        let data = match &self.data {
            Some(path) => {
                if !path.is_file() {
                    return Err(Error::Config(format!("dataset {} not found", path.display())));
                }
                Dataset::load(path)?
            }
            None => make_dataset(self.per_class, self.seed)?,
        };
        Ok(if self.shuffle_labels { train::shuffle_labels(&data, self.seed) } else { data })
    }
}

/// Writes `bytes` to `path` through `path.partial`, renamed on success. A
/// failed write leaves the `.partial` file behind.
pub fn write_output(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut partial = path.as_os_str().to_owned();
    partial.push(".partial");
    let partial = PathBuf::from(partial);
    fs::write(&partial, bytes).map_err(|e| Error::io(&partial, e))?;
    fs::rename(&partial, path).map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdrEntry {
    pub class_a: i64,
    pub class_b: i64,
    pub fdr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub config: BTreeMap<String, String>,
    pub seed: u64,
    pub epochs: usize,
    pub final_train_acc: f64,
    pub final_val_acc: f64,
    pub fdr_feature: String,
    pub fdr_pairs: Vec<FdrEntry>,
}

/// Contents of `metrics.json`. Metrics that are undefined for a run (too
/// few epochs, a flat training curve, zero variance) are `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub final_gap: f64,
    pub mean_gap: f64,
    pub epoch_to_90: Option<usize>,
    pub early_slope: Option<f64>,
    pub overfit_drop: f64,
    pub train_sigma: Option<f64>,
    pub train_mu_abs_diff: Option<f64>,
    pub val_sigma: Option<f64>,
    pub val_mu_abs_diff: Option<f64>,
    pub stability_ratio: Option<f64>,
    pub silhouette_classical: Option<f64>,
    pub silhouette_feature_map: Option<f64>,
    pub silhouette_qnn: Option<f64>,
    pub fdr_avg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<RunInfo>,
}

impl Metrics {
    /// Curve metrics only; stage metrics start out `None`.
    pub fn from_curves(train: &[f64], val: &[f64]) -> Result<Self> {
        let (final_gap, mean_gap) = diagnostics::generalization_gap(train, val)?;
        let train_f = diagnostics::fluctuation_stats(train).ok();
        let val_f = diagnostics::fluctuation_stats(val).ok();
        let stability = match (train_f, val_f) {
            (Some((_, mt)), Some((_, mv))) => diagnostics::stability_ratio(mv, mt).ok(),
            _ => None,
        };
        Ok(Metrics {
            final_gap,
            mean_gap,
            epoch_to_90: diagnostics::epoch_to_threshold(val, DEFAULT_THRESHOLD)?,
            early_slope: diagnostics::early_slope(val, EARLY_EPOCHS).ok(),
            overfit_drop: diagnostics::overfit_drop(val)?,
            train_sigma: train_f.map(|f| f.0),
            train_mu_abs_diff: train_f.map(|f| f.1),
            val_sigma: val_f.map(|f| f.0),
            val_mu_abs_diff: val_f.map(|f| f.1),
            stability_ratio: stability,
            silhouette_classical: None,
            silhouette_feature_map: None,
            silhouette_qnn: None,
            fdr_avg: None,
            run: None,
        })
    }

    /// Flat `key = value` report; undefined values print as `not reached`
    /// (epoch threshold) or `undefined`.
    pub fn flat_report(&self) -> String {
        let f = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "undefined".into());
        let rows: Vec<(&str, String)> = vec![
            ("final_gap", f(Some(self.final_gap))),
            ("mean_gap", f(Some(self.mean_gap))),
            ("epoch_to_90", self.epoch_to_90.map(|e| e.to_string()).unwrap_or_else(|| "not reached".into())),
            ("early_slope", f(self.early_slope)),
            ("overfit_drop", f(Some(self.overfit_drop))),
            ("train_sigma", f(self.train_sigma)),
            ("train_mu_abs_diff", f(self.train_mu_abs_diff)),
            ("val_sigma", f(self.val_sigma)),
            ("val_mu_abs_diff", f(self.val_mu_abs_diff)),
            ("stability_ratio", f(self.stability_ratio)),
            ("silhouette_classical", f(self.silhouette_classical)),
            ("silhouette_feature_map", f(self.silhouette_feature_map)),
            ("silhouette_qnn", f(self.silhouette_qnn)),
            ("fdr_avg", f(self.fdr_avg)),
        ];
        rows.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            line: e.line(),
            msg: e.to_string(),
        })
    }
}

fn fmt6(v: f64) -> String {
    format!("{v:.6}")
}

/// PCA of one stage on one split, plus the silhouette of the projection
/// under the true labels.
#[derive(Debug, Clone, PartialEq)]
pub struct StagePca {
    pub stage: &'static str,
    pub split: &'static str,
    pub pca: diagnostics::PcaResult,
    pub silhouette: Option<f64>,
}

fn stage_pca(stage: &'static str, split: &'static str, rows: &[Vec<f64>], labels: &[usize]) -> Result<StagePca> {
    let dims = rows.first().map_or(0, Vec::len);
    let k = PCA_COMPONENTS.min(dims).min(rows.len().saturating_sub(1));
    let pca = diagnostics::pca(rows, k)?;
    let silhouette = diagnostics::silhouette(&pca.projected, labels).ok();
    Ok(StagePca { stage, split, pca, silhouette })
}

fn capture(model: &HqcnnModel, samples: &[&Heatmap]) -> Result<StageCapture> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (_, cap) = model.forward(&batch_tensor(samples), false, true, &mut rng)?;
    Ok(cap.expect("capture requested"))
}

fn stage_rows<'a>(cap: &'a StageCapture, stage: &str) -> &'a [Vec<f64>] {
    match stage {
        "classical" => &cap.classical,
        "feature_map" => &cap.feature_map,
        _ => &cap.qnn,
    }
}

fn projection_csv(labels: &[CausalLabel], pca: &diagnostics::PcaResult) -> String {
    let k = pca.explained_variance_ratio.len();
    let mut out = String::from("label");
    for i in 1..=k {
        write!(out, ",pc{i}").expect("string write");
    }
    out.push('\n');
    for (l, row) in labels.iter().zip(&pca.projected) {
        out.push_str(&l.value().to_string());
        for v in row {
            out.push(',');
            out.push_str(&fmt6(*v));
        }
        out.push('\n');
    }
    out
}

fn pca_summary_csv(stages: &[StagePca]) -> String {
    let mut out = String::from("stage,split,n_components,ratio_pc1,ratio_pc2,silhouette\n");
    for s in stages {
        let r = &s.pca.explained_variance_ratio;
        let cell = |i: usize| r.get(i).map(|v| fmt6(*v)).unwrap_or_default();
        let sil = s.silhouette.map(fmt6).unwrap_or_default();
        writeln!(out, "{},{},{},{},{},{}", s.stage, s.split, r.len(), cell(0), cell(1), sil).expect("string write");
    }
    out
}

/// Accuracy-vs-epoch line plot for both curves.
pub fn accuracy_svg(log: &RunLog) -> String {
    let (w, h) = (640.0, 400.0);
    let (left, right, top, bottom) = (60.0, 20.0, 20.0, 50.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let n = log.epochs.len().max(1);
    let x_of = |epoch: usize| left + if n > 1 { (epoch - 1) as f64 / (n - 1) as f64 * pw } else { pw / 2.0 };
    let y_of = |acc: f64| top + (1.0 - acc.clamp(0.0, 1.0)) * ph;
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#).unwrap();
    writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<path d="M{left} {top} V{} H{}" fill="none" stroke="black"/>"#,
        top + ph,
        left + pw
    )
    .unwrap();
    for i in 0..=4 {
        let acc = i as f64 / 4.0;
        let y = y_of(acc);
        writeln!(s, r#"<line x1="{}" y1="{y:.2}" x2="{left}" y2="{y:.2}" stroke="black"/>"#, left - 5.0).unwrap();
        writeln!(s, r#"<text x="{}" y="{:.2}" font-size="12" text-anchor="end">{acc:.2}</text>"#, left - 8.0, y + 4.0)
            .unwrap();
    }
    let ticks = 5.min(n);
    for i in 0..ticks {
        let epoch = if ticks > 1 { 1 + i * (n - 1) / (ticks - 1) } else { 1 };
        let x = x_of(epoch);
        writeln!(s, r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/>"#, top + ph, top + ph + 5.0).unwrap();
        writeln!(s, r#"<text x="{x:.2}" y="{}" font-size="12" text-anchor="middle">{epoch}</text>"#, top + ph + 20.0)
            .unwrap();
    }
    writeln!(s, r#"<text x="{}" y="{}" font-size="13" text-anchor="middle">epoch</text>"#, left + pw / 2.0, h - 8.0)
        .unwrap();
    writeln!(
        s,
        r#"<text x="15" y="{}" font-size="13" text-anchor="middle" transform="rotate(-90 15 {})">accuracy</text>"#,
        top + ph / 2.0,
        top + ph / 2.0
    )
    .unwrap();
    for (name, color, values) in [("train", "#1f77b4", log.train_acc()), ("validation", "#ff7f0e", log.val_acc())] {
        let pts: Vec<String> =
            values.iter().enumerate().map(|(i, a)| format!("{:.2},{:.2}", x_of(i + 1), y_of(*a))).collect();
        writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"><title>{name}</title></polyline>"#, pts.join(" "))
            .unwrap();
    }
    writeln!(s, r##"<text x="{}" y="{}" font-size="12" fill="#1f77b4">train</text>"##, left + pw - 90.0, top + ph - 30.0)
        .unwrap();
    writeln!(s, r##"<text x="{}" y="{}" font-size="12" fill="#ff7f0e">validation</text>"##, left + pw - 90.0, top + ph - 14.0)
        .unwrap();
    s.push_str("</svg>\n");
    s
}

/// Trains one configuration and writes its run directory.
pub fn run_train(cfg: &ExperimentConfig) -> Result<Metrics> {
    cfg.validate()?;
    let dataset = cfg.dataset()?;
    let mut model = HqcnnModel::new(cfg.model_config(), cfg.seed)?;
    let mut log = train::train(&mut model, &dataset, &cfg.train_config())?;
    // The output location is not part of the experiment's identity.
    log.config = CONFIG_KEYS
        .iter()
        .filter(|&&k| k != "out_dir")
        .map(|k| (k.to_string(), cfg.get(k).expect("known key")))
        .collect();

    let dir = &cfg.out_dir;
    create_dir(dir)?;
    write_output(&dir.join(CONFIG_ECHO), cfg.to_text().as_bytes())?;
    write_output(&dir.join(TRAINING_LOG), log.to_csv().as_bytes())?;
    write_output(&dir.join(CHECKPOINT), &model.checkpoint_bytes())?;
    write_output(&dir.join(ACCURACY_PLOT), accuracy_svg(&log).as_bytes())?;

    let mut metrics = Metrics::from_curves(&log.train_acc(), &log.val_acc())?;
    let mut stages = Vec::new();
    let mut fdr: Option<FdrTable> = None;
    for (split, samples) in [("train", dataset.train_samples()), ("val", dataset.val_samples())] {
        let cap = capture(&model, &samples)?;
        let labels: Vec<CausalLabel> = samples.iter().map(|s| s.label).collect();
        let classes: Vec<usize> = labels.iter().map(|l| l.class_index()).collect();
        for stage in STAGES {
            let sp = stage_pca(stage, split, stage_rows(&cap, stage), &classes)?;
            write_output(&dir.join(format!("pca_{stage}_{split}.csv")), projection_csv(&labels, &sp.pca).as_bytes())?;
            if split == "val" {
                match stage {
                    "classical" => metrics.silhouette_classical = sp.silhouette,
                    "feature_map" => metrics.silhouette_feature_map = sp.silhouette,
                    _ => {
                        let pc1: Vec<f64> = sp.pca.projected.iter().map(|r| r[0]).collect();
                        fdr = diagnostics::fisher_discriminant_ratio(&pc1, &labels).ok();
                        metrics.silhouette_qnn = sp.silhouette;
                    }
                }
            }
            stages.push(sp);
        }
    }
    write_output(&dir.join(PCA_SUMMARY), pca_summary_csv(&stages).as_bytes())?;

    metrics.fdr_avg = fdr.as_ref().map(|t| t.average);
    let last = log.epochs.last().expect("at least one epoch");
    metrics.run = Some(RunInfo {
        config: log.config.iter().cloned().collect(),
        seed: cfg.seed,
        epochs: log.epochs.len(),
        final_train_acc: last.train_acc,
        final_val_acc: last.val_acc,
        fdr_feature: "pc1 of qnn-stage validation embeddings".into(),
        fdr_pairs: fdr
            .map(|t| t.pairs.iter().map(|&(a, b, f)| FdrEntry { class_a: a.value(), class_b: b.value(), fdr: f }).collect())
            .unwrap_or_default(),
    });
    let json = serde_json::to_string_pretty(&metrics).expect("metrics serialize") + "\n";
    write_output(&dir.join(METRICS_JSON), json.as_bytes())?;
    write_output(&dir.join(METRICS_TXT), metrics.flat_report().as_bytes())?;
    Ok(metrics)
}

pub fn gen_data(per_class: usize, seed: u64, out: &Path) -> Result<Dataset> {
    let data = make_dataset(per_class, seed)?;
    write_output(out, data.to_text().as_bytes())?;
    Ok(data)
}

/// Curve metrics recomputed from a run directory or a training-log CSV.
/// Stage metrics are taken from a sibling `metrics.json` when present.
pub fn analyze(path: &Path) -> Result<Metrics> {
    let (log_path, metrics_path) = if path.is_dir() {
        (path.join(TRAINING_LOG), Some(path.join(METRICS_JSON)))
    } else {
        (path.to_path_buf(), path.parent().map(|p| p.join(METRICS_JSON)))
    };
    if !log_path.is_file() {
        return Err(Error::Config(format!("training log {} not found", log_path.display())));
    }
    let text = fs::read_to_string(&log_path).map_err(|e| Error::io(&log_path, e))?;
    let log = RunLog::parse_csv(&text, &log_path)?;
    let mut metrics = Metrics::from_curves(&log.train_acc(), &log.val_acc())?;
    if let Some(stored) = metrics_path.filter(|p| p.is_file()).map(|p| Metrics::load(&p)).transpose()? {
        metrics.silhouette_classical = stored.silhouette_classical;
        metrics.silhouette_feature_map = stored.silhouette_feature_map;
        metrics.silhouette_qnn = stored.silhouette_qnn;
        metrics.fdr_avg = stored.fdr_avg;
        metrics.run = stored.run;
    }
    Ok(metrics)
}

/// Built-in sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// `ansatz_reps` ∈ {1, 2, 3}.
    AnsatzDepth,
    /// The nine feature maps of the comparison study.
    FeatureMaps,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ansatz-depth" => Ok(Preset::AnsatzDepth),
            "feature-maps" => Ok(Preset::FeatureMaps),
            _ => Err(Error::Config(format!("unknown preset '{s}' (expected ansatz-depth or feature-maps)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub name: String,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub swept_key: String,
    pub entries: Vec<SweepEntry>,
}

/// Expands a preset around `base`; each run writes to `out/<name>`.
pub fn preset_plan(preset: Preset, base: &ExperimentConfig, out: &Path) -> SweepPlan {
    let named: Vec<(String, ExperimentConfig)> = match preset {
        Preset::AnsatzDepth => (1..=3)
            .map(|r| (format!("ansatz_reps_{r}"), ExperimentConfig { ansatz_reps: r, ..base.clone() }))
            .collect(),
        Preset::FeatureMaps => FeatureMapSpec::comparison_set()
            .into_iter()
            .map(|(name, fm)| (name.to_string(), ExperimentConfig { feature_map: fm, ..base.clone() }))
            .collect(),
    };
    let swept_key = match preset {
        Preset::AnsatzDepth => "ansatz_reps",
        Preset::FeatureMaps => "feature_map",
    };
    SweepPlan {
        swept_key: swept_key.into(),
        entries: named
            .into_iter()
            .map(|(name, mut config)| {
                config.out_dir = out.join(&name);
                SweepEntry { name, config }
            })
            .collect(),
    }
}

/// Builds a sweep from explicit configs, which must differ in exactly one
/// key (output directories aside).
pub fn explicit_plan(configs: Vec<ExperimentConfig>, out: &Path) -> Result<SweepPlan> {
    if configs.len() < 2 {
        return Err(Error::Config("a sweep needs at least 2 configs".into()));
    }
    let differing: Vec<&str> = CONFIG_KEYS
        .iter()
        .copied()
        .filter(|&k| k != "out_dir")
        .filter(|k| configs.iter().any(|c| c.get(k) != configs[0].get(k)))
        .collect();
    let swept_key = match differing.as_slice() {
        [k] => k.to_string(),
        [] => return Err(Error::Config("sweep configs are identical; nothing is swept".into())),
        many => {
            return Err(Error::Config(format!(
                "sweep configs must differ in exactly one key, but differ in: {}",
                many.join(", ")
            )))
        }
    };
    let mut seen = std::collections::BTreeSet::new();
    let entries = configs
        .into_iter()
        .enumerate()
        .map(|(i, mut config)| {
            let value = config.get(&swept_key).expect("known key");
            if !seen.insert(value.clone()) {
                return Err(Error::Config(format!("duplicate sweep value {swept_key} = {value}")));
            }
            let name = format!("run_{:02}", i + 1);
            config.out_dir = out.join(&name);
            Ok(SweepEntry { name, config })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepPlan { swept_key, entries })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub name: String,
    pub swept_value: String,
    pub final_train_acc: f64,
    pub final_val_acc: f64,
    pub silhouette_qnn: Option<f64>,
    pub rank_val_acc: usize,
    pub rank_silhouette_qnn: usize,
}

/// Ranks runs from their `metrics.json` files: by final validation accuracy
/// and by after-QNN silhouette, both descending, ties broken by name.
/// Rows come back in validation-accuracy order.
pub fn summarize(swept_key: &str, runs: &[(String, PathBuf)]) -> Result<Vec<SummaryRow>> {
    let mut rows = Vec::with_capacity(runs.len());
    for (name, dir) in runs {
        let m = Metrics::load(&dir.join(METRICS_JSON))?;
        let run = m.run.as_ref().ok_or_else(|| Error::Config(format!("{}: metrics.json lacks run info", dir.display())))?;
        rows.push(SummaryRow {
            name: name.clone(),
            swept_value: run.config.get(swept_key).cloned().unwrap_or_default(),
            final_train_acc: run.final_train_acc,
            final_val_acc: run.final_val_acc,
            silhouette_qnn: m.silhouette_qnn,
            rank_val_acc: 0,
            rank_silhouette_qnn: 0,
        });
    }
    let mut by_sil: Vec<usize> = (0..rows.len()).collect();
    by_sil.sort_by(|&a, &b| {
        let key = |i: usize| rows[i].silhouette_qnn.unwrap_or(f64::NEG_INFINITY);
        key(b).total_cmp(&key(a)).then_with(|| rows[a].name.cmp(&rows[b].name))
    });
    for (rank, &i) in by_sil.iter().enumerate() {
        rows[i].rank_silhouette_qnn = rank + 1;
    }
    rows.sort_by(|a, b| b.final_val_acc.total_cmp(&a.final_val_acc).then_with(|| a.name.cmp(&b.name)));
    for (rank, r) in rows.iter_mut().enumerate() {
        r.rank_val_acc = rank + 1;
    }
    Ok(rows)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn summary_csv(swept_key: &str, rows: &[SummaryRow]) -> String {
    let mut out =
        String::from("rank_val_acc,rank_silhouette_qnn,name,swept_key,swept_value,final_train_acc,final_val_acc,silhouette_qnn\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.rank_val_acc,
            r.rank_silhouette_qnn,
            csv_field(&r.name),
            swept_key,
            csv_field(&r.swept_value),
            fmt6(r.final_train_acc),
            fmt6(r.final_val_acc),
            r.silhouette_qnn.map(fmt6).unwrap_or_default()
        )
        .expect("string write");
    }
    out
}

/// Runs every entry, then writes `summary.csv` into `out`.
pub fn run_sweep(plan: &SweepPlan, out: &Path) -> Result<Vec<SummaryRow>> {
    for e in &plan.entries {
        e.config.validate()?;
    }
    create_dir(out)?;
    for e in &plan.entries {
        run_train(&e.config)?;
    }
    let runs: Vec<(String, PathBuf)> = plan.entries.iter().map(|e| (e.name.clone(), e.config.out_dir.clone())).collect();
    let rows = summarize(&plan.swept_key, &runs)?;
    write_output(&out.join(SWEEP_SUMMARY), summary_csv(&plan.swept_key, &rows).as_bytes())?;
    Ok(rows)
}
