//! Synthetic cause-effect heatmaps.
//!
//! Each sample is an 8×8 two-dimensional histogram of 500 `(x, y)` pairs,
//! min-max normalized to `[0, 1]`. For label `+1` the pair is
//! `(c, f(c) + ε)` with `c` uniform, `f` a random increasing piecewise-linear
//! map and `ε` Gaussian noise whose spread depends on `c`; label `−1` is the
//! same process with the axes swapped; label `0` draws `x` and `y`
//! independently and uniformly.

use std::fmt;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};

pub const GRID: usize = 8;
pub const CELLS: usize = GRID * GRID;
pub const MIN_PER_CLASS: usize = 5;
pub const TRAIN_FRACTION: f64 = 0.8;

/// Causal direction label. Class indices are `−1 ↦ 0`, `0 ↦ 1`, `+1 ↦ 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CausalLabel {
    Negative,
    Independent,
    Positive,
}

impl CausalLabel {
    pub const ALL: [CausalLabel; 3] = [CausalLabel::Negative, CausalLabel::Independent, CausalLabel::Positive];

    pub fn from_value(v: i64) -> Result<Self> {
        match v {
            -1 => Ok(CausalLabel::Negative),
            0 => Ok(CausalLabel::Independent),
            1 => Ok(CausalLabel::Positive),
            other => Err(Error::Validation(format!("label must be -1, 0 or 1, got {other}"))),
        }
    }

    pub fn value(self) -> i64 {
        match self {
            CausalLabel::Negative => -1,
            CausalLabel::Independent => 0,
            CausalLabel::Positive => 1,
        }
    }

    pub fn class_index(self) -> usize {
        (self.value() + 1) as usize
    }

    pub fn from_class_index(i: usize) -> Result<Self> {
        Self::from_value(i as i64 - 1)
    }
}

impl fmt::Display for CausalLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    /// Row-major; row `r` holds the `y` bin `r`, column `c` the `x` bin `c`.
    pub grid: [f64; CELLS],
    pub label: CausalLabel,
}

impl Heatmap {
    pub fn transposed(&self) -> [f64; CELLS] {
        let mut t = [0.0; CELLS];
        for r in 0..GRID {
            for c in 0..GRID {
                t[c * GRID + r] = self.grid[r * GRID + c];
            }
        }
        t
    }
}

/// Increasing piecewise-linear map of `[0, 1]` onto `[0, 1]` through four
/// knots.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneMap {
    xs: [f64; 4],
    ys: [f64; 4],
}

impl MonotoneMap {
    pub fn identity() -> Self {
        MonotoneMap { xs: [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0], ys: [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0] }
    }

    /// Random knots with one slope drawn from each of three increasing
    /// bands, so the map is clearly convex.
    pub fn random(rng: &mut impl Rng) -> Self {
        let mut inner = [rng.random_range(0.15..0.85), rng.random_range(0.15..0.85)];
        inner.sort_by(f64::total_cmp);
        if inner[1] - inner[0] < 0.05 {
            inner[1] = (inner[0] + 0.05).min(0.9);
        }
        let xs = [0.0, inner[0], inner[1], 1.0];
        let slopes = [rng.random_range(0.1..0.5), rng.random_range(0.7..1.4), rng.random_range(2.0..4.0)];
        let mut ys = [0.0; 4];
        for k in 0..3 {
            ys[k + 1] = ys[k] + slopes[k] * (xs[k + 1] - xs[k]);
        }
        let top = ys[3];
        ys.iter_mut().for_each(|y| *y /= top);
        MonotoneMap { xs, ys }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let k = (0..3).find(|&k| x <= self.xs[k + 1]).unwrap_or(2);
        let t = (x - self.xs[k]) / (self.xs[k + 1] - self.xs[k]);
        self.ys[k] + t * (self.ys[k + 1] - self.ys[k])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorParams {
    pub points: usize,
    /// Base standard deviation of the effect noise; the spread at cause
    /// value `c` is `noise · (0.5 + c)`.
    pub noise: f64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams { points: 500, noise: 0.08 }
    }
}

/// Raw `(x, y)` pairs for `label` using the given map.
pub fn sample_points(
    label: CausalLabel,
    map: &MonotoneMap,
    params: &GeneratorParams,
    rng: &mut impl Rng,
) -> Vec<(f64, f64)> {
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    (0..params.points)
        .map(|_| match label {
            CausalLabel::Independent => (rng.random::<f64>(), rng.random::<f64>()),
            _ => {
                let cause = rng.random::<f64>();
                let effect = map.eval(cause) + params.noise * (0.5 + cause) * std_normal.sample(rng);
                if label == CausalLabel::Positive {
                    (cause, effect)
                } else {
                    (effect, cause)
                }
            }
        })
        .collect()
}

fn min_max(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// 8×8 counts after rescaling each axis to `[0, 1]` by its sample range.
pub fn histogram(points: &[(f64, f64)]) -> [u32; CELLS] {
    let (x0, x1) = min_max(points.iter().map(|p| p.0));
    let (y0, y1) = min_max(points.iter().map(|p| p.1));
    let bin = |v: f64, lo: f64, hi: f64| -> usize {
        if hi > lo {
            (((v - lo) / (hi - lo)) * GRID as f64).floor().clamp(0.0, (GRID - 1) as f64) as usize
        } else {
            0
        }
    };
    let mut counts = [0u32; CELLS];
    for &(x, y) in points {
        counts[bin(y, y0, y1) * GRID + bin(x, x0, x1)] += 1;
    }
    counts
}

/// `(v − min) / (max − min)`; a constant grid maps to zeros.
pub fn normalize01(grid: &[f64]) -> Result<Vec<f64>> {
    if let Some(v) = grid.iter().find(|v| !v.is_finite()) {
        return Err(Error::Validation(format!("non-finite grid value {v}")));
    }
    let (lo, hi) = min_max(grid.iter().copied());
    if !(hi > lo) {
        return Ok(vec![0.0; grid.len()]);
    }
    Ok(grid.iter().map(|v| (v - lo) / (hi - lo)).collect())
}

pub fn heatmap_from_points(points: &[(f64, f64)], label: CausalLabel) -> Heatmap {
    let counts = histogram(points);
    let raw: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let norm = normalize01(&raw).expect("counts are finite");
    let mut grid = [0.0; CELLS];
    grid.copy_from_slice(&norm);
    Heatmap { grid, label }
}

pub fn generate_sample_with(label: CausalLabel, params: &GeneratorParams, rng: &mut impl Rng) -> Heatmap {
    let map = MonotoneMap::random(rng);
    heatmap_from_points(&sample_points(label, &map, params, rng), label)
}

pub fn generate_sample(label: CausalLabel, rng: &mut impl Rng) -> Heatmap {
    generate_sample_with(label, &GeneratorParams::default(), rng)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Heatmap>,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub seed: u64,
}

/// Stratified 80/20 split, seeded. Both index lists come back sorted.
pub fn stratified_split(labels: &[CausalLabel], seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for class in CausalLabel::ALL {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        let n_train = (idx.len() as f64 * TRAIN_FRACTION).round() as usize;
        train.extend_from_slice(&idx[..n_train]);
        val.extend_from_slice(&idx[n_train..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

impl Dataset {
    pub fn from_samples(samples: Vec<Heatmap>, seed: u64) -> Self {
        let labels: Vec<CausalLabel> = samples.iter().map(|s| s.label).collect();
        let (train, val) = stratified_split(&labels, seed);
        Dataset { samples, train, val, seed }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn train_samples(&self) -> Vec<&Heatmap> {
        self.train.iter().map(|&i| &self.samples[i]).collect()
    }

    pub fn val_samples(&self) -> Vec<&Heatmap> {
        self.val.iter().map(|&i| &self.samples[i]).collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("hqcnn-heatmaps v1 n={} seed={}\n", self.samples.len(), self.seed);
        for s in &self.samples {
            for v in &s.grid {
                out.push_str(&v.to_string());
                out.push(' ');
            }
            out.push_str(&s.label.to_string());
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Format { path: path.to_path_buf(), line, msg };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("hqcnn-heatmaps") || fields.next() != Some("v1") {
            return Err(err(1, "expected header 'hqcnn-heatmaps v1 n=<count>'".into()));
        }
        let mut count = None;
        let mut seed = 0;
        for f in fields {
            match f.split_once('=') {
                Some(("n", v)) => count = Some(v.parse::<usize>().map_err(|_| err(1, format!("bad count '{v}'")))?),
                Some(("seed", v)) => seed = v.parse().map_err(|_| err(1, format!("bad seed '{v}'")))?,
                _ => return Err(err(1, format!("unexpected header field '{f}'"))),
            }
        }
        let count = count.ok_or_else(|| err(1, "header is missing n=<count>".into()))?;
        let mut samples = Vec::with_capacity(count);
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            if line.trim().is_empty() {
                continue;
            }
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens.len() != CELLS + 1 {
                return Err(err(line_no, format!("expected {} fields, found {}", CELLS + 1, tokens.len())));
            }
            let mut grid = [0.0; CELLS];
            for (k, tok) in tokens[..CELLS].iter().enumerate() {
                let v: f64 = tok.parse().map_err(|_| err(line_no, format!("field {}: bad number '{tok}'", k + 1)))?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(err(line_no, format!("field {}: value {v} outside [0, 1]", k + 1)));
                }
                grid[k] = v;
            }
            let label_tok = tokens[CELLS];
            let label = label_tok
                .parse::<i64>()
                .map_err(|_| err(line_no, format!("bad label '{label_tok}'")))
                .and_then(|v| CausalLabel::from_value(v).map_err(|e| err(line_no, e.to_string())))?;
            samples.push(Heatmap { grid, label });
        }
        if samples.len() != count {
            return Err(err(count + 2, format!("header declares {count} records, found {}", samples.len())));
        }
        Ok(Dataset::from_samples(samples, seed))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }
}

/// `n_per_class` samples of each label, generated from per-sample
/// substreams of `seed`, in label blocks `−1, 0, +1`.
pub fn make_dataset_with(n_per_class: usize, seed: u64, params: &GeneratorParams) -> Result<Dataset> {
    if n_per_class < MIN_PER_CLASS {
        return Err(Error::Config(format!("per-class count must be at least {MIN_PER_CLASS}, got {n_per_class}")));
    }
    let jobs: Vec<(usize, CausalLabel)> = CausalLabel::ALL
        .iter()
        .flat_map(|&l| std::iter::repeat_n(l, n_per_class))
        .enumerate()
        .collect();
    let samples = jobs
        .par_iter()
        .map(|&(i, label)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            generate_sample_with(label, params, &mut rng)
        })
        .collect();
    Ok(Dataset::from_samples(samples, seed))
}

pub fn make_dataset(n_per_class: usize, seed: u64) -> Result<Dataset> {
    make_dataset_with(n_per_class, seed, &GeneratorParams::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_mapping_is_bijective() {
        for (i, l) in CausalLabel::ALL.iter().enumerate() {
            assert_eq!(l.class_index(), i);
            assert_eq!(CausalLabel::from_class_index(i).unwrap(), *l);
            assert_eq!(CausalLabel::from_value(l.value()).unwrap(), *l);
        }
        assert_eq!(CausalLabel::Negative.class_index(), 0);
        assert_eq!(CausalLabel::Positive.class_index(), 2);
        assert!(CausalLabel::from_value(2).is_err());
    }

    #[test]
    fn normalize_rules() {
        let g: Vec<f64> = (0..10).map(f64::from).collect();
        let n = normalize01(&g).unwrap();
        assert_eq!(n[0], 0.0);
        assert_eq!(n[9], 1.0);
        assert!(n.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(normalize01(&[3.0; 64]).unwrap(), vec![0.0; 64]);
        let already = [0.0, 0.25, 1.0, 0.5];
        assert_eq!(normalize01(&already).unwrap(), already.to_vec());
        assert!(normalize01(&[0.0, f64::NAN]).is_err());
    }

    #[test]
    fn identity_map_without_noise_fills_diagonal_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let params = GeneratorParams { points: 500, noise: 0.0 };
        let pts = sample_points(CausalLabel::Positive, &MonotoneMap::identity(), &params, &mut rng);
        let counts = histogram(&pts);
        for r in 0..GRID {
            for c in 0..GRID {
                if r != c {
                    assert_eq!(counts[r * GRID + c], 0, "cell ({r},{c})");
                }
            }
        }
        assert_eq!(counts.iter().sum::<u32>(), 500);
    }

    #[test]
    fn monotone_map_is_increasing_onto_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let m = MonotoneMap::random(&mut rng);
            assert!(m.eval(0.0).abs() < 1e-12 && (m.eval(1.0) - 1.0).abs() < 1e-12);
            let ys: Vec<f64> = (0..=100).map(|i| m.eval(i as f64 / 100.0)).collect();
            assert!(ys.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn samples_span_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for label in CausalLabel::ALL {
            let h = generate_sample(label, &mut rng);
            let (lo, hi) = min_max(h.grid.iter().copied());
            assert_eq!((lo, hi), (0.0, 1.0));
        }
    }

    #[test]
    fn dataset_counts_and_split() {
        let d = make_dataset(100, 3).unwrap();
        assert_eq!(d.len(), 300);
        assert_eq!((d.train.len(), d.val.len()), (240, 60));
        for label in CausalLabel::ALL {
            assert_eq!(d.samples.iter().filter(|s| s.label == label).count(), 100);
            assert_eq!(d.train_samples().iter().filter(|s| s.label == label).count(), 80);
        }
        let mut all: Vec<usize> = d.train.iter().chain(&d.val).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..300).collect::<Vec<_>>());
        assert!(make_dataset(4, 0).is_err());
    }

    #[test]
    fn dataset_is_deterministic() {
        assert_eq!(make_dataset(10, 42).unwrap(), make_dataset(10, 42).unwrap());
        assert_ne!(make_dataset(10, 42).unwrap(), make_dataset(10, 43).unwrap());
    }

    #[test]
    fn text_round_trip_is_exact() {
        let d = make_dataset(6, 9).unwrap();
        let back = Dataset::parse(&d.to_text(), Path::new("mem")).unwrap();
        assert_eq!(back, d);
        for (a, b) in d.samples.iter().zip(&back.samples) {
            assert!(a.grid.iter().zip(&b.grid).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn corrupt_files_name_the_line() {
        let d = make_dataset(5, 1).unwrap();
        let text = d.to_text();
        let mut lines: Vec<&str> = text.lines().collect();
        lines[3] = "0.5 0.5 1";
        let broken = lines.join("\n");
        match Dataset::parse(&broken, Path::new("f.txt")) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(Dataset::parse("garbage\n", Path::new("f")), Err(Error::Format { line: 1, .. })));
        let short = text.lines().take(5).collect::<Vec<_>>().join("\n");
        assert!(matches!(Dataset::parse(&short, Path::new("f")), Err(Error::Format { .. })));
    }
}
