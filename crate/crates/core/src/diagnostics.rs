//! Training-curve metrics, PCA, silhouette and Fisher discriminant ratio.

use crate::datagen::CausalLabel;
use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.9;
pub const EARLY_EPOCHS: usize = 5;

fn nonempty(series: &[f64], what: &str) -> Result<()> {
    if series.is_empty() {
        return Err(Error::Validation(format!("{what}: empty series")));
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Population variance (divide by count).
fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
}

/// `(final, mean)` absolute train/validation accuracy gap.
pub fn generalization_gap(train: &[f64], val: &[f64]) -> Result<(f64, f64)> {
    nonempty(train, "generalization gap")?;
    if train.len() != val.len() {
        return Err(Error::Shape(format!("train has {} epochs, validation {}", train.len(), val.len())));
    }
    let gaps: Vec<f64> = train.iter().zip(val).map(|(t, v)| (t - v).abs()).collect();
    Ok((*gaps.last().expect("nonempty"), mean(&gaps)))
}

/// 1-based epoch of the first value `≥ threshold`, or `None`.
pub fn epoch_to_threshold(val: &[f64], threshold: f64) -> Result<Option<usize>> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Validation(format!("threshold must lie in (0, 1), got {threshold}")));
    }
    Ok(val.iter().position(|&v| v >= threshold).map(|i| i + 1))
}

/// `(val[n] − val[0]) / n`.
pub fn early_slope(val: &[f64], n: usize) -> Result<f64> {
    if n == 0 || val.len() <= n {
        return Err(Error::Validation(format!("early slope over {n} epochs needs more than {n} values, got {}", val.len())));
    }
    Ok((val[n] - val[0]) / n as f64)
}

/// Peak minus final value.
pub fn overfit_drop(val: &[f64]) -> Result<f64> {
    nonempty(val, "overfit drop")?;
    let peak = val.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(peak - val[val.len() - 1])
}

/// `(σ, μ)` of the absolute first differences, σ with the population divisor.
pub fn fluctuation_stats(series: &[f64]) -> Result<(f64, f64)> {
    if series.len() < 2 {
        return Err(Error::Validation(format!("fluctuation needs at least 2 values, got {}", series.len())));
    }
    let deltas: Vec<f64> = series.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    Ok((variance(&deltas).sqrt(), mean(&deltas)))
}

pub fn stability_ratio(mu_val: f64, mu_train: f64) -> Result<f64> {
    if mu_train <= 0.0 {
        return Err(Error::Undefined(format!("stability ratio with training fluctuation {mu_train}")));
    }
    Ok(mu_val / mu_train)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveMetrics {
    pub final_gap: f64,
    pub mean_gap: f64,
    pub epoch_to_threshold: Option<usize>,
    pub early_slope: f64,
    pub overfit_drop: f64,
    pub train_sigma: f64,
    pub train_mu: f64,
    pub val_sigma: f64,
    pub val_mu: f64,
    /// `None` when the training curve never moves.
    pub stability_ratio: Option<f64>,
}

impl CurveMetrics {
    /// Needs more than [`EARLY_EPOCHS`] epochs.
    pub fn compute(train: &[f64], val: &[f64]) -> Result<Self> {
        let (final_gap, mean_gap) = generalization_gap(train, val)?;
        let (train_sigma, train_mu) = fluctuation_stats(train)?;
        let (val_sigma, val_mu) = fluctuation_stats(val)?;
        Ok(CurveMetrics {
            final_gap,
            mean_gap,
            epoch_to_threshold: epoch_to_threshold(val, DEFAULT_THRESHOLD)?,
            early_slope: early_slope(val, EARLY_EPOCHS)?,
            overfit_drop: overfit_drop(val)?,
            train_sigma,
            train_mu,
            val_sigma,
            val_mu,
            stability_ratio: stability_ratio(val_mu, train_mu).ok(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaResult {
    /// `k` unit direction vectors.
    pub components: Vec<Vec<f64>>,
    pub explained_variance_ratio: Vec<f64>,
    /// Centered samples projected on the components, `n × k`.
    pub projected: Vec<Vec<f64>>,
    /// Eigenvalues of the covariance matrix (population divisor), top `k`.
    pub eigenvalues: Vec<f64>,
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns the
/// eigenvalues and the eigenvectors as columns of `v` (row-major `d × d`).
fn jacobi_eigen(mut a: Vec<f64>, d: usize) -> (Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..d).flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i * d + j].powi(2)).sum();
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = a[p * d + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * d + q] - a[p * d + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p * d + k];
                    let aqk = a[q * d + k];
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
                for k in 0..d {
                    let vkp = v[k * d + p];
                    let vkq = v[k * d + q];
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..d).map(|i| a[i * d + i]).collect(), v)
}

/// Principal components of the rows of `samples`.
pub fn pca(samples: &[Vec<f64>], k: usize) -> Result<PcaResult> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::Shape(format!("PCA needs at least 2 samples, got {n}")));
    }
    let d = samples[0].len();
    if d == 0 || samples.iter().any(|s| s.len() != d) {
        return Err(Error::Shape("PCA samples must share a nonzero dimension".into()));
    }
    if k == 0 || k > d.min(n - 1) {
        return Err(Error::Shape(format!("PCA with k={k} needs 1 ≤ k ≤ min({d}, {})", n - 1)));
    }
    let means: Vec<f64> = (0..d).map(|j| samples.iter().map(|s| s[j]).sum::<f64>() / n as f64).collect();
    let centered: Vec<Vec<f64>> = samples.iter().map(|s| s.iter().zip(&means).map(|(x, m)| x - m).collect()).collect();
    let mut cov = vec![0.0; d * d];
    for row in &centered {
        for i in 0..d {
            for j in i..d {
                cov[i * d + j] += row[i] * row[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            cov[i * d + j] /= n as f64;
            cov[j * d + i] = cov[i * d + j];
        }
    }
    let (vals, vecs) = jacobi_eigen(cov, d);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]).then(a.cmp(&b)));
    let vals: Vec<f64> = vals.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = vals.iter().sum();
    let mut components = Vec::with_capacity(k);
    let mut ratios = Vec::with_capacity(k);
    let mut eigenvalues = Vec::with_capacity(k);
    for &c in order.iter().take(k) {
        let mut dir: Vec<f64> = (0..d).map(|r| vecs[r * d + c]).collect();
        // Sign convention: largest-magnitude entry positive.
        let pivot = dir.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if pivot < 0.0 {
            dir.iter_mut().for_each(|x| *x = -*x);
        }
        components.push(dir);
        eigenvalues.push(vals[c]);
        ratios.push(if total > 0.0 { vals[c] / total } else { 0.0 });
    }
    let projected = centered
        .iter()
        .map(|row| components.iter().map(|c| row.iter().zip(c).map(|(x, w)| x * w).sum()).collect())
        .collect();
    Ok(PcaResult { components, explained_variance_ratio: ratios, projected, eigenvalues })
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Mean silhouette coefficient with Euclidean distances.
pub fn silhouette(points: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    if points.len() != labels.len() || points.is_empty() {
        return Err(Error::Shape(format!("{} points, {} labels", points.len(), labels.len())));
    }
    let mut clusters: Vec<usize> = labels.to_vec();
    clusters.sort_unstable();
    clusters.dedup();
    if clusters.len() < 2 {
        return Err(Error::Undefined("silhouette needs at least 2 clusters".into()));
    }
    let sizes: Vec<usize> = clusters.iter().map(|c| labels.iter().filter(|&&l| l == *c).count()).collect();
    let slot = |l: usize| clusters.binary_search(&l).expect("label present");
    let mut total = 0.0;
    for (i, p) in points.iter().enumerate() {
        let own = slot(labels[i]);
        if sizes[own] == 1 {
            continue;
        }
        let mut sums = vec![0.0; clusters.len()];
        for (j, q) in points.iter().enumerate() {
            if i != j {
                sums[slot(labels[j])] += distance(p, q);
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..clusters.len())
            .filter(|&c| c != own)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / points.len() as f64)
}

/// `(μ₁ − μ₂)² / (σ₁² + σ₂²)` with population variances.
pub fn fdr_pair(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Validation("each class needs at least 2 samples for FDR".into()));
    }
    let pooled = variance(a) + variance(b);
    if pooled <= 0.0 {
        return Err(Error::Undefined("FDR with zero pooled variance".into()));
    }
    Ok((mean(a) - mean(b)).powi(2) / pooled)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdrTable {
    /// `(class_a, class_b, fdr)` over ordered pairs of distinct classes.
    pub pairs: Vec<(CausalLabel, CausalLabel, f64)>,
    pub average: f64,
}

/// Pairwise FDR of a one-dimensional feature over the three classes.
pub fn fisher_discriminant_ratio(feature: &[f64], labels: &[CausalLabel]) -> Result<FdrTable> {
    if feature.len() != labels.len() {
        return Err(Error::Shape(format!("{} values, {} labels", feature.len(), labels.len())));
    }
    let by_class = |c: CausalLabel| -> Vec<f64> {
        feature.iter().zip(labels).filter(|(_, &l)| l == c).map(|(v, _)| *v).collect()
    };
    let mut pairs = Vec::with_capacity(6);
    for a in CausalLabel::ALL {
        for b in CausalLabel::ALL {
            if a != b {
                pairs.push((a, b, fdr_pair(&by_class(a), &by_class(b))?));
            }
        }
    }
    let average = pairs.iter().map(|p| p.2).sum::<f64>() / pairs.len() as f64;
    Ok(FdrTable { pairs, average })
}
