//! Statistical checks on the heatmap generator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use hqcnn::datagen::{
    generate_sample, histogram, sample_points, CausalLabel, GeneratorParams, MonotoneMap, CELLS, GRID,
};

const SEEDS: u64 = 100;

#[test]
fn independent_label_fills_cells_uniformly() {
    let params = GeneratorParams::default();
    let map = MonotoneMap::identity();
    let mut pooled = [0u64; CELLS];
    for seed in 0..SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let counts = histogram(&sample_points(CausalLabel::Independent, &map, &params, &mut rng));
        for (p, c) in pooled.iter_mut().zip(counts) {
            *p += c as u64;
        }
    }
    let total: u64 = pooled.iter().sum();
    assert_eq!(total, SEEDS * params.points as u64);
    let expected = total as f64 / CELLS as f64;
    let stat: f64 = pooled.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new((CELLS - 1) as f64).unwrap().cdf(stat);
    assert!(p > 1e-3, "χ² = {stat:.1}, p = {p:.2e}");
}

/// Summary statistics of a grid: mass-weighted row and column means and
/// spreads, the mass on and above the diagonal, and the row/column
/// covariance.
fn summary(grid: &[f64; CELLS]) -> [f64; 7] {
    let total: f64 = grid.iter().sum();
    let (mut mr, mut mc) = (0.0, 0.0);
    for r in 0..GRID {
        for c in 0..GRID {
            let w = grid[r * GRID + c] / total;
            mr += w * r as f64;
            mc += w * c as f64;
        }
    }
    let (mut vr, mut vc, mut cov, mut diag, mut upper) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for r in 0..GRID {
        for c in 0..GRID {
            let w = grid[r * GRID + c] / total;
            vr += w * (r as f64 - mr).powi(2);
            vc += w * (c as f64 - mc).powi(2);
            cov += w * (r as f64 - mr) * (c as f64 - mc);
            if r == c {
                diag += w;
            }
            if r > c {
                upper += w;
            }
        }
    }
    [mr, mc, vr.sqrt(), vc.sqrt(), cov, diag, upper]
}

fn mean_and_se(rows: &[[f64; 7]], k: usize) -> (f64, f64) {
    let n = rows.len() as f64;
    let m = rows.iter().map(|r| r[k]).sum::<f64>() / n;
    let v = rows.iter().map(|r| (r[k] - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

#[test]
fn transposed_positive_matches_negative() {
    let n = 200;
    let positive: Vec<[f64; 7]> = (0..n)
        .map(|s| summary(&generate_sample(CausalLabel::Positive, &mut ChaCha8Rng::seed_from_u64(s)).transposed()))
        .collect();
    let negative: Vec<[f64; 7]> = (0..n)
        .map(|s| summary(&generate_sample(CausalLabel::Negative, &mut ChaCha8Rng::seed_from_u64(10_000 + s)).grid))
        .collect();
    let untransposed: Vec<[f64; 7]> = (0..n)
        .map(|s| summary(&generate_sample(CausalLabel::Positive, &mut ChaCha8Rng::seed_from_u64(s)).grid))
        .collect();
    let z = |a: &[[f64; 7]], b: &[[f64; 7]], k: usize| {
        let (ma, sa) = mean_and_se(a, k);
        let (mb, sb) = mean_and_se(b, k);
        (ma - mb) / (sa * sa + sb * sb).sqrt()
    };
    // Seven statistics at |z| < 4 keeps the false-alarm rate far below 1e-3.
    for k in 0..7 {
        let zk = z(&positive, &negative, k);
        assert!(zk.abs() < 4.0, "statistic {k}: z = {zk:.2}");
    }
    // The test has power: without the transpose the classes differ.
    let max_z = (0..7).map(|k| z(&untransposed, &negative, k).abs()).fold(0.0, f64::max);
    assert!(max_z > 8.0, "max z without transpose {max_z:.2}");
}
