//! Forward and backward kernels for the CNN layers. Image tensors are
//! `[batch, channels, height, width]`; dense tensors are `[batch, features]`.

use rand::Rng;

use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const KERNEL: usize = 3;

fn dims4(t: &Tensor, what: &str) -> Result<(usize, usize, usize, usize)> {
    t.expect_rank(4, what)?;
    let s = t.shape();
    Ok((s[0], s[1], s[2], s[3]))
}

/// Promotes a single `[C, H, W]` image to a batch of one.
fn as_batch(input: &Tensor) -> Result<(Tensor, bool)> {
    match input.shape().len() {
        3 => {
            let mut shape = vec![1];
            shape.extend_from_slice(input.shape());
            Ok((input.clone().reshape(shape)?, true))
        }
        4 => Ok((input.clone(), false)),
        _ => Err(Error::Shape(format!("conv2d input must be rank 3 or 4, got {:?}", input.shape()))),
    }
}

fn check_conv(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<(usize, usize, usize, usize, usize)> {
    let (b, c_in, h, w) = dims4(input, "conv2d input")?;
    weights.expect_rank(4, "conv2d weights")?;
    let ws = weights.shape();
    if ws[1] != c_in || ws[2] != KERNEL || ws[3] != KERNEL {
        return Err(Error::Shape(format!(
            "conv2d weights {ws:?} incompatible with {c_in} input channels and a 3x3 kernel"
        )));
    }
    if bias.shape() != [ws[0]] {
        return Err(Error::Shape(format!("conv2d bias {:?} does not match {} output channels", bias.shape(), ws[0])));
    }
    Ok((b, c_in, ws[0], h, w))
}

/// 3×3 cross-correlation with zero padding 1 and stride 1:
/// `out[o,i,j] = b[o] + Σ_c Σ_{m,n} x[c, i+m-1, j+n-1] · w[o,c,m,n]`.
/// Accepts a single `[C, H, W]` image or a batch.
pub fn conv2d(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (x, single) = as_batch(input)?;
    let (batch, c_in, c_out, h, w) = check_conv(&x, weights, bias)?;
    let mut out = vec![0.0; batch * c_out * h * w];
    for b in 0..batch {
        for o in 0..c_out {
            let plane = &mut out[(b * c_out + o) * h * w..][..h * w];
            plane.iter_mut().for_each(|v| *v = bias.data[o]);
            for c in 0..c_in {
                let src = &x.data[(b * c_in + c) * h * w..][..h * w];
                let k = &weights.data[(o * c_in + c) * 9..][..9];
                for i in 0..h {
                    for j in 0..w {
                        let mut acc = 0.0;
                        for m in 0..KERNEL {
                            let ii = i + m;
                            if ii == 0 || ii > h {
                                continue;
                            }
                            for n in 0..KERNEL {
                                let jj = j + n;
                                if jj == 0 || jj > w {
                                    continue;
                                }
                                acc += src[(ii - 1) * w + (jj - 1)] * k[m * KERNEL + n];
                            }
                        }
                        plane[i * w + j] += acc;
                    }
                }
            }
        }
    }
    let shape = if single { vec![c_out, h, w] } else { vec![batch, c_out, h, w] };
    Tensor::new(shape, out)
}

pub struct ConvGrads {
    pub input: Tensor,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

pub fn conv2d_backward(input: &Tensor, weights: &Tensor, grad_out: &Tensor) -> Result<ConvGrads> {
    let (b_n, c_in, h, w) = dims4(input, "conv2d input")?;
    let c_out = weights.shape()[0];
    if grad_out.shape() != [b_n, c_out, h, w] {
        return Err(Error::Shape(format!("conv2d grad {:?} does not match output shape", grad_out.shape())));
    }
    let mut g_in = vec![0.0; input.len()];
    let mut g_w = vec![0.0; weights.len()];
    let mut g_b = vec![0.0; c_out];
    for b in 0..b_n {
        for o in 0..c_out {
            let g = &grad_out.data[(b * c_out + o) * h * w..][..h * w];
            g_b[o] += g.iter().sum::<f64>();
            for c in 0..c_in {
                let base = (b * c_in + c) * h * w;
                let kbase = (o * c_in + c) * 9;
                for i in 0..h {
                    for j in 0..w {
                        let gv = g[i * w + j];
                        if gv == 0.0 {
                            continue;
                        }
                        for m in 0..KERNEL {
                            let ii = i + m;
                            if ii == 0 || ii > h {
                                continue;
                            }
                            for n in 0..KERNEL {
                                let jj = j + n;
                                if jj == 0 || jj > w {
                                    continue;
                                }
                                let xi = base + (ii - 1) * w + (jj - 1);
                                let ki = kbase + m * KERNEL + n;
                                g_w[ki] += gv * input.data[xi];
                                g_in[xi] += gv * weights.data[ki];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(ConvGrads { input: Tensor::new(input.shape().to_vec(), g_in)?, weights: g_w, bias: g_b })
}

pub fn relu(t: &Tensor) -> Tensor {
    let data = t.data.iter().map(|&v| v.max(0.0)).collect();
    Tensor::new(t.shape().to_vec(), data).expect("same shape")
}

/// Gradient of ReLU given its forward input.
pub fn relu_backward(input: &Tensor, grad_out: &Tensor) -> Tensor {
    let data = input.data.iter().zip(&grad_out.data).map(|(&x, &g)| if x > 0.0 { g } else { 0.0 }).collect();
    Tensor::new(input.shape().to_vec(), data).expect("same shape")
}

/// 2×2 max pool with stride 2. Also returns, per output cell, the flat
/// input index that won (first maximum on ties).
pub fn maxpool2(t: &Tensor) -> Result<(Tensor, Vec<usize>)> {
    let (b, c, h, w) = dims4(t, "maxpool2")?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::Shape(format!("maxpool2 needs even spatial dims, got {h}x{w}")));
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(b * c * oh * ow);
    let mut arg = Vec::with_capacity(out.capacity());
    for plane in 0..b * c {
        let base = plane * h * w;
        for i in 0..oh {
            for j in 0..ow {
                let mut best = base + 2 * i * w + 2 * j;
                for (di, dj) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = base + (2 * i + di) * w + 2 * j + dj;
                    if t.data[idx] > t.data[best] {
                        best = idx;
                    }
                }
                out.push(t.data[best]);
                arg.push(best);
            }
        }
    }
    Ok((Tensor::new(vec![b, c, oh, ow], out)?, arg))
}

pub fn maxpool2_backward(input_shape: &[usize], argmax: &[usize], grad_out: &Tensor) -> Tensor {
    let mut g = Tensor::zeros(input_shape.to_vec());
    for (&idx, &gv) in argmax.iter().zip(&grad_out.data) {
        g.data[idx] += gv;
    }
    g
}

/// Inverted dropout. Returns the output and the per-element scale that was
/// applied (0 or `1/(1-p)`); in eval mode the input passes through and the
/// mask is all ones.
pub fn dropout(t: &Tensor, p: f64, training: bool, rng: &mut impl Rng) -> Result<(Tensor, Vec<f64>)> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::Config(format!("dropout rate must be in [0, 1), got {p}")));
    }
    if !training || p == 0.0 {
        return Ok((t.clone(), vec![1.0; t.len()]));
    }
    let keep = 1.0 / (1.0 - p);
    let mask: Vec<f64> = (0..t.len()).map(|_| if rng.random::<f64>() < p { 0.0 } else { keep }).collect();
    let data = t.data.iter().zip(&mask).map(|(v, m)| v * m).collect();
    Ok((Tensor::new(t.shape().to_vec(), data)?, mask))
}

pub fn dropout_backward(mask: &[f64], grad_out: &Tensor) -> Tensor {
    let data = grad_out.data.iter().zip(mask).map(|(g, m)| g * m).collect();
    Tensor::new(grad_out.shape().to_vec(), data).expect("same shape")
}

/// `[B, ...]` → `[B, prod(...)]`.
pub fn flatten(t: &Tensor) -> Result<Tensor> {
    let s = t.shape();
    if s.is_empty() {
        return Err(Error::Shape("cannot flatten a rank-0 tensor".into()));
    }
    let rest = s[1..].iter().product();
    t.clone().reshape(vec![s[0], rest])
}

/// `y = x Wᵀ + b` with `W: [out, in]`.
pub fn linear(x: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    x.expect_rank(2, "linear input")?;
    weights.expect_rank(2, "linear weights")?;
    let (batch, n_in) = (x.shape()[0], x.shape()[1]);
    let n_out = weights.shape()[0];
    if weights.shape()[1] != n_in || bias.shape() != [n_out] {
        return Err(Error::Shape(format!(
            "linear: input {:?}, weights {:?}, bias {:?} are inconsistent",
            x.shape(),
            weights.shape(),
            bias.shape()
        )));
    }
    let mut out = Vec::with_capacity(batch * n_out);
    for b in 0..batch {
        let row = &x.data[b * n_in..][..n_in];
        for o in 0..n_out {
            let wr = &weights.data[o * n_in..][..n_in];
            out.push(bias.data[o] + row.iter().zip(wr).map(|(a, w)| a * w).sum::<f64>());
        }
    }
    Tensor::new(vec![batch, n_out], out)
}

pub struct LinearGrads {
    pub input: Tensor,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

pub fn linear_backward(x: &Tensor, weights: &Tensor, grad_out: &Tensor) -> Result<LinearGrads> {
    let (batch, n_in) = (x.shape()[0], x.shape()[1]);
    let n_out = weights.shape()[0];
    if grad_out.shape() != [batch, n_out] {
        return Err(Error::Shape(format!("linear grad {:?} does not match output shape", grad_out.shape())));
    }
    let mut g_in = vec![0.0; batch * n_in];
    let mut g_w = vec![0.0; n_out * n_in];
    let mut g_b = vec![0.0; n_out];
    for b in 0..batch {
        for o in 0..n_out {
            let g = grad_out.data[b * n_out + o];
            g_b[o] += g;
            for i in 0..n_in {
                g_w[o * n_in + i] += g * x.data[b * n_in + i];
                g_in[b * n_in + i] += g * weights.data[o * n_in + i];
            }
        }
    }
    Ok(LinearGrads { input: Tensor::new(vec![batch, n_in], g_in)?, weights: g_w, bias: g_b })
}

#[cfg(test)]
pub(crate) mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    pub(crate) fn rand_tensor(shape: Vec<usize>, rng: &mut ChaCha8Rng) -> Tensor {
        Tensor::uniform(shape, 1.0, rng)
    }

    /// Central-difference gradient of `f` at `t`.
    pub(crate) fn numeric_grad(t: &Tensor, h: f64, mut f: impl FnMut(&Tensor) -> f64) -> Vec<f64> {
        (0..t.len())
            .map(|i| {
                let mut p = t.clone();
                p.data[i] += h;
                let mut m = t.clone();
                m.data[i] -= h;
                (f(&p) - f(&m)) / (2.0 * h)
            })
            .collect()
    }

    pub(crate) fn assert_close_rel(analytic: &[f64], numeric: &[f64], rel: f64) {
        assert_eq!(analytic.len(), numeric.len());
        for (i, (a, n)) in analytic.iter().zip(numeric).enumerate() {
            let scale = a.abs().max(n.abs()).max(1e-3);
            assert!((a - n).abs() <= rel * scale, "index {i}: analytic {a} vs numeric {n}");
        }
    }

    fn weighted_sum(t: &Tensor, w: &[f64]) -> f64 {
        t.data.iter().zip(w).map(|(a, b)| a * b).sum()
    }

    #[test]
    fn identity_kernel_preserves_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = rand_tensor(vec![2, 5, 4], &mut rng);
        let mut w = Tensor::zeros(vec![2, 2, 3, 3]);
        w.data[4] = 1.0; // out 0 <- in 0 centre
        w.data[9 + 9 + 9 + 4] = 1.0; // out 1 <- in 1 centre
        let y = conv2d(&x, &w, &Tensor::zeros(vec![2])).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn ones_kernel_on_ones_image() {
        let x = Tensor::new(vec![1, 3, 3], vec![1.0; 9]).unwrap();
        let w = Tensor::new(vec![1, 1, 3, 3], vec![1.0; 9]).unwrap();
        let y = conv2d(&x, &w, &Tensor::zeros(vec![1])).unwrap();
        assert_eq!(y.shape(), &[1, 3, 3]);
        assert_eq!(y.data, vec![4.0, 6.0, 4.0, 6.0, 9.0, 6.0, 4.0, 6.0, 4.0]);
    }

    #[test]
    fn conv_is_cross_correlation() {
        // A kernel with a single tap at (0, 0) reads the up-left neighbour.
        let x = Tensor::new(vec![1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut w = Tensor::zeros(vec![1, 1, 3, 3]);
        w.data[0] = 1.0;
        let y = conv2d(&x, &w, &Tensor::zeros(vec![1])).unwrap();
        assert_eq!(y.data, vec![0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn conv_shape_errors() {
        let x = Tensor::zeros(vec![1, 2, 4, 4]);
        assert!(conv2d(&x, &Tensor::zeros(vec![3, 1, 3, 3]), &Tensor::zeros(vec![3])).is_err());
        assert!(conv2d(&x, &Tensor::zeros(vec![3, 2, 3, 3]), &Tensor::zeros(vec![2])).is_err());
        assert!(conv2d(&Tensor::zeros(vec![4, 4]), &Tensor::zeros(vec![3, 2, 3, 3]), &Tensor::zeros(vec![3])).is_err());
    }

    #[test]
    fn conv_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = rand_tensor(vec![2, 3, 4, 6], &mut rng);
        let w = rand_tensor(vec![2, 3, 3, 3], &mut rng);
        let b = rand_tensor(vec![2], &mut rng);
        let proj: Vec<f64> = (0..2 * 2 * 4 * 6).map(|i| ((i * 37 % 11) as f64) / 5.0 - 1.0).collect();
        let g_out = Tensor::new(vec![2, 2, 4, 6], proj.clone()).unwrap();
        let grads = conv2d_backward(&x, &w, &g_out).unwrap();
        let h = 1e-4;
        let nx = numeric_grad(&x, h, |t| weighted_sum(&conv2d(t, &w, &b).unwrap(), &proj));
        let nw = numeric_grad(&w, h, |t| weighted_sum(&conv2d(&x, t, &b).unwrap(), &proj));
        let nb = numeric_grad(&b, h, |t| weighted_sum(&conv2d(&x, &w, t).unwrap(), &proj));
        assert_close_rel(&grads.input.data, &nx, 1e-4);
        assert_close_rel(&grads.weights, &nw, 1e-4);
        assert_close_rel(&grads.bias, &nb, 1e-4);
    }

    #[test]
    fn relu_and_backward() {
        let t = Tensor::new(vec![2], vec![-1.0, 2.0]).unwrap();
        assert_eq!(relu(&t).data, vec![0.0, 2.0]);
        let g = relu_backward(&t, &Tensor::new(vec![2], vec![5.0, 5.0]).unwrap());
        assert_eq!(g.data, vec![0.0, 5.0]);
    }

    #[test]
    fn maxpool_window_max_and_backward() {
        let t = Tensor::new(vec![1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (y, arg) = maxpool2(&t).unwrap();
        assert_eq!(y.data, vec![4.0]);
        let g = maxpool2_backward(t.shape(), &arg, &Tensor::new(vec![1, 1, 1, 1], vec![2.5]).unwrap());
        assert_eq!(g.data, vec![0.0, 0.0, 0.0, 2.5]);
        assert!(maxpool2(&Tensor::zeros(vec![1, 1, 3, 2])).is_err());
    }

    #[test]
    fn maxpool_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = rand_tensor(vec![2, 2, 4, 4], &mut rng);
        let proj: Vec<f64> = (0..2 * 2 * 2 * 2).map(|i| i as f64 * 0.3 - 1.0).collect();
        let (_, arg) = maxpool2(&x).unwrap();
        let g = maxpool2_backward(x.shape(), &arg, &Tensor::new(vec![2, 2, 2, 2], proj.clone()).unwrap());
        let n = numeric_grad(&x, 1e-6, |t| weighted_sum(&maxpool2(t).unwrap().0, &proj));
        assert_close_rel(&g.data, &n, 1e-4);
    }

    #[test]
    fn dropout_eval_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = rand_tensor(vec![3, 4], &mut rng);
        let (y, mask) = dropout(&t, 0.5, false, &mut rng).unwrap();
        assert_eq!(y, t);
        assert!(mask.iter().all(|&m| m == 1.0));
        assert!(dropout(&t, 1.0, true, &mut rng).is_err());
    }

    #[test]
    fn dropout_is_unbiased() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 20_000;
        let t = Tensor::new(vec![n], vec![1.0; n]).unwrap();
        let (y, mask) = dropout(&t, 0.5, true, &mut rng).unwrap();
        let mean = y.data.iter().sum::<f64>() / n as f64;
        // each element is 0 or 2 with equal probability: std 1, so the
        // mean's std is 1/sqrt(n)
        assert!((mean - 1.0).abs() < 3.0 / (n as f64).sqrt(), "mean {mean}");
        let g = dropout_backward(&mask, &Tensor::new(vec![n], vec![1.0; n]).unwrap());
        assert_eq!(g.data, y.data);
    }

    #[test]
    fn linear_forward_and_backward() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = rand_tensor(vec![3, 5], &mut rng);
        let w = rand_tensor(vec![4, 5], &mut rng);
        let b = rand_tensor(vec![4], &mut rng);
        let y = linear(&x, &w, &b).unwrap();
        assert_eq!(y.shape(), &[3, 4]);
        let proj: Vec<f64> = (0..12).map(|i| (i as f64).sin()).collect();
        let g = linear_backward(&x, &w, &Tensor::new(vec![3, 4], proj.clone()).unwrap()).unwrap();
        let nx = numeric_grad(&x, 1e-5, |t| weighted_sum(&linear(t, &w, &b).unwrap(), &proj));
        let nw = numeric_grad(&w, 1e-5, |t| weighted_sum(&linear(&x, t, &b).unwrap(), &proj));
        let nb = numeric_grad(&b, 1e-5, |t| weighted_sum(&linear(&x, &w, t).unwrap(), &proj));
        assert_close_rel(&g.input.data, &nx, 1e-6);
        assert_close_rel(&g.weights, &nw, 1e-6);
        assert_close_rel(&g.bias, &nb, 1e-6);
        assert!(linear(&x, &Tensor::zeros(vec![4, 4]), &b).is_err());
    }

    #[test]
    fn flatten_keeps_batch() {
        let t = Tensor::zeros(vec![2, 64, 1, 1]);
        assert_eq!(flatten(&t).unwrap().shape(), &[2, 64]);
    }
}
