use crate::error::{Error, Result};

/// SGD with Nesterov momentum and L2 weight decay. Per parameter group:
///
/// ```text
/// g ← grad + λ·p
/// v ← μ·v + g
/// p ← p − lr·(g + μ·v)
/// ```
#[derive(Debug, Clone)]
pub struct SgdNesterov {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    buffers: Vec<Vec<f64>>,
}

impl SgdNesterov {
    pub fn new(lr: f64, momentum: f64, weight_decay: f64) -> Self {
        SgdNesterov { lr, momentum, weight_decay, buffers: Vec::new() }
    }

    pub fn buffers(&self) -> &[Vec<f64>] {
        &self.buffers
    }

    /// Updates every `(values, grads)` group in place. Momentum buffers are
    /// created on the first call; later calls must pass groups of the same
    /// sizes in the same order.
    pub fn step(&mut self, groups: &mut [(&mut [f64], &[f64])]) -> Result<()> {
        if self.buffers.is_empty() {
            self.buffers = groups.iter().map(|(p, _)| vec![0.0; p.len()]).collect();
        }
        if self.buffers.len() != groups.len() {
            return Err(Error::Shape(format!(
                "optimizer tracks {} parameter groups, got {}",
                self.buffers.len(),
                groups.len()
            )));
        }
        for (i, (params, grads)) in groups.iter_mut().enumerate() {
            let buf = &mut self.buffers[i];
            if params.len() != grads.len() || params.len() != buf.len() {
                return Err(Error::Shape(format!(
                    "parameter group {i}: {} values, {} grads, {} buffer entries",
                    params.len(),
                    grads.len(),
                    buf.len()
                )));
            }
            for ((p, &g), v) in params.iter_mut().zip(grads.iter()).zip(buf.iter_mut()) {
                let g = g + self.weight_decay * *p;
                *v = self.momentum * *v + g;
                *p -= self.lr * (g + self.momentum * *v);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_sgd_without_momentum_or_decay() {
        let mut opt = SgdNesterov::new(0.1, 0.0, 0.0);
        let mut p = vec![1.0, -2.0];
        opt.step(&mut [(&mut p, &[0.5, 1.0])]).unwrap();
        assert_eq!(p, vec![1.0 - 0.05, -2.0 - 0.1]);
    }

    #[test]
    fn nesterov_hand_computed_step() {
        let mut opt = SgdNesterov::new(0.1, 0.9, 0.0);
        let mut p = vec![1.0];
        opt.step(&mut [(&mut p, &[1.0])]).unwrap();
        assert_eq!(opt.buffers()[0], vec![1.0]);
        assert!((p[0] - 0.81).abs() < 1e-15);
    }

    #[test]
    fn weight_decay_enters_gradient() {
        let mut opt = SgdNesterov::new(0.1, 0.0, 0.5);
        let mut p = vec![2.0];
        opt.step(&mut [(&mut p, &[0.0])]).unwrap();
        assert!((p[0] - 1.9).abs() < 1e-15);
    }

    #[test]
    fn quadratic_decreases_monotonically() {
        let f = |p: f64| p * p / 2.0;
        let mut opt = SgdNesterov::new(0.01, 0.9, 0.0);
        let mut p = vec![3.0];
        let mut prev = f(p[0]);
        for _ in 0..2 {
            let g = [p[0]];
            opt.step(&mut [(&mut p, &g)]).unwrap();
            assert!(f(p[0]) < prev);
            prev = f(p[0]);
        }
    }

    #[test]
    fn shape_mismatch() {
        let mut opt = SgdNesterov::new(0.1, 0.9, 0.0);
        let mut p = vec![1.0, 2.0];
        assert!(opt.step(&mut [(&mut p, &[1.0])]).is_err());
        let mut opt = SgdNesterov::new(0.1, 0.9, 0.0);
        opt.step(&mut [(&mut p, &[1.0, 1.0])]).unwrap();
        let mut q = vec![1.0];
        assert!(opt.step(&mut [(&mut q, &[1.0])]).is_err());
    }
}
