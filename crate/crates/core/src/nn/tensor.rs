use rand::Rng;

use crate::error::{Error, Result};

/// Dense row-major real array with an optional gradient buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    pub data: Vec<f64>,
    pub grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Shape(format!("shape {shape:?} needs {n} values, got {}", data.len())));
        }
        Ok(Tensor { shape, data, grad: None })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor { shape, data: vec![0.0; n], grad: None }
    }

    /// Uniform in `[-bound, bound)`.
    pub fn uniform(shape: Vec<usize>, bound: f64, rng: &mut impl Rng) -> Self {
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
        Tensor { shape, data, grad: None }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(Error::Shape(format!("cannot reshape {:?} into {shape:?}", self.shape)));
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn zero_grad(&mut self) {
        self.grad = Some(vec![0.0; self.data.len()]);
    }

    pub fn set_grad(&mut self, grad: Vec<f64>) -> Result<()> {
        if grad.len() != self.data.len() {
            return Err(Error::Shape(format!("gradient of length {} for tensor of length {}", grad.len(), self.len())));
        }
        self.grad = Some(grad);
        Ok(())
    }

    /// Values and gradient as disjoint borrows, for optimizer updates.
    pub fn value_and_grad(&mut self) -> Option<(&mut [f64], &[f64])> {
        let grad = self.grad.as_deref()?;
        Some((&mut self.data, grad))
    }

    pub fn expect_rank(&self, rank: usize, what: &str) -> Result<()> {
        if self.shape.len() != rank {
            return Err(Error::Shape(format!("{what} expects rank {rank}, got shape {:?}", self.shape)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_must_match_data() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 6]).is_ok());
        assert!(matches!(Tensor::new(vec![2, 3], vec![0.0; 5]), Err(Error::Shape(_))));
        let t = Tensor::zeros(vec![4, 1, 2]);
        assert!(t.clone().reshape(vec![8]).is_ok());
        assert!(t.reshape(vec![7]).is_err());
    }

    #[test]
    fn grad_length_checked() {
        let mut t = Tensor::zeros(vec![3]);
        assert!(t.set_grad(vec![1.0; 2]).is_err());
        t.set_grad(vec![1.0; 3]).unwrap();
        let (v, g) = t.value_and_grad().unwrap();
        v[0] -= g[0];
        assert_eq!(t.data[0], -1.0);
    }
}
