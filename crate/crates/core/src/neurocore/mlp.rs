//! Two-layer perceptron (linear, ReLU, linear) with hand-derived gradients.

use crate::error::Result;
use crate::neurocore::tensor::Tensor2;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub w1: Tensor2,
    pub b1: Tensor2,
    pub w2: Tensor2,
    pub b2: Tensor2,
}

#[derive(Debug, Clone)]
pub struct MlpCache {
    input: Tensor2,
    hidden: Tensor2,
}

#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub w1: Tensor2,
    pub b1: Tensor2,
    pub w2: Tensor2,
    pub b2: Tensor2,
    pub input: Tensor2,
}

impl Mlp {
    pub fn random(dim_in: usize, hidden: usize, dim_out: usize, rng: &mut impl Rng) -> Mlp {
        Mlp {
            w1: Tensor2::randn(dim_in, hidden, (2.0 / dim_in as f64).sqrt(), rng),
            b1: Tensor2::zeros(1, hidden),
            w2: Tensor2::randn(hidden, dim_out, (2.0 / hidden as f64).sqrt(), rng),
            b2: Tensor2::zeros(1, dim_out),
        }
    }

    /// All-zero weights: the output is identically zero regardless of input.
    pub fn zeroed(dim_in: usize, hidden: usize, dim_out: usize) -> Mlp {
        Mlp {
            w1: Tensor2::zeros(dim_in, hidden),
            b1: Tensor2::zeros(1, hidden),
            w2: Tensor2::zeros(hidden, dim_out),
            b2: Tensor2::zeros(1, dim_out),
        }
    }

    pub fn forward(&self, x: &Tensor2) -> Result<(Tensor2, MlpCache)> {
        let pre = x.matmul(&self.w1)?.add_row_broadcast(&self.b1)?;
        let hidden = Tensor2::from_fn(pre.rows(), pre.cols(), |r, c| pre.get(r, c).max(0.0));
        let out = hidden.matmul(&self.w2)?.add_row_broadcast(&self.b2)?;
        Ok((out, MlpCache { input: x.clone(), hidden }))
    }

    pub fn backward(&self, d_out: &Tensor2, cache: &MlpCache) -> Result<MlpGrads> {
        let d_w2 = cache.hidden.transpose().matmul(d_out)?;
        let d_b2 = d_out.col_sum();
        let mut d_hidden = d_out.matmul(&self.w2.transpose())?;
        for r in 0..d_hidden.rows() {
            for c in 0..d_hidden.cols() {
                if cache.hidden.get(r, c) <= 0.0 {
                    d_hidden.set(r, c, 0.0);
                }
            }
        }
        let d_w1 = cache.input.transpose().matmul(&d_hidden)?;
        let d_b1 = d_hidden.col_sum();
        let d_input = d_hidden.matmul(&self.w1.transpose())?;
        Ok(MlpGrads { w1: d_w1, b1: d_b1, w2: d_w2, b2: d_b2, input: d_input })
    }

    pub fn tensors(&self) -> Vec<&Tensor2> {
        vec![&self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor2> {
        vec![&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    pub fn from_tensor_list(mut ts: Vec<Tensor2>) -> Result<Mlp> {
        if ts.len() != 4 {
            return Err(crate::error::Error::shape("mlp expects 4 tensors"));
        }
        let b2 = ts.pop().unwrap();
        let w2 = ts.pop().unwrap();
        let b1 = ts.pop().unwrap();
        let w1 = ts.pop().unwrap();
        Ok(Mlp { w1, b1, w2, b2 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zeroed_mlp_outputs_zero() {
        let mlp = Mlp::zeroed(3, 5, 2);
        let x = Tensor2::new(2, 3, vec![1.0, -2.0, 3.0, 0.5, 0.0, -1.0]).unwrap();
        let (y, _) = mlp.forward(&x).unwrap();
        assert!(y.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn forward_matches_manual() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mlp = Mlp::random(2, 3, 1, &mut rng);
        let x = Tensor2::new(1, 2, vec![0.3, -0.8]).unwrap();
        let (y, _) = mlp.forward(&x).unwrap();
        let mut manual = mlp.b2.get(0, 0);
        for h in 0..3 {
            let mut pre = mlp.b1.get(0, h);
            for i in 0..2 {
                pre += x.get(0, i) * mlp.w1.get(i, h);
            }
            manual += pre.max(0.0) * mlp.w2.get(h, 0);
        }
        assert!((y.get(0, 0) - manual).abs() < 1e-14);
    }
}
