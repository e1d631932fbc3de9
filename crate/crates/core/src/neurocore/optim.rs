//! Optimizer step, cosine schedule, and the central finite-difference
//! gradient checker.

use crate::error::{Error, Result};
use crate::neurocore::tensor::Tensor2;
use serde::{Deserialize, Serialize};

/// Adam with decoupled weight decay.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl AdamW {
    pub fn new(lr: f64) -> AdamW {
        AdamW { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.0 }
    }

    /// Apply one update in place. `lr_mult` scales the learning rate, e.g.
    /// with [`cosine_multiplier`].
    pub fn step(
        &self,
        params: &mut [&mut Tensor2],
        grads: &[&Tensor2],
        state: &mut AdamState,
        lr_mult: f64,
    ) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::shape("params/grads length mismatch"));
        }
        if state.m.is_empty() {
            state.m = params.iter().map(|p| Tensor2::zeros(p.rows(), p.cols())).collect();
            state.v = state.m.clone();
        }
        if state.m.len() != params.len() {
            return Err(Error::shape("optimizer state does not match params"));
        }
        state.t += 1;
        let t = state.t as f64;
        let bias1 = 1.0 - self.beta1.powf(t);
        let bias2 = 1.0 - self.beta2.powf(t);
        let lr = self.lr * lr_mult;
        for (i, (p, g)) in params.iter_mut().zip(grads.iter()).enumerate() {
            if p.rows() != g.rows() || p.cols() != g.cols() {
                return Err(Error::shape(format!("grad {i} shape mismatch")));
            }
            let m = &mut state.m[i];
            let v = &mut state.v[i];
            for k in 0..p.data().len() {
                let gv = g.data()[k];
                m.data_mut()[k] = self.beta1 * m.data()[k] + (1.0 - self.beta1) * gv;
                v.data_mut()[k] = self.beta2 * v.data()[k] + (1.0 - self.beta2) * gv * gv;
                let m_hat = m.data()[k] / bias1;
                let v_hat = v.data()[k] / bias2;
                let pv = p.data()[k];
                p.data_mut()[k] =
                    pv - lr * (m_hat / (v_hat.sqrt() + self.eps) + self.weight_decay * pv);
            }
        }
        Ok(())
    }
}

/// First/second moment accumulators plus the step counter.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AdamState {
    m: Vec<Tensor2>,
    v: Vec<Tensor2>,
    t: u64,
}

impl AdamState {
    pub fn new() -> AdamState {
        AdamState::default()
    }
}

/// Cosine annealing multiplier: 0.5 * (1 + cos(pi * step / total)).
pub fn cosine_multiplier(step: usize, total: usize) -> f64 {
    if total == 0 {
        return 1.0;
    }
    let frac = (step.min(total)) as f64 / total as f64;
    0.5 * (1.0 + (std::f64::consts::PI * frac).cos())
}

/// Verify analytic gradients against central finite differences.
///
/// `loss` evaluates the scalar objective at a parameter vector; `analytic`
/// are the claimed gradients (same shapes as `params`). Returns the maximum
/// relative error `|g_a - g_n| / max(1e-8, |g_a| + |g_n|)` over all
/// coordinates.
pub fn finite_diff_check(
    mut loss: impl FnMut(&[Tensor2]) -> f64,
    analytic: &[&Tensor2],
    params: &[Tensor2],
    eps: f64,
) -> f64 {
    let mut work: Vec<Tensor2> = params.to_vec();
    let mut worst = 0.0f64;
    for ti in 0..params.len() {
        for k in 0..params[ti].data().len() {
            let orig = work[ti].data()[k];
            work[ti].data_mut()[k] = orig + eps;
            let up = loss(&work);
            work[ti].data_mut()[k] = orig - eps;
            let down = loss(&work);
            work[ti].data_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let a = analytic[ti].data()[k];
            let rel = (a - numeric).abs() / (1e-8f64).max(a.abs() + numeric.abs());
            worst = worst.max(rel);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neurocore::loss::{focal_loss, l1_loss, logistic};
    use crate::neurocore::{
        attention_backward, multi_head_attention, sinusoidal_positions, AttentionParams, Mlp,
    };
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cosine_schedule_endpoints() {
        assert_eq!(cosine_multiplier(0, 10), 1.0);
        assert!((cosine_multiplier(5, 10) - 0.5).abs() < 1e-15);
        assert!(cosine_multiplier(10, 10).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        let opt = AdamW::new(1e-3);
        let mut p = Tensor2::new(1, 2, vec![0.4, -0.2]).unwrap();
        let before = p.clone();
        let g = Tensor2::zeros(1, 2);
        let mut state = AdamState::new();
        opt.step(&mut [&mut p], &[&g], &mut state, 1.0).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn one_step_descends_quadratic() {
        // f(x) = x^2 from x = 3; gradient 6.
        let opt = AdamW::new(0.1);
        let mut x = Tensor2::new(1, 1, vec![3.0]).unwrap();
        let g = Tensor2::new(1, 1, vec![6.0]).unwrap();
        let mut state = AdamState::new();
        opt.step(&mut [&mut x], &[&g], &mut state, 1.0).unwrap();
        assert!(x.get(0, 0) < 3.0 && x.get(0, 0) > 2.0);
    }

    #[test]
    fn finite_diff_on_square() {
        // f(x) = x^2 at x = 3 with analytic gradient 6.
        let p = Tensor2::new(1, 1, vec![3.0]).unwrap();
        let g = Tensor2::new(1, 1, vec![6.0]).unwrap();
        let err = finite_diff_check(|ps| ps[0].get(0, 0).powi(2), &[&g], &[p], 1e-5);
        assert!(err < 1e-9, "err = {err}");
    }

    #[test]
    fn focal_gradient_matches_finite_diff() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let z = Tensor2::randn(5, 1, 1.0, &mut rng);
            let y = Tensor2::from_fn(5, 1, |_, _| if rng.random::<bool>() { 1.0 } else { 0.0 });
            let p = logistic(&z);
            let (_, grad) = focal_loss(&p, &y, 0.25, 2.0).unwrap();
            let err = finite_diff_check(
                |ps| {
                    let p = logistic(&ps[0]);
                    focal_loss(&p, &y, 0.25, 2.0).unwrap().0
                },
                &[&grad],
                &[z],
                1e-5,
            );
            assert!(err < 1e-6, "focal gradient err {err}");
        }
    }

    #[test]
    fn l1_gradient_matches_finite_diff() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pred = Tensor2::randn(4, 3, 1.0, &mut rng);
        let target = Tensor2::randn(4, 3, 1.0, &mut rng);
        let (_, grad) = l1_loss(&pred, &target).unwrap();
        let err = finite_diff_check(
            |ps| l1_loss(&ps[0], &target).unwrap().0,
            &[&grad],
            &[pred],
            1e-5,
        );
        assert!(err < 1e-6, "l1 gradient err {err}");
    }

    #[test]
    fn mlp_gradient_matches_finite_diff() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mlp = Mlp::random(4, 6, 1, &mut rng);
        let x = Tensor2::randn(3, 4, 1.0, &mut rng);
        let target = Tensor2::randn(3, 1, 1.0, &mut rng);
        // loss = mean((mlp(x) - target)^2)
        let (out, cache) = mlp.forward(&x).unwrap();
        let n = (out.rows() * out.cols()) as f64;
        let d_out = Tensor2::from_fn(out.rows(), 1, |r, _| {
            2.0 * (out.get(r, 0) - target.get(r, 0)) / n
        });
        let grads = mlp.backward(&d_out, &cache).unwrap();
        let params: Vec<Tensor2> = mlp.tensors().into_iter().cloned().collect();
        let err = finite_diff_check(
            |ps| {
                let m = Mlp::from_tensor_list(ps.to_vec()).unwrap();
                let (o, _) = m.forward(&x).unwrap();
                let mut s = 0.0;
                for r in 0..o.rows() {
                    s += (o.get(r, 0) - target.get(r, 0)).powi(2);
                }
                s / n
            },
            &[&grads.w1, &grads.b1, &grads.w2, &grads.b2],
            &params,
            1e-5,
        );
        assert!(err < 1e-7, "mlp gradient err {err}");
    }

    #[test]
    fn attention_gradient_matches_finite_diff() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let params = AttentionParams::random(4, 2, &mut rng).unwrap();
        let q = Tensor2::randn(3, 4, 1.0, &mut rng);
        let kv = Tensor2::randn(2, 4, 1.0, &mut rng);
        let pos = sinusoidal_positions(2, 4).unwrap();
        let target = Tensor2::randn(3, 4, 1.0, &mut rng);
        let n = 12.0;

        let (out, cache) = multi_head_attention(&q, &kv, &pos, &params).unwrap();
        let d_out = Tensor2::from_fn(3, 4, |r, c| 2.0 * (out.get(r, c) - target.get(r, c)) / n);
        let grads = attention_backward(&d_out, &cache, &params).unwrap();

        let tensors: Vec<Tensor2> = params.tensors().into_iter().cloned().collect();
        let err = finite_diff_check(
            |ps| {
                let p = AttentionParams::from_tensor_list(2, ps.to_vec()).unwrap();
                let (o, _) = multi_head_attention(&q, &kv, &pos, &p).unwrap();
                let mut s = 0.0;
                for r in 0..3 {
                    for c in 0..4 {
                        s += (o.get(r, c) - target.get(r, c)).powi(2);
                    }
                }
                s / n
            },
            &grads.param_tensors(),
            &tensors,
            1e-5,
        );
        assert!(err < 1e-6, "attention gradient err {err}");
    }
}
