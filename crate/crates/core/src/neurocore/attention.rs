//! Multi-head scaled dot-product cross attention and sinusoidal positions.
//!
//! The positional encoding is added to the keys only; values and queries are
//! used as given. Attention is plain (no residual, no normalization); callers
//! that want a residual path add it themselves.

use crate::error::{Error, Result};
use crate::neurocore::tensor::{softmax_rows, Tensor2};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Projection parameters for one attention block: full-width Q/K/V maps whose
/// column blocks form the per-head projections, plus the output projection.
/// There is no key bias: a shared offset on every key row shifts each score
/// row by a constant, which the softmax cancels, so the parameter would be
/// unidentifiable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionParams {
    pub heads: usize,
    pub wq: Tensor2,
    pub bq: Tensor2,
    pub wk: Tensor2,
    pub wv: Tensor2,
    pub bv: Tensor2,
    pub wo: Tensor2,
    pub bo: Tensor2,
}

impl AttentionParams {
    pub fn width(&self) -> usize {
        self.wq.rows()
    }

    pub fn random(width: usize, heads: usize, rng: &mut impl Rng) -> Result<AttentionParams> {
        if width == 0 || heads == 0 || width % heads != 0 {
            return Err(Error::invalid(format!(
                "attention width {width} must be a positive multiple of heads {heads}"
            )));
        }
        let scale = 1.0 / (width as f64).sqrt();
        Ok(AttentionParams {
            heads,
            wq: Tensor2::randn(width, width, scale, rng),
            bq: Tensor2::zeros(1, width),
            wk: Tensor2::randn(width, width, scale, rng),
            wv: Tensor2::randn(width, width, scale, rng),
            bv: Tensor2::zeros(1, width),
            wo: Tensor2::randn(width, width, scale, rng),
            bo: Tensor2::zeros(1, width),
        })
    }

    /// Identity projections, zero biases. With a single key/value row the
    /// block then reproduces that row at every output position.
    pub fn identity(width: usize, heads: usize) -> Result<AttentionParams> {
        if width == 0 || heads == 0 || width % heads != 0 {
            return Err(Error::invalid(format!(
                "attention width {width} must be a positive multiple of heads {heads}"
            )));
        }
        Ok(AttentionParams {
            heads,
            wq: Tensor2::identity(width),
            bq: Tensor2::zeros(1, width),
            wk: Tensor2::identity(width),
            wv: Tensor2::identity(width),
            bv: Tensor2::zeros(1, width),
            wo: Tensor2::identity(width),
            bo: Tensor2::zeros(1, width),
        })
    }

    /// Random Q/K/V but a zero output projection: the block contributes
    /// exactly nothing, which makes a residual wrapper an identity map.
    pub fn random_zero_out(width: usize, heads: usize, rng: &mut impl Rng) -> Result<AttentionParams> {
        let mut p = AttentionParams::random(width, heads, rng)?;
        p.wo = Tensor2::zeros(width, width);
        Ok(p)
    }

    pub fn tensors(&self) -> Vec<&Tensor2> {
        vec![&self.wq, &self.bq, &self.wk, &self.wv, &self.bv, &self.wo, &self.bo]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor2> {
        vec![
            &mut self.wq, &mut self.bq, &mut self.wk,
            &mut self.wv, &mut self.bv, &mut self.wo, &mut self.bo,
        ]
    }

    pub fn from_tensor_list(heads: usize, mut ts: Vec<Tensor2>) -> Result<AttentionParams> {
        if ts.len() != 7 {
            return Err(Error::shape("attention expects 7 tensors"));
        }
        let bo = ts.pop().unwrap();
        let wo = ts.pop().unwrap();
        let bv = ts.pop().unwrap();
        let wv = ts.pop().unwrap();
        let wk = ts.pop().unwrap();
        let bq = ts.pop().unwrap();
        let wq = ts.pop().unwrap();
        Ok(AttentionParams { heads, wq, bq, wk, wv, bv, wo, bo })
    }
}

/// Gradients w.r.t. the parameters and both inputs.
#[derive(Debug, Clone)]
pub struct AttentionGrads {
    pub wq: Tensor2,
    pub bq: Tensor2,
    pub wk: Tensor2,
    pub wv: Tensor2,
    pub bv: Tensor2,
    pub wo: Tensor2,
    pub bo: Tensor2,
    pub query: Tensor2,
    pub kv: Tensor2,
}

impl AttentionGrads {
    pub fn param_tensors(&self) -> Vec<&Tensor2> {
        vec![&self.wq, &self.bq, &self.wk, &self.wv, &self.bv, &self.wo, &self.bo]
    }
}

/// Saved activations for the backward pass.
#[derive(Debug, Clone)]
pub struct AttentionCache {
    query_in: Tensor2,
    keys_in: Tensor2,
    kv_in: Tensor2,
    q: Tensor2,
    k: Tensor2,
    v: Tensor2,
    attn: Vec<Tensor2>,
    concat: Tensor2,
}

/// Forward pass. `query` is NxC, `kv` is LxC, `pos` is LxC and is added to
/// the keys before projection. Returns the NxC output and the activation
/// cache for [`attention_backward`].
pub fn multi_head_attention(
    query: &Tensor2,
    kv: &Tensor2,
    pos: &Tensor2,
    params: &AttentionParams,
) -> Result<(Tensor2, AttentionCache)> {
    let width = params.width();
    if query.cols() != width || kv.cols() != width {
        return Err(Error::shape(format!(
            "attention width {width} vs query {} / kv {}",
            query.cols(),
            kv.cols()
        )));
    }
    if pos.rows() != kv.rows() || pos.cols() != width {
        return Err(Error::shape("positional encoding must match kv shape"));
    }
    if kv.rows() == 0 {
        return Err(Error::invalid("attention needs at least one key/value row"));
    }
    let head_dim = width / params.heads;
    let scale = 1.0 / (head_dim as f64).sqrt();

    let keys_in = kv.add(pos)?;
    let q = query.matmul(&params.wq)?.add_row_broadcast(&params.bq)?;
    let k = keys_in.matmul(&params.wk)?;
    let v = kv.matmul(&params.wv)?.add_row_broadcast(&params.bv)?;

    let mut concat = Tensor2::zeros(query.rows(), width);
    let mut attn = Vec::with_capacity(params.heads);
    for h in 0..params.heads {
        let lo = h * head_dim;
        let hi = lo + head_dim;
        let qh = q.col_slice(lo, hi);
        let kh = k.col_slice(lo, hi);
        let vh = v.col_slice(lo, hi);
        let scores = qh.matmul(&kh.transpose())?.scale(scale);
        let a = softmax_rows(&scores);
        let oh = a.matmul(&vh)?;
        concat.add_col_block(lo, &oh);
        attn.push(a);
    }
    let out = concat.matmul(&params.wo)?.add_row_broadcast(&params.bo)?;
    Ok((
        out,
        AttentionCache {
            query_in: query.clone(),
            keys_in,
            kv_in: kv.clone(),
            q,
            k,
            v,
            attn,
            concat,
        },
    ))
}

/// Backward pass for [`multi_head_attention`] given the gradient of the loss
/// w.r.t. the output.
pub fn attention_backward(
    d_out: &Tensor2,
    cache: &AttentionCache,
    params: &AttentionParams,
) -> Result<AttentionGrads> {
    let width = params.width();
    let head_dim = width / params.heads;
    let scale = 1.0 / (head_dim as f64).sqrt();

    let d_wo = cache.concat.transpose().matmul(d_out)?;
    let d_bo = d_out.col_sum();
    let d_concat = d_out.matmul(&params.wo.transpose())?;

    let mut d_q = Tensor2::zeros(cache.q.rows(), width);
    let mut d_k = Tensor2::zeros(cache.k.rows(), width);
    let mut d_v = Tensor2::zeros(cache.v.rows(), width);
    for h in 0..params.heads {
        let lo = h * head_dim;
        let hi = lo + head_dim;
        let qh = cache.q.col_slice(lo, hi);
        let kh = cache.k.col_slice(lo, hi);
        let vh = cache.v.col_slice(lo, hi);
        let a = &cache.attn[h];
        let d_oh = d_concat.col_slice(lo, hi);

        let d_a = d_oh.matmul(&vh.transpose())?;
        let d_vh = a.transpose().matmul(&d_oh)?;

        // Softmax backward, row-wise: ds = a * (da - sum(da * a)).
        let mut d_scores = Tensor2::zeros(a.rows(), a.cols());
        for r in 0..a.rows() {
            let dot: f64 = (0..a.cols()).map(|c| d_a.get(r, c) * a.get(r, c)).sum();
            for c in 0..a.cols() {
                d_scores.set(r, c, a.get(r, c) * (d_a.get(r, c) - dot));
            }
        }
        let d_qh = d_scores.matmul(&kh)?.scale(scale);
        let d_kh = d_scores.transpose().matmul(&qh)?.scale(scale);

        d_q.add_col_block(lo, &d_qh);
        d_k.add_col_block(lo, &d_kh);
        d_v.add_col_block(lo, &d_vh);
    }

    let d_wq = cache.query_in.transpose().matmul(&d_q)?;
    let d_bq = d_q.col_sum();
    let d_wk = cache.keys_in.transpose().matmul(&d_k)?;
    let d_wv = cache.kv_in.transpose().matmul(&d_v)?;
    let d_bv = d_v.col_sum();

    let d_query = d_q.matmul(&params.wq.transpose())?;
    let mut d_kv = d_k.matmul(&params.wk.transpose())?;
    d_kv.add_assign(&d_v.matmul(&params.wv.transpose())?)?;

    Ok(AttentionGrads {
        wq: d_wq,
        bq: d_bq,
        wk: d_wk,
        wv: d_wv,
        bv: d_bv,
        wo: d_wo,
        bo: d_bo,
        query: d_query,
        kv: d_kv,
    })
}

/// Sinusoidal position table: entry `(p, 2i)` is `sin(p / 10000^(2i/C))` and
/// `(p, 2i+1)` is `cos(p / 10000^(2i/C))`. `C` must be even.
pub fn sinusoidal_positions(len: usize, width: usize) -> Result<Tensor2> {
    if width % 2 != 0 {
        return Err(Error::invalid(format!("position width {width} must be even")));
    }
    Ok(Tensor2::from_fn(len, width, |p, c| {
        let i = (c / 2) as f64;
        let angle = p as f64 / 10000f64.powf(2.0 * i / width as f64);
        if c % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_kv_row_identity_projection() {
        let params = AttentionParams::identity(4, 2).unwrap();
        let q = Tensor2::new(3, 4, vec![
            0.5, -1.0, 2.0, 0.0,
            1.0, 1.0, 1.0, 1.0,
            -2.0, 0.3, 0.7, 4.0,
        ])
        .unwrap();
        let kv = Tensor2::new(1, 4, vec![9.0, 8.0, 7.0, 6.0]).unwrap();
        let pos = sinusoidal_positions(1, 4).unwrap();
        let (out, _) = multi_head_attention(&q, &kv, &pos, &params).unwrap();
        for r in 0..3 {
            assert_eq!(out.row(r), kv.row(0));
        }
    }

    #[test]
    fn query_rows_are_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = AttentionParams::random(8, 4, &mut rng).unwrap();
        let q = Tensor2::randn(4, 8, 1.0, &mut rng);
        let kv = Tensor2::randn(5, 8, 1.0, &mut rng);
        let pos = sinusoidal_positions(5, 8).unwrap();
        let (out, _) = multi_head_attention(&q, &kv, &pos, &params).unwrap();
        // Permute query rows: outputs permute identically.
        let perm = [2usize, 0, 3, 1];
        let qp = Tensor2::from_fn(4, 8, |r, c| q.get(perm[r], c));
        let (outp, _) = multi_head_attention(&qp, &kv, &pos, &params).unwrap();
        for r in 0..4 {
            assert_eq!(outp.row(r), out.row(perm[r]));
        }
    }

    #[test]
    fn matches_reference_evaluation() {
        // Straight-line reference: one head, no bias, explicit loops.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut params = AttentionParams::random(4, 1, &mut rng).unwrap();
        params.bq = Tensor2::zeros(1, 4);
        params.bv = Tensor2::zeros(1, 4);
        params.bo = Tensor2::zeros(1, 4);
        let q = Tensor2::randn(2, 4, 1.0, &mut rng);
        let kv = Tensor2::randn(3, 4, 1.0, &mut rng);
        let pos = sinusoidal_positions(3, 4).unwrap();
        let (out, _) = multi_head_attention(&q, &kv, &pos, &params).unwrap();

        let keys_in = kv.add(&pos).unwrap();
        let qm = q.matmul(&params.wq).unwrap();
        let km = keys_in.matmul(&params.wk).unwrap();
        let vm = kv.matmul(&params.wv).unwrap();
        for n in 0..2 {
            // scores and softmax by hand
            let mut scores = [0.0f64; 3];
            for l in 0..3 {
                let mut dot = 0.0;
                for c in 0..4 {
                    dot += qm.get(n, c) * km.get(l, c);
                }
                scores[l] = dot / 2.0; // sqrt(4)
            }
            let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
            let z: f64 = exps.iter().sum();
            let mut mixed = [0.0f64; 4];
            for l in 0..3 {
                for c in 0..4 {
                    mixed[c] += exps[l] / z * vm.get(l, c);
                }
            }
            for c in 0..4 {
                let mut o = 0.0;
                for k in 0..4 {
                    o += mixed[k] * params.wo.get(k, c);
                }
                assert!((out.get(n, c) - o).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn value_bias_shift_moves_through_output_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let params = AttentionParams::random(4, 2, &mut rng).unwrap();
        let q = Tensor2::randn(3, 4, 1.0, &mut rng);
        let kv = Tensor2::randn(4, 4, 1.0, &mut rng);
        let pos = sinusoidal_positions(4, 4).unwrap();
        let (base, _) = multi_head_attention(&q, &kv, &pos, &params).unwrap();

        let shift = Tensor2::new(1, 4, vec![0.3, -0.7, 1.1, 0.05]).unwrap();
        let mut shifted = params.clone();
        shifted.bv = shifted.bv.add(&shift).unwrap();
        let (out, _) = multi_head_attention(&q, &kv, &pos, &shifted).unwrap();

        // Softmax rows sum to one, so the value shift reaches the output
        // only through the output projection: out = base + shift * Wo.
        let expected_delta = shift.matmul(&params.wo).unwrap();
        for r in 0..3 {
            for c in 0..4 {
                let delta = out.get(r, c) - base.get(r, c);
                assert!((delta - expected_delta.get(0, c)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn sinusoidal_table() {
        let t = sinusoidal_positions(3, 6).unwrap();
        // Row 0 alternates sin(0), cos(0).
        assert_eq!(t.row(0), &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
        assert!((t.get(1, 0) - 1f64.sin()).abs() < 1e-15);
        assert!(t.data().iter().all(|v| (-1.0..=1.0).contains(v)));
        assert!(sinusoidal_positions(2, 5).is_err());
    }

    #[test]
    fn shape_errors() {
        let params = AttentionParams::identity(4, 2).unwrap();
        let q = Tensor2::zeros(2, 3);
        let kv = Tensor2::zeros(2, 4);
        let pos = sinusoidal_positions(2, 4).unwrap();
        assert!(multi_head_attention(&q, &kv, &pos, &params).is_err());
        let q = Tensor2::zeros(2, 4);
        let bad_pos = sinusoidal_positions(3, 4).unwrap();
        assert!(multi_head_attention(&q, &kv, &bad_pos, &params).is_err());
    }
}
