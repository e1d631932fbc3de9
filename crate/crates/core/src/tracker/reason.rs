//! The three reasoning branches.
//!
//! Past reasoning refines each query by attending over its own cached
//! history (cross-frame) and over the co-occurring queries (cross-object),
//! then adjusts the box with a residual computed from the cache. Future
//! reasoning predicts per-step displacements from the cached trajectory and
//! re-expresses reference points in the next ego frame. Prompt reasoning is
//! cross-modal attention from refined queries to prompt token embeddings
//! followed by a binary MLP head.

use crate::error::Result;
use crate::geom3d::{transform_box, Box3D, Pose};
use crate::neurocore::{
    attention_backward, logistic, multi_head_attention, sinusoidal_positions, AttentionGrads,
    AttentionParams, Mlp, MlpCache, MlpGrads, Tensor2,
};
use crate::simworld::{FrameIdx, FRAME_DT};
use crate::tracker::embed::PromptEmbedding;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// One cached history entry of a query.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheEntry {
    pub feature: Vec<f64>,
    pub world_box: Box3D,
    pub frame: FrameIdx,
}

pub type QueryCache = VecDeque<CacheEntry>;

/// Fixed parameters of the past-reasoning branch. The attention blocks are
/// residual (`f + attn(f)`); the box head blends the decoded center with a
/// constant-velocity extrapolation of the cached trajectory, a fixed linear
/// map that is exact for noiseless constant-velocity motion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PastReason {
    pub cross_frame: AttentionParams,
    pub cross_object: AttentionParams,
    /// Weight of the cache extrapolation in the refined center; zero keeps
    /// decoded boxes untouched.
    pub residual_blend: f64,
}

impl PastReason {
    /// Pipeline default: attention blocks with zeroed output projections so
    /// the residual connection passes features through unchanged, plus
    /// half-weight box smoothing. This mirrors loading pretrained weights at
    /// desk scale, where detector features are already oracle embeddings.
    pub fn identity_preserving(dim: usize, heads: usize, rng: &mut impl Rng) -> Result<PastReason> {
        Ok(PastReason {
            cross_frame: AttentionParams::random_zero_out(dim, heads, rng)?,
            cross_object: AttentionParams::random_zero_out(dim, heads, rng)?,
            residual_blend: 0.5,
        })
    }

    /// Fully random parameters (feature mixing active); used to exercise the
    /// attention paths in tests.
    pub fn randomized(dim: usize, heads: usize, rng: &mut impl Rng) -> Result<PastReason> {
        Ok(PastReason {
            cross_frame: AttentionParams::random(dim, heads, rng)?,
            cross_object: AttentionParams::random(dim, heads, rng)?,
            residual_blend: 0.5,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PastReasonOut {
    /// N x C refined features.
    pub features: Tensor2,
    /// Refined world-frame boxes, same order.
    pub boxes: Vec<Box3D>,
}

/// Least-squares constant-velocity fit over `(t, center)` samples, evaluated
/// at `at_frame`. With fewer than two samples the newest center is returned.
fn cv_fit(samples: &[(FrameIdx, [f64; 3])], at_frame: FrameIdx) -> ([f64; 3], [f64; 3]) {
    let n = samples.len();
    if n == 0 {
        return ([0.0; 3], [0.0; 3]);
    }
    if n == 1 {
        return (samples[0].1, [0.0; 3]);
    }
    let tn = n as f64;
    let mean_t: f64 = samples.iter().map(|(f, _)| f64::from(*f) * FRAME_DT).sum::<f64>() / tn;
    let mut mean_c = [0.0; 3];
    for (_, c) in samples {
        for k in 0..3 {
            mean_c[k] += c[k] / tn;
        }
    }
    let mut cov = [0.0; 3];
    let mut var_t = 0.0;
    for (f, c) in samples {
        let dt = f64::from(*f) * FRAME_DT - mean_t;
        var_t += dt * dt;
        for k in 0..3 {
            cov[k] += dt * (c[k] - mean_c[k]);
        }
    }
    if var_t < 1e-12 {
        return (samples[n - 1].1, [0.0; 3]);
    }
    let velocity = [cov[0] / var_t, cov[1] / var_t, cov[2] / var_t];
    let t_eval = f64::from(at_frame) * FRAME_DT;
    let fitted = [
        mean_c[0] + velocity[0] * (t_eval - mean_t),
        mean_c[1] + velocity[1] * (t_eval - mean_t),
        mean_c[2] + velocity[2] * (t_eval - mean_t),
    ];
    (fitted, velocity)
}

/// Refine decoded queries and boxes with cached history.
///
/// `decoded` is N x C in query order, `decoded_boxes` the matching
/// world-frame boxes, `caches` each query's history (oldest first). An empty
/// cache degrades cross-frame attention to self-only and leaves the box at
/// its decoded value.
pub fn past_reason(
    params: &PastReason,
    decoded: &Tensor2,
    decoded_boxes: &[Box3D],
    caches: &[&QueryCache],
    frame: FrameIdx,
) -> Result<PastReasonOut> {
    let n = decoded.rows();
    let dim = decoded.cols();
    assert_eq!(decoded_boxes.len(), n);
    assert_eq!(caches.len(), n);

    // Cross-frame: each query attends over its own history plus itself.
    let mut cross_frame = Tensor2::zeros(n, dim);
    for i in 0..n {
        let history = caches[i];
        let len = history.len() + 1;
        let kv = Tensor2::from_fn(len, dim, |r, c| {
            if r < history.len() {
                history[r].feature[c]
            } else {
                decoded.get(i, c)
            }
        });
        let pos = sinusoidal_positions(len, dim)?;
        let q = Tensor2::from_fn(1, dim, |_, c| decoded.get(i, c));
        let (out, _) = multi_head_attention(&q, &kv, &pos, &params.cross_frame)?;
        for c in 0..dim {
            cross_frame.set(i, c, decoded.get(i, c) + out.get(0, c));
        }
    }

    // Cross-object: attention across the current queries.
    let features = if n > 0 {
        let pos = Tensor2::zeros(n, dim);
        let (out, _) = multi_head_attention(&cross_frame, &cross_frame, &pos, &params.cross_object)?;
        cross_frame.add(&out)?
    } else {
        cross_frame
    };

    // Box residual: blend toward the constant-velocity extrapolation of the
    // cached trajectory (including the decoded sample).
    let mut boxes = Vec::with_capacity(n);
    for (i, decoded_box) in decoded_boxes.iter().enumerate() {
        let mut samples: Vec<(FrameIdx, [f64; 3])> =
            caches[i].iter().map(|e| (e.frame, e.world_box.center)).collect();
        samples.push((frame, decoded_box.center));
        let (fitted, _) = cv_fit(&samples, frame);
        let beta = params.residual_blend;
        let center = [
            decoded_box.center[0] + beta * (fitted[0] - decoded_box.center[0]),
            decoded_box.center[1] + beta * (fitted[1] - decoded_box.center[1]),
            decoded_box.center[2] + beta * (fitted[2] - decoded_box.center[2]),
        ];
        boxes.push(Box3D { center, ..*decoded_box });
    }

    Ok(PastReasonOut { features, boxes })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FutureReasonOut {
    /// Per query: tau_f per-step displacement vectors in the current ego
    /// orientation.
    pub motion: Vec<Vec<[f64; 3]>>,
    /// Per query: reference point expressed in the next ego frame.
    pub next_ref_ego: Vec<[f64; 3]>,
}

/// Predict per-query motion from the cached trajectory and propagate
/// reference points into the next ego frame.
pub fn future_reason(
    refined_boxes: &[Box3D],
    caches: &[&QueryCache],
    tau_f: usize,
    frame: FrameIdx,
    ego_now: &Pose,
    ego_next: &Pose,
) -> FutureReasonOut {
    let mut motion = Vec::with_capacity(refined_boxes.len());
    let mut next_ref = Vec::with_capacity(refined_boxes.len());
    for (i, b) in refined_boxes.iter().enumerate() {
        let mut samples: Vec<(FrameIdx, [f64; 3])> =
            caches[i].iter().map(|e| (e.frame, e.world_box.center)).collect();
        samples.push((frame, b.center));
        let (_, velocity) = cv_fit(&samples, frame);
        let step_world = [velocity[0] * FRAME_DT, velocity[1] * FRAME_DT, velocity[2] * FRAME_DT];
        let step_ego = ego_now.rotation.rotate_inv(step_world);
        motion.push(vec![step_ego; tau_f]);

        let moved = Box3D {
            center: [
                b.center[0] + step_world[0],
                b.center[1] + step_world[1],
                b.center[2] + step_world[2],
            ],
            ..*b
        };
        let in_next_ego = transform_box(&moved, &Pose::IDENTITY, ego_next);
        next_ref.push(in_next_ego.center);
    }
    FutureReasonOut { motion, next_ref_ego: next_ref }
}

/// The trainable prompt-reasoning branch: cross-modal attention from
/// refined queries to prompt tokens (sinusoidal positions on the keys),
/// then a two-layer MLP to a per-query logit. The residual connection
/// around the attention is off by default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptHead {
    pub attn: AttentionParams,
    pub mlp: Mlp,
    pub residual: bool,
}

#[derive(Debug)]
pub struct PromptHeadCache {
    attn: crate::neurocore::AttentionCache,
    mlp: MlpCache,
}

#[derive(Debug)]
pub struct PromptHeadGrads {
    pub attn: AttentionGrads,
    pub mlp: MlpGrads,
}

impl PromptHead {
    pub fn random(dim: usize, heads: usize, hidden: usize, rng: &mut impl Rng) -> Result<PromptHead> {
        Ok(PromptHead {
            attn: AttentionParams::random(dim, heads, rng)?,
            mlp: Mlp::random(dim, hidden, 1, rng),
            residual: false,
        })
    }

    /// Per-query referred probabilities. Row-wise pure: query `i` depends
    /// only on row `i` of `q_refined` and on the prompt.
    pub fn forward(
        &self,
        q_refined: &Tensor2,
        prompt: &PromptEmbedding,
    ) -> Result<(Vec<f64>, PromptHeadCache)> {
        let pos = sinusoidal_positions(prompt.matrix.rows(), prompt.matrix.cols())?;
        let (mut q_p, attn_cache) = multi_head_attention(q_refined, &prompt.matrix, &pos, &self.attn)?;
        if self.residual {
            q_p = q_p.add(q_refined)?;
        }
        let (logits, mlp_cache) = self.mlp.forward(&q_p)?;
        let probs = logistic(&logits);
        Ok((
            probs.data().to_vec(),
            PromptHeadCache { attn: attn_cache, mlp: mlp_cache },
        ))
    }

    /// Backward from d(loss)/d(logits).
    pub fn backward(&self, d_logits: &Tensor2, cache: &PromptHeadCache) -> Result<PromptHeadGrads> {
        let mlp_grads = self.mlp.backward(d_logits, &cache.mlp)?;
        let attn_grads = attention_backward(&mlp_grads.input, &cache.attn, &self.attn)?;
        Ok(PromptHeadGrads { attn: attn_grads, mlp: mlp_grads })
    }

    pub fn tensors(&self) -> Vec<&Tensor2> {
        let mut ts = self.attn.tensors();
        ts.extend(self.mlp.tensors());
        ts
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor2> {
        let mut ts = self.attn.tensors_mut();
        ts.extend(self.mlp.tensors_mut());
        ts
    }

    /// A head that scores every query at probability ~1, used for the
    /// pass-all ablation.
    pub fn pass_all(dim: usize, heads: usize) -> Result<PromptHead> {
        let mut mlp = Mlp::zeroed(dim, 2, 1);
        // Large positive output bias saturates the logistic.
        mlp.b2 = Tensor2::new(1, 1, vec![50.0])?;
        Ok(PromptHead { attn: AttentionParams::identity(dim, heads)?, mlp, residual: false })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom3d::Frame;
    use crate::tracker::embed::embed_prompt;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn world_box(x: f64, y: f64) -> Box3D {
        Box3D::new([x, y, 0.8], [1.9, 4.5, 1.6], 0.0, Frame::World).unwrap()
    }

    fn cache_from(centers: &[(u32, f64, f64)], dim: usize) -> QueryCache {
        centers
            .iter()
            .map(|&(f, x, y)| CacheEntry {
                feature: vec![0.1; dim],
                world_box: world_box(x, y),
                frame: f,
            })
            .collect()
    }

    #[test]
    fn zero_blend_keeps_decoded_boxes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut params = PastReason::identity_preserving(8, 2, &mut rng).unwrap();
        params.residual_blend = 0.0;
        let decoded = Tensor2::randn(2, 8, 1.0, &mut rng);
        let boxes = vec![world_box(0.0, 0.0), world_box(5.0, 1.0)];
        let c0 = cache_from(&[(0, -1.0, 0.0), (1, -0.5, 0.0)], 8);
        let c1 = QueryCache::new();
        let out = past_reason(&params, &decoded, &boxes, &[&c0, &c1], 2).unwrap();
        assert_eq!(out.boxes, boxes);
        // Identity-preserving attention passes features through unchanged.
        assert_eq!(out.features, decoded);
    }

    #[test]
    fn empty_cache_degrades_to_self_attention() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let params = PastReason::randomized(8, 2, &mut rng).unwrap();
        let decoded = Tensor2::randn(1, 8, 1.0, &mut rng);
        let boxes = vec![world_box(0.0, 0.0)];
        let empty = QueryCache::new();
        // Must not error; with a single query and no history the attention
        // softmax runs over one element.
        let out = past_reason(&params, &decoded, &boxes, &[&empty], 0).unwrap();
        assert_eq!(out.features.rows(), 1);
    }

    #[test]
    fn permuting_queries_permutes_outputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = PastReason::randomized(8, 2, &mut rng).unwrap();
        let decoded = Tensor2::randn(3, 8, 1.0, &mut rng);
        let boxes = vec![world_box(0.0, 0.0), world_box(4.0, 2.0), world_box(9.0, -1.0)];
        let caches = [
            cache_from(&[(0, -1.0, 0.0)], 8),
            cache_from(&[(0, 3.0, 2.0), (1, 3.5, 2.0)], 8),
            QueryCache::new(),
        ];
        let refs: Vec<&QueryCache> = caches.iter().collect();
        let out = past_reason(&params, &decoded, &boxes, &refs, 2).unwrap();

        let perm = [2usize, 0, 1];
        let decoded_p = Tensor2::from_fn(3, 8, |r, c| decoded.get(perm[r], c));
        let boxes_p: Vec<Box3D> = perm.iter().map(|&i| boxes[i]).collect();
        let refs_p: Vec<&QueryCache> = perm.iter().map(|&i| &caches[i]).collect();
        let out_p = past_reason(&params, &decoded_p, &boxes_p, &refs_p, 2).unwrap();
        // Cross-object attention sums over keys in permuted order, so agree
        // to rounding rather than bit-exactly.
        for r in 0..3 {
            for c in 0..8 {
                let a = out_p.features.get(r, c);
                let b = out.features.get(perm[r], c);
                assert!((a - b).abs() < 1e-12, "({r},{c}): {a} vs {b}");
            }
            assert_eq!(out_p.boxes[r], out.boxes[perm[r]]);
        }
    }

    #[test]
    fn smoothing_tracks_constant_velocity_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let params = PastReason::identity_preserving(8, 2, &mut rng).unwrap();
        // Noiseless constant velocity: extrapolation equals the decoded
        // center, so blending changes nothing.
        let cache = cache_from(&[(0, 0.0, 0.0), (1, 1.0, 0.0), (2, 2.0, 0.0)], 8);
        let decoded = Tensor2::zeros(1, 8);
        let boxes = vec![world_box(3.0, 0.0)];
        let out = past_reason(&params, &decoded, &boxes, &[&cache], 3).unwrap();
        for k in 0..3 {
            assert!((out.boxes[0].center[k] - boxes[0].center[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn future_zero_motion_static_ego() {
        let b = world_box(7.0, 0.0);
        let empty = QueryCache::new();
        let ego = Pose::IDENTITY;
        let out = future_reason(&[b], &[&empty], 8, 0, &ego, &ego);
        assert_eq!(out.motion[0].len(), 8);
        assert!(out.motion[0].iter().all(|m| m == &[0.0, 0.0, 0.0]));
        for k in 0..3 {
            assert!((out.next_ref_ego[0][k] - b.center[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn future_constant_velocity_hits_next_center() {
        let cache = cache_from(&[(0, 0.0, 0.0), (1, 1.5, 0.0), (2, 3.0, 0.0)], 8);
        let b = world_box(4.5, 0.0);
        let ego = Pose::IDENTITY;
        let out = future_reason(&[b], &[&cache], 4, 3, &ego, &ego);
        // 3 m/s along x: next center at 6.0.
        assert!((out.next_ref_ego[0][0] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn future_compensates_ego_advance() {
        let b = world_box(10.0, 0.0);
        let empty = QueryCache::new();
        let ego_now = Pose::IDENTITY;
        let ego_next = Pose::from_xy_yaw(5.0, 0.0, 0.0);
        let out = future_reason(&[b], &[&empty], 2, 0, &ego_now, &ego_next);
        // Static object, ego advances 5 m: the ref point shifts back 5 m.
        assert!((out.next_ref_ego[0][0] - 5.0).abs() < 1e-9);
    }

    #[test]
    fn prompt_head_empty_and_rowwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let head = PromptHead::random(16, 4, 8, &mut rng).unwrap();
        let prompt = embed_prompt("red cars", 16).unwrap();

        let empty = Tensor2::zeros(0, 16);
        let (probs, _) = head.forward(&empty, &prompt).unwrap();
        assert!(probs.is_empty());

        // Duplicated query rows produce identical probabilities.
        let row = Tensor2::randn(1, 16, 1.0, &mut rng);
        let dup = Tensor2::from_fn(2, 16, |_, c| row.get(0, c));
        let (probs, _) = head.forward(&dup, &prompt).unwrap();
        assert_eq!(probs[0], probs[1]);
    }

    #[test]
    fn prompt_head_purity_under_deletion() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let head = PromptHead::random(16, 4, 8, &mut rng).unwrap();
        let prompt = embed_prompt("moving pedestrians", 16).unwrap();
        let q = Tensor2::randn(4, 16, 1.0, &mut rng);
        let (all, _) = head.forward(&q, &prompt).unwrap();
        // Delete query 1; the other probabilities must not move.
        let kept = [0usize, 2, 3];
        let q2 = Tensor2::from_fn(3, 16, |r, c| q.get(kept[r], c));
        let (subset, _) = head.forward(&q2, &prompt).unwrap();
        for (i, &orig) in kept.iter().enumerate() {
            assert_eq!(subset[i], all[orig]);
        }
    }

    #[test]
    fn full_chain_gradient_matches_finite_diff() {
        // Attention -> MLP -> logistic -> focal, checked end to end.
        use crate::neurocore::{finite_diff_check, focal_loss, AttentionParams, Mlp, Tensor2};
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let head = PromptHead::random(8, 2, 6, &mut rng).unwrap();
        let prompt = embed_prompt("red cars crossing the road", 8).unwrap();
        let q = Tensor2::randn(4, 8, 1.0, &mut rng);
        let y = Tensor2::from_fn(4, 1, |r, _| if r % 2 == 0 { 1.0 } else { 0.0 });

        let (probs, cache) = head.forward(&q, &prompt).unwrap();
        let p = Tensor2::new(probs.len(), 1, probs).unwrap();
        let (_, d_logits) = focal_loss(&p, &y, 0.25, 2.0).unwrap();
        let grads = head.backward(&d_logits, &cache).unwrap();
        let grad_list: Vec<&Tensor2> = grads
            .attn
            .param_tensors()
            .into_iter()
            .chain([&grads.mlp.w1, &grads.mlp.b1, &grads.mlp.w2, &grads.mlp.b2])
            .collect();
        let params: Vec<Tensor2> = head.tensors().into_iter().cloned().collect();
        let err = finite_diff_check(
            |ps| {
                let attn = AttentionParams::from_tensor_list(2, ps[..7].to_vec()).unwrap();
                let mlp = Mlp::from_tensor_list(ps[7..].to_vec()).unwrap();
                let h = PromptHead { attn, mlp, residual: false };
                let (probs, _) = h.forward(&q, &prompt).unwrap();
                let p = Tensor2::new(probs.len(), 1, probs).unwrap();
                focal_loss(&p, &y, 0.25, 2.0).unwrap().0
            },
            &grad_list,
            &params,
            1e-5,
        );
        assert!(err < 1e-4, "full-chain gradient err {err}");
    }

    #[test]
    fn pass_all_scores_everything() {
        let head = PromptHead::pass_all(8, 2).unwrap();
        let prompt = embed_prompt("anything", 8).unwrap();
        let q = Tensor2::from_fn(3, 8, |r, c| (r + c) as f64 * 0.1);
        let (probs, _) = head.forward(&q, &prompt).unwrap();
        assert!(probs.iter().all(|p| *p > 0.99));
    }
}
