//! Oracle detector stub standing in for the image decoder: ground-truth
//! boxes perturbed by configurable noise, with features built from the
//! object's true attribute tags.

use crate::error::Result;
use crate::geom3d::{transform_box, Box3D, Frame, Pose};
use crate::simworld::{derive_seed, FrameIdx, Scene};
use crate::stable_hash;
use crate::tracker::embed::embed_tag_set;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Feature noise scale: detector features receive additive Gaussian noise
/// with standard deviation `FEATURE_NOISE_RATIO * sigma_pos`, so a noiseless
/// configuration produces exact tag embeddings.
pub const FEATURE_NOISE_RATIO: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Per-axis Gaussian position noise (x, y) in meters.
    pub sigma_pos: f64,
    /// Probability of dropping a ground-truth detection.
    pub p_drop: f64,
    /// Expected clutter detections per ground-truth object.
    pub p_clutter: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig { sigma_pos: 0.0, p_drop: 0.0, p_clutter: 0.0 }
    }
}

/// One detector output in the ego frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub box3d: Box3D,
    pub feature: Vec<f64>,
    pub class_scores: [f64; 7],
    /// Source track for label derivation; `None` for clutter.
    pub gt_track: Option<u64>,
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Detect objects at one frame. Deterministic for a fixed
/// `(seed, scene, frame, noise)` and independent of the prompt unless an
/// early-fusion gate vector is supplied, in which case detector features are
/// multiplied elementwise by it.
pub fn detect_oracle(
    scene: &Scene,
    frame: FrameIdx,
    noise: &NoiseConfig,
    dim: usize,
    prompt_gate: Option<&[f64]>,
    seed: u64,
) -> Result<Vec<Detection>> {
    let ego = &scene.ego[frame as usize];
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
        derive_seed(seed, stable_hash(&scene.scene_id)),
        u64::from(frame),
    ));
    let mut out = Vec::new();
    let present = scene.tracks_present_at(frame);
    for id in &present {
        let track = scene.track(*id).expect("present track exists");
        let state = track.state_at(frame).expect("state at present frame");
        if noise.p_drop > 0.0 && rng.random::<f64>() < noise.p_drop {
            continue;
        }
        let mut ego_box = transform_box(&state.box3d, &Pose::IDENTITY, ego);
        ego_box.frame = Frame::Ego;
        if noise.sigma_pos > 0.0 {
            ego_box.center[0] += noise.sigma_pos * gauss(&mut rng);
            ego_box.center[1] += noise.sigma_pos * gauss(&mut rng);
        }
        let tags = scene.element_map.tags_of(*id, frame);
        let mut feature = embed_tag_set(&tags, dim);
        if noise.sigma_pos > 0.0 {
            for v in &mut feature {
                *v += FEATURE_NOISE_RATIO * noise.sigma_pos * gauss(&mut rng);
            }
        }
        let mut class_scores = [0.1 / 6.0; 7];
        class_scores[track.class.index()] = 0.9;
        out.push(Detection { box3d: ego_box, feature, class_scores, gt_track: Some(*id) });
    }
    // Clutter: spurious detections at random ranges with random features.
    if noise.p_clutter > 0.0 {
        for _ in 0..present.len() {
            if rng.random::<f64>() >= noise.p_clutter {
                continue;
            }
            let range = rng.random_range(5.0..40.0);
            let azimuth = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let center = [range * azimuth.cos(), range * azimuth.sin(), 0.8];
            let box3d = Box3D::new(center, [1.8, 4.2, 1.5], azimuth, Frame::Ego)?;
            let mut feature = vec![0.0; dim];
            for v in &mut feature {
                *v = gauss(&mut rng);
            }
            let norm = feature.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            feature.iter_mut().for_each(|v| *v /= norm);
            let mut class_scores = [0.1 / 6.0; 7];
            class_scores[rng.random_range(0..7)] = rng.random_range(0.5..0.9);
            out.push(Detection { box3d, feature, class_scores, gt_track: None });
        }
    }
    if let Some(gate) = prompt_gate {
        for det in &mut out {
            for (f, g) in det.feature.iter_mut().zip(gate) {
                *f *= g;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simworld::{generate_scene, SceneConfig};

    fn scene() -> Scene {
        generate_scene(
            "scene-oracle",
            &SceneConfig { n_tracks: 8, duration_frames: 20, ..SceneConfig::default() },
        )
        .unwrap()
    }

    #[test]
    fn noiseless_boxes_equal_ground_truth() {
        let scene = scene();
        let dets = detect_oracle(&scene, 3, &NoiseConfig::default(), 16, None, 0).unwrap();
        let present = scene.tracks_present_at(3);
        assert_eq!(dets.len(), present.len());
        for det in dets {
            let id = det.gt_track.unwrap();
            let gt = scene.track(id).unwrap().state_at(3).unwrap();
            let world = transform_box(&det.box3d, &scene.ego[3], &Pose::IDENTITY);
            for k in 0..3 {
                assert!((world.center[k] - gt.box3d.center[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn full_drop_is_empty() {
        let scene = scene();
        let noise = NoiseConfig { p_drop: 1.0, ..NoiseConfig::default() };
        let dets = detect_oracle(&scene, 0, &noise, 16, None, 0).unwrap();
        assert!(dets.is_empty());
    }

    #[test]
    fn deterministic_per_seed() {
        let scene = scene();
        let noise = NoiseConfig { sigma_pos: 0.3, p_drop: 0.1, p_clutter: 0.1 };
        let a = detect_oracle(&scene, 5, &noise, 16, None, 42).unwrap();
        let b = detect_oracle(&scene, 5, &noise, 16, None, 42).unwrap();
        assert_eq!(a, b);
        let c = detect_oracle(&scene, 5, &noise, 16, None, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn position_noise_matches_monte_carlo_mean() {
        // Ground-plane error of two-axis Gaussian noise is Rayleigh with
        // mean sigma * sqrt(pi / 2).
        let scene = scene();
        let sigma = 0.2;
        let noise = NoiseConfig { sigma_pos: sigma, ..NoiseConfig::default() };
        let mut total = 0.0;
        let mut count = 0usize;
        for seed in 0..600 {
            for frame in [0u32, 7, 14] {
                let dets = detect_oracle(&scene, frame, &noise, 8, None, seed).unwrap();
                let ego = &scene.ego[frame as usize];
                for det in dets {
                    let id = det.gt_track.unwrap();
                    let gt = scene.track(id).unwrap().state_at(frame).unwrap();
                    let world = transform_box(&det.box3d, ego, &Pose::IDENTITY);
                    let dx = world.center[0] - gt.box3d.center[0];
                    let dy = world.center[1] - gt.box3d.center[1];
                    total += (dx * dx + dy * dy).sqrt();
                    count += 1;
                }
            }
        }
        assert!(count > 10_000, "need enough draws, got {count}");
        let mean = total / count as f64;
        let expected = sigma * (std::f64::consts::PI / 2.0).sqrt();
        assert!(
            (mean - expected).abs() / expected < 0.1,
            "mean error {mean} vs expected {expected}"
        );
    }

    #[test]
    fn early_fusion_gates_features() {
        let scene = scene();
        let gate: Vec<f64> = (0..16).map(|i| if i % 2 == 0 { 0.0 } else { 1.0 }).collect();
        let plain = detect_oracle(&scene, 2, &NoiseConfig::default(), 16, None, 1).unwrap();
        let gated = detect_oracle(&scene, 2, &NoiseConfig::default(), 16, Some(&gate), 1).unwrap();
        for (p, g) in plain.iter().zip(&gated) {
            for i in 0..16 {
                let expect = p.feature[i] * gate[i];
                assert!((g.feature[i] - expect).abs() < 1e-12);
            }
        }
    }
}
