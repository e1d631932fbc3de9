//! Heuristic greedy-association baseline: nearest-first matching of
//! detections to tracks after a two-point velocity prediction, with the same
//! prompt head scoring raw detection features.

use crate::assign::{greedy_assignment, CostMatrix};
use crate::error::Result;
use crate::geom3d::{transform_box, Box3D, Frame, Pose};
use crate::neurocore::Tensor2;
use crate::promptgen::PromptLabel;
use crate::simworld::{FrameIdx, Scene};
use crate::tracker::embed::embed_prompt;
use crate::tracker::oracle::{detect_oracle, NoiseConfig};
use crate::tracker::pipeline::{score_trace, FrameTrace, SlotObs, TrackTrace};
use crate::tracker::reason::PromptHead;
use crate::tracker::TrackerConfig;
use crate::trackeval::{PredId, TrackletSubmission};

#[derive(Debug, Clone)]
struct GreedyTrack {
    track_id: PredId,
    center: [f64; 3],
    prev_center: Option<[f64; 3]>,
    misses: u32,
}

impl GreedyTrack {
    /// Two-point velocity extrapolation in world coordinates.
    fn predicted(&self) -> [f64; 3] {
        match self.prev_center {
            Some(prev) => [
                2.0 * self.center[0] - prev[0],
                2.0 * self.center[1] - prev[1],
                2.0 * self.center[2] - prev[2],
            ],
            None => self.center,
        }
    }

    fn advance_unmatched(&mut self) {
        let p = self.predicted();
        self.prev_center = Some(self.center);
        self.center = p;
        self.misses += 1;
    }
}

/// Run the greedy baseline over one scene and score every prompt with the
/// given head. Detections come from the same oracle stream as the query
/// tracker (same seed), making the comparison detection-for-detection fair.
pub fn run_greedy_baseline(
    scene: &Scene,
    prompts: &[&PromptLabel],
    head: &PromptHead,
    config: &TrackerConfig,
    noise: &NoiseConfig,
) -> Result<Vec<TrackletSubmission>> {
    config.validate()?;
    let mut tracks: Vec<GreedyTrack> = Vec::new();
    let mut next_id: PredId = 0;
    let mut frames = Vec::with_capacity(scene.n_frames());
    for f in 0..scene.n_frames() {
        let frame = f as FrameIdx;
        let detections =
            detect_oracle(scene, frame, noise, config.model_dim, None, config.seed)?;
        let ego_now = &scene.ego[f];
        let det_world: Vec<Box3D> = detections
            .iter()
            .map(|d| {
                let w = transform_box(&d.box3d, ego_now, &Pose::IDENTITY);
                Box3D { frame: Frame::World, ..w }
            })
            .collect();

        let mut cost = CostMatrix::from_fn(tracks.len(), detections.len(), |r, c| {
            let p = tracks[r].predicted();
            let d = det_world[c].center;
            ((p[0] - d[0]).powi(2) + (p[1] - d[1]).powi(2)).sqrt()
        })?;
        // A track without a previous position has no velocity estimate yet
        // and gets the wider cold gate.
        for (r, track) in tracks.iter().enumerate() {
            let gate =
                if track.prev_center.is_some() { config.assoc_gate } else { config.cold_gate };
            for c in 0..detections.len() {
                if cost.get(r, c) >= gate {
                    cost.forbid(r, c);
                }
            }
        }
        let pairs = greedy_assignment(&cost, f64::INFINITY);

        let mut det_claimed = vec![false; detections.len()];
        let mut matched_track: Vec<Option<usize>> = vec![None; tracks.len()];
        for (r, c) in pairs {
            matched_track[r] = Some(c);
            det_claimed[c] = true;
        }

        let mut slots = Vec::new();
        let mut feature_rows: Vec<Vec<f64>> = Vec::new();
        for (r, track) in tracks.iter_mut().enumerate() {
            match matched_track[r] {
                Some(c) => {
                    track.prev_center = Some(track.center);
                    track.center = det_world[c].center;
                    track.misses = 0;
                    let class_score =
                        detections[c].class_scores.iter().copied().fold(0.0, f64::max);
                    slots.push(SlotObs {
                        track_id: track.track_id,
                        world_box: det_world[c],
                        class_score,
                        matched: true,
                        gt_track: detections[c].gt_track,
                    });
                    feature_rows.push(detections[c].feature.clone());
                }
                None => track.advance_unmatched(),
            }
        }
        for (c, det) in detections.iter().enumerate() {
            if det_claimed[c] {
                continue;
            }
            let class_score = det.class_scores.iter().copied().fold(0.0, f64::max);
            if class_score <= config.gamma_object {
                continue;
            }
            tracks.push(GreedyTrack {
                track_id: next_id,
                center: det_world[c].center,
                prev_center: None,
                misses: 0,
            });
            slots.push(SlotObs {
                track_id: next_id,
                world_box: det_world[c],
                class_score,
                matched: true,
                gt_track: det.gt_track,
            });
            feature_rows.push(det.feature.clone());
            next_id += 1;
        }
        let tolerance = config.miss_tolerance;
        tracks.retain(|t| t.misses < tolerance);

        let features = Tensor2::from_fn(slots.len(), config.model_dim, |r, c| feature_rows[r][c]);
        frames.push(FrameTrace { frame, features, slots });
    }

    let trace = TrackTrace { scene_id: scene.scene_id.clone(), frames };
    prompts
        .iter()
        .map(|label| {
            let embedding = embed_prompt(&label.text, config.model_dim)?;
            let tracklets = score_trace(&trace, head, &embedding, config)?;
            Ok(TrackletSubmission {
                scene_id: scene.scene_id.clone(),
                prompt_id: label.prompt_id.clone(),
                tracklets,
            })
        })
        .collect()
}
