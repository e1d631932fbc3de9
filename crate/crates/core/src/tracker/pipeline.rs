//! Online query-propagation tracking: per-frame association of detections to
//! track queries, past reasoning, prompt scoring, emission, and future
//! reasoning, strictly frame by frame with no look-ahead.

use crate::assign::{solve_assignment, CostMatrix};
use crate::error::Result;
use crate::geom3d::{transform_box, Box3D, Frame, Pose};
use crate::neurocore::Tensor2;
use crate::promptgen::PromptLabel;
use crate::simworld::{FrameIdx, Scene, TrackId};
use crate::tracker::embed::{embed_prompt, pooled_embedding, PromptEmbedding};
use crate::tracker::oracle::{detect_oracle, Detection, NoiseConfig};
use crate::tracker::reason::{future_reason, past_reason, CacheEntry, PastReason, PromptHead, QueryCache};
use crate::tracker::TrackerConfig;
use crate::trackeval::{PredId, Tracklet, TrackletSubmission};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// Class-score decay applied while a track coasts unmatched. With the
/// default thresholds a track survives a short dropout without its score
/// falling below the object threshold immediately.
const COAST_DECAY: f64 = 0.4;

#[derive(Debug, Clone)]
struct TrackSlot {
    track_id: PredId,
    feature: Vec<f64>,
    /// Predicted position in the current ego frame (set by the previous
    /// frame's future reasoning).
    ref_point_ego: [f64; 3],
    world_box: Box3D,
    class_scores: [f64; 7],
    below_threshold: u32,
    cache: QueryCache,
}

impl TrackSlot {
    fn class_score(&self) -> f64 {
        self.class_scores.iter().copied().fold(0.0, f64::max)
    }
}

/// Per-slot observation exposed for scoring, training, and inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotObs {
    pub track_id: PredId,
    pub world_box: Box3D,
    pub class_score: f64,
    /// Whether the slot consumed a detection this frame (births included);
    /// coasting slots are not emitted.
    pub matched: bool,
    /// Ground-truth provenance of the matched detection. Never used by the
    /// tracker itself; consumed by training and tests.
    pub gt_track: Option<TrackId>,
}

/// Referred-object output row for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Emission {
    pub track_id: PredId,
    pub world_box: Box3D,
    pub confidence: f64,
    pub class_score: f64,
    pub prompt_score: f64,
}

#[derive(Debug, Clone)]
pub struct StepOutput {
    /// Prompt-filtered output (empty when no prompt head is attached).
    pub emissions: Vec<Emission>,
    /// Every live track, referred or not.
    pub slots: Vec<SlotObs>,
    /// Refined features, rows aligned with `slots`.
    pub features: Tensor2,
    /// Per-slot future displacements (tau_f steps, current ego orientation).
    pub motion: Vec<Vec<[f64; 3]>>,
}

#[derive(Debug, Default)]
pub struct TrackerState {
    slots: Vec<TrackSlot>,
    next_id: PredId,
}

impl TrackerState {
    pub fn new() -> TrackerState {
        TrackerState::default()
    }

    pub fn n_live(&self) -> usize {
        self.slots.len()
    }

    /// Advance one frame: associate detections to track queries, decode,
    /// refine with past reasoning, score against the prompt, emit the
    /// referred set, then propagate reference points with future reasoning.
    #[allow(clippy::too_many_arguments)]
    pub fn step(
        &mut self,
        config: &TrackerConfig,
        past: &PastReason,
        frame: FrameIdx,
        ego_now: &Pose,
        ego_next: &Pose,
        detections: &[Detection],
        prompt: Option<(&PromptHead, &PromptEmbedding)>,
    ) -> Result<StepOutput> {
        // Associate detections to live track queries on ground-plane
        // distance between predicted reference points and detections. Young
        // tracks (no velocity history yet) get the wider cold gate.
        let mut gated = CostMatrix::from_fn(self.slots.len(), detections.len(), |r, c| {
            let p = self.slots[r].ref_point_ego;
            let d = detections[c].box3d.center;
            ((p[0] - d[0]).powi(2) + (p[1] - d[1]).powi(2)).sqrt()
        })?;
        for (r, slot) in self.slots.iter().enumerate() {
            // The pending prediction was fitted over cache.len() samples; a
            // velocity estimate needs at least two.
            let gate = if slot.cache.len() >= 2 { config.assoc_gate } else { config.cold_gate };
            for c in 0..detections.len() {
                if gated.get(r, c) >= gate {
                    gated.forbid(r, c);
                }
            }
        }
        let pairs = solve_assignment(&gated);

        let mut det_of_slot: Vec<Option<usize>> = vec![None; self.slots.len()];
        let mut det_claimed = vec![false; detections.len()];
        for (r, c) in pairs {
            det_of_slot[r] = Some(c);
            det_claimed[c] = true;
        }

        // Decode existing slots from their matched detections, or coast.
        let mut matched_flags = Vec::with_capacity(self.slots.len());
        let mut gt_provenance = Vec::with_capacity(self.slots.len());
        let mut decoded_boxes = Vec::with_capacity(self.slots.len());
        for (i, slot) in self.slots.iter_mut().enumerate() {
            match det_of_slot[i] {
                Some(c) => {
                    let det = &detections[c];
                    slot.feature = det.feature.clone();
                    slot.class_scores = det.class_scores;
                    let world = transform_box(&det.box3d, ego_now, &Pose::IDENTITY);
                    decoded_boxes.push(Box3D { frame: Frame::World, ..world });
                    matched_flags.push(true);
                    gt_provenance.push(det.gt_track);
                }
                None => {
                    for s in &mut slot.class_scores {
                        *s *= COAST_DECAY;
                    }
                    let world_center = ego_now.apply(slot.ref_point_ego);
                    decoded_boxes.push(Box3D {
                        center: world_center,
                        frame: Frame::World,
                        ..slot.world_box
                    });
                    matched_flags.push(false);
                    gt_provenance.push(None);
                }
            }
            let score = slot.class_scores.iter().copied().fold(0.0, f64::max);
            if score < config.gamma_object {
                slot.below_threshold += 1;
            } else {
                slot.below_threshold = 0;
            }
        }

        // Births: unclaimed detections above the object threshold take fixed
        // query slots, bounded by the fixed-query budget.
        let mut births = 0;
        for (c, det) in detections.iter().enumerate() {
            if det_claimed[c] || births >= config.n_fixed {
                continue;
            }
            let score = det.class_scores.iter().copied().fold(0.0, f64::max);
            if score <= config.gamma_object {
                continue;
            }
            let world = transform_box(&det.box3d, ego_now, &Pose::IDENTITY);
            let world = Box3D { frame: Frame::World, ..world };
            self.slots.push(TrackSlot {
                track_id: self.next_id,
                feature: det.feature.clone(),
                ref_point_ego: det.box3d.center,
                world_box: world,
                class_scores: det.class_scores,
                below_threshold: 0,
                cache: QueryCache::new(),
            });
            self.next_id += 1;
            decoded_boxes.push(world);
            matched_flags.push(true);
            gt_provenance.push(det.gt_track);
            births += 1;
        }

        // Past reasoning over all live queries.
        let n = self.slots.len();
        let dim = config.model_dim;
        let decoded = Tensor2::from_fn(n, dim, |r, c| self.slots[r].feature[c]);
        let caches_snapshot: Vec<QueryCache> = self
            .slots
            .iter()
            .map(|s| if config.past_reasoning { s.cache.clone() } else { QueryCache::new() })
            .collect();
        let caches: Vec<&QueryCache> = caches_snapshot.iter().collect();
        let refined = past_reason(past, &decoded, &decoded_boxes, &caches, frame)?;
        for (i, slot) in self.slots.iter_mut().enumerate() {
            slot.feature = refined.features.row(i).to_vec();
            slot.world_box = refined.boxes[i];
        }

        // Prompt reasoning and emission.
        let mut prompt_scores = vec![1.0f64; n];
        if let Some((head, embedding)) = prompt {
            let (probs, _) = head.forward(&refined.features, embedding)?;
            prompt_scores.copy_from_slice(&probs);
        }
        let mut emissions = Vec::new();
        let mut slots_obs = Vec::with_capacity(n);
        for i in 0..n {
            let slot = &self.slots[i];
            let class_score = slot.class_score();
            slots_obs.push(SlotObs {
                track_id: slot.track_id,
                world_box: slot.world_box,
                class_score,
                matched: matched_flags[i],
                gt_track: gt_provenance[i],
            });
            if prompt.is_some()
                && matched_flags[i]
                && class_score > config.gamma_object
                && prompt_scores[i] > config.gamma_prompt
            {
                emissions.push(Emission {
                    track_id: slot.track_id,
                    world_box: slot.world_box,
                    confidence: (class_score * prompt_scores[i]).clamp(0.0, 1.0),
                    class_score,
                    prompt_score: prompt_scores[i],
                });
            }
        }

        // Future reasoning on pre-push caches, then cache update.
        let fut = future_reason(&refined.boxes, &caches, config.tau_f, frame, ego_now, ego_next);
        for (i, slot) in self.slots.iter_mut().enumerate() {
            slot.ref_point_ego = fut.next_ref_ego[i];
            if config.past_reasoning {
                slot.cache.push_back(CacheEntry {
                    feature: slot.feature.clone(),
                    world_box: slot.world_box,
                    frame,
                });
                while slot.cache.len() > config.tau_h {
                    slot.cache.pop_front();
                }
            }
        }

        // Deaths.
        let tolerance = config.miss_tolerance;
        self.slots.retain(|s| s.below_threshold < tolerance);

        Ok(StepOutput {
            emissions,
            slots: slots_obs,
            features: refined.features,
            motion: fut.motion,
        })
    }
}

/// Recorded tracker pass over one scene, sufficient to score any prompt
/// afterwards (the prompt branch reads refined features and does not alter
/// tracking unless early fusion is on).
#[derive(Debug, Clone)]
pub struct TrackTrace {
    pub scene_id: String,
    pub frames: Vec<FrameTrace>,
}

#[derive(Debug, Clone)]
pub struct FrameTrace {
    pub frame: FrameIdx,
    pub features: Tensor2,
    pub slots: Vec<SlotObs>,
}

/// Run the query tracker over a scene without a prompt head, recording the
/// refined features and track states per frame.
pub fn run_tracking(
    scene: &Scene,
    config: &TrackerConfig,
    noise: &NoiseConfig,
    prompt_gate: Option<&[f64]>,
) -> Result<TrackTrace> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let past = PastReason::identity_preserving(config.model_dim, config.heads, &mut rng)?;
    let mut state = TrackerState::new();
    let mut frames = Vec::with_capacity(scene.n_frames());
    for f in 0..scene.n_frames() {
        let frame = f as FrameIdx;
        let detections =
            detect_oracle(scene, frame, noise, config.model_dim, prompt_gate, config.seed)?;
        let ego_now = &scene.ego[f];
        let ego_next = scene.ego.get(f + 1).unwrap_or(ego_now);
        let out = state.step(config, &past, frame, ego_now, ego_next, &detections, None)?;
        frames.push(FrameTrace { frame, features: out.features, slots: out.slots });
    }
    Ok(TrackTrace { scene_id: scene.scene_id.clone(), frames })
}

/// Score a recorded trace against one prompt: per frame, prompt reasoning
/// over the refined features, then threshold filtering into tracklets.
pub fn score_trace(
    trace: &TrackTrace,
    head: &PromptHead,
    embedding: &PromptEmbedding,
    config: &TrackerConfig,
) -> Result<Vec<Tracklet>> {
    let mut boxes: BTreeMap<PredId, BTreeMap<FrameIdx, Box3D>> = BTreeMap::new();
    let mut confs: BTreeMap<PredId, BTreeMap<FrameIdx, f64>> = BTreeMap::new();
    for ft in &trace.frames {
        if ft.slots.is_empty() {
            continue;
        }
        let (probs, _) = head.forward(&ft.features, embedding)?;
        for (slot, prob) in ft.slots.iter().zip(probs) {
            if slot.matched
                && slot.class_score > config.gamma_object
                && prob > config.gamma_prompt
            {
                boxes.entry(slot.track_id).or_default().insert(ft.frame, slot.world_box);
                confs
                    .entry(slot.track_id)
                    .or_default()
                    .insert(ft.frame, (slot.class_score * prob).clamp(0.0, 1.0));
            }
        }
    }
    Ok(boxes
        .into_iter()
        .map(|(pred_id, b)| Tracklet { pred_id, conf: confs.remove(&pred_id).unwrap(), boxes: b })
        .collect())
}

/// Run the query tracker over one scene for a set of prompts. Without early
/// fusion the scene is tracked once and every prompt is scored from the same
/// trace; with early fusion each prompt re-runs tracking with its pooled
/// embedding gating the detector features.
pub fn run_query_tracker(
    scene: &Scene,
    prompts: &[&PromptLabel],
    head: &PromptHead,
    config: &TrackerConfig,
    noise: &NoiseConfig,
) -> Result<Vec<TrackletSubmission>> {
    let mut out = Vec::with_capacity(prompts.len());
    if config.early_fusion {
        for label in prompts {
            let embedding = embed_prompt(&label.text, config.model_dim)?;
            let gate = pooled_embedding(&embedding);
            let trace = run_tracking(scene, config, noise, Some(&gate))?;
            let tracklets = score_trace(&trace, head, &embedding, config)?;
            out.push(TrackletSubmission {
                scene_id: scene.scene_id.clone(),
                prompt_id: label.prompt_id.clone(),
                tracklets,
            });
        }
    } else {
        let trace = run_tracking(scene, config, noise, None)?;
        for label in prompts {
            let embedding = embed_prompt(&label.text, config.model_dim)?;
            let tracklets = score_trace(&trace, head, &embedding, config)?;
            out.push(TrackletSubmission {
                scene_id: scene.scene_id.clone(),
                prompt_id: label.prompt_id.clone(),
                tracklets,
            });
        }
    }
    Ok(out)
}
