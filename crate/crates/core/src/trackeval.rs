//! Class-agnostic prompt-tracking metrics: per video-prompt AMOTA, AMOTP,
//! MOTA, RECALL, and identity switches, plus benchmark aggregation.
//!
//! Protocol parameters follow the standard driving-benchmark tracking
//! conventions: per-frame matching is an optimal assignment on ground-plane
//! center distance gated at 2 m, and AMOTA integrates MOTAR over a 40-sample
//! recall grid. Per-frame matching is optimal (not greedy-by-score) so the
//! evaluator is deterministic. The threshold for a recall target is the
//! lowest confidence reached when admitting predictions in decreasing
//! confidence order until the target recall is met; targets beyond the
//! submission's best recall contribute zero.

use crate::assign::{solve_assignment, CostMatrix};
use crate::error::{Error, Result};
use crate::geom3d::{center_distance, Box3D};
use crate::promptgen::PromptLabel;
use crate::simworld::{FrameIdx, Scene, TrackId};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Ground-plane matching gate in meters.
pub const DEFAULT_GATE: f64 = 2.0;

/// Number of recall samples in the AMOTA integral.
pub const DEFAULT_RECALL_SAMPLES: usize = 40;

pub type PredId = u64;

/// One predicted tracklet of a submission: world-frame boxes and a
/// confidence per frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tracklet {
    pub pred_id: PredId,
    pub boxes: BTreeMap<FrameIdx, Box3D>,
    pub conf: BTreeMap<FrameIdx, f64>,
}

impl Tracklet {
    pub fn validate(&self) -> Result<()> {
        if self.boxes.len() != self.conf.len()
            || self.boxes.keys().zip(self.conf.keys()).any(|(a, b)| a != b)
        {
            return Err(Error::invalid(format!(
                "tracklet {}: boxes and confidences must cover the same frames",
                self.pred_id
            )));
        }
        for (&f, c) in &self.conf {
            if !(0.0..=1.0).contains(c) {
                return Err(Error::invalid(format!(
                    "tracklet {}: confidence {c} at frame {f} outside [0,1]",
                    self.pred_id
                )));
            }
        }
        Ok(())
    }

    pub fn n_boxes(&self) -> usize {
        self.boxes.len()
    }
}

/// All predicted tracklets for one (scene, prompt) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackletSubmission {
    pub scene_id: String,
    pub prompt_id: String,
    pub tracklets: Vec<Tracklet>,
}

impl TrackletSubmission {
    pub fn validate(&self) -> Result<()> {
        let mut ids = BTreeSet::new();
        for t in &self.tracklets {
            if !ids.insert(t.pred_id) {
                return Err(Error::invalid(format!("duplicate pred_id {}", t.pred_id)));
            }
            t.validate()?;
        }
        Ok(())
    }

    pub fn n_boxes(&self) -> usize {
        self.tracklets.iter().map(Tracklet::n_boxes).sum()
    }
}

/// One ground-truth track restricted to a prompt's referred frames.
#[derive(Debug, Clone, PartialEq)]
pub struct GtTrack {
    pub track_id: TrackId,
    pub boxes: BTreeMap<FrameIdx, Box3D>,
}

/// Ground truth for a (scene, prompt) pair: each referred track contributes
/// its world-frame boxes on exactly the frames the prompt refers to it.
pub fn build_pair_ground_truth(scene: &Scene, label: &PromptLabel) -> Vec<GtTrack> {
    let mut per_track: BTreeMap<TrackId, BTreeMap<FrameIdx, Box3D>> = BTreeMap::new();
    for (&frame, ids) in &label.referred {
        for id in ids {
            if let Some(state) = scene.track(*id).and_then(|t| t.state_at(frame)) {
                per_track.entry(*id).or_default().insert(frame, state.box3d);
            }
        }
    }
    per_track
        .into_iter()
        .map(|(track_id, boxes)| GtTrack { track_id, boxes })
        .collect()
}

/// Per-frame matching outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMatch {
    /// `(gt_id, pred_id, ground-plane distance)` for true positives.
    pub tp: Vec<(TrackId, PredId, f64)>,
    pub fp: Vec<PredId>,
    pub misses: Vec<TrackId>,
}

/// Optimal one-frame matching of ground truth to predictions on ground-plane
/// center distance, with entries at or above `gate` forbidden.
pub fn match_frame(
    gt: &[(TrackId, Box3D)],
    pred: &[(PredId, Box3D)],
    gate: f64,
) -> Result<FrameMatch> {
    let mut costs = Vec::with_capacity(gt.len() * pred.len());
    for (_, gb) in gt {
        for (_, pb) in pred {
            costs.push(center_distance(gb, pb)?);
        }
    }
    let mut matrix = CostMatrix::new(gt.len(), pred.len(), costs)?;
    matrix.forbid_at_or_above(gate);
    let pairs = solve_assignment(&matrix);

    let mut gt_matched = vec![false; gt.len()];
    let mut pred_matched = vec![false; pred.len()];
    let mut tp = Vec::with_capacity(pairs.len());
    for (r, c) in pairs {
        gt_matched[r] = true;
        pred_matched[c] = true;
        tp.push((gt[r].0, pred[c].0, matrix.get(r, c)));
    }
    let fp = pred
        .iter()
        .enumerate()
        .filter(|(i, _)| !pred_matched[*i])
        .map(|(_, (id, _))| *id)
        .collect();
    let misses = gt
        .iter()
        .enumerate()
        .filter(|(i, _)| !gt_matched[*i])
        .map(|(_, (id, _))| *id)
        .collect();
    Ok(FrameMatch { tp, fp, misses })
}

/// CLEAR MOT tallies at one confidence threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClearMot {
    pub mota: f64,
    /// Mean true-positive distance; zero when there are no true positives.
    pub motp: f64,
    pub recall: f64,
    pub ids: usize,
    pub fp: usize,
    pub misses: usize,
    pub tp: usize,
    pub n_gt_boxes: usize,
}

/// Sequential per-frame CLEAR MOT over a pair, with predictions filtered to
/// boxes whose confidence is at least `threshold`. An identity switch is
/// counted whenever a ground-truth track's matched pred id differs from its
/// most recent previously matched pred id. Requires non-empty ground truth.
pub fn compute_clearmot(
    gt: &[GtTrack],
    tracklets: &[Tracklet],
    threshold: f64,
    gate: f64,
) -> Result<ClearMot> {
    let n_gt_boxes: usize = gt.iter().map(|t| t.boxes.len()).sum();
    if n_gt_boxes == 0 {
        return Err(Error::invalid("CLEAR MOT requires non-empty ground truth"));
    }
    let mut frames: BTreeSet<FrameIdx> = BTreeSet::new();
    for t in gt {
        frames.extend(t.boxes.keys().copied());
    }
    for t in tracklets {
        frames.extend(t.boxes.keys().copied());
    }

    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut misses = 0usize;
    let mut ids = 0usize;
    let mut dist_sum = 0.0;
    let mut last_match: BTreeMap<TrackId, PredId> = BTreeMap::new();

    for &f in &frames {
        let gt_boxes: Vec<(TrackId, Box3D)> = gt
            .iter()
            .filter_map(|t| t.boxes.get(&f).map(|b| (t.track_id, *b)))
            .collect();
        let pred_boxes: Vec<(PredId, Box3D)> = tracklets
            .iter()
            .filter_map(|t| {
                let b = t.boxes.get(&f)?;
                let c = t.conf.get(&f)?;
                (*c >= threshold).then_some((t.pred_id, *b))
            })
            .collect();
        let m = match_frame(&gt_boxes, &pred_boxes, gate)?;
        tp += m.tp.len();
        fp += m.fp.len();
        misses += m.misses.len();
        for (gt_id, pred_id, d) in m.tp {
            dist_sum += d;
            if let Some(prev) = last_match.insert(gt_id, pred_id) {
                if prev != pred_id {
                    ids += 1;
                }
            }
        }
    }

    let p = n_gt_boxes as f64;
    Ok(ClearMot {
        mota: 1.0 - (fp + misses + ids) as f64 / p,
        motp: if tp > 0 { dist_sum / tp as f64 } else { 0.0 },
        recall: tp as f64 / p,
        ids,
        fp,
        misses,
        tp,
        n_gt_boxes,
    })
}

/// Per video-prompt metric bundle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    pub amota: f64,
    /// Meters; averaged over reachable recall targets.
    pub amotp: f64,
    /// MOTA of the unfiltered submission.
    pub mota: f64,
    /// Recall of the unfiltered submission.
    pub recall: f64,
    /// Identity switches of the unfiltered submission.
    pub ids: usize,
    pub n_gt_boxes: usize,
}

/// Outcome of evaluating one pair: scored, or excluded for empty ground
/// truth (carrying its false-positive count for the aggregate sidecar).
#[derive(Debug, Clone, PartialEq)]
pub enum PairEval {
    Scored(PairResult),
    EmptyGt { fp: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub gate: f64,
    pub recall_samples: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { gate: DEFAULT_GATE, recall_samples: DEFAULT_RECALL_SAMPLES }
    }
}

/// Evaluate one (scene, prompt) pair.
///
/// For each recall target `r` in `{1/(n-1), ..., 1}` the evaluator finds the
/// confidence threshold at which the target is first reached when admitting
/// predictions in decreasing confidence order, computes CLEAR MOT there, and
/// accumulates `MOTAR = max(0, 1 - (IDS + FP + FN - (1 - rho) * P) /
/// (rho * P))` with `rho` the recall achieved at that threshold and `P` the
/// ground-truth box count. AMOTA averages MOTAR over all targets
/// (unreachable ones contribute zero); AMOTP averages MOTP over reachable
/// targets only.
pub fn compute_amota_amotp(
    gt: &[GtTrack],
    submission: &TrackletSubmission,
    config: &EvalConfig,
) -> Result<PairEval> {
    if config.recall_samples < 2 {
        return Err(Error::invalid("recall_samples must be >= 2"));
    }
    submission.validate()?;
    let p: usize = gt.iter().map(|t| t.boxes.len()).sum();
    if p == 0 {
        return Ok(PairEval::EmptyGt { fp: submission.n_boxes() });
    }

    // Candidate thresholds: distinct confidences, descending. Recall along
    // this sweep is non-decreasing because matching cardinality is monotone
    // in the admitted prediction set.
    let mut confs: Vec<f64> = submission
        .tracklets
        .iter()
        .flat_map(|t| t.conf.values().copied())
        .collect();
    confs.sort_by(|a, b| b.partial_cmp(a).expect("confidences are finite"));
    confs.dedup();

    let curve: Vec<ClearMot> = confs
        .iter()
        .map(|&theta| compute_clearmot(gt, &submission.tracklets, theta, config.gate))
        .collect::<Result<_>>()?;

    let n = config.recall_samples;
    let p_f = p as f64;
    let mut amota_sum = 0.0;
    let mut amotp_sum = 0.0;
    let mut reachable = 0usize;
    for k in 1..n {
        let target = k as f64 / (n - 1) as f64;
        let Some(cm) = curve.iter().find(|cm| cm.recall >= target) else { continue };
        let rho = cm.recall;
        let motar =
            1.0 - ((cm.ids + cm.fp + cm.misses) as f64 - (1.0 - rho) * p_f) / (rho * p_f);
        amota_sum += motar.clamp(0.0, 1.0);
        amotp_sum += cm.motp;
        reachable += 1;
    }
    let amota = amota_sum / (n - 1) as f64;
    let amotp = if reachable > 0 { amotp_sum / reachable as f64 } else { 0.0 };

    let raw = compute_clearmot(gt, &submission.tracklets, 0.0, config.gate)?;
    Ok(PairEval::Scored(PairResult {
        amota,
        amotp,
        mota: raw.mota,
        recall: raw.recall,
        ids: raw.ids,
        n_gt_boxes: p,
    }))
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PairKey {
    pub scene_id: String,
    pub prompt_id: String,
}

/// Unweighted means over scored pairs. Field order mirrors the benchmark
/// table columns: AMOTA, AMOTP, RECALL, MOTA, IDS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub amota: f64,
    pub amotp: f64,
    pub recall: f64,
    pub mota: f64,
    pub ids: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub per_pair: Vec<(PairKey, PairResult)>,
    pub mean: MeanMetrics,
    /// False positives from pairs with empty ground truth, which are
    /// excluded from the means.
    pub extra_fp: usize,
    pub n_pairs: usize,
    pub n_empty_gt: usize,
}

/// Aggregate pair evaluations, sorted by pair key so the reduction is
/// deterministic. Pairs with empty ground truth are excluded from the means
/// but their false positives are carried in `extra_fp`.
pub fn aggregate_benchmark(results: Vec<(PairKey, PairEval)>) -> Result<BenchmarkReport> {
    let mut results = results;
    results.sort_by(|a, b| a.0.cmp(&b.0));
    let mut per_pair = Vec::new();
    let mut extra_fp = 0usize;
    let mut n_empty = 0usize;
    for (key, eval) in results {
        match eval {
            PairEval::Scored(r) => per_pair.push((key, r)),
            PairEval::EmptyGt { fp } => {
                extra_fp += fp;
                n_empty += 1;
            }
        }
    }
    if per_pair.is_empty() {
        return Err(Error::invalid("no pair has non-empty ground truth"));
    }
    let n = per_pair.len() as f64;
    let mean = MeanMetrics {
        amota: per_pair.iter().map(|(_, r)| r.amota).sum::<f64>() / n,
        amotp: per_pair.iter().map(|(_, r)| r.amotp).sum::<f64>() / n,
        recall: per_pair.iter().map(|(_, r)| r.recall).sum::<f64>() / n,
        mota: per_pair.iter().map(|(_, r)| r.mota).sum::<f64>() / n,
        ids: per_pair.iter().map(|(_, r)| r.ids as f64).sum::<f64>() / n,
    };
    let n_pairs = per_pair.len();
    Ok(BenchmarkReport { per_pair, mean, extra_fp, n_pairs, n_empty_gt: n_empty })
}

/// Convert ground truth into a perfect submission (confidence 1 everywhere),
/// keeping ground-truth ids as pred ids.
pub fn gt_as_submission(gt: &[GtTrack], scene_id: &str, prompt_id: &str) -> TrackletSubmission {
    TrackletSubmission {
        scene_id: scene_id.to_string(),
        prompt_id: prompt_id.to_string(),
        tracklets: gt
            .iter()
            .map(|t| Tracklet {
                pred_id: t.track_id,
                boxes: t.boxes.clone(),
                conf: t.boxes.keys().map(|&f| (f, 1.0)).collect(),
            })
            .collect(),
    }
}
