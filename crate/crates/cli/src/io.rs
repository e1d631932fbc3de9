//! File formats: JSONL readers with line-numbered errors, the predictions
//! schema, the parameter checkpoint, and the evaluation report.

use crate::{CliError, CliResult};
use promptmot::geom3d::{Box3D, Frame};
use promptmot::promptgen::PromptLabel;
use promptmot::simworld::{FrameIdx, Scene};
use promptmot::tracker::PromptHead;
use promptmot::trackeval::{BenchmarkReport, PairResult, Tracklet, TrackletSubmission};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

fn read_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::input(format!("cannot read {}: {e}", path.display()))
}

fn write_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::input(format!("cannot write {}: {e}", path.display()))
}

/// Read a JSONL file, validating every record; errors carry the 1-based
/// line number.
pub fn read_jsonl<T, F>(path: &Path, mut validate: F) -> CliResult<Vec<(usize, T)>>
where
    T: DeserializeOwned,
    F: FnMut(&T) -> Result<(), String>,
{
    let file = std::fs::File::open(path).map_err(|e| read_err(path, e))?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| read_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(&line).map_err(|e| {
            CliError::input(format!("{}: line {line_no}: {e}", path.display()))
        })?;
        validate(&record).map_err(|msg| {
            CliError::input(format!("{}: line {line_no}: {msg}", path.display()))
        })?;
        out.push((line_no, record));
    }
    Ok(out)
}

/// Write records as JSONL (one compact JSON object per line).
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> CliResult<()> {
    let file = std::fs::File::create(path).map_err(|e| write_err(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r)
            .map_err(|e| CliError::Internal(format!("serializing record: {e}")))?;
        w.write_all(line.as_bytes()).map_err(|e| write_err(path, e))?;
        w.write_all(b"\n").map_err(|e| write_err(path, e))?;
    }
    w.flush().map_err(|e| write_err(path, e))
}

pub fn read_scenes(path: &Path) -> CliResult<Vec<Scene>> {
    let records = read_jsonl::<Scene, _>(path, |s| s.validate().map_err(|e| e.to_string()))?;
    Ok(records.into_iter().map(|(_, s)| s).collect())
}

pub fn read_prompts(path: &Path, scenes: &[Scene]) -> CliResult<Vec<(usize, PromptLabel)>> {
    let by_id: BTreeMap<&str, &Scene> =
        scenes.iter().map(|s| (s.scene_id.as_str(), s)).collect();
    read_jsonl::<PromptLabel, _>(path, |label| {
        label.expr.validate().map_err(|e| e.to_string())?;
        if label.text.trim().is_empty() {
            return Err(format!("prompt {} has empty text", label.prompt_id));
        }
        let Some(scene) = by_id.get(label.scene_id.as_str()) else {
            return Err(format!(
                "prompt {} references unknown scene {}",
                label.prompt_id, label.scene_id
            ));
        };
        for (&frame, ids) in &label.referred {
            if frame as usize >= scene.n_frames() {
                return Err(format!(
                    "prompt {} refers to frame {frame} beyond scene duration",
                    label.prompt_id
                ));
            }
            for id in ids {
                let present = scene.track(*id).is_some_and(|t| t.state_at(frame).is_some());
                if !present {
                    return Err(format!(
                        "prompt {} refers to track {id} absent at frame {frame}",
                        label.prompt_id
                    ));
                }
            }
        }
        let n_boxes: usize = label.referred.values().map(|s| s.len()).sum();
        if n_boxes != label.stats.n_boxes {
            return Err(format!(
                "prompt {} stats.n_boxes {} does not match referred sets ({n_boxes})",
                label.prompt_id, label.stats.n_boxes
            ));
        }
        Ok(())
    })
}

/// One `predictions.jsonl` line. Boxes are 7-arrays
/// `[cx, cy, cz, w, l, h, yaw]` in world frame, keyed by frame index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub scene_id: String,
    pub prompt_id: String,
    pub tracklets: Vec<TrackletRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrackletRecord {
    pub pred_id: u64,
    pub boxes: BTreeMap<FrameIdx, [f64; 7]>,
    pub conf: BTreeMap<FrameIdx, f64>,
}

impl PredictionRecord {
    pub fn from_submission(sub: &TrackletSubmission) -> PredictionRecord {
        PredictionRecord {
            scene_id: sub.scene_id.clone(),
            prompt_id: sub.prompt_id.clone(),
            tracklets: sub
                .tracklets
                .iter()
                .map(|t| TrackletRecord {
                    pred_id: t.pred_id,
                    boxes: t.boxes.iter().map(|(&f, b)| (f, b.to_array())).collect(),
                    conf: t.conf.clone(),
                })
                .collect(),
        }
    }

    pub fn into_submission(self) -> Result<TrackletSubmission, String> {
        let tracklets = self
            .tracklets
            .into_iter()
            .map(|t| {
                let boxes = t
                    .boxes
                    .into_iter()
                    .map(|(f, a)| {
                        Box3D::from_array(a, Frame::World)
                            .map(|b| (f, b))
                            .map_err(|e| format!("tracklet {}: {e}", t.pred_id))
                    })
                    .collect::<Result<BTreeMap<_, _>, String>>()?;
                Ok(Tracklet { pred_id: t.pred_id, boxes, conf: t.conf })
            })
            .collect::<Result<Vec<_>, String>>()?;
        let sub = TrackletSubmission {
            scene_id: self.scene_id,
            prompt_id: self.prompt_id,
            tracklets,
        };
        sub.validate().map_err(|e| e.to_string())?;
        Ok(sub)
    }
}

/// Read predictions, checking schema per line and frame ranges against the
/// scenes.
pub fn read_predictions(
    path: &Path,
    scenes: &[Scene],
) -> CliResult<Vec<(usize, TrackletSubmission)>> {
    let frames_of: BTreeMap<&str, usize> =
        scenes.iter().map(|s| (s.scene_id.as_str(), s.n_frames())).collect();
    let records = read_jsonl::<PredictionRecord, _>(path, |r| {
        if let Some(&n) = frames_of.get(r.scene_id.as_str()) {
            for t in &r.tracklets {
                for &f in t.boxes.keys() {
                    if f as usize >= n {
                        return Err(format!(
                            "pair ({}, {}): tracklet {} has frame {f} beyond scene duration {n}",
                            r.scene_id, r.prompt_id, t.pred_id
                        ));
                    }
                }
            }
        }
        Ok(())
    })?;
    records
        .into_iter()
        .map(|(line, r)| {
            r.into_submission()
                .map(|s| (line, s))
                .map_err(|msg| CliError::input(format!("{}: line {line}: {msg}", path.display())))
        })
        .collect()
}

/// Versioned JSON checkpoint of the prompt head.
#[derive(Debug, Serialize, Deserialize)]
pub struct CheckpointFile {
    pub schema_version: u32,
    pub model_dim: usize,
    pub heads: usize,
    pub head: PromptHead,
}

pub fn write_checkpoint(path: &Path, model_dim: usize, heads: usize, head: &PromptHead) -> CliResult<()> {
    let file = CheckpointFile {
        schema_version: CHECKPOINT_SCHEMA_VERSION,
        model_dim,
        heads,
        head: head.clone(),
    };
    let json = serde_json::to_string(&file)
        .map_err(|e| CliError::Internal(format!("serializing checkpoint: {e}")))?;
    std::fs::write(path, json).map_err(|e| write_err(path, e))
}

pub fn read_checkpoint(path: &Path) -> CliResult<CheckpointFile> {
    let text = std::fs::read_to_string(path).map_err(|e| read_err(path, e))?;
    let file: CheckpointFile = serde_json::from_str(&text)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    if file.schema_version != CHECKPOINT_SCHEMA_VERSION {
        return Err(CliError::input(format!(
            "{}: unsupported checkpoint schema version {}",
            path.display(),
            file.schema_version
        )));
    }
    Ok(file)
}

/// `report.json` payload. All floats are rounded to six decimal digits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportFile {
    pub schema_version: u32,
    pub per_pair: Vec<ReportRow>,
    pub mean: ReportMean,
    pub extra_fp: usize,
    pub n_pairs: usize,
    pub n_empty_gt: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportRow {
    pub scene_id: String,
    pub prompt_id: String,
    pub amota: f64,
    pub amotp: f64,
    pub recall: f64,
    pub mota: f64,
    pub ids: usize,
    pub n_gt_boxes: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportMean {
    pub amota: f64,
    pub amotp: f64,
    pub recall: f64,
    pub mota: f64,
    pub ids: f64,
}

pub fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

pub fn build_report(report: &BenchmarkReport) -> ReportFile {
    let row = |scene_id: &str, prompt_id: &str, r: &PairResult| ReportRow {
        scene_id: scene_id.to_string(),
        prompt_id: prompt_id.to_string(),
        amota: round6(r.amota),
        amotp: round6(r.amotp),
        recall: round6(r.recall),
        mota: round6(r.mota),
        ids: r.ids,
        n_gt_boxes: r.n_gt_boxes,
    };
    ReportFile {
        schema_version: REPORT_SCHEMA_VERSION,
        per_pair: report
            .per_pair
            .iter()
            .map(|(k, r)| row(&k.scene_id, &k.prompt_id, r))
            .collect(),
        mean: ReportMean {
            amota: round6(report.mean.amota),
            amotp: round6(report.mean.amotp),
            recall: round6(report.mean.recall),
            mota: round6(report.mean.mota),
            ids: round6(report.mean.ids),
        },
        extra_fp: report.extra_fp,
        n_pairs: report.n_pairs,
        n_empty_gt: report.n_empty_gt,
    }
}

pub fn write_report(path: &Path, report: &ReportFile) -> CliResult<()> {
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| CliError::Internal(format!("serializing report: {e}")))?;
    std::fs::write(path, json).map_err(|e| write_err(path, e))
}
