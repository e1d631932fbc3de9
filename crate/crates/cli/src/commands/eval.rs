//! `eval`: score predictions against prompt ground truth and emit
//! `report.json` plus an aligned table.

use crate::config::RunConfig;
use crate::io::{build_report, read_predictions, read_prompts, read_scenes, write_report};
use crate::table::render_report;
use crate::{CliError, CliResult};
use clap::Args;
use promptmot::trackeval::{
    aggregate_benchmark, build_pair_ground_truth, compute_amota_amotp, PairEval, PairKey,
    TrackletSubmission,
};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::path::PathBuf;

#[derive(Debug, Clone, Args)]
pub struct EvalOptions {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub scenes: PathBuf,
    #[arg(long)]
    pub prompts: PathBuf,
    #[arg(long)]
    pub predictions: PathBuf,
    /// Matching gate in meters.
    #[arg(long)]
    pub gate: Option<f64>,
    /// Recall samples in the AMOTA integral.
    #[arg(long)]
    pub recall_samples: Option<usize>,
    /// Print one row per video-prompt pair before the mean row.
    #[arg(long)]
    pub per_pair: bool,
    /// Output report.json path.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

pub fn cmd_eval(opts: &EvalOptions) -> CliResult<()> {
    let mut cfg = RunConfig::load(opts.config.as_deref())?;
    if let Some(gate) = opts.gate {
        cfg.eval.gate = gate;
    }
    if let Some(n) = opts.recall_samples {
        cfg.eval.recall_samples = n;
    }

    let scenes = read_scenes(&opts.scenes)?;
    let prompts = read_prompts(&opts.prompts, &scenes)?;
    let predictions = read_predictions(&opts.predictions, &scenes)?;

    // Every prediction pair must exist in the prompt set.
    let known: BTreeMap<(String, String), usize> = prompts
        .iter()
        .enumerate()
        .map(|(i, (_, p))| ((p.scene_id.clone(), p.prompt_id.clone()), i))
        .collect();
    let unknown: Vec<String> = predictions
        .iter()
        .filter(|(_, s)| !known.contains_key(&(s.scene_id.clone(), s.prompt_id.clone())))
        .map(|(line, s)| format!("({}, {}) at line {line}", s.scene_id, s.prompt_id))
        .collect();
    if !unknown.is_empty() {
        return Err(CliError::input(format!(
            "{}: unknown pair keys: {}",
            opts.predictions.display(),
            unknown.join(", ")
        )));
    }

    // Pairs without a prediction line are scored as empty submissions.
    let by_key: BTreeMap<(String, String), &TrackletSubmission> = predictions
        .iter()
        .map(|(_, s)| ((s.scene_id.clone(), s.prompt_id.clone()), s))
        .collect();
    let scene_of: BTreeMap<&str, &promptmot::simworld::Scene> =
        scenes.iter().map(|s| (s.scene_id.as_str(), s)).collect();

    let results: Vec<(PairKey, PairEval)> = prompts
        .par_iter()
        .map(|(_, label)| {
            let scene = scene_of[label.scene_id.as_str()];
            let gt = build_pair_ground_truth(scene, label);
            let empty = TrackletSubmission {
                scene_id: label.scene_id.clone(),
                prompt_id: label.prompt_id.clone(),
                tracklets: vec![],
            };
            let sub = by_key
                .get(&(label.scene_id.clone(), label.prompt_id.clone()))
                .copied()
                .unwrap_or(&empty);
            let eval = compute_amota_amotp(&gt, sub, &cfg.eval)?;
            Ok((
                PairKey { scene_id: label.scene_id.clone(), prompt_id: label.prompt_id.clone() },
                eval,
            ))
        })
        .collect::<Result<_, promptmot::Error>>()
        .map_err(CliError::from)?;

    let benchmark = aggregate_benchmark(results).map_err(CliError::from)?;
    let report = build_report(&benchmark);
    print!("{}", render_report(&report, opts.per_pair));
    if let Some(path) = &opts.report {
        write_report(path, &report)?;
        println!("report written to {}", path.display());
    }
    Ok(())
}
