//! `sweep`: evaluate the query tracker at several prompt thresholds and
//! print the threshold-ablation table. Tracking runs once per scene; only
//! the emission threshold varies.

use crate::config::RunConfig;
use crate::io::{build_report, read_checkpoint, read_prompts, read_scenes};
use crate::table::render_sweep;
use crate::{CliError, CliResult};
use clap::Args;
use promptmot::promptgen::PromptLabel;
use promptmot::tracker::run_query_tracker;
use promptmot::trackeval::{
    aggregate_benchmark, build_pair_ground_truth, compute_amota_amotp, PairEval, PairKey,
    Tracklet, TrackletSubmission,
};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::path::PathBuf;

#[derive(Debug, Clone, Args)]
pub struct SweepOptions {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub scenes: PathBuf,
    #[arg(long)]
    pub prompts: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Comma-separated prompt thresholds to sweep.
    #[arg(long, default_value = "0.1,0.2,0.3,0.4")]
    pub gammas: String,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub sigma_pos: Option<f64>,
    #[arg(long)]
    pub p_drop: Option<f64>,
    #[arg(long)]
    pub p_clutter: Option<f64>,
}

pub fn cmd_sweep(opts: &SweepOptions) -> CliResult<()> {
    let mut cfg = RunConfig::load(opts.config.as_deref())?;
    if let Some(seed) = opts.seed {
        cfg.set_seed(seed);
    }
    if let Some(v) = opts.sigma_pos {
        cfg.noise.sigma_pos = v;
    }
    if let Some(v) = opts.p_drop {
        cfg.noise.p_drop = v;
    }
    if let Some(v) = opts.p_clutter {
        cfg.noise.p_clutter = v;
    }
    let gammas: Vec<f64> = opts
        .gammas
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::input(format!("bad gamma list `{}`", opts.gammas)))?;
    if gammas.iter().any(|g| !(*g > 0.0 && *g < 1.0)) {
        return Err(CliError::input("every gamma must be in (0,1)".to_string()));
    }

    let scenes = read_scenes(&opts.scenes)?;
    let prompts: Vec<PromptLabel> =
        read_prompts(&opts.prompts, &scenes)?.into_iter().map(|(_, p)| p).collect();
    let ckpt = read_checkpoint(&opts.checkpoint)?;
    if ckpt.model_dim != cfg.tracker.model_dim || ckpt.heads != cfg.tracker.heads {
        return Err(CliError::input("checkpoint shape does not match tracker config".to_string()));
    }

    let scene_of: BTreeMap<&str, &promptmot::simworld::Scene> =
        scenes.iter().map(|s| (s.scene_id.as_str(), s)).collect();
    let mut rows = Vec::new();
    for &gamma in &gammas {
        let mut tracker_cfg = cfg.tracker.clone();
        tracker_cfg.gamma_prompt = gamma;
        let submissions: Vec<TrackletSubmission> = scenes
            .par_iter()
            .map(|scene| {
                let scene_prompts: Vec<&PromptLabel> =
                    prompts.iter().filter(|p| p.scene_id == scene.scene_id).collect();
                run_query_tracker(scene, &scene_prompts, &ckpt.head, &tracker_cfg, &cfg.noise)
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(CliError::from)?
            .into_iter()
            .flatten()
            .collect();
        let boxes: usize = submissions
            .iter()
            .flat_map(|s| s.tracklets.iter().map(Tracklet::n_boxes))
            .sum();
        let results: Vec<(PairKey, PairEval)> = submissions
            .par_iter()
            .map(|sub| {
                let label = prompts
                    .iter()
                    .find(|p| p.prompt_id == sub.prompt_id && p.scene_id == sub.scene_id)
                    .expect("submission pairs come from the prompt set");
                let gt = build_pair_ground_truth(scene_of[sub.scene_id.as_str()], label);
                let eval = compute_amota_amotp(&gt, sub, &cfg.eval)?;
                Ok((
                    PairKey { scene_id: sub.scene_id.clone(), prompt_id: sub.prompt_id.clone() },
                    eval,
                ))
            })
            .collect::<Result<_, promptmot::Error>>()
            .map_err(CliError::from)?;
        let benchmark = aggregate_benchmark(results).map_err(CliError::from)?;
        rows.push((gamma, build_report(&benchmark).mean, boxes));
    }
    print!("{}", render_sweep(&rows));
    Ok(())
}
