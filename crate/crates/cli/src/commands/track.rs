//! `track`: run a tracker over (scene, prompt) pairs, streaming frame by
//! frame, and write `predictions.jsonl`. Reruns are idempotent: pairs
//! already present in the output are kept and skipped.

use crate::config::RunConfig;
use crate::io::{read_checkpoint, read_jsonl, read_prompts, read_scenes, PredictionRecord};
use crate::{CliError, CliResult};
use clap::{Args, ValueEnum};
use promptmot::promptgen::PromptLabel;
use promptmot::tracker::{run_greedy_baseline, run_query_tracker, PromptHead};
use promptmot::trackeval::TrackletSubmission;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::BTreeSet;
use std::io::Write;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TrackerChoice {
    Query,
    Greedy,
}

#[derive(Debug, Clone, Args)]
pub struct TrackOptions {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub scenes: PathBuf,
    #[arg(long)]
    pub prompts: PathBuf,
    /// Trained prompt-head checkpoint; omitted runs an untrained head.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = TrackerChoice::Query)]
    pub tracker: TrackerChoice,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub sigma_pos: Option<f64>,
    #[arg(long)]
    pub p_drop: Option<f64>,
    #[arg(long)]
    pub p_clutter: Option<f64>,
    #[arg(long)]
    pub gamma_object: Option<f64>,
    #[arg(long)]
    pub gamma_prompt: Option<f64>,
    /// Disable past reasoning (keeps every history cache empty).
    #[arg(long)]
    pub no_past_reasoning: bool,
    /// Multiply detector features by the pooled prompt embedding.
    #[arg(long)]
    pub early_fusion: bool,
    /// Output predictions.jsonl path.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn cmd_track(opts: &TrackOptions) -> CliResult<()> {
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
    if let Some(v) = opts.gamma_object {
        cfg.tracker.gamma_object = v;
    }
    if let Some(v) = opts.gamma_prompt {
        cfg.tracker.gamma_prompt = v;
    }
    if opts.no_past_reasoning {
        cfg.tracker.past_reasoning = false;
    }
    if opts.early_fusion {
        cfg.tracker.early_fusion = true;
    }
    cfg.tracker.validate().map_err(CliError::from)?;

    let scenes = read_scenes(&opts.scenes)?;
    let prompts: Vec<PromptLabel> =
        read_prompts(&opts.prompts, &scenes)?.into_iter().map(|(_, p)| p).collect();

    let head = match &opts.checkpoint {
        Some(path) => {
            let ckpt = read_checkpoint(path)?;
            if ckpt.model_dim != cfg.tracker.model_dim || ckpt.heads != cfg.tracker.heads {
                return Err(CliError::input(format!(
                    "checkpoint {} was trained at C={} h={}, run configured C={} h={}",
                    path.display(),
                    ckpt.model_dim,
                    ckpt.heads,
                    cfg.tracker.model_dim,
                    cfg.tracker.heads
                )));
            }
            ckpt.head
        }
        None => {
            eprintln!("warning: no checkpoint given; scoring prompts with an untrained head");
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.tracker.seed);
            PromptHead::random(cfg.tracker.model_dim, cfg.tracker.heads, cfg.train.hidden, &mut rng)
                .map_err(CliError::from)?
        }
    };

    // Resumability: pairs already in the output are kept verbatim.
    let done: BTreeSet<(String, String)> = if opts.out.exists() {
        read_jsonl::<PredictionRecord, _>(&opts.out, |_| Ok(()))?
            .into_iter()
            .map(|(_, r)| (r.scene_id, r.prompt_id))
            .collect()
    } else {
        BTreeSet::new()
    };

    let mut submissions: Vec<TrackletSubmission> = scenes
        .par_iter()
        .map(|scene| {
            let pending: Vec<&PromptLabel> = prompts
                .iter()
                .filter(|p| {
                    p.scene_id == scene.scene_id
                        && !done.contains(&(p.scene_id.clone(), p.prompt_id.clone()))
                })
                .collect();
            if pending.is_empty() {
                return Ok(Vec::new());
            }
            match opts.tracker {
                TrackerChoice::Query => {
                    run_query_tracker(scene, &pending, &head, &cfg.tracker, &cfg.noise)
                }
                TrackerChoice::Greedy => {
                    run_greedy_baseline(scene, &pending, &head, &cfg.tracker, &cfg.noise)
                }
            }
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(CliError::from)?
        .into_iter()
        .flatten()
        .collect();
    submissions.sort_by(|a, b| {
        (&a.scene_id, &a.prompt_id).cmp(&(&b.scene_id, &b.prompt_id))
    });

    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&opts.out)
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", opts.out.display())))?;
    for sub in &submissions {
        let record = PredictionRecord::from_submission(sub);
        let line = serde_json::to_string(&record)
            .map_err(|e| CliError::Internal(format!("serializing prediction: {e}")))?;
        writeln!(file, "{line}")
            .map_err(|e| CliError::input(format!("cannot write {}: {e}", opts.out.display())))?;
    }
    println!(
        "wrote {} pairs ({} resumed) to {}",
        submissions.len(),
        done.len(),
        opts.out.display()
    );
    Ok(())
}
