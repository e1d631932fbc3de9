//! `train`: fit the prompt-reasoning head and write a checkpoint.

use crate::config::RunConfig;
use crate::io::{read_prompts, read_scenes, write_checkpoint};
use crate::{CliError, CliResult};
use clap::Args;
use promptmot::simworld::split_dataset;
use promptmot::tracker::train_prompt_head;
use std::path::PathBuf;

#[derive(Debug, Clone, Args)]
pub struct TrainOptions {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub scenes: PathBuf,
    #[arg(long)]
    pub prompts: PathBuf,
    /// Optimization steps.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Train only on this fraction of scenes (deterministic split); the
    /// default trains on everything.
    #[arg(long)]
    pub split_ratio: Option<f64>,
    #[arg(long)]
    pub sigma_pos: Option<f64>,
    #[arg(long)]
    pub p_drop: Option<f64>,
    #[arg(long)]
    pub p_clutter: Option<f64>,
    /// Output checkpoint path.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn cmd_train(opts: &TrainOptions) -> CliResult<()> {
    let mut cfg = RunConfig::load(opts.config.as_deref())?;
    if let Some(seed) = opts.seed {
        cfg.set_seed(seed);
    }
    if let Some(steps) = opts.steps {
        cfg.train.steps = steps;
    }
    if let Some(lr) = opts.lr {
        cfg.train.lr = lr;
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

    let scenes = read_scenes(&opts.scenes)?;
    let prompts: Vec<_> =
        read_prompts(&opts.prompts, &scenes)?.into_iter().map(|(_, p)| p).collect();

    let (train_scenes, train_prompts) = match opts.split_ratio {
        Some(ratio) => {
            let (train_ids, _) = split_dataset(&scenes, ratio).map_err(CliError::from)?;
            let scenes: Vec<_> =
                scenes.iter().filter(|s| train_ids.contains(&s.scene_id)).cloned().collect();
            let prompts: Vec<_> =
                prompts.iter().filter(|p| train_ids.contains(&p.scene_id)).cloned().collect();
            (scenes, prompts)
        }
        None => (scenes, prompts),
    };

    let outcome =
        train_prompt_head(&train_scenes, &train_prompts, &cfg.tracker, &cfg.noise, &cfg.train)
            .map_err(CliError::from)?;
    if outcome.degenerate {
        eprintln!("warning: no positive labels anywhere; head written untrained");
    }
    write_checkpoint(&opts.out, cfg.tracker.model_dim, cfg.tracker.heads, &outcome.head)?;
    let first = outcome.loss_history.first().copied().unwrap_or(0.0);
    let last = outcome.loss_history.last().copied().unwrap_or(0.0);
    println!(
        "trained {} steps on {} scenes / {} prompts; loss {first:.4} -> {last:.4}; checkpoint {}",
        outcome.loss_history.len(),
        train_scenes.len(),
        train_prompts.len(),
        opts.out.display()
    );
    Ok(())
}
