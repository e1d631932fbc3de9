//! `prompts`: build the prompt set for every scene and print summary
//! statistics next to the full-scale reference numbers.

use crate::config::RunConfig;
use crate::io::{read_scenes, write_jsonl};
use crate::{CliError, CliResult};
use clap::Args;
use promptmot::promptgen::{
    build_prompt_set, summarize_promptset, Grammar, PromptConfig, PromptLabel,
    FULL_SCALE_MEAN_INSTANCES, FULL_SCALE_PROMPT_COUNT, FULL_SCALE_PROMPTS_PER_VIDEO,
};
use promptmot::simworld::derive_seed;
use rayon::prelude::*;
use std::path::PathBuf;

#[derive(Debug, Clone, Args)]
pub struct PromptsOptions {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Input scenes.jsonl.
    #[arg(long)]
    pub scenes: PathBuf,
    /// Random combinations drawn per scene (before filtering).
    #[arg(long)]
    pub n_random: Option<usize>,
    /// Minimum total box count for a prompt to be retained.
    #[arg(long)]
    pub min_boxes: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output prompts.jsonl path.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn cmd_prompts(opts: &PromptsOptions) -> CliResult<()> {
    let mut cfg = RunConfig::load(opts.config.as_deref())?;
    if let Some(seed) = opts.seed {
        cfg.set_seed(seed);
    }
    if let Some(n) = opts.n_random {
        cfg.prompt.n_random = n;
    }
    if let Some(m) = opts.min_boxes {
        cfg.prompt.min_boxes = m;
    }

    let scenes = read_scenes(&opts.scenes)?;
    let grammar = Grammar::default();
    let labels: Vec<Vec<PromptLabel>> = scenes
        .par_iter()
        .enumerate()
        .map(|(i, scene)| {
            let prompt_cfg =
                PromptConfig { seed: derive_seed(cfg.prompt.seed, i as u64), ..cfg.prompt.clone() };
            build_prompt_set(scene, &prompt_cfg, &grammar)
        })
        .collect::<Result<_, _>>()
        .map_err(CliError::from)?;
    let labels: Vec<PromptLabel> = labels.into_iter().flatten().collect();

    write_jsonl(&opts.out, &labels)?;
    println!("wrote {} prompts to {}", labels.len(), opts.out.display());
    if labels.is_empty() {
        println!("note: prompt set is empty (filters removed everything)");
        return Ok(());
    }
    let stats = summarize_promptset(&labels)?;
    let per_scene = stats.count as f64 / scenes.len().max(1) as f64;
    println!(
        "prompts: {}   mean instances/prompt: {:.2}   prompts/scene: {:.1}",
        stats.count, stats.mean_instances, per_scene
    );
    print!("boxes/prompt histogram:");
    for (bucket, count) in &stats.boxes_histogram {
        print!("  {bucket}: {count}");
    }
    println!();
    println!(
        "full-scale reference: {FULL_SCALE_PROMPT_COUNT} prompts, \
         {FULL_SCALE_MEAN_INSTANCES} instances/prompt, \
         {FULL_SCALE_PROMPTS_PER_VIDEO} prompts/video"
    );
    Ok(())
}
