//! `gen`: synthesize scenes into `scenes.jsonl`.

use crate::config::{parse_mix, RunConfig};
use crate::io::write_jsonl;
use crate::{CliError, CliResult};
use clap::Args;
use promptmot::simworld::{derive_seed, generate_scene, Scene, SceneConfig};
use rayon::prelude::*;
use std::path::PathBuf;

#[derive(Debug, Clone, Args)]
pub struct GenOptions {
    /// Config file (flat key-value with sections); flags win over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of scenes to generate.
    #[arg(long, default_value_t = 20)]
    pub scenes: usize,
    /// Tracks per scene.
    #[arg(long)]
    pub tracks: Option<usize>,
    /// Keyframes per scene (2 Hz).
    #[arg(long)]
    pub frames: Option<usize>,
    /// Motion mix as `cv,stopped,crossing,overtaking` fractions.
    #[arg(long)]
    pub mix: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output scenes.jsonl path.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn cmd_gen(opts: &GenOptions) -> CliResult<()> {
    let mut cfg = RunConfig::load(opts.config.as_deref())?;
    if let Some(seed) = opts.seed {
        cfg.set_seed(seed);
    }
    if let Some(tracks) = opts.tracks {
        cfg.scene.n_tracks = tracks;
    }
    if let Some(frames) = opts.frames {
        cfg.scene.duration_frames = frames;
    }
    if let Some(mix) = &opts.mix {
        cfg.scene.motion_mix = parse_mix(mix)?;
    }

    let scenes: Vec<Scene> = (0..opts.scenes)
        .into_par_iter()
        .map(|i| {
            let scene_cfg = SceneConfig {
                seed: derive_seed(cfg.scene.seed, i as u64),
                ..cfg.scene.clone()
            };
            generate_scene(&format!("scene-{i:04}"), &scene_cfg)
        })
        .collect::<Result<_, _>>()
        .map_err(CliError::from)?;

    write_jsonl(&opts.out, &scenes)?;
    let n_tracks: usize = scenes.iter().map(|s| s.tracks.len()).sum();
    let n_boxes: usize = scenes
        .iter()
        .flat_map(|s| s.tracks.iter().map(|t| t.states.len()))
        .sum();
    println!(
        "wrote {} scenes ({} tracks, {} boxes) to {}",
        scenes.len(),
        n_tracks,
        n_boxes,
        opts.out.display()
    );
    Ok(())
}
