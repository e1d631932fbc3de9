//! Run configuration: defaults, an INI-style config file (flat key-value
//! pairs under sections), and flag overrides applied on top by each command.

use crate::{CliError, CliResult};
use promptmot::promptgen::PromptConfig;
use promptmot::simworld::{MotionMix, SceneConfig};
use promptmot::tracker::{NoiseConfig, TrackerConfig, TrainConfig};
use promptmot::trackeval::EvalConfig;
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    pub seed: u64,
    pub scene: SceneConfig,
    pub prompt: PromptConfig,
    pub tracker: TrackerConfig,
    pub noise: NoiseConfig,
    pub eval: EvalConfig,
    pub train: TrainConfig,
}

impl RunConfig {
    /// Defaults, overlaid with a config file when given. Command-line flags
    /// are applied afterwards by each command and win over both.
    pub fn load(path: Option<&Path>) -> CliResult<RunConfig> {
        let mut cfg = RunConfig {
            seed: 0,
            scene: SceneConfig::default(),
            prompt: PromptConfig::default(),
            tracker: TrackerConfig::default(),
            noise: NoiseConfig::default(),
            eval: EvalConfig::default(),
            train: TrainConfig::default(),
        };
        if let Some(path) = path {
            let entries = parse_ini(path)?;
            cfg.apply(&entries, path)?;
        }
        Ok(cfg)
    }

    fn apply(&mut self, entries: &BTreeMap<String, (usize, String)>, path: &Path) -> CliResult<()> {
        for (key, (line, value)) in entries {
            let fail = |what: &str| {
                CliError::input(format!(
                    "{}: line {line}: invalid {what} value `{value}` for `{key}`",
                    path.display()
                ))
            };
            macro_rules! set {
                ($field:expr, $ty:ty, $what:expr) => {
                    $field = value.parse::<$ty>().map_err(|_| fail($what))?
                };
            }
            match key.as_str() {
                "run.seed" => set!(self.seed, u64, "integer"),
                "scene.n_tracks" => set!(self.scene.n_tracks, usize, "integer"),
                "scene.duration_frames" => set!(self.scene.duration_frames, usize, "integer"),
                "scene.mix_constant_velocity" => {
                    set!(self.scene.motion_mix.constant_velocity, f64, "number")
                }
                "scene.mix_stopped" => set!(self.scene.motion_mix.stopped, f64, "number"),
                "scene.mix_crossing" => set!(self.scene.motion_mix.crossing, f64, "number"),
                "scene.mix_overtaking" => set!(self.scene.motion_mix.overtaking, f64, "number"),
                "prompts.n_random" => set!(self.prompt.n_random, usize, "integer"),
                "prompts.min_boxes" => set!(self.prompt.min_boxes, usize, "integer"),
                "tracker.model_dim" => set!(self.tracker.model_dim, usize, "integer"),
                "tracker.heads" => set!(self.tracker.heads, usize, "integer"),
                "tracker.n_fixed" => set!(self.tracker.n_fixed, usize, "integer"),
                "tracker.tau_h" => set!(self.tracker.tau_h, usize, "integer"),
                "tracker.tau_f" => set!(self.tracker.tau_f, usize, "integer"),
                "tracker.gamma_object" => set!(self.tracker.gamma_object, f64, "number"),
                "tracker.gamma_prompt" => set!(self.tracker.gamma_prompt, f64, "number"),
                "tracker.miss_tolerance" => set!(self.tracker.miss_tolerance, u32, "integer"),
                "tracker.assoc_gate" => set!(self.tracker.assoc_gate, f64, "number"),
                "tracker.cold_gate" => set!(self.tracker.cold_gate, f64, "number"),
                "tracker.past_reasoning" => set!(self.tracker.past_reasoning, bool, "boolean"),
                "tracker.early_fusion" => set!(self.tracker.early_fusion, bool, "boolean"),
                "noise.sigma_pos" => set!(self.noise.sigma_pos, f64, "number"),
                "noise.p_drop" => set!(self.noise.p_drop, f64, "number"),
                "noise.p_clutter" => set!(self.noise.p_clutter, f64, "number"),
                "eval.gate" => set!(self.eval.gate, f64, "number"),
                "eval.recall_samples" => set!(self.eval.recall_samples, usize, "integer"),
                "train.steps" => set!(self.train.steps, usize, "integer"),
                "train.lr" => set!(self.train.lr, f64, "number"),
                "train.lambda_p" => set!(self.train.lambda_p, f64, "number"),
                "train.hidden" => set!(self.train.hidden, usize, "integer"),
                "train.weight_decay" => set!(self.train.weight_decay, f64, "number"),
                other => {
                    return Err(CliError::input(format!(
                        "{}: line {line}: unknown config key `{other}`",
                        path.display()
                    )))
                }
            }
        }
        // Seeds propagate to the sub-configs unless those were set directly.
        self.scene.seed = self.seed;
        self.prompt.seed = self.seed;
        self.tracker.seed = self.seed;
        self.train.seed = self.seed;
        Ok(())
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.scene.seed = seed;
        self.prompt.seed = seed;
        self.tracker.seed = seed;
        self.train.seed = seed;
    }
}

/// Parse `[section]` / `key = value` lines into `section.key` entries with
/// their line numbers. `#` and `;` start comments.
fn parse_ini(path: &Path) -> CliResult<BTreeMap<String, (usize, String)>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    let mut section = String::new();
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split(['#', ';']).next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let Some(name) = name.strip_suffix(']') else {
                return Err(CliError::input(format!(
                    "{}: line {line_no}: unterminated section header",
                    path.display()
                )));
            };
            section = name.trim().to_string();
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::input(format!(
                "{}: line {line_no}: expected `key = value`",
                path.display()
            )));
        };
        let full = if section.is_empty() {
            key.trim().to_string()
        } else {
            format!("{section}.{}", key.trim())
        };
        out.insert(full, (line_no, value.trim().to_string()));
    }
    Ok(out)
}

/// Parse a `cv,stopped,crossing,overtaking` motion-mix flag.
pub fn parse_mix(s: &str) -> CliResult<MotionMix> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 4 {
        return Err(CliError::input(format!(
            "motion mix `{s}` must be four comma-separated fractions (cv,stopped,crossing,overtaking)"
        )));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::input(format!("motion mix `{s}` has a non-numeric entry")))?;
    Ok(MotionMix {
        constant_velocity: nums[0],
        stopped: nums[1],
        crossing: nums[2],
        overtaking: nums[3],
    })
}
