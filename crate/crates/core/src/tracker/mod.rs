//! Reference trackers: a greedy centroid baseline and a query-propagation
//! tracker with past reasoning (history attention and box smoothing), future
//! reasoning (motion prediction and ego-frame propagation), and prompt
//! reasoning (cross-modal attention plus a binary head), together with
//! training of the prompt head.
//!
//! The image backbone is replaced by a noise-configurable oracle detector
//! and the text encoder by deterministic hash embeddings; the reasoning
//! branches and the evaluation protocol are the system under study, and this
//! keeps a full experiment runnable in minutes.

mod embed;
mod greedy;
mod oracle;
mod pipeline;
mod reason;
mod train;

pub use embed::{embed_prompt, embed_tag_set, embed_token, pooled_embedding, PromptEmbedding};
pub use greedy::run_greedy_baseline;
pub use oracle::{detect_oracle, Detection, NoiseConfig, FEATURE_NOISE_RATIO};
pub use pipeline::{
    run_query_tracker, score_trace, Emission, SlotObs, StepOutput, TrackTrace, TrackerState,
};
pub use reason::{
    future_reason, past_reason, FutureReasonOut, PastReason, PromptHead, PromptHeadCache,
    PromptHeadGrads,
};
pub use train::{referred_probability_split, train_prompt_head, TrainConfig, TrainOutcome};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Tracker hyperparameters. The model width/head defaults are desk-scale;
/// the full-scale settings (C = 256, 8 heads, 500 fixed queries) are a
/// config change away.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    /// Feature width C.
    pub model_dim: usize,
    /// Attention heads in the prompt-reasoning branch.
    pub heads: usize,
    /// Fixed (detection) query slots, bounding births per frame.
    pub n_fixed: usize,
    /// History length cached per query.
    pub tau_h: usize,
    /// Future steps predicted by the motion head.
    pub tau_f: usize,
    /// Class-score threshold for a true object.
    pub gamma_object: f64,
    /// Prompt-score threshold for a referred object.
    pub gamma_prompt: f64,
    /// Consecutive sub-threshold frames before a track dies.
    pub miss_tolerance: u32,
    /// Ground-plane association gate in meters.
    pub assoc_gate: f64,
    /// Association gate for tracks without velocity history (first frame
    /// after birth), whose position prediction cannot account for motion.
    pub cold_gate: f64,
    /// Past reasoning switch; disabled keeps every cache empty.
    pub past_reasoning: bool,
    /// Early fusion of pooled prompt features into detector features.
    pub early_fusion: bool,
    pub seed: u64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            model_dim: 32,
            heads: 4,
            n_fixed: 64,
            tau_h: 3,
            tau_f: 8,
            gamma_object: 0.2,
            gamma_prompt: 0.2,
            miss_tolerance: 3,
            assoc_gate: 2.0,
            cold_gate: 8.0,
            past_reasoning: true,
            early_fusion: false,
            seed: 0,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_object > 0.0 && self.gamma_object < 1.0) {
            return Err(Error::invalid("gamma_object must be in (0,1)"));
        }
        if !(self.gamma_prompt > 0.0 && self.gamma_prompt < 1.0) {
            return Err(Error::invalid("gamma_prompt must be in (0,1)"));
        }
        if self.tau_h < 1 || self.tau_f < 1 {
            return Err(Error::invalid("tau_h and tau_f must be >= 1"));
        }
        if self.model_dim == 0 || self.heads == 0 || self.model_dim % self.heads != 0 {
            return Err(Error::invalid("model_dim must be a positive multiple of heads"));
        }
        if self.assoc_gate <= 0.0 || self.cold_gate < self.assoc_gate {
            return Err(Error::invalid("gates must be positive with cold_gate >= assoc_gate"));
        }
        Ok(())
    }
}
