//! Subcommand implementations. Each command is a plain function over a
//! typed options struct so tests can drive it without spawning a process.

mod eval;
mod gen;
mod prompts;
mod sweep;
mod track;
mod train;

pub use eval::{cmd_eval, EvalOptions};
pub use gen::{cmd_gen, GenOptions};
pub use prompts::{cmd_prompts, PromptsOptions};
pub use sweep::{cmd_sweep, SweepOptions};
pub use track::{cmd_track, TrackOptions, TrackerChoice};
pub use train::{cmd_train, TrainOptions};
