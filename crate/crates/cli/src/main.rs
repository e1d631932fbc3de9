use clap::{Parser, Subcommand};
use promptmot_cli::commands::{
    cmd_eval, cmd_gen, cmd_prompts, cmd_sweep, cmd_track, cmd_train, EvalOptions, GenOptions,
    PromptsOptions, SweepOptions, TrackOptions, TrainOptions,
};

/// Desk-scale benchmark pipeline for prompt-conditioned 3D multi-object
/// tracking: synthesize scenes, build prompts, train the prompt head, run
/// trackers, and score them.
#[derive(Parser)]
#[command(name = "promptmot", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic scenes (scenes.jsonl).
    Gen(GenOptions),
    /// Build prompt sets over scenes (prompts.jsonl).
    Prompts(PromptsOptions),
    /// Train the prompt-reasoning head (checkpoint.json).
    Train(TrainOptions),
    /// Run a tracker over every (scene, prompt) pair (predictions.jsonl).
    Track(TrackOptions),
    /// Score predictions (report.json + table).
    Eval(EvalOptions),
    /// Sweep the prompt threshold and print the ablation table.
    Sweep(SweepOptions),
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen(opts) => cmd_gen(opts),
        Command::Prompts(opts) => cmd_prompts(opts),
        Command::Train(opts) => cmd_train(opts),
        Command::Track(opts) => cmd_track(opts),
        Command::Eval(opts) => cmd_eval(opts),
        Command::Sweep(opts) => cmd_sweep(opts),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
