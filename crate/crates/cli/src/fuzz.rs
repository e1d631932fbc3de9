//! Malformed-input corpus: deterministic mutations of valid JSONL lines,
//! used to verify that every reader rejects bad input with a line-numbered
//! error instead of crashing.

use crate::io::{read_predictions, read_prompts, read_scenes, write_jsonl, PredictionRecord};
use crate::{CliError, CliResult};
use promptmot::promptgen::{build_prompt_set, Grammar, PromptConfig};
use promptmot::simworld::{generate_scene, Scene, SceneConfig};
use promptmot::tracker::{run_query_tracker, PromptHead, TrackerConfig, NoiseConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

/// Textual corruptions guaranteed to break JSON parsing.
fn textual_mutation(line: &str, kind: usize, rng: &mut ChaCha8Rng) -> String {
    match kind {
        0 => line[..line.len() / 2].to_string(),
        1 => line[..line.len().saturating_sub(2)].to_string(),
        2 => line.replace('"', "'"),
        3 => format!("garbage {line}"),
        4 => format!("[{line}"),
        5 => line.replace(':', "="),
        6 => "{}".to_string(),
        7 => "[1,2,3]".to_string(),
        8 => "null".to_string(),
        _ => {
            // Drop a random brace.
            let cut = rng.random_range(0..line.len());
            let mut s = String::with_capacity(line.len());
            for (i, ch) in line.char_indices() {
                if i == cut && (ch == '{' || ch == '}' || ch == '"') {
                    continue;
                }
                s.push(ch);
            }
            if s == line {
                s.pop();
            }
            s
        }
    }
}

fn mutate_scene(v: &mut Value, kind: usize) {
    match kind {
        0 => {
            v["frames"] = Value::Array(vec![]);
        }
        1 => {
            let ego = v["ego"].as_array_mut().unwrap();
            ego.pop();
        }
        2 => {
            let dup = v["tracks"][0]["track_id"].clone();
            v["tracks"][1]["track_id"] = dup;
        }
        3 => {
            v["tracks"][0]["states"]["0"]["box3d"]["size"][0] = Value::from(-1.0);
        }
        4 => {
            v["ego"][1]["rotation"]["w"] = Value::from(5.0);
        }
        5 => {
            // Teleporting ego (>= 15 m between frames).
            v["ego"][1]["translation"][0] = Value::from(1000.0);
        }
        _ => {
            // State beyond scene duration.
            let state = v["tracks"][0]["states"]["0"].clone();
            v["tracks"][0]["states"]["9999"] = state;
        }
    }
}

fn mutate_prompt(v: &mut Value, kind: usize) {
    match kind {
        0 => {
            v["scene_id"] = Value::from("scene-nope");
        }
        1 => {
            v["expr"] = serde_json::json!(["AND", "car"]);
        }
        2 => {
            v["expr"] = serde_json::json!(["XOR", "car", "truck"]);
        }
        3 => {
            v["stats"]["n_boxes"] = Value::from(987_654u64);
        }
        4 => {
            v["text"] = Value::from("   ");
        }
        5 => {
            // Referred frame beyond the scene duration.
            let referred = v["referred"].as_object_mut().unwrap();
            let any = referred.values().next().cloned().unwrap_or(serde_json::json!([0]));
            referred.insert("9999".into(), any);
        }
        _ => {
            // Referred track that does not exist.
            let referred = v["referred"].as_object_mut().unwrap();
            referred.insert("0".into(), serde_json::json!([987_654]));
        }
    }
}

fn mutate_prediction(v: &mut Value, kind: usize) {
    match kind {
        0 => {
            v["tracklets"][0]["conf"]["0"] = Value::from(1.5);
        }
        1 => {
            v["tracklets"][0]["conf"]["0"] = Value::from(-0.25);
        }
        2 => {
            // Boxes/confidence frame mismatch.
            let conf = v["tracklets"][0]["conf"].as_object_mut().unwrap();
            let key = conf.keys().next().unwrap().clone();
            conf.remove(&key);
        }
        3 => {
            v["tracklets"][0]["boxes"]["0"] = serde_json::json!([1.0, 2.0, 3.0]);
        }
        4 => {
            v["tracklets"][0]["boxes"]["0"][3] = Value::from(-2.0);
        }
        5 => {
            // Frame beyond the scene duration.
            let boxes = v["tracklets"][0]["boxes"].as_object_mut().unwrap();
            let any = boxes.values().next().cloned().unwrap();
            boxes.insert("9999".into(), any.clone());
            let conf = v["tracklets"][0]["conf"].as_object_mut().unwrap();
            conf.insert("9999".into(), Value::from(0.5));
        }
        _ => {
            // Duplicate pred ids.
            let dup = v["tracklets"][0]["pred_id"].clone();
            v["tracklets"][1]["pred_id"] = dup;
        }
    }
}

fn check_line<T>(
    path: &Path,
    line: &str,
    reader: impl Fn(&Path) -> CliResult<T> + std::panic::RefUnwindSafe,
) -> CliResult<()> {
    std::fs::write(path, format!("{line}\n"))
        .map_err(|e| CliError::Internal(format!("writing fuzz line: {e}")))?;
    let outcome = catch_unwind(AssertUnwindSafe(|| reader(path)));
    match outcome {
        Err(_) => Err(CliError::Internal(format!("reader panicked on: {line}"))),
        Ok(Ok(_)) => Err(CliError::Internal(format!("reader accepted malformed line: {line}"))),
        Ok(Err(e)) => {
            let msg = e.to_string();
            if msg.contains("line 1") {
                Ok(())
            } else {
                Err(CliError::Internal(format!(
                    "error lacks a line number (`{msg}`) for: {line}"
                )))
            }
        }
    }
}

/// Build a deterministic corpus of `total` malformed lines split across the
/// three JSONL schemas, feed each through its reader, and require a
/// line-numbered error every time, with no panic. Returns the number of
/// lines checked.
pub fn corpus_check(total: usize) -> CliResult<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xF0220);
    let dir: PathBuf =
        std::env::temp_dir().join(format!("promptmot-fuzz-{}", std::process::id()));
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::Internal(format!("creating fuzz dir: {e}")))?;

    // Valid bases.
    let scene = generate_scene(
        "scene-0000",
        &SceneConfig { n_tracks: 4, duration_frames: 6, ..SceneConfig::default() },
    )
    .map_err(CliError::from)?;
    let prompts = build_prompt_set(
        &scene,
        &PromptConfig { n_random: 4, min_boxes: 1, seed: 1 },
        &Grammar::default(),
    )
    .map_err(CliError::from)?;
    let label = prompts
        .iter()
        .find(|p| !p.referred.is_empty())
        .expect("a prompt with referred tracks")
        .clone();
    let cfg = TrackerConfig::default();
    let head = PromptHead::pass_all(cfg.model_dim, cfg.heads).map_err(CliError::from)?;
    let subs = run_query_tracker(&scene, &[&label], &head, &cfg, &NoiseConfig::default())
        .map_err(CliError::from)?;
    let prediction = PredictionRecord::from_submission(&subs[0]);

    let scene_line = serde_json::to_string(&scene).unwrap();
    let prompt_line = serde_json::to_string(&label).unwrap();
    let prediction_line = serde_json::to_string(&prediction).unwrap();

    // Reference context for semantic validation.
    let scenes_path = dir.join("scenes-context.jsonl");
    write_jsonl(&scenes_path, &[scene.clone()])?;
    let scenes: Vec<Scene> = vec![scene];

    let per_schema = total / 3;
    let mut checked = 0usize;
    let path = dir.join("fuzz-line.jsonl");
    for i in 0..per_schema {
        let line = if i % 2 == 0 {
            textual_mutation(&scene_line, i % 10, &mut rng)
        } else {
            let mut v: Value = serde_json::from_str(&scene_line).unwrap();
            mutate_scene(&mut v, (i / 2) % 7);
            serde_json::to_string(&v).unwrap()
        };
        check_line(&path, &line, read_scenes)?;
        checked += 1;
    }
    for i in 0..per_schema {
        let line = if i % 2 == 0 {
            textual_mutation(&prompt_line, i % 10, &mut rng)
        } else {
            let mut v: Value = serde_json::from_str(&prompt_line).unwrap();
            mutate_prompt(&mut v, (i / 2) % 7);
            serde_json::to_string(&v).unwrap()
        };
        check_line(&path, &line, |p| read_prompts(p, &scenes))?;
        checked += 1;
    }
    for i in 0..(total - 2 * per_schema) {
        let line = if i % 2 == 0 {
            textual_mutation(&prediction_line, i % 10, &mut rng)
        } else {
            let mut v: Value = serde_json::from_str(&prediction_line).unwrap();
            mutate_prediction(&mut v, (i / 2) % 7);
            serde_json::to_string(&v).unwrap()
        };
        check_line(&path, &line, |p| read_predictions(p, &scenes))?;
        checked += 1;
    }

    // The command layer maps these to input errors (exit 2), never a crash.
    std::fs::write(&path, format!("{}\n", textual_mutation(&prediction_line, 0, &mut rng)))
        .map_err(|e| CliError::Internal(format!("writing fuzz line: {e}")))?;
    let prompts_path = dir.join("prompts-context.jsonl");
    write_jsonl(&prompts_path, &[label])?;
    let eval = crate::commands::cmd_eval(&crate::commands::EvalOptions {
        config: None,
        scenes: scenes_path.clone(),
        prompts: prompts_path,
        predictions: path.clone(),
        gate: None,
        recall_samples: None,
        per_pair: false,
        report: None,
    });
    match eval {
        Err(CliError::Input(msg)) if msg.contains("line 1") => {}
        other => {
            return Err(CliError::Internal(format!(
                "cmd_eval on a corrupt file returned {other:?} instead of a line-numbered input error"
            )))
        }
    }

    std::fs::remove_dir_all(&dir).ok();
    Ok(checked)
}
