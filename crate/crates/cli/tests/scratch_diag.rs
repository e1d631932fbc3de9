use promptmot::promptgen::{build_prompt_set, Grammar, PromptConfig};
use promptmot::simworld::{generate_scenes, split_dataset, SceneConfig};
use promptmot::tracker::{
    referred_probability_split, train_prompt_head, NoiseConfig, TrackerConfig, TrainConfig,
};

#[test]
#[ignore]
fn heldout_probability_bands() {
    let scene_cfg = SceneConfig { n_tracks: 12, duration_frames: 40, ..SceneConfig::default() };
    let scenes = generate_scenes(20, &scene_cfg).unwrap();
    let grammar = Grammar::default();
    let pcfg = PromptConfig { n_random: 10, min_boxes: 25, seed: 0 };
    let mut prompts = Vec::new();
    for s in &scenes {
        prompts.extend(build_prompt_set(s, &pcfg, &grammar).unwrap());
    }
    let (train_ids, val_ids) = split_dataset(&scenes, 0.7).unwrap();
    let train_scenes: Vec<_> =
        scenes.iter().filter(|s| train_ids.contains(&s.scene_id)).cloned().collect();
    let train_prompts: Vec<_> =
        prompts.iter().filter(|p| train_ids.contains(&p.scene_id)).cloned().collect();
    let tcfg = TrackerConfig { model_dim: 64, heads: 8, ..TrackerConfig::default() };
    let noise = NoiseConfig::default();
    for (residual, steps) in [(false, 120000usize)] {
        let cfg = TrainConfig { steps, lr: 3e-3, hidden: 512, residual, ..TrainConfig::default() };
        let out = train_prompt_head(&train_scenes, &train_prompts, &tcfg, &noise, &cfg).unwrap();
        let mut rsum = 0.0;
        let mut nsum = 0.0;
        let mut k = 0usize;
        for label in prompts.iter().filter(|p| val_ids.contains(&p.scene_id)) {
            let scene = scenes.iter().find(|s| s.scene_id == label.scene_id).unwrap();
            let (r, n) = referred_probability_split(scene, label, &out.head, &tcfg, &noise).unwrap();
            if r > 0.0 {
                rsum += r;
                nsum += n;
                k += 1;
            }
        }
        println!("residual {residual} steps {steps}: held-out pairs {k}: referred {:.3}  non-referred {:.3}", rsum / k as f64, nsum / k as f64);
    }
}
