//! Prompt construction: combine language elements with set algebra, filter
//! combinations by box count, render descriptions, and emit prompt labels.
//!
//! Expressions are evaluated independently per frame; element membership is
//! time-varying, so an object can satisfy a prompt on some frames and not on
//! others. The complement universe for NOT is the set of tracks present at
//! the frame (absent objects cannot be "not left").

mod expr;
mod grammar;

pub use expr::{PromptExpr, MAX_DEPTH};
pub use grammar::{Grammar, Role};

use crate::error::{Error, Result};
use crate::simworld::{derive_seed, ElementMap, FrameIdx, Scene, TrackId};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Reference statistics from the full-scale benchmark this toolkit mirrors
/// at desk scale; reported alongside generated prompt sets for context.
pub const FULL_SCALE_PROMPT_COUNT: usize = 35_367;
pub const FULL_SCALE_MEAN_INSTANCES: f64 = 5.3;
pub const FULL_SCALE_PROMPTS_PER_VIDEO: f64 = 41.6;

/// Evaluate an expression over the element map at one frame.
///
/// Leaves look up their tag's member set; AND intersects, OR unions, and NOT
/// complements within the universe of tracks present at the frame. A leaf
/// tag missing from the map entirely is a schema error naming the tag.
pub fn eval_expression(
    expr: &PromptExpr,
    map: &ElementMap,
    frame: FrameIdx,
) -> Result<BTreeSet<TrackId>> {
    check_tags(expr, map)?;
    Ok(eval_unchecked(expr, map, frame))
}

fn check_tags(expr: &PromptExpr, map: &ElementMap) -> Result<()> {
    match expr {
        PromptExpr::Leaf(tag) => {
            if map.contains_tag(tag) {
                Ok(())
            } else {
                Err(Error::UnknownTag(tag.clone()))
            }
        }
        PromptExpr::Not(c) => check_tags(c, map),
        PromptExpr::And(cs) | PromptExpr::Or(cs) => {
            cs.iter().try_for_each(|c| check_tags(c, map))
        }
    }
}

fn eval_unchecked(expr: &PromptExpr, map: &ElementMap, frame: FrameIdx) -> BTreeSet<TrackId> {
    match expr {
        PromptExpr::Leaf(tag) => map.set_at(tag, frame),
        PromptExpr::Not(c) => {
            let inner = eval_unchecked(c, map, frame);
            map.universe_at(frame).difference(&inner).copied().collect()
        }
        PromptExpr::And(cs) => {
            let mut iter = cs.iter();
            let mut acc = eval_unchecked(iter.next().expect("AND arity"), map, frame);
            for c in iter {
                let next = eval_unchecked(c, map, frame);
                acc = acc.intersection(&next).copied().collect();
                if acc.is_empty() {
                    break;
                }
            }
            acc
        }
        PromptExpr::Or(cs) => {
            let mut acc = BTreeSet::new();
            for c in cs {
                acc.extend(eval_unchecked(c, map, frame));
            }
            acc
        }
    }
}

/// Total box count of an expression: the summed referred-set size over every
/// frame the element map covers.
pub fn total_boxes(expr: &PromptExpr, map: &ElementMap) -> Result<usize> {
    check_tags(expr, map)?;
    let frames: BTreeSet<FrameIdx> = map
        .entries
        .values()
        .flat_map(|per_frame| per_frame.keys().copied())
        .collect();
    Ok(frames.iter().map(|&f| eval_unchecked(expr, map, f).len()).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptConfig {
    /// Number of random trees to draw (before the box-count filter).
    pub n_random: usize,
    /// Minimum total box count for a combination to be retained.
    pub min_boxes: usize,
    pub seed: u64,
}

impl Default for PromptConfig {
    fn default() -> Self {
        // Full-scale prompt sets mostly carry 10..100 boxes per prompt,
        // which motivates the default floor of 10.
        PromptConfig { n_random: 60, min_boxes: 10, seed: 0 }
    }
}

/// Curated combinations plus `n_random` random trees (depth at most 4,
/// leaves drawn without replacement within each tree), keeping only those
/// whose total box count reaches `min_boxes`. Deterministic per seed.
pub fn enumerate_combinations(map: &ElementMap, config: &PromptConfig) -> Result<Vec<PromptExpr>> {
    if config.min_boxes < 1 {
        return Err(Error::invalid("min_boxes must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut out = Vec::new();
    for expr in curated_templates(map) {
        if total_boxes(&expr, map)? >= config.min_boxes {
            out.push(expr);
        }
    }
    let tags: Vec<String> = map.tags().map(str::to_string).collect();
    for _ in 0..config.n_random {
        let mut pool = tags.clone();
        pool.shuffle(&mut rng);
        // Bound the element count per combination; longer run-ons read
        // unnaturally and would not survive description review.
        pool.truncate(6);
        let Some(expr) = random_tree(&mut pool, MAX_DEPTH, &mut rng) else { continue };
        let expr = expr.simplified();
        if total_boxes(&expr, map)? >= config.min_boxes {
            out.push(expr);
        }
    }
    Ok(out)
}

/// Hand-picked meaningful combinations over whatever tags the map carries.
fn curated_templates(map: &ElementMap) -> Vec<PromptExpr> {
    let has = |t: &str| map.contains_tag(t);
    let classes: Vec<&str> = ["car", "truck", "bus", "trailer", "motorcycle", "bicycle", "pedestrian"]
        .into_iter()
        .filter(|t| has(t))
        .collect();
    let colors: Vec<&str> =
        ["red", "yellow", "black", "white", "blue"].into_iter().filter(|t| has(t)).collect();
    let mut out = Vec::new();
    for &class in &classes {
        out.push(PromptExpr::leaf(class));
        for motion in ["moving", "stopped"] {
            if has(motion) {
                out.push(PromptExpr::and(vec![PromptExpr::leaf(class), PromptExpr::leaf(motion)]));
            }
        }
        for &color in &colors {
            out.push(PromptExpr::and(vec![PromptExpr::leaf(color), PromptExpr::leaf(class)]));
        }
    }
    for pair in classes.windows(2) {
        out.push(PromptExpr::or(vec![PromptExpr::leaf(pair[0]), PromptExpr::leaf(pair[1])]));
    }
    if has("crossing") {
        out.push(PromptExpr::leaf("crossing"));
    }
    if has("overtaking") && has("car") {
        out.push(PromptExpr::and(vec![PromptExpr::leaf("car"), PromptExpr::leaf("overtaking")]));
    }
    if has("moving") {
        for loc in ["left", "right", "front", "back"] {
            if has(loc) {
                out.push(PromptExpr::and(vec![
                    PromptExpr::leaf("moving"),
                    PromptExpr::not(PromptExpr::leaf(loc)),
                ]));
            }
        }
    }
    if has("pedestrian") && has("moving") && has("red") && has("left") {
        out.push(PromptExpr::and(vec![
            PromptExpr::leaf("pedestrian"),
            PromptExpr::leaf("moving"),
            PromptExpr::leaf("red"),
            PromptExpr::not(PromptExpr::leaf("left")),
        ]));
    }
    out
}

/// Random expression tree over the (pre-shuffled) tag pool. Each tree draws
/// leaves without replacement; arity degrades gracefully when the pool runs
/// dry.
fn random_tree(
    pool: &mut Vec<String>,
    depth_left: usize,
    rng: &mut ChaCha8Rng,
) -> Option<PromptExpr> {
    if pool.is_empty() {
        return None;
    }
    let kind = if depth_left <= 1 { 0.0 } else { rng.random::<f64>() };
    if kind < 0.35 {
        return Some(PromptExpr::Leaf(pool.pop().unwrap()));
    }
    if kind < 0.80 {
        let arity = rng.random_range(2..=3usize);
        let mut children = Vec::new();
        for _ in 0..arity {
            if let Some(c) = random_tree(pool, depth_left - 1, rng) {
                children.push(c);
            }
        }
        let use_and = kind < 0.60;
        return match children.len() {
            0 => None,
            1 => Some(children.into_iter().next().unwrap()),
            _ => Some(if use_and { PromptExpr::And(children) } else { PromptExpr::Or(children) }),
        };
    }
    random_tree(pool, depth_left - 1, rng).map(PromptExpr::not)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptStats {
    /// Distinct referred tracks.
    pub n_instances: usize,
    /// Referred (track, frame) pairs.
    pub n_boxes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptLabel {
    pub prompt_id: String,
    pub scene_id: String,
    pub expr: PromptExpr,
    pub text: String,
    /// Frames with a non-empty referred set; omitted frames are empty.
    pub referred: BTreeMap<FrameIdx, BTreeSet<TrackId>>,
    pub stats: PromptStats,
}

impl PromptLabel {
    pub fn referred_at(&self, frame: FrameIdx) -> BTreeSet<TrackId> {
        self.referred.get(&frame).cloned().unwrap_or_default()
    }

    /// Distinct tracks referred on any frame.
    pub fn referred_tracks(&self) -> BTreeSet<TrackId> {
        self.referred.values().flatten().copied().collect()
    }
}

/// Resolve an expression against a scene into a full prompt label.
pub fn build_label(
    scene: &Scene,
    expr: PromptExpr,
    prompt_id: &str,
    grammar: &Grammar,
    text_seed: u64,
) -> Result<PromptLabel> {
    expr.validate()?;
    let mut referred = BTreeMap::new();
    let mut instances = BTreeSet::new();
    let mut n_boxes = 0;
    for f in 0..scene.n_frames() as FrameIdx {
        let set = eval_expression(&expr, &scene.element_map, f)?;
        if !set.is_empty() {
            n_boxes += set.len();
            instances.extend(set.iter().copied());
            referred.insert(f, set);
        }
    }
    let text = grammar.render(&expr, text_seed);
    Ok(PromptLabel {
        prompt_id: prompt_id.to_string(),
        scene_id: scene.scene_id.clone(),
        expr,
        text,
        referred,
        stats: PromptStats { n_instances: instances.len(), n_boxes },
    })
}

/// Enumerate, filter, and label the full prompt set for one scene.
pub fn build_prompt_set(
    scene: &Scene,
    config: &PromptConfig,
    grammar: &Grammar,
) -> Result<Vec<PromptLabel>> {
    let exprs = enumerate_combinations(&scene.element_map, config)?;
    exprs
        .into_iter()
        .enumerate()
        .map(|(i, expr)| {
            let prompt_id = format!("{}/p{:04}", scene.scene_id, i);
            build_label(scene, expr, &prompt_id, grammar, derive_seed(config.seed, i as u64))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSetStats {
    pub count: usize,
    pub mean_instances: f64,
    /// Boxes-per-prompt histogram over fixed decade buckets.
    pub boxes_histogram: Vec<(String, usize)>,
}

/// Exact summary statistics over a prompt set.
pub fn summarize_promptset(labels: &[PromptLabel]) -> Result<PromptSetStats> {
    if labels.is_empty() {
        return Err(Error::invalid("cannot summarize an empty prompt set"));
    }
    let total_instances: usize = labels.iter().map(|l| l.stats.n_instances).sum();
    let mut buckets = [0usize; 5];
    for l in labels {
        let b = match l.stats.n_boxes {
            0 => 0,
            1..=9 => 1,
            10..=99 => 2,
            100..=999 => 3,
            _ => 4,
        };
        buckets[b] += 1;
    }
    let names = ["0", "1-9", "10-99", "100-999", "1000+"];
    Ok(PromptSetStats {
        count: labels.len(),
        mean_instances: total_instances as f64 / labels.len() as f64,
        boxes_histogram: names
            .iter()
            .zip(buckets)
            .map(|(n, c)| (n.to_string(), c))
            .collect(),
    })
}

/// External text-generation service boundary. The shipped pipeline uses the
/// deterministic template grammar; implementations of this trait can swap in
/// a hosted language model. Disabled by default and not part of any
/// acceptance path.
pub trait DescriptionClient {
    fn describe(&self, request: &str) -> Result<String>;
}

/// Build the request string handed to a [`DescriptionClient`]: the element
/// combination flattened into a comma-separated element list.
pub fn description_request(expr: &PromptExpr) -> String {
    fn flatten(e: &PromptExpr, out: &mut Vec<String>) {
        match e {
            PromptExpr::Leaf(tag) => out.push(tag.clone()),
            PromptExpr::Not(c) => {
                let mut inner = Vec::new();
                flatten(c, &mut inner);
                for i in inner {
                    out.push(format!("not in the {i}"));
                }
            }
            PromptExpr::And(cs) | PromptExpr::Or(cs) => {
                for c in cs {
                    flatten(c, out);
                }
            }
        }
    }
    let mut parts = Vec::new();
    flatten(expr, &mut parts);
    format!(
        "Generate a sentence to describe the objects based on the following descriptions: {}",
        parts.join(", ")
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simworld::{generate_scene, MotionMix, SceneConfig};

    fn toy_map() -> ElementMap {
        // Tracks 1..=3 present at frame 0: moving={1,2}, red={2,3},
        // plus class tags making up the universe.
        let mut map = ElementMap::default();
        for id in 1..=3 {
            map.insert("car", 0, id);
        }
        map.insert("moving", 0, 1);
        map.insert("moving", 0, 2);
        map.insert("red", 0, 2);
        map.insert("red", 0, 3);
        map
    }

    #[test]
    fn and_intersects() {
        let map = toy_map();
        let e = PromptExpr::and(vec![PromptExpr::leaf("moving"), PromptExpr::leaf("red")]);
        let got = eval_expression(&e, &map, 0).unwrap();
        assert_eq!(got, BTreeSet::from([2]));
    }

    #[test]
    fn not_complements_within_present_universe() {
        let mut map = toy_map();
        // An element that exists as a tag but is empty at frame 0.
        map.insert("yellow", 1, 1);
        let e = PromptExpr::not(PromptExpr::leaf("yellow"));
        let got = eval_expression(&e, &map, 0).unwrap();
        assert_eq!(got, BTreeSet::from([1, 2, 3]));
    }

    #[test]
    fn unknown_tag_is_schema_error_naming_it() {
        let map = toy_map();
        let e = PromptExpr::leaf("purple");
        let err = eval_expression(&e, &map, 0).unwrap_err();
        assert!(err.to_string().contains("purple"), "{err}");
    }

    #[test]
    fn eval_matches_per_track_brute_force() {
        fn satisfies(e: &PromptExpr, map: &ElementMap, f: FrameIdx, id: TrackId) -> bool {
            match e {
                PromptExpr::Leaf(tag) => map.set_at(tag, f).contains(&id),
                PromptExpr::Not(c) => !satisfies(c, map, f, id),
                PromptExpr::And(cs) => cs.iter().all(|c| satisfies(c, map, f, id)),
                PromptExpr::Or(cs) => cs.iter().any(|c| satisfies(c, map, f, id)),
            }
        }
        let scene = generate_scene(
            "scene-eval",
            &SceneConfig { n_tracks: 5, duration_frames: 10, ..SceneConfig::default() },
        )
        .unwrap();
        let map = &scene.element_map;
        let e = PromptExpr::and(vec![
            PromptExpr::leaf("pedestrian"),
            PromptExpr::leaf("moving"),
            PromptExpr::leaf("red"),
            PromptExpr::not(PromptExpr::leaf("left")),
        ]);
        // Tag presence depends on the generated scene; skip tags it lacks.
        if check_tags(&e, map).is_err() {
            return;
        }
        for f in 0..10 {
            let got = eval_expression(&e, map, f).unwrap();
            let expect: BTreeSet<TrackId> = map
                .universe_at(f)
                .into_iter()
                .filter(|id| satisfies(&e, map, f, *id))
                .collect();
            assert_eq!(got, expect);
        }
    }

    #[test]
    fn enumerate_respects_min_boxes_and_seed() {
        let scene = generate_scene(
            "scene-en",
            &SceneConfig { n_tracks: 8, duration_frames: 20, ..SceneConfig::default() },
        )
        .unwrap();
        let cfg = PromptConfig { n_random: 30, min_boxes: 10, seed: 5 };
        let exprs = enumerate_combinations(&scene.element_map, &cfg).unwrap();
        assert!(!exprs.is_empty());
        for e in &exprs {
            assert!(total_boxes(e, &scene.element_map).unwrap() >= 10);
            assert!(e.depth() <= MAX_DEPTH);
            e.validate().unwrap();
        }
        let exprs2 = enumerate_combinations(&scene.element_map, &cfg).unwrap();
        assert_eq!(exprs, exprs2);
    }

    #[test]
    fn enumerate_with_min_boxes_one_keeps_nonempty() {
        let map = toy_map();
        let cfg = PromptConfig { n_random: 20, min_boxes: 1, seed: 2 };
        for e in enumerate_combinations(&map, &cfg).unwrap() {
            assert!(total_boxes(&e, &map).unwrap() >= 1);
        }
    }

    #[test]
    fn label_stats_and_purity() {
        let scene = generate_scene(
            "scene-lb",
            &SceneConfig {
                n_tracks: 6,
                duration_frames: 12,
                motion_mix: MotionMix::default(),
                seed: 4,
            },
        )
        .unwrap();
        let grammar = Grammar::default();
        let labels = build_prompt_set(&scene, &PromptConfig::default(), &grammar).unwrap();
        for l in &labels {
            let mut boxes = 0;
            let mut tracks = BTreeSet::new();
            for f in 0..scene.n_frames() as FrameIdx {
                let set = eval_expression(&l.expr, &scene.element_map, f).unwrap();
                assert_eq!(set, l.referred_at(f), "prompt {}", l.prompt_id);
                boxes += set.len();
                tracks.extend(set);
            }
            assert_eq!(l.stats.n_boxes, boxes);
            assert_eq!(l.stats.n_instances, tracks.len());
        }
    }

    #[test]
    fn summary_arithmetic() {
        let mk = |n_instances, n_boxes| PromptLabel {
            prompt_id: "p".into(),
            scene_id: "s".into(),
            expr: PromptExpr::leaf("car"),
            text: "the cars".into(),
            referred: BTreeMap::new(),
            stats: PromptStats { n_instances, n_boxes },
        };
        let s = summarize_promptset(&[mk(5, 50)]).unwrap();
        assert_eq!(s.mean_instances, 5.0);
        let s = summarize_promptset(&[mk(4, 5), mk(6, 500)]).unwrap();
        assert_eq!(s.mean_instances, 5.0);
        assert_eq!(s.count, 2);
        let hist: BTreeMap<_, _> = s.boxes_histogram.into_iter().collect();
        assert_eq!(hist["1-9"], 1);
        assert_eq!(hist["100-999"], 1);
        assert!(summarize_promptset(&[]).is_err());
    }

    #[test]
    fn description_request_format() {
        let e = PromptExpr::and(vec![
            PromptExpr::leaf("pedestrian"),
            PromptExpr::leaf("moving"),
            PromptExpr::leaf("red"),
            PromptExpr::not(PromptExpr::leaf("left")),
        ]);
        assert_eq!(
            description_request(&e),
            "Generate a sentence to describe the objects based on the following descriptions: \
             pedestrian, moving, red, not in the left"
        );
    }
}
