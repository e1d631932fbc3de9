//! Deterministic synthetic scenario generator: multi-view scenes with
//! attribute-tagged ground-truth tracks, standing in for a full-scale
//! driving dataset at desk scale.
//!
//! Keyframes run at 2 Hz. The ego drives straight along +x; tracks follow
//! one of four motion archetypes (constant velocity, stopped, road-crossing,
//! overtaking). All randomness flows through a per-scene seeded generator,
//! so a `(config, seed)` pair always produces a byte-identical scene.

use crate::error::{Error, Result};
use crate::geom3d::{default_rig, Box3D, CameraCalib, Frame, Pose};
use crate::stable_hash;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

pub type TrackId = u64;
pub type FrameIdx = u32;

/// Seconds between keyframes (2 Hz).
pub const FRAME_DT: f64 = 0.5;

/// Speed above which an object carries the "moving" tag (strictly greater);
/// at or below it the object is "stopped".
pub const MOVING_SPEED_THRESHOLD: f64 = 0.5;

/// Half-width of the road corridor used by the "crossing" predicate.
pub const CROSSING_CORRIDOR: f64 = 5.0;

/// Longitudinal window (meters on either side of the ego) in which an
/// overtaking track carries the "overtaking" tag.
pub const OVERTAKE_WINDOW: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectClass {
    Car,
    Truck,
    Bus,
    Trailer,
    Motorcycle,
    Bicycle,
    Pedestrian,
}

impl ObjectClass {
    pub const ALL: [ObjectClass; 7] = [
        ObjectClass::Car,
        ObjectClass::Truck,
        ObjectClass::Bus,
        ObjectClass::Trailer,
        ObjectClass::Motorcycle,
        ObjectClass::Bicycle,
        ObjectClass::Pedestrian,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            ObjectClass::Car => "car",
            ObjectClass::Truck => "truck",
            ObjectClass::Bus => "bus",
            ObjectClass::Trailer => "trailer",
            ObjectClass::Motorcycle => "motorcycle",
            ObjectClass::Bicycle => "bicycle",
            ObjectClass::Pedestrian => "pedestrian",
        }
    }

    pub fn index(&self) -> usize {
        Self::ALL.iter().position(|c| c == self).unwrap()
    }

    /// Typical (w, l, h) in meters.
    fn base_size(&self) -> [f64; 3] {
        match self {
            ObjectClass::Car => [1.9, 4.5, 1.6],
            ObjectClass::Truck => [2.5, 8.0, 3.0],
            ObjectClass::Bus => [2.9, 11.0, 3.3],
            ObjectClass::Trailer => [2.6, 10.0, 3.8],
            ObjectClass::Motorcycle => [0.8, 2.1, 1.4],
            ObjectClass::Bicycle => [0.6, 1.8, 1.3],
            ObjectClass::Pedestrian => [0.6, 0.6, 1.75],
        }
    }

    /// Typical speed range in m/s for a moving instance.
    fn speed_range(&self) -> (f64, f64) {
        match self {
            ObjectClass::Pedestrian => (0.9, 1.9),
            ObjectClass::Bicycle => (2.0, 5.0),
            ObjectClass::Motorcycle => (4.0, 11.0),
            _ => (3.0, 9.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Color {
    Red,
    Yellow,
    Black,
    White,
    Blue,
}

impl Color {
    pub const ALL: [Color; 5] =
        [Color::Red, Color::Yellow, Color::Black, Color::White, Color::Blue];

    pub fn tag(&self) -> &'static str {
        match self {
            Color::Red => "red",
            Color::Yellow => "yellow",
            Color::Black => "black",
            Color::White => "white",
            Color::Blue => "blue",
        }
    }
}

/// Per-frame ground-truth state of a track, in world frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackState {
    pub box3d: Box3D,
    pub velocity: [f64; 3],
}

impl TrackState {
    pub fn speed(&self) -> f64 {
        let [vx, vy, vz] = self.velocity;
        (vx * vx + vy * vy + vz * vz).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub track_id: TrackId,
    pub class: ObjectClass,
    pub color: Color,
    /// Present frames mapped to state; keys are frame indices.
    pub states: BTreeMap<FrameIdx, TrackState>,
}

impl Track {
    pub fn state_at(&self, frame: FrameIdx) -> Option<&TrackState> {
        self.states.get(&frame)
    }

    pub fn first_frame(&self) -> Option<FrameIdx> {
        self.states.keys().next().copied()
    }

    pub fn last_frame(&self) -> Option<FrameIdx> {
        self.states.keys().next_back().copied()
    }
}

/// Mapping from element tag (e.g. "moving", "red", "left", "pedestrian") to
/// the per-frame sets of track ids satisfying it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ElementMap {
    pub entries: BTreeMap<String, BTreeMap<FrameIdx, BTreeSet<TrackId>>>,
}

impl ElementMap {
    pub fn insert(&mut self, tag: &str, frame: FrameIdx, id: TrackId) {
        self.entries
            .entry(tag.to_string())
            .or_default()
            .entry(frame)
            .or_default()
            .insert(id);
    }

    pub fn contains_tag(&self, tag: &str) -> bool {
        self.entries.contains_key(tag)
    }

    pub fn tags(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Tracks satisfying `tag` at `frame` (empty when none).
    pub fn set_at(&self, tag: &str, frame: FrameIdx) -> BTreeSet<TrackId> {
        self.entries
            .get(tag)
            .and_then(|per_frame| per_frame.get(&frame))
            .cloned()
            .unwrap_or_default()
    }

    /// All tracks appearing under any tag at `frame`. Class tags are always
    /// emitted for present tracks, so this equals the set of tracks present
    /// at the frame.
    pub fn universe_at(&self, frame: FrameIdx) -> BTreeSet<TrackId> {
        let mut u = BTreeSet::new();
        for per_frame in self.entries.values() {
            if let Some(set) = per_frame.get(&frame) {
                u.extend(set.iter().copied());
            }
        }
        u
    }

    /// Tags carried by one track at one frame.
    pub fn tags_of(&self, id: TrackId, frame: FrameIdx) -> BTreeSet<String> {
        self.entries
            .iter()
            .filter(|(_, per_frame)| per_frame.get(&frame).is_some_and(|set| set.contains(&id)))
            .map(|(tag, _)| tag.clone())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub scene_id: String,
    /// Keyframe timestamps in seconds, 2 Hz.
    pub frames: Vec<f64>,
    /// Ego pose (ego-to-world) per frame.
    pub ego: Vec<Pose>,
    pub rig: Vec<CameraCalib>,
    pub tracks: Vec<Track>,
    pub element_map: ElementMap,
}

impl Scene {
    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn track(&self, id: TrackId) -> Option<&Track> {
        self.tracks.iter().find(|t| t.track_id == id)
    }

    pub fn tracks_present_at(&self, frame: FrameIdx) -> BTreeSet<TrackId> {
        self.tracks
            .iter()
            .filter(|t| t.states.contains_key(&frame))
            .map(|t| t.track_id)
            .collect()
    }

    /// Structural invariants, used when ingesting scenes from files.
    pub fn validate(&self) -> Result<()> {
        if self.frames.is_empty() {
            return Err(Error::invalid("scene must have at least one frame"));
        }
        if self.ego.len() != self.frames.len() {
            return Err(Error::invalid("ego pose count must match frame count"));
        }
        if self.frames.iter().any(|t| !t.is_finite())
            || self.frames.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::invalid("frame timestamps must be finite and increasing"));
        }
        for (i, pose) in self.ego.iter().enumerate() {
            Pose::new(pose.translation, pose.rotation)
                .map_err(|e| Error::invalid(format!("ego pose {i}: {e}")))?;
        }
        for w in self.ego.windows(2) {
            let dx = w[1].translation[0] - w[0].translation[0];
            let dy = w[1].translation[1] - w[0].translation[1];
            if (dx * dx + dy * dy).sqrt() >= 15.0 {
                return Err(Error::invalid("ego displacement >= 15 m between frames"));
            }
        }
        let mut seen = BTreeSet::new();
        for t in &self.tracks {
            if !seen.insert(t.track_id) {
                return Err(Error::invalid(format!("duplicate track_id {}", t.track_id)));
            }
            if t.states.is_empty() {
                return Err(Error::invalid(format!("track {} has no states", t.track_id)));
            }
            for (&f, s) in &t.states {
                if f as usize >= self.frames.len() {
                    return Err(Error::invalid(format!(
                        "track {} has state at frame {f} beyond scene duration",
                        t.track_id
                    )));
                }
                // Deserialized boxes bypass the constructor; re-check them.
                let b = &s.box3d;
                if b.frame != Frame::World {
                    return Err(Error::invalid(format!(
                        "track {} box at frame {f} is not in world frame",
                        t.track_id
                    )));
                }
                Box3D::new(b.center, b.size, b.yaw, b.frame).map_err(|e| {
                    Error::invalid(format!("track {} box at frame {f}: {e}", t.track_id))
                })?;
                if s.velocity.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid(format!(
                        "track {} velocity at frame {f} is not finite",
                        t.track_id
                    )));
                }
                if let Some(next) = t.states.get(&(f + 1)) {
                    let fd = [
                        (next.box3d.center[0] - s.box3d.center[0]) / FRAME_DT,
                        (next.box3d.center[1] - s.box3d.center[1]) / FRAME_DT,
                        (next.box3d.center[2] - s.box3d.center[2]) / FRAME_DT,
                    ];
                    let fd_speed = (fd[0] * fd[0] + fd[1] * fd[1] + fd[2] * fd[2]).sqrt();
                    let stored = s.speed();
                    if (fd_speed - stored).abs() > (0.1 * stored).max(0.05) {
                        return Err(Error::invalid(format!(
                            "track {} velocity inconsistent with finite differences at frame {f}",
                            t.track_id
                        )));
                    }
                }
            }
        }
        for (tag, per_frame) in &self.element_map.entries {
            for (&f, ids) in per_frame {
                for id in ids {
                    let ok = self.track(*id).is_some_and(|t| t.states.contains_key(&f));
                    if !ok {
                        return Err(Error::invalid(format!(
                            "element map tag `{tag}` references track {id} absent at frame {f}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Fractions of tracks assigned to each motion archetype. Normalized over
/// their sum; counts are apportioned by largest remainder so a 30% share of
/// 10 tracks is exactly 3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionMix {
    pub constant_velocity: f64,
    pub stopped: f64,
    pub crossing: f64,
    pub overtaking: f64,
}

impl Default for MotionMix {
    fn default() -> Self {
        MotionMix { constant_velocity: 0.4, stopped: 0.2, crossing: 0.2, overtaking: 0.2 }
    }
}

impl MotionMix {
    fn validate(&self) -> Result<()> {
        let parts = [self.constant_velocity, self.stopped, self.crossing, self.overtaking];
        if parts.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::invalid("motion mix fractions must be non-negative"));
        }
        if parts.iter().sum::<f64>() <= 0.0 {
            return Err(Error::invalid("motion mix must have a positive total"));
        }
        Ok(())
    }

    /// Deterministic largest-remainder apportionment of `n` tracks.
    fn apportion(&self, n: usize) -> [usize; 4] {
        let parts = [self.constant_velocity, self.stopped, self.crossing, self.overtaking];
        let total: f64 = parts.iter().sum();
        let ideal: Vec<f64> = parts.iter().map(|p| p / total * n as f64).collect();
        let mut counts: Vec<usize> = ideal.iter().map(|x| x.floor() as usize).collect();
        let mut remaining = n - counts.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..4).collect();
        order.sort_by(|&a, &b| {
            let fa = ideal[a] - ideal[a].floor();
            let fb = ideal[b] - ideal[b].floor();
            fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
        });
        for &i in &order {
            if remaining == 0 {
                break;
            }
            counts[i] += 1;
            remaining -= 1;
        }
        [counts[0], counts[1], counts[2], counts[3]]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub n_tracks: usize,
    pub duration_frames: usize,
    pub motion_mix: MotionMix,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            n_tracks: 12,
            duration_frames: 40,
            motion_mix: MotionMix::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Archetype {
    ConstantVelocity,
    Stopped,
    Crossing,
    Overtaking,
}

/// SplitMix64 finalizer, used to derive independent per-scene seeds from a
/// base seed.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn generate_scene(scene_id: &str, config: &SceneConfig) -> Result<Scene> {
    if config.duration_frames == 0 {
        return Err(Error::invalid("duration_frames must be >= 1"));
    }
    config.motion_mix.validate()?;
    let n_frames = config.duration_frames;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, stable_hash(scene_id)));

    let frames: Vec<f64> = (0..n_frames).map(|i| i as f64 * FRAME_DT).collect();
    let ego_speed = rng.random_range(6.0..9.0);
    let ego: Vec<Pose> =
        frames.iter().map(|t| Pose::from_xy_yaw(ego_speed * t, 0.0, 0.0)).collect();

    let counts = config.motion_mix.apportion(config.n_tracks);
    let mut archetypes = Vec::with_capacity(config.n_tracks);
    for (archetype, count) in [
        (Archetype::ConstantVelocity, counts[0]),
        (Archetype::Stopped, counts[1]),
        (Archetype::Crossing, counts[2]),
        (Archetype::Overtaking, counts[3]),
    ] {
        archetypes.extend(std::iter::repeat_n(archetype, count));
    }

    let mut tracks = Vec::with_capacity(config.n_tracks);
    for (idx, &arch) in archetypes.iter().enumerate() {
        tracks.push(spawn_track(idx as TrackId, arch, ego_speed, n_frames, &mut rng)?);
    }

    let mut element_map = ElementMap::default();
    for track in &tracks {
        for (frame, tags) in derive_element_tags(track, &ego) {
            for tag in tags {
                element_map.insert(&tag, frame, track.track_id);
            }
        }
    }

    Ok(Scene {
        scene_id: scene_id.to_string(),
        frames,
        ego,
        rig: default_rig(),
        tracks,
        element_map,
    })
}

/// Generate `count` scenes with ids `scene-0000..`, each seeded
/// independently from the base config seed.
pub fn generate_scenes(count: usize, config: &SceneConfig) -> Result<Vec<Scene>> {
    (0..count)
        .map(|i| {
            let scene_id = format!("scene-{i:04}");
            let cfg = SceneConfig { seed: derive_seed(config.seed, i as u64), ..config.clone() };
            generate_scene(&scene_id, &cfg)
        })
        .collect()
}

fn spawn_track(
    track_id: TrackId,
    arch: Archetype,
    ego_speed: f64,
    n_frames: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Track> {
    let class = match arch {
        // Road crossers are vulnerable road users.
        Archetype::Crossing => {
            if rng.random_bool(0.7) {
                ObjectClass::Pedestrian
            } else {
                ObjectClass::Bicycle
            }
        }
        Archetype::Overtaking => {
            [ObjectClass::Car, ObjectClass::Car, ObjectClass::Motorcycle, ObjectClass::Truck]
                [rng.random_range(0..4)]
        }
        _ => ObjectClass::ALL[rng.random_range(0..ObjectClass::ALL.len())],
    };
    let color = Color::ALL[rng.random_range(0..Color::ALL.len())];
    let mut size = class.base_size();
    for s in &mut size {
        *s *= rng.random_range(0.92..1.08);
    }

    let duration = n_frames as f64 * FRAME_DT;
    // Most tracks span the whole scene; a quarter enter late or leave early.
    let (first, last) = if n_frames >= 8 && rng.random_bool(0.25) {
        let first = rng.random_range(0..n_frames / 4) as FrameIdx;
        let last = rng.random_range(3 * n_frames / 4..n_frames) as FrameIdx;
        (first, last)
    } else {
        (0, (n_frames - 1) as FrameIdx)
    };

    // World-frame spawn position and constant velocity per archetype.
    let (origin, velocity): ([f64; 2], [f64; 2]) = match arch {
        Archetype::ConstantVelocity => {
            let speed = {
                let (lo, hi) = class.speed_range();
                rng.random_range(lo..hi)
            };
            let dir: f64 = if rng.random_bool(0.7) { 1.0 } else { -1.0 };
            let lane = rng.random_range(2.5..9.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let x0 = rng.random_range(-20.0..ego_speed * duration + 40.0);
            ([x0, lane], [dir * speed, 0.0])
        }
        Archetype::Stopped => {
            let side = rng.random_range(4.0..12.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let x0 = rng.random_range(-10.0..ego_speed * duration + 30.0);
            ([x0, side], [0.0, 0.0])
        }
        Archetype::Crossing => {
            let from: f64 =
                rng.random_range(7.0..13.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let speed = rng.random_range(1.2..3.0);
            // Cross the ego lane ahead of the ego around mid-presence.
            let t_cross = rng.random_range(0.3..0.7) * duration;
            let x = ego_speed * t_cross + rng.random_range(6.0..25.0);
            let vy = -from.signum() * speed;
            // y(t) = y0 + vy * t must be zero at t_cross.
            ([x, -vy * t_cross], [0.0, vy])
        }
        Archetype::Overtaking => {
            let delta = rng.random_range(1.5..3.5);
            let t_pass = rng.random_range(0.3..0.7) * duration;
            let x0 = -delta * t_pass;
            let lane = rng.random_range(2.8..4.5) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            ([x0, lane], [ego_speed + delta, 0.0])
        }
    };

    let yaw = if velocity[0] == 0.0 && velocity[1] == 0.0 {
        // Parked objects face along the road, either way.
        if rng.random_bool(0.5) {
            0.0
        } else {
            -std::f64::consts::PI
        }
    } else {
        velocity[1].atan2(velocity[0])
    };

    let mut states = BTreeMap::new();
    for f in first..=last {
        let t = f as f64 * FRAME_DT;
        let center =
            [origin[0] + velocity[0] * t, origin[1] + velocity[1] * t, size[2] / 2.0];
        let box3d = Box3D::new(center, size, yaw, Frame::World)?;
        states.insert(f, TrackState { box3d, velocity: [velocity[0], velocity[1], 0.0] });
    }

    Ok(Track { track_id, class, color, states })
}

/// Derive the per-frame element tags for one track against the ego
/// trajectory: class and color always, moving/stopped from speed, a location
/// quadrant from the ego-frame bearing, and crossing/overtaking from
/// trajectory predicates. Membership changes over time as the track's state
/// evolves.
pub fn derive_element_tags(track: &Track, ego: &[Pose]) -> BTreeMap<FrameIdx, BTreeSet<String>> {
    let mut out: BTreeMap<FrameIdx, BTreeSet<String>> = BTreeMap::new();
    let overtaking_frames = overtaking_window(track, ego);
    for (&f, state) in &track.states {
        let mut tags = BTreeSet::new();
        tags.insert(track.class.tag().to_string());
        tags.insert(track.color.tag().to_string());
        tags.insert(
            if state.speed() > MOVING_SPEED_THRESHOLD { "moving" } else { "stopped" }.to_string(),
        );

        let ego_pose = &ego[f as usize];
        let rel = ego_pose.apply_inv(state.box3d.center);
        tags.insert(bearing_quadrant(rel[1].atan2(rel[0])).to_string());

        // Crossing: inside the road corridor with real lateral motion.
        let v_local = ego_pose.rotation.rotate_inv(state.velocity);
        if rel[1].abs() <= CROSSING_CORRIDOR && v_local[1].abs() > 1.0 {
            tags.insert("crossing".to_string());
        }
        if overtaking_frames.contains(&f) {
            tags.insert("overtaking".to_string());
        }
        out.insert(f, tags);
    }
    out
}

/// Location quadrant from an ego-frame bearing. Quadrant boundaries sit at
/// 45/135 degrees; a boundary angle belongs to the quadrant counter-clockwise
/// of it.
pub fn bearing_quadrant(bearing: f64) -> &'static str {
    let deg = bearing.to_degrees();
    if (-45.0..45.0).contains(&deg) {
        "front"
    } else if (45.0..135.0).contains(&deg) {
        "left"
    } else if (-135.0..-45.0).contains(&deg) {
        "right"
    } else {
        "back"
    }
}

/// Frames on which the track carries the "overtaking" tag: those within
/// [`OVERTAKE_WINDOW`] meters of the ego, contiguous around a rear-to-front
/// sign change of the relative longitudinal offset.
fn overtaking_window(track: &Track, ego: &[Pose]) -> BTreeSet<FrameIdx> {
    let frames: Vec<FrameIdx> = track.states.keys().copied().collect();
    let rel_x: Vec<f64> = frames
        .iter()
        .map(|&f| {
            let state = &track.states[&f];
            ego[f as usize].apply_inv(state.box3d.center)[0]
        })
        .collect();
    let mut tagged = BTreeSet::new();
    for i in 1..frames.len() {
        if frames[i] != frames[i - 1] + 1 {
            continue;
        }
        if rel_x[i - 1] < 0.0 && rel_x[i] >= 0.0 {
            // Expand the window around the crossing.
            let mut j = i as isize - 1;
            while j >= 0 && rel_x[j as usize].abs() <= OVERTAKE_WINDOW {
                tagged.insert(frames[j as usize]);
                j -= 1;
            }
            let mut j = i;
            while j < frames.len() && rel_x[j].abs() <= OVERTAKE_WINDOW {
                tagged.insert(frames[j]);
                j += 1;
            }
        }
    }
    tagged
}

/// Deterministic split of scenes into train and validation id lists. Scenes
/// are ordered by a stable hash of their id and the first `round(n * ratio)`
/// become the training set.
pub fn split_dataset(scenes: &[Scene], ratio: f64) -> Result<(Vec<String>, Vec<String>)> {
    if scenes.is_empty() {
        return Err(Error::invalid("cannot split an empty scene list"));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::invalid(format!("split ratio {ratio} must be in (0, 1)")));
    }
    let mut ids: Vec<&String> = scenes.iter().map(|s| &s.scene_id).collect();
    ids.sort_by_key(|id| (stable_hash(id), (*id).clone()));
    let n_train = (scenes.len() as f64 * ratio + 0.5).floor() as usize;
    let train = ids[..n_train].iter().map(|s| (*s).clone()).collect();
    let val = ids[n_train..].iter().map(|s| (*s).clone()).collect();
    Ok((train, val))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(seed: u64) -> SceneConfig {
        SceneConfig { n_tracks: 10, duration_frames: 30, motion_mix: MotionMix::default(), seed }
    }

    #[test]
    fn empty_scene() {
        let cfg = SceneConfig { n_tracks: 0, ..small_config(1) };
        let scene = generate_scene("scene-0000", &cfg).unwrap();
        assert!(scene.tracks.is_empty());
        assert!(scene.element_map.entries.is_empty());
        scene.validate().unwrap();
    }

    #[test]
    fn deterministic_generation() {
        let a = generate_scene("scene-0001", &small_config(7)).unwrap();
        let b = generate_scene("scene-0001", &small_config(7)).unwrap();
        assert_eq!(a, b);
        let c = generate_scene("scene-0001", &small_config(8)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn overtaking_mix_is_exact() {
        let cfg = SceneConfig {
            n_tracks: 10,
            duration_frames: 40,
            motion_mix: MotionMix {
                constant_velocity: 0.4,
                stopped: 0.2,
                crossing: 0.1,
                overtaking: 0.3,
            },
            seed: 3,
        };
        let scene = generate_scene("scene-0002", &cfg).unwrap();
        // Count tracks whose ego-relative longitudinal offset changes sign
        // from negative to positive.
        let mut overtakers = 0;
        for t in &scene.tracks {
            let rel: Vec<f64> = t
                .states
                .iter()
                .map(|(&f, s)| scene.ego[f as usize].apply_inv(s.box3d.center)[0])
                .collect();
            if rel.first().is_some_and(|x| *x < 0.0) && rel.last().is_some_and(|x| *x > 0.0) {
                overtakers += 1;
            }
        }
        assert_eq!(overtakers, 3);
    }

    #[test]
    fn element_map_rederivable() {
        let scene = generate_scene("scene-0003", &small_config(11)).unwrap();
        let mut rebuilt = ElementMap::default();
        for track in &scene.tracks {
            for (frame, tags) in derive_element_tags(track, &scene.ego) {
                for tag in tags {
                    rebuilt.insert(&tag, frame, track.track_id);
                }
            }
        }
        assert_eq!(rebuilt, scene.element_map);
    }

    #[test]
    fn generated_scene_validates() {
        for seed in 0..5 {
            let scene = generate_scene("scene-x", &small_config(seed)).unwrap();
            scene.validate().unwrap();
        }
    }

    #[test]
    fn moving_threshold_is_strict() {
        // A track moving at exactly the threshold is tagged "stopped".
        let b = Box3D::new([10.0, 3.0, 0.8], [1.9, 4.5, 1.6], 0.0, Frame::World).unwrap();
        let mut states = BTreeMap::new();
        states.insert(0, TrackState { box3d: b, velocity: [MOVING_SPEED_THRESHOLD, 0.0, 0.0] });
        let track = Track { track_id: 0, class: ObjectClass::Car, color: Color::Red, states };
        let tags = derive_element_tags(&track, &[Pose::IDENTITY]);
        assert!(tags[&0].contains("stopped"));
        assert!(!tags[&0].contains("moving"));
    }

    #[test]
    fn stationary_red_car_front_tags() {
        let b = Box3D::new([20.0, 2.0, 0.8], [1.9, 4.5, 1.6], 0.0, Frame::World).unwrap();
        let mut states = BTreeMap::new();
        for f in 0..3 {
            states.insert(f, TrackState { box3d: b, velocity: [0.0, 0.0, 0.0] });
        }
        let track = Track { track_id: 5, class: ObjectClass::Car, color: Color::Red, states };
        let ego = vec![Pose::IDENTITY; 3];
        let tags = derive_element_tags(&track, &ego);
        for f in 0..3 {
            let expect: BTreeSet<String> =
                ["car", "red", "stopped", "front"].iter().map(|s| s.to_string()).collect();
            assert_eq!(tags[&f], expect);
        }
    }

    #[test]
    fn bearing_quadrant_boundaries() {
        use std::f64::consts::PI;
        assert_eq!(bearing_quadrant(0.0), "front");
        // Boundary angles go to the counter-clockwise quadrant.
        assert_eq!(bearing_quadrant(PI / 4.0), "left");
        assert_eq!(bearing_quadrant(3.0 * PI / 4.0), "back");
        assert_eq!(bearing_quadrant(-PI / 4.0), "front");
        assert_eq!(bearing_quadrant(-3.0 * PI / 4.0), "right");
        assert_eq!(bearing_quadrant(PI), "back");
    }

    #[test]
    fn overtaking_window_matches_offsets() {
        let cfg = SceneConfig {
            n_tracks: 6,
            duration_frames: 40,
            motion_mix: MotionMix {
                constant_velocity: 0.0,
                stopped: 0.0,
                crossing: 0.0,
                overtaking: 1.0,
            },
            seed: 9,
        };
        let scene = generate_scene("scene-0004", &cfg).unwrap();
        let mut checked = 0;
        for t in &scene.tracks {
            let tagged: BTreeSet<FrameIdx> = t
                .states
                .keys()
                .filter(|&&f| scene.element_map.set_at("overtaking", f).contains(&t.track_id))
                .copied()
                .collect();
            if tagged.is_empty() {
                continue;
            }
            for (&f, s) in &t.states {
                let rel = scene.ego[f as usize].apply_inv(s.box3d.center)[0];
                if tagged.contains(&f) {
                    assert!(rel.abs() <= OVERTAKE_WINDOW + 1e-9);
                }
            }
            // The window must bracket the rear-to-front pass.
            let frames: Vec<_> = tagged.iter().copied().collect();
            let rel_first =
                scene.ego[frames[0] as usize].apply_inv(t.states[&frames[0]].box3d.center)[0];
            let rel_last = scene.ego[*frames.last().unwrap() as usize]
                .apply_inv(t.states[frames.last().unwrap()].box3d.center)[0];
            assert!(rel_first < rel_last);
            checked += 1;
        }
        assert!(checked > 0, "no overtaking windows found");
    }

    #[test]
    fn split_exact_counts() {
        let scenes = generate_scenes(10, &small_config(2)).unwrap();
        let (train, val) = split_dataset(&scenes, 0.7).unwrap();
        assert_eq!(train.len(), 7);
        assert_eq!(val.len(), 3);
        // Disjoint and exhaustive.
        let mut all: Vec<&String> = train.iter().chain(val.iter()).collect();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 10);
        // Re-running produces the identical split.
        let (train2, val2) = split_dataset(&scenes, 0.7).unwrap();
        assert_eq!(train, train2);
        assert_eq!(val, val2);
    }

    #[test]
    fn split_paper_scale_ratio() {
        // 850 scenes at ratio 700/850 split exactly 700 / 150.
        let scenes: Vec<Scene> = (0..850)
            .map(|i| Scene {
                scene_id: format!("scene-{i:04}"),
                frames: vec![0.0],
                ego: vec![Pose::IDENTITY],
                rig: vec![],
                tracks: vec![],
                element_map: ElementMap::default(),
            })
            .collect();
        let (train, val) = split_dataset(&scenes, 700.0 / 850.0).unwrap();
        assert_eq!(train.len(), 700);
        assert_eq!(val.len(), 150);
    }

    #[test]
    fn split_rejects_bad_input() {
        assert!(split_dataset(&[], 0.5).is_err());
        let scenes = generate_scenes(2, &small_config(1)).unwrap();
        assert!(split_dataset(&scenes, 0.0).is_err());
        assert!(split_dataset(&scenes, 1.0).is_err());
    }

    #[test]
    fn rejects_zero_duration() {
        let cfg = SceneConfig { duration_frames: 0, ..small_config(0) };
        assert!(generate_scene("scene-bad", &cfg).is_err());
    }

    #[test]
    fn speeds_match_finite_differences() {
        let scene = generate_scene("scene-0005", &small_config(13)).unwrap();
        for t in &scene.tracks {
            for (&f, s) in &t.states {
                if let Some(next) = t.states.get(&(f + 1)) {
                    let fd = [
                        (next.box3d.center[0] - s.box3d.center[0]) / FRAME_DT,
                        (next.box3d.center[1] - s.box3d.center[1]) / FRAME_DT,
                    ];
                    let fd_speed = (fd[0] * fd[0] + fd[1] * fd[1]).sqrt();
                    assert!((fd_speed - s.speed()).abs() <= (0.1 * s.speed()).max(0.05));
                }
            }
        }
    }
}
