//! Desk-scale benchmark toolkit for prompt-conditioned 3D multi-object
//! tracking.
//!
//! The crate covers the full loop: synthesize multi-view driving scenes with
//! attribute-tagged object tracks ([`simworld`]), build language prompts by
//! set algebra over attribute elements ([`promptgen`]), run reference
//! trackers ([`tracker`]), and score them with a class-agnostic per
//! video-prompt AMOTA protocol ([`trackeval`]). [`geom3d`] holds the metric
//! 3D primitives, [`assign`] the bipartite matching, and [`neurocore`] a
//! small from-scratch numeric kernel with hand-derived gradients.

pub mod assign;
pub mod error;
pub mod geom3d;
pub mod neurocore;
pub mod promptgen;
pub mod simworld;
pub mod tracker;
pub mod trackeval;

pub use error::{Error, Result};

/// Stable 64-bit FNV-1a hash, used wherever a reproducible hash of a string
/// is needed (dataset splits, token embeddings). Kept independent of the
/// standard library hasher so outputs never change across toolchains.
pub fn stable_hash(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
