//! Phase tracking from the strong reference pulses.

use std::f64::consts::{PI, TAU};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use super::trace::{Origin, PhaseTrace};
use crate::error::{invalid, Error, Result};

/// Reference-frame rate of the QKD system (one frame per microsecond).
pub const REFERENCE_FRAME_RATE_HZ: f64 = 1e6;

/// Left/right detector counts of the reference pulses in one frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameCounts {
    pub left: u64,
    pub right: u64,
}

/// Poisson reference counts for a known relative phase per frame: the left
/// port sees `n cos^2(phi/2)`, the right `n sin^2(phi/2)`.
pub fn reference_counts(phase: &[f64], photons_per_frame: f64, seed: u64) -> Result<Vec<FrameCounts>> {
    if !(photons_per_frame > 0.0) || !photons_per_frame.is_finite() {
        return Err(invalid("photons_per_frame", "must be finite and > 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |mean: f64| -> u64 {
        if mean <= 0.0 {
            0
        } else {
            Poisson::new(mean).expect("positive mean").sample(&mut rng) as u64
        }
    };
    Ok(phase
        .iter()
        .map(|&phi| {
            let c = (phi / 2.0).cos().powi(2);
            FrameCounts {
                left: draw(photons_per_frame * c),
                right: draw(photons_per_frame * (1.0 - c)),
            }
        })
        .collect())
}

/// Recovers a continuous phase trace from per-frame reference counts.
///
/// Each frame gives `arccos((N_L - N_R) / (N_L + N_R))`, which folds the
/// phase into `[0, pi]`. The sign and the `2 pi` multiple are chosen as the
/// candidate closest to a linear prediction from the two previous samples,
/// so the trace can pass through the fold points as long as the frames
/// oversample the motion. A phase that only touches a fold tangentially
/// remains ambiguous.
pub fn recover_phase_from_reference(
    frames: &[FrameCounts],
    frame_rate_hz: f64,
    origin: Origin,
) -> Result<PhaseTrace> {
    let mut out: Vec<f64> = Vec::with_capacity(frames.len());
    for (index, f) in frames.iter().enumerate() {
        let total = f.left + f.right;
        if total == 0 {
            return Err(Error::EmptyFrame { index });
        }
        let raw = ((f.left as f64 - f.right as f64) / total as f64).clamp(-1.0, 1.0).acos();
        let value = match out.len() {
            0 => raw,
            n => {
                let prev = out[n - 1];
                let predicted = if n >= 2 { 2.0 * prev - out[n - 2] } else { prev };
                nearest_branch(raw, predicted)
            }
        };
        out.push(value);
    }
    PhaseTrace::new(out, frame_rate_hz, origin)
}

/// The member of `{+raw, -raw} + 2 pi k` closest to `target`.
fn nearest_branch(raw: f64, target: f64) -> f64 {
    let mut best = raw;
    for cand in [raw, -raw] {
        let k = ((target - cand) / TAU).round();
        let c = cand + k * TAU;
        if (c - target).abs() < (best - target).abs() {
            best = c;
        }
    }
    debug_assert!((best - target).abs() <= PI + 1e-9 || best == raw);
    best
}
