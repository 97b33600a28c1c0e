//! Forward model of vibration-induced phase on a bidirectional link.

use std::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::trace::{Origin, PhaseTrace};
use crate::error::{invalid, Error, Result};

/// Propagation speed of light in standard fiber.
pub const FIBER_LIGHT_SPEED_KM_PER_S: f64 = 2.0e5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkGeometry {
    pub length_km: f64,
    #[serde(default = "default_speed")]
    pub light_speed_km_per_s: f64,
}

fn default_speed() -> f64 {
    FIBER_LIGHT_SPEED_KM_PER_S
}

impl LinkGeometry {
    pub fn new(length_km: f64) -> Self {
        Self {
            length_km,
            light_speed_km_per_s: FIBER_LIGHT_SPEED_KM_PER_S,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_km > 0.0) || !self.length_km.is_finite() {
            return Err(invalid("length_km", "must be finite and > 0"));
        }
        if !(self.light_speed_km_per_s > 0.0) || !self.light_speed_km_per_s.is_finite() {
            return Err(invalid("light_speed_km_per_s", "must be finite and > 0"));
        }
        Ok(())
    }

    /// One-way transit time of the whole link.
    pub fn transit_s(&self) -> f64 {
        self.length_km / self.light_speed_km_per_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Waveform {
    Sinusoid {
        frequency_hz: f64,
        amplitude_rad: f64,
        phase: f64,
    },
    DcPlusSinusoid {
        offset: f64,
        frequency_hz: f64,
        amplitude_rad: f64,
    },
}

impl Waveform {
    pub fn frequency_hz(&self) -> f64 {
        match *self {
            Waveform::Sinusoid { frequency_hz, .. } | Waveform::DcPlusSinusoid { frequency_hz, .. } => {
                frequency_hz
            }
        }
    }

    /// Value at time `t` since the source switched on.
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            Waveform::Sinusoid {
                frequency_hz,
                amplitude_rad,
                phase,
            } => amplitude_rad * (TAU * frequency_hz * t + phase).sin(),
            Waveform::DcPlusSinusoid {
                offset,
                frequency_hz,
                amplitude_rad,
            } => offset + amplitude_rad * (TAU * frequency_hz * t).sin(),
        }
    }
}

/// A localized fiber perturbation active on `[start_s, start_s + duration_s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VibrationSource {
    /// Distance from Alice along the fiber.
    pub position_km: f64,
    pub waveform: Waveform,
    pub start_s: f64,
    pub duration_s: f64,
}

impl VibrationSource {
    pub fn validate(&self, geom: &LinkGeometry) -> Result<()> {
        if !(0.0..=geom.length_km).contains(&self.position_km) {
            return Err(invalid(
                "position_km",
                format!("{} lies outside the {} km link", self.position_km, geom.length_km),
            ));
        }
        if !(self.waveform.frequency_hz() > 0.0) {
            return Err(invalid("frequency_hz", "must be > 0"));
        }
        if !(self.start_s >= 0.0) || !(self.duration_s > 0.0) {
            return Err(invalid("duration_s", "source window must start at >= 0 and last > 0"));
        }
        Ok(())
    }

    /// Phase imprinted at the source location at absolute time `t`.
    pub fn phase_at(&self, t: f64) -> f64 {
        let local = t - self.start_s;
        if local >= 0.0 && local < self.duration_s {
            self.waveform.at(local)
        } else {
            0.0
        }
    }
}

/// Drift and measurement-noise settings of [`simulate_phase_traces`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceNoise {
    /// Variance growth of the common phase drift, rad^2/s.
    pub drift_rate: f64,
    /// Per-sample white noise standard deviation, rad.
    pub noise_rad: f64,
}

/// Phase traces seen at Alice (light from Bob) and at Bob (light from
/// Alice). A source at `x` km from Alice reaches Bob after `(L - x) / v`
/// and Alice after `x / v`.
pub fn simulate_phase_traces(
    geom: &LinkGeometry,
    sources: &[VibrationSource],
    fs: f64,
    duration_s: f64,
    noise: TraceNoise,
    seed: u64,
) -> Result<(PhaseTrace, PhaseTrace)> {
    geom.validate()?;
    if !(fs > 0.0) || !fs.is_finite() {
        return Err(invalid("fs", "must be finite and > 0"));
    }
    if !(duration_s > 0.0) || !duration_s.is_finite() {
        return Err(invalid("duration_s", "must be finite and > 0"));
    }
    if !(noise.drift_rate >= 0.0) || !(noise.noise_rad >= 0.0) {
        return Err(invalid("noise", "drift_rate and noise_rad must be >= 0"));
    }
    for s in sources {
        s.validate(geom)?;
        let freq = s.waveform.frequency_hz();
        if fs < 2.0 * freq {
            return Err(Error::Aliasing { fs, freq });
        }
    }

    let n = (duration_s * fs).round() as usize;
    let v = geom.light_speed_km_per_s;
    let mut alice = vec![0.0; n];
    let mut bob = vec![0.0; n];
    for (k, (a, b)) in alice.iter_mut().zip(bob.iter_mut()).enumerate() {
        let t = k as f64 / fs;
        for s in sources {
            *a += s.phase_at(t - s.position_km / v);
            *b += s.phase_at(t - (geom.length_km - s.position_km) / v);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if noise.drift_rate > 0.0 {
        let step = (noise.drift_rate / fs).sqrt();
        let mut drift = 0.0;
        for (a, b) in alice.iter_mut().zip(bob.iter_mut()) {
            *a += drift;
            *b += drift;
            let z: f64 = StandardNormal.sample(&mut rng);
            drift += step * z;
        }
    }
    if noise.noise_rad > 0.0 {
        for x in alice.iter_mut().chain(bob.iter_mut()) {
            let z: f64 = StandardNormal.sample(&mut rng);
            *x += noise.noise_rad * z;
        }
    }
    Ok((
        PhaseTrace::new(alice, fs, Origin::Alice)?,
        PhaseTrace::new(bob, fs, Origin::Bob)?,
    ))
}
