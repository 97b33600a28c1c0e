//! Run configuration: a sectioned key/value file, one section per block.
//!
//! Every section is optional and falls back to the 658.7 km experiment's
//! values; a section that is present must spell out all of its fields.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use tfqkd_core::optimize::{SearchSpace, DEFAULT_BUDGET};
use tfqkd_core::security::KeyRateInputs;
use tfqkd_core::sensing::{LinkGeometry, TraceNoise, VibrationSource, Waveform, DEFAULT_SAMPLE_RATE_HZ};
use tfqkd_core::{DetectorModel, LinkModel, SecurityParams, SourceParams};

use crate::error::CliError;
use crate::output::Format;

/// Pulses sent during the 658.7 km run.
pub const EXPERIMENT_PULSES: f64 = 1.007e13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionMode {
    Expected,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    pub n_pulses: f64,
    pub mode: SessionMode,
    /// Replace the link by its desk-scale equivalent at this fiber loss.
    #[serde(default)]
    pub desk_loss_db: Option<f64>,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            n_pulses: EXPERIMENT_PULSES,
            mode: SessionMode::Expected,
            desk_loss_db: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveConfig {
    pub distances_km: Vec<f64>,
    pub n_pulses: f64,
}

impl Default for CurveConfig {
    fn default() -> Self {
        let mut d: Vec<f64> = (0..=14).map(|k| 50.0 * k as f64).collect();
        d.insert(14, 658.7);
        Self {
            distances_km: d,
            n_pulses: EXPERIMENT_PULSES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeConfig {
    pub budget: usize,
    pub n_pulses: f64,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self {
            budget: DEFAULT_BUDGET,
            n_pulses: EXPERIMENT_PULSES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensingConfig {
    pub length_km: f64,
    pub light_speed_km_per_s: f64,
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    pub drift_rate: f64,
    pub noise_rad: f64,
    /// Reference photons per frame for the recovered waveform.
    pub photons_per_frame: f64,
    pub sources: Vec<VibrationSource>,
}

impl Default for SensingConfig {
    /// Vibration at Alice's end of a 200 km link, DC step plus a 1 kHz tone.
    fn default() -> Self {
        Self {
            length_km: 200.0,
            light_speed_km_per_s: 2e5,
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            duration_s: 1.0,
            drift_rate: 1e-4,
            noise_rad: 0.01,
            photons_per_frame: 1e4,
            sources: vec![VibrationSource {
                position_km: 0.0,
                waveform: Waveform::DcPlusSinusoid {
                    offset: 1.0,
                    frequency_hz: 1000.0,
                    amplitude_rad: 0.5,
                },
                start_s: 0.2,
                duration_s: 0.6,
            }],
        }
    }
}

impl SensingConfig {
    pub fn geometry(&self) -> LinkGeometry {
        LinkGeometry {
            length_km: self.length_km,
            light_speed_km_per_s: self.light_speed_km_per_s,
        }
    }

    pub fn noise(&self) -> TraceNoise {
        TraceNoise {
            drift_rate: self.drift_rate,
            noise_rad: self.noise_rad,
        }
    }
}

/// The file as written; absent sections are `None`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Free-form label; not used by any computation.
    #[allow(dead_code)]
    pub scenario: Option<String>,
    pub seed: Option<u64>,
    /// Output directory; `--out` takes precedence.
    pub out: Option<PathBuf>,
    /// `--format` takes precedence.
    pub format: Option<Format>,
    pub link: Option<LinkModel>,
    pub detector: Option<DetectorModel>,
    pub source: Option<SourceParams>,
    pub security: Option<SecurityParams>,
    pub session: Option<SessionConfig>,
    pub keyrate: Option<KeyRateInputs>,
    pub curve: Option<CurveConfig>,
    pub optimize: Option<OptimizeConfig>,
    pub sensing: Option<SensingConfig>,
}

fn bad(block: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("[{block}] {e}"))
}

fn positive(block: &str, name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(block, format!("invalid parameter `{name}`: must be finite and > 0, got {v}")))
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn link(&self) -> LinkModel {
        self.link.unwrap_or_else(LinkModel::experiment)
    }

    pub fn detector(&self) -> DetectorModel {
        self.detector.unwrap_or_else(DetectorModel::experiment)
    }

    pub fn source(&self) -> SourceParams {
        self.source.unwrap_or_else(SourceParams::experiment)
    }

    pub fn security(&self) -> SecurityParams {
        self.security.unwrap_or_else(SecurityParams::experiment)
    }

    pub fn session(&self) -> SessionConfig {
        self.session.clone().unwrap_or_default()
    }

    pub fn curve(&self) -> CurveConfig {
        self.curve.clone().unwrap_or_default()
    }

    pub fn optimize(&self) -> OptimizeConfig {
        self.optimize.clone().unwrap_or_default()
    }

    pub fn sensing(&self) -> SensingConfig {
        self.sensing.clone().unwrap_or_default()
    }

    /// Link used for simulation, after optional desk scaling.
    pub fn session_link(&self) -> Result<LinkModel, CliError> {
        let link = self.link();
        match self.session().desk_loss_db {
            Some(db) => link.desk_scaled(db).map_err(|e| bad("session", e)),
            None => Ok(link),
        }
    }

    pub fn search_space(&self) -> SearchSpace {
        let src = self.source();
        SearchSpace {
            misalignment: src.misalignment,
            slice_half_width: src.slice_half_width,
            ..SearchSpace::default()
        }
    }

    /// Checks the physical blocks every QKD command uses.
    pub fn validate_qkd(&self) -> Result<(), CliError> {
        self.link().validate().map_err(|e| bad("link", e))?;
        self.detector().validate().map_err(|e| bad("detector", e))?;
        self.source().validate().map_err(|e| bad("source", e))?;
        self.security().validate().map_err(|e| bad("security", e))?;
        Ok(())
    }

    pub fn validate_session(&self) -> Result<(), CliError> {
        let s = self.session();
        positive("session", "n_pulses", s.n_pulses)?;
        if s.mode == SessionMode::MonteCarlo && s.n_pulses > u64::MAX as f64 {
            return Err(bad("session", "invalid parameter `n_pulses`: too large for sampling"));
        }
        if let Some(db) = s.desk_loss_db {
            if !(db >= 0.0) {
                return Err(bad("session", "invalid parameter `desk_loss_db`: must be >= 0"));
            }
        }
        self.session_link().map(|_| ())
    }

    pub fn validate_keyrate(&self) -> Result<(), CliError> {
        if let Some(k) = &self.keyrate {
            k.validate().map_err(|e| bad("keyrate", e))?;
            self.security().validate().map_err(|e| bad("security", e))?;
            self.detector().validate().map_err(|e| bad("detector", e))?;
            Ok(())
        } else {
            self.validate_qkd()?;
            self.validate_session()
        }
    }

    pub fn validate_curve(&self) -> Result<(), CliError> {
        self.validate_qkd()?;
        let c = self.curve();
        positive("curve", "n_pulses", c.n_pulses)?;
        if c.distances_km.is_empty() {
            return Err(bad("curve", "invalid parameter `distances_km`: empty grid"));
        }
        if let Some(d) = c.distances_km.iter().find(|d| !(**d >= 0.0 && d.is_finite())) {
            return Err(bad("curve", format!("invalid parameter `distances_km`: {d}")));
        }
        Ok(())
    }

    pub fn validate_optimize(&self) -> Result<(), CliError> {
        self.validate_qkd()?;
        let o = self.optimize();
        positive("optimize", "n_pulses", o.n_pulses)?;
        if o.budget == 0 {
            return Err(bad("optimize", "invalid parameter `budget`: must be >= 1"));
        }
        self.search_space().validate().map_err(|e| bad("optimize", e))
    }

    pub fn validate_sensing(&self) -> Result<(), CliError> {
        let s = self.sensing();
        let g = s.geometry();
        g.validate().map_err(|e| bad("sensing", e))?;
        positive("sensing", "sample_rate_hz", s.sample_rate_hz)?;
        positive("sensing", "duration_s", s.duration_s)?;
        positive("sensing", "photons_per_frame", s.photons_per_frame)?;
        if !(s.drift_rate >= 0.0) || !(s.noise_rad >= 0.0) {
            return Err(bad("sensing", "invalid parameter `noise_rad`: drift and noise must be >= 0"));
        }
        for src in &s.sources {
            src.validate(&g).map_err(|e| bad("sensing", e))?;
            let f = src.waveform.frequency_hz();
            if s.sample_rate_hz < 2.0 * f {
                return Err(bad(
                    "sensing",
                    format!("sample rate {} Hz cannot represent a {f} Hz source", s.sample_rate_hz),
                ));
            }
        }
        if s.sources.is_empty() {
            return Err(bad("sensing", "invalid parameter `sources`: at least one source is needed"));
        }
        Ok(())
    }
}
