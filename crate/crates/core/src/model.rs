//! Link, detector, source and security parameter blocks plus the two
//! elementary functions everything else leans on.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Converts an optical loss in dB to a power transmittance.
pub fn transmittance(loss_db: f64) -> Result<f64> {
    if !(loss_db >= 0.0) || !loss_db.is_finite() {
        return Err(invalid("loss_db", format!("must be finite and >= 0, got {loss_db}")));
    }
    Ok(10f64.powf(-loss_db / 10.0))
}

/// Binary Shannon entropy in bits, with `H(0) = H(1) = 0`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(invalid("x", format!("must lie in [0, 1], got {x}")));
    }
    Ok(h2(x))
}

/// Unchecked binary entropy; callers guarantee `x` is in `[0, 1]`.
pub(crate) fn h2(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
}

fn check_prob(name: &'static str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(invalid(name, format!("must be a probability in [0, 1], got {p}")))
    }
}

fn check_nonneg(name: &'static str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite and >= 0, got {v}")))
    }
}

/// Two fiber arms meeting at the measurement station (Charlie).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkModel {
    /// Alice to Charlie, km.
    pub length_a_km: f64,
    /// Bob to Charlie, km.
    pub length_b_km: f64,
    pub atten_db_per_km: f64,
    /// Insertion loss inside Charlie, applied to both arms.
    pub station_loss_db: f64,
    /// Per-detector, per-pulse click probability with no light present
    /// (dark counts plus re-Rayleigh scattering).
    pub noise_per_pulse: f64,
}

impl LinkModel {
    /// The 658.7 km ultra-low-loss spool configuration.
    pub fn experiment() -> Self {
        Self {
            length_a_km: 329.3,
            length_b_km: 329.4,
            atten_db_per_km: 0.161,
            station_loss_db: 1.3,
            noise_per_pulse: 6e-9,
        }
    }

    /// A symmetric link of `total_km` with the given attenuation and noise.
    pub fn symmetric(total_km: f64, atten_db_per_km: f64, station_loss_db: f64, noise: f64) -> Self {
        Self {
            length_a_km: total_km / 2.0,
            length_b_km: total_km / 2.0,
            atten_db_per_km,
            station_loss_db,
            noise_per_pulse: noise,
        }
    }

    /// Builds the noise floor from a detector's dark-count rate plus an extra
    /// per-pulse contribution (e.g. re-Rayleigh scattering).
    pub fn with_dark_counts(mut self, det: &DetectorModel, extra_noise_per_pulse: f64) -> Self {
        self.noise_per_pulse = det.dark_per_pulse() + extra_noise_per_pulse;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_nonneg("length_a_km", self.length_a_km)?;
        check_nonneg("length_b_km", self.length_b_km)?;
        check_nonneg("atten_db_per_km", self.atten_db_per_km)?;
        check_nonneg("station_loss_db", self.station_loss_db)?;
        if !(0.0..1.0).contains(&self.noise_per_pulse) {
            return Err(invalid(
                "noise_per_pulse",
                format!("must lie in [0, 1), got {}", self.noise_per_pulse),
            ));
        }
        Ok(())
    }

    pub fn total_length_km(&self) -> f64 {
        self.length_a_km + self.length_b_km
    }

    /// Fiber loss of both arms together, excluding the station.
    pub fn fiber_loss_db(&self) -> f64 {
        self.total_length_km() * self.atten_db_per_km
    }

    /// Per-arm detection probabilities for a single photon, including fiber,
    /// station loss and detector efficiency.
    pub fn arm_transmittances(&self, det: &DetectorModel) -> Result<(f64, f64)> {
        let arm = |len: f64| -> Result<f64> {
            Ok(transmittance(len * self.atten_db_per_km + self.station_loss_db)? * det.efficiency)
        };
        Ok((arm(self.length_a_km)?, arm(self.length_b_km)?))
    }

    /// Same link shortened to a total fiber loss of `fiber_loss_db`, with the
    /// noise floor rescaled by the change in arm transmittance so the
    /// signal-to-noise ratio (and with it every error rate) is preserved.
    ///
    /// This lets protocol statistics of a 100 dB link be reproduced with a
    /// tractable number of Monte Carlo pulses.
    pub fn desk_scaled(&self, fiber_loss_db: f64) -> Result<Self> {
        check_nonneg("fiber_loss_db", fiber_loss_db)?;
        if self.atten_db_per_km <= 0.0 {
            return Err(invalid("atten_db_per_km", "must be > 0 to rescale a link"));
        }
        let ratio = transmittance(fiber_loss_db / 2.0)?
            / transmittance(self.fiber_loss_db() / 2.0)?;
        let total = fiber_loss_db / self.atten_db_per_km;
        Ok(Self {
            length_a_km: total / 2.0,
            length_b_km: total / 2.0,
            noise_per_pulse: (self.noise_per_pulse * ratio).min(0.5),
            ..*self
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorModel {
    pub efficiency: f64,
    pub dark_rate_hz: f64,
    pub gate_ns: f64,
    /// Effective system repetition rate, used to convert per-pulse rates to bps.
    pub pulse_rate_hz: f64,
}

impl DetectorModel {
    pub fn experiment() -> Self {
        Self {
            efficiency: 0.82,
            dark_rate_hz: 4.0,
            gate_ns: 0.3,
            pulse_rate_hz: 100e6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_prob("efficiency", self.efficiency)?;
        check_nonneg("dark_rate_hz", self.dark_rate_hz)?;
        if !(self.gate_ns > 0.0) || !self.gate_ns.is_finite() {
            return Err(invalid("gate_ns", format!("must be > 0, got {}", self.gate_ns)));
        }
        if !(self.pulse_rate_hz > 0.0) || !self.pulse_rate_hz.is_finite() {
            return Err(invalid(
                "pulse_rate_hz",
                format!("must be > 0, got {}", self.pulse_rate_hz),
            ));
        }
        Ok(())
    }

    /// Dark-count probability within one time gate.
    pub fn dark_per_pulse(&self) -> f64 {
        self.dark_rate_hz * self.gate_ns * 1e-9
    }
}

/// What one party emits in one time window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    /// Decoy window, vacuum source.
    DecoyVacuum,
    /// Decoy window, intensity `mu1`.
    DecoyWeak,
    /// Decoy window, intensity `mu2`.
    DecoyStrong,
    /// Signal window, decided to send `muz`.
    SignalSend,
    /// Signal window, decided not to send.
    SignalSkip,
}

impl Setting {
    pub const ALL: [Setting; 5] = [
        Setting::DecoyVacuum,
        Setting::DecoyWeak,
        Setting::DecoyStrong,
        Setting::SignalSend,
        Setting::SignalSkip,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_signal_window(self) -> bool {
        matches!(self, Setting::SignalSend | Setting::SignalSkip)
    }

    pub fn label(self) -> &'static str {
        match self {
            Setting::DecoyVacuum => "vac",
            Setting::DecoyWeak => "mu1",
            Setting::DecoyStrong => "mu2",
            Setting::SignalSend => "send",
            Setting::SignalSkip => "skip",
        }
    }
}

/// Four-intensity sending-or-not-sending source configuration, shared by
/// both parties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceParams {
    pub mu1: f64,
    pub mu2: f64,
    pub muz: f64,
    pub p_decoy_window: f64,
    pub p_signal_window: f64,
    pub p_mu1: f64,
    pub p_mu2: f64,
    pub p_vac: f64,
    /// Probability of sending in a signal window.
    pub epsilon_send: f64,
    /// Baseline interference error at perfect phase alignment.
    pub misalignment: f64,
    /// Half-width (rad) of the accepted relative-phase slice around 0 and
    /// pi used for phase-error estimation in decoy windows.
    pub slice_half_width: f64,
}

impl SourceParams {
    /// Operating point used throughout for the 658.7 km link.
    pub fn experiment() -> Self {
        Self::from_free(0.06, 0.42, 0.424, 0.573, 0.567, 0.046, 0.2717)
    }

    /// Builds a parameter set from the searchable coordinates, deriving the
    /// complementary probabilities and fixing misalignment and slice width.
    pub fn from_free(
        mu1: f64,
        mu2: f64,
        muz: f64,
        p_signal_window: f64,
        p_mu1: f64,
        p_mu2: f64,
        epsilon_send: f64,
    ) -> Self {
        Self {
            mu1,
            mu2,
            muz,
            p_decoy_window: 1.0 - p_signal_window,
            p_signal_window,
            p_mu1,
            p_mu2,
            p_vac: 1.0 - p_mu1 - p_mu2,
            epsilon_send,
            misalignment: DEFAULT_MISALIGNMENT,
            slice_half_width: DEFAULT_SLICE_HALF_WIDTH,
        }
    }

    /// Full check, including the ordering `0 < mu1 < mu2` that decoy
    /// estimation needs.
    pub fn validate(&self) -> Result<()> {
        if !(self.mu1 > 0.0) {
            return Err(invalid("mu1", format!("must be > 0, got {}", self.mu1)));
        }
        if !(self.mu2 > self.mu1) || !self.mu2.is_finite() {
            return Err(invalid("mu2", format!("must exceed mu1 = {}, got {}", self.mu1, self.mu2)));
        }
        self.validate_emission()
    }

    /// Checks only what is needed to simulate emission: non-negative
    /// intensities and consistent probabilities.
    pub fn validate_emission(&self) -> Result<()> {
        check_nonneg("mu1", self.mu1)?;
        check_nonneg("mu2", self.mu2)?;
        check_nonneg("muz", self.muz)?;
        check_prob("p_decoy_window", self.p_decoy_window)?;
        check_prob("p_signal_window", self.p_signal_window)?;
        check_prob("p_mu1", self.p_mu1)?;
        check_prob("p_mu2", self.p_mu2)?;
        check_prob("p_vac", self.p_vac)?;
        check_prob("epsilon_send", self.epsilon_send)?;
        if !(0.0..0.5).contains(&self.misalignment) {
            return Err(invalid(
                "misalignment",
                format!("must lie in [0, 0.5), got {}", self.misalignment),
            ));
        }
        if !(self.slice_half_width > 0.0 && self.slice_half_width <= std::f64::consts::FRAC_PI_2) {
            return Err(invalid(
                "slice_half_width",
                format!("must lie in (0, pi/2], got {}", self.slice_half_width),
            ));
        }
        if ((self.p_decoy_window + self.p_signal_window) - 1.0).abs() > 1e-9 {
            return Err(invalid("p_signal_window", "p_decoy_window + p_signal_window must be 1"));
        }
        if ((self.p_mu1 + self.p_mu2 + self.p_vac) - 1.0).abs() > 1e-9 {
            return Err(invalid("p_vac", "p_mu1 + p_mu2 + p_vac must be 1"));
        }
        Ok(())
    }

    /// Mean photon number emitted under a setting.
    pub fn intensity(&self, s: Setting) -> f64 {
        match s {
            Setting::DecoyVacuum | Setting::SignalSkip => 0.0,
            Setting::DecoyWeak => self.mu1,
            Setting::DecoyStrong => self.mu2,
            Setting::SignalSend => self.muz,
        }
    }

    /// Probability that one party picks a setting in a given pulse.
    pub fn setting_probability(&self, s: Setting) -> f64 {
        match s {
            Setting::DecoyVacuum => self.p_decoy_window * self.p_vac,
            Setting::DecoyWeak => self.p_decoy_window * self.p_mu1,
            Setting::DecoyStrong => self.p_decoy_window * self.p_mu2,
            Setting::SignalSend => self.p_signal_window * self.epsilon_send,
            Setting::SignalSkip => self.p_signal_window * (1.0 - self.epsilon_send),
        }
    }

    /// Standard deviation of the Gaussian phase jitter reproducing the
    /// baseline error: `e = (1 - exp(-sigma^2 / 2)) / 2`.
    pub fn phase_sigma(&self) -> f64 {
        misalignment_to_sigma(self.misalignment)
    }
}

/// Baseline interference error rate of the phase tracking.
pub const DEFAULT_MISALIGNMENT: f64 = 0.028;

/// Phase-slice half-width giving roughly 5 % X-window error at the 658.7 km
/// operating point.
pub const DEFAULT_SLICE_HALF_WIDTH: f64 = 0.3;

pub fn misalignment_to_sigma(e: f64) -> f64 {
    (-2.0 * (1.0 - 2.0 * e).ln()).max(0.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecurityParams {
    /// Error-correction inefficiency.
    pub f_ec: f64,
    pub eps_cor: f64,
    pub eps_pa: f64,
    /// Chain-rule coefficient for smooth entropies.
    pub eps_hat: f64,
    /// Failure probability of each individual fluctuation bound.
    pub xi_decoy: f64,
}

impl SecurityParams {
    pub fn experiment() -> Self {
        Self {
            f_ec: 1.16,
            eps_cor: 1e-10,
            eps_pa: 1e-10,
            eps_hat: 1e-10,
            xi_decoy: 1e-10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_ec >= 1.0) || !self.f_ec.is_finite() {
            return Err(invalid("f_ec", format!("must be >= 1, got {}", self.f_ec)));
        }
        for (name, e) in [
            ("eps_cor", self.eps_cor),
            ("eps_pa", self.eps_pa),
            ("eps_hat", self.eps_hat),
            ("xi_decoy", self.xi_decoy),
        ] {
            if !(e > 0.0 && e < 1.0) {
                return Err(invalid(name, format!("must lie in (0, 1), got {e}")));
            }
        }
        Ok(())
    }
}

impl Default for LinkModel {
    fn default() -> Self {
        Self::experiment()
    }
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self::experiment()
    }
}

impl Default for SourceParams {
    fn default() -> Self {
        Self::experiment()
    }
}

impl Default for SecurityParams {
    fn default() -> Self {
        Self::experiment()
    }
}
