use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{h2, SecurityParams};

/// Inputs of the finite-size key-rate formula, all taken after pairing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeyRateInputs {
    /// Untagged bits.
    pub n1_prime: f64,
    /// Phase-flip error rate of the untagged bits.
    pub e1_ph: f64,
    /// Surviving bits.
    pub nt_prime: f64,
    /// Bit-flip error rate of the surviving bits.
    pub e_z: f64,
    /// Total pulses sent.
    pub n_total: f64,
}

impl KeyRateInputs {
    pub fn validate(&self) -> Result<()> {
        if !(self.n1_prime >= 0.0) {
            return Err(invalid("n1_prime", "must be >= 0"));
        }
        if !(self.nt_prime >= self.n1_prime) {
            return Err(invalid("nt_prime", "must be >= n1_prime"));
        }
        if !(0.0..=1.0).contains(&self.e1_ph) {
            return Err(invalid("e1_ph", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.e_z) {
            return Err(invalid("e_z", "must lie in [0, 1]"));
        }
        if !(self.n_total > 0.0) || !self.n_total.is_finite() {
            return Err(invalid("n_total", "must be > 0"));
        }
        Ok(())
    }
}

/// Each term of the key-rate formula, in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRateTerms {
    /// `n1' [1 - H(e1_ph)]`
    pub privacy: f64,
    /// `f nt' H(E_Z)`
    pub error_correction: f64,
    /// `2 log2(2 / eps_cor)`
    pub correctness_overhead: f64,
    /// `2 log2(1 / (sqrt(2) eps_pa eps_hat))`
    pub privacy_amplification_overhead: f64,
}

impl KeyRateTerms {
    pub fn compute(inputs: &KeyRateInputs, sec: &SecurityParams) -> Self {
        Self {
            privacy: inputs.n1_prime * (1.0 - h2(inputs.e1_ph)),
            error_correction: sec.f_ec * inputs.nt_prime * h2(inputs.e_z),
            correctness_overhead: 2.0 * (2.0 / sec.eps_cor).log2(),
            privacy_amplification_overhead: 2.0
                * (1.0 / (std::f64::consts::SQRT_2 * sec.eps_pa * sec.eps_hat)).log2(),
        }
    }

    pub fn key_bits(&self) -> f64 {
        self.privacy
            - self.error_correction
            - self.correctness_overhead
            - self.privacy_amplification_overhead
    }
}

/// Secure key bits per sent pulse. Negative values are returned unclamped.
pub fn key_rate(inputs: &KeyRateInputs, sec: &SecurityParams) -> Result<f64> {
    inputs.validate()?;
    sec.validate()?;
    Ok(KeyRateTerms::compute(inputs, sec).key_bits() / inputs.n_total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRateReport {
    pub n1_prime: f64,
    pub e1_ph: f64,
    pub nt_prime: f64,
    pub e_z: f64,
    pub n_total: f64,
    pub terms: KeyRateTerms,
    pub rate_per_pulse: f64,
    pub rate_bps: f64,
}

impl KeyRateReport {
    pub fn new(inputs: &KeyRateInputs, sec: &SecurityParams, pulse_rate_hz: f64) -> Result<Self> {
        let rate = key_rate(inputs, sec)?;
        Ok(Self {
            n1_prime: inputs.n1_prime,
            e1_ph: inputs.e1_ph,
            nt_prime: inputs.nt_prime,
            e_z: inputs.e_z,
            n_total: inputs.n_total,
            terms: KeyRateTerms::compute(inputs, sec),
            rate_per_pulse: rate,
            rate_bps: rate * pulse_rate_hz,
        })
    }

    pub fn inputs(&self) -> KeyRateInputs {
        KeyRateInputs {
            n1_prime: self.n1_prime,
            e1_ph: self.e1_ph,
            nt_prime: self.nt_prime,
            e_z: self.e_z,
            n_total: self.n_total,
        }
    }

    /// True when no secret key can be extracted.
    pub fn is_clamped(&self) -> bool {
        self.rate_per_pulse <= 0.0
    }
}

/// Repeaterless secret-key capacity `-log2(1 - eta)` of a pure-loss channel.
pub fn plob_bound(eta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&eta) {
        return Err(invalid("eta", format!("must lie in [0, 1), got {eta}")));
    }
    Ok(-(-eta).ln_1p() / std::f64::consts::LN_2)
}
