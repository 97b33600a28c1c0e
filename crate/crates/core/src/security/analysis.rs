//! End-to-end post-processing of a session tally into a key-rate report.

use serde::{Deserialize, Serialize};

use super::aopp::{aopp, expected_aopp, post_aopp_phase_error, AoppSummary};
use super::decoy::{decoy_bounds, DecoyEstimate};
use super::finite::observed_lower;
use super::rate::{KeyRateInputs, KeyRateReport};
use crate::error::Result;
use crate::model::{SecurityParams, SourceParams};
use crate::simulate::SessionTally;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionAnalysis {
    pub z_qber_before: f64,
    pub x_qber: f64,
    pub decoy: DecoyEstimate,
    pub aopp: AoppSummary,
    pub report: KeyRateReport,
}

impl SessionAnalysis {
    pub fn feasible(&self) -> bool {
        self.decoy.feasible
    }
}

/// Untagged pairs: a pair is untagged when its Bob-one element came from an
/// untagged Alice-only event and its Bob-zero element from an untagged
/// Bob-only event. Such pairs always pass the parity check.
fn untagged_pairs(decoy: &DecoyEstimate, aopp: &AoppSummary, xi: f64) -> f64 {
    if aopp.bob_ones <= 0.0 || aopp.bob_zeros <= 0.0 {
        return 0.0;
    }
    let frac_ones = (decoy.n10_lower / aopp.bob_ones).min(1.0);
    let frac_zeros = (decoy.n01_lower / aopp.bob_zeros).min(1.0);
    observed_lower(aopp.pairs * frac_ones * frac_zeros, xi).min(aopp.survived)
}

fn finish(
    tally: &SessionTally,
    decoy: DecoyEstimate,
    aopp: AoppSummary,
    sec: &SecurityParams,
    pulse_rate_hz: f64,
) -> Result<SessionAnalysis> {
    let inputs = KeyRateInputs {
        n1_prime: untagged_pairs(&decoy, &aopp, sec.xi_decoy),
        e1_ph: post_aopp_phase_error(decoy.e1ph_upper),
        nt_prime: aopp.survived,
        e_z: aopp.qber_after,
        n_total: tally.n_pulses,
    };
    Ok(SessionAnalysis {
        z_qber_before: tally.z_qber(),
        x_qber: tally.x_qber(),
        decoy,
        aopp,
        report: KeyRateReport::new(&inputs, sec, pulse_rate_hz)?,
    })
}

/// Analysis of an expectation-valued tally, with the pairing statistics
/// evaluated in expectation.
pub fn analyze_expected(
    tally: &SessionTally,
    src: &SourceParams,
    sec: &SecurityParams,
    pulse_rate_hz: f64,
) -> Result<SessionAnalysis> {
    let decoy = decoy_bounds(tally, src, sec)?;
    finish(tally, decoy, expected_aopp(tally), sec, pulse_rate_hz)
}

/// Analysis of a sampled tally: the recorded raw keys are actually paired.
pub fn analyze_session(
    tally: &SessionTally,
    src: &SourceParams,
    sec: &SecurityParams,
    pulse_rate_hz: f64,
    aopp_seed: u64,
) -> Result<SessionAnalysis> {
    let decoy = decoy_bounds(tally, src, sec)?;
    let bits_a = tally.z_bits_alice();
    let bits_b = tally.z_bits_bob();
    let outcome = aopp(&bits_a, &bits_b, aopp_seed)?;
    let summary = AoppSummary::from_outcome(&bits_b, &outcome);
    finish(tally, decoy, summary, sec, pulse_rate_hz)
}
