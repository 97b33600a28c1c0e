//! Two-decoy-plus-vacuum estimation of untagged events and their phase-flip
//! error rate.
//!
//! Per side, the single-photon yield with the other party silent is bounded
//! from the (mu1, vac), (mu2, vac) and (vac, vac) decoy cells:
//!
//! ```text
//! s1 >= [mu2^2 e^mu1 S_mu1 - mu1^2 e^mu2 S_mu2 - (mu2^2 - mu1^2) S_00]
//!       / (mu1 mu2 (mu2 - mu1))
//! ```
//!
//! The phase-flip rate uses the phase-slice accepted (mu1, mu1) windows,
//! whose two-mode state carries total intensity `2 mu1`:
//!
//! ```text
//! e1 <= (T_X - e^(-2 mu1) S_00 / 2) / (2 mu1 e^(-2 mu1) s1)
//! ```
//!
//! Every observed count is replaced by its Chernoff bound in the
//! conservative direction before combining.

use serde::{Deserialize, Serialize};

use super::finite::{expectation_lower, expectation_upper, observed_lower};
use crate::error::Result;
use crate::model::{SecurityParams, Setting, SourceParams};
use crate::simulate::{CellTally, SessionTally};

/// Output of the decoy analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoyEstimate {
    /// Lower bound on the single-photon yield when only Alice emits.
    pub s10_lower: f64,
    /// Same for Bob.
    pub s01_lower: f64,
    /// Untagged heralded events with Alice as the only sender.
    pub n10_lower: f64,
    pub n01_lower: f64,
    pub n1_lower: f64,
    pub e1ph_upper: f64,
    /// False when a yield bound came out non-positive.
    pub feasible: bool,
}

impl DecoyEstimate {
    fn infeasible() -> Self {
        Self {
            s10_lower: 0.0,
            s01_lower: 0.0,
            n10_lower: 0.0,
            n01_lower: 0.0,
            n1_lower: 0.0,
            e1ph_upper: 0.5,
            feasible: false,
        }
    }
}

fn yield_bounds(c: &CellTally, xi: f64) -> Option<(f64, f64)> {
    (c.pulses > 0.0).then(|| {
        (
            expectation_lower(c.one_detector_events, xi) / c.pulses,
            expectation_upper(c.one_detector_events, xi) / c.pulses,
        )
    })
}

/// Single-photon yield lower bound for one sending side.
fn single_photon_yield(
    weak: &CellTally,
    strong: &CellTally,
    vac_upper: f64,
    src: &SourceParams,
    xi: f64,
) -> Option<f64> {
    let (s1_lo, _) = yield_bounds(weak, xi)?;
    let (_, s2_hi) = yield_bounds(strong, xi)?;
    let (m1, m2) = (src.mu1, src.mu2);
    let num = m2 * m2 * m1.exp() * s1_lo - m1 * m1 * m2.exp() * s2_hi - (m2 * m2 - m1 * m1) * vac_upper;
    Some(num / (m1 * m2 * (m2 - m1)))
}

/// Bounds the untagged signal-window events and their phase-flip error rate.
///
/// Infeasible combinations (a non-positive yield bound, or missing decoy
/// cells) return `n1_lower = 0` and `e1ph_upper = 0.5` with
/// `feasible = false`.
pub fn decoy_bounds(
    tally: &SessionTally,
    src: &SourceParams,
    sec: &SecurityParams,
) -> Result<DecoyEstimate> {
    src.validate()?;
    sec.validate()?;
    let xi = sec.xi_decoy;
    use Setting::*;

    let vac = tally.cell(DecoyVacuum, DecoyVacuum);
    let Some((s00_lo, s00_hi)) = yield_bounds(vac, xi) else {
        return Ok(DecoyEstimate::infeasible());
    };
    let s10 = single_photon_yield(
        tally.cell(DecoyWeak, DecoyVacuum),
        tally.cell(DecoyStrong, DecoyVacuum),
        s00_hi,
        src,
        xi,
    );
    let s01 = single_photon_yield(
        tally.cell(DecoyVacuum, DecoyWeak),
        tally.cell(DecoyVacuum, DecoyStrong),
        s00_hi,
        src,
        xi,
    );
    let (Some(s10), Some(s01)) = (s10, s01) else {
        return Ok(DecoyEstimate::infeasible());
    };
    if !(s10 > 0.0 && s01 > 0.0) {
        return Ok(DecoyEstimate::infeasible());
    }

    // Expected single-photon heralds in the one-sender signal cells, then
    // the least number of them that can have occurred.
    let single = src.muz * (-src.muz).exp();
    let n10 = observed_lower(tally.cell(SignalSend, SignalSkip).pulses * single * s10, xi);
    let n01 = observed_lower(tally.cell(SignalSkip, SignalSend).pulses * single * s01, xi);

    let x = tally.cell(DecoyWeak, DecoyWeak);
    let e1ph = if x.accepted_pulses > 0.0 {
        let tx_hi = expectation_upper(x.error_events, xi) / x.accepted_pulses;
        let m = 2.0 * src.mu1;
        let s1 = 0.5 * (s10 + s01);
        ((tx_hi - (-m).exp() * s00_lo / 2.0) / (m * (-m).exp() * s1)).clamp(0.0, 0.5)
    } else {
        0.5
    };

    Ok(DecoyEstimate {
        s10_lower: s10,
        s01_lower: s01,
        n10_lower: n10,
        n01_lower: n01,
        n1_lower: n10 + n01,
        e1ph_upper: e1ph,
        feasible: true,
    })
}
