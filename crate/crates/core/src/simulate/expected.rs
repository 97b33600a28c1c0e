use std::f64::consts::PI;

use super::interference::{instantaneous, PhaseQuadrature, PhaseWindow};
use super::tally::{z_bit_assignment, SessionTally};
use crate::error::{invalid, Result};
use crate::model::{DetectorModel, LinkModel, Setting, SourceParams};

/// Expectation-valued tallies of an `n_pulses` session.
pub fn expected_tallies(
    link: &LinkModel,
    det: &DetectorModel,
    src: &SourceParams,
    n_pulses: f64,
) -> Result<SessionTally> {
    if !(n_pulses > 0.0) {
        return Err(invalid("n_pulses", "must be > 0"));
    }
    link.validate()?;
    det.validate()?;
    src.validate_emission()?;
    let (eta_a, eta_b) = link.arm_transmittances(det)?;
    let noise = link.noise_per_pulse;
    let sigma = src.phase_sigma();
    let full = PhaseQuadrature::new(PhaseWindow::Full, sigma);
    let slice = PhaseQuadrature::new(
        PhaseWindow::Slice {
            center: 0.0,
            half_width: src.slice_half_width,
        },
        sigma,
    );
    // Two slices (around 0 and pi) of width 2*half_width out of 2*pi.
    let slice_fraction = 2.0 * src.slice_half_width / PI;

    let mut tally = SessionTally {
        n_pulses,
        ..SessionTally::default()
    };
    for a in Setting::ALL {
        for b in Setting::ALL {
            let pulses = n_pulses * src.setting_probability(a) * src.setting_probability(b);
            let x = src.intensity(a) * eta_a;
            let y = src.intensity(b) * eta_b;
            let p = if x > 0.0 && y > 0.0 {
                full.average(x, y, noise)
            } else {
                instantaneous(x, y, 0.0, noise)
            };
            let cell = tally.cell_mut(a, b);
            cell.pulses = pulses;
            cell.one_detector_events = pulses * p.heralded();
            if a.is_signal_window() && b.is_signal_window() {
                let bits = z_bit_assignment(a == Setting::SignalSend, b == Setting::SignalSend);
                if bits.is_error {
                    cell.error_events = cell.one_detector_events;
                }
            }
            if a == Setting::DecoyWeak && b == Setting::DecoyWeak {
                // The pi slice mirrors the 0 slice with the ports swapped.
                let ps = slice.average(x, y, noise);
                cell.accepted_pulses = pulses * slice_fraction;
                cell.accepted_events = cell.accepted_pulses * ps.heralded();
                cell.error_events = cell.accepted_pulses * ps.right;
            }
        }
    }
    Ok(tally)
}
