//! Two-mode coherent-state interference at the measurement station.

use std::f64::consts::{PI, SQRT_2, TAU};

use crate::error::{invalid, Result};

/// Number of uniform phase nodes used for every phase average.
pub const QUADRATURE_POINTS: usize = 2048;

/// Exclusive click probabilities of the two interference detectors.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClickProbabilities {
    /// Only the left detector clicks.
    pub left: f64,
    /// Only the right detector clicks.
    pub right: f64,
    pub both: f64,
}

impl ClickProbabilities {
    /// One-detector heralding probability.
    pub fn heralded(&self) -> f64 {
        self.left + self.right
    }
}

/// Click probabilities for a fixed relative phase `theta`.
///
/// `x` and `y` are the mean photon numbers arriving from each arm. The left
/// port receives `(x + y + 2 sqrt(xy) cos theta) / 2`, the right port the
/// complement; every detector also fires independently with `noise`.
pub fn instantaneous(x: f64, y: f64, cos_theta: f64, noise: f64) -> ClickProbabilities {
    let cross = 2.0 * (x * y).sqrt() * cos_theta;
    let lam_l = ((x + y + cross) / 2.0).max(0.0);
    let lam_r = ((x + y - cross) / 2.0).max(0.0);
    // P(click) = 1 - (1 - noise) e^{-lambda}, written to keep precision for tiny lambda.
    let click_l = noise - (1.0 - noise) * (-lam_l).exp_m1();
    let click_r = noise - (1.0 - noise) * (-lam_r).exp_m1();
    ClickProbabilities {
        left: click_l * (1.0 - click_r),
        right: (1.0 - click_l) * click_r,
        both: click_l * click_r,
    }
}

/// Which announced relative phases are kept when averaging.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhaseWindow {
    /// Fully phase-randomized pulses.
    Full,
    /// Announced relative phase within `center +/- half_width`.
    Slice { center: f64, half_width: f64 },
}

/// Precomputed phase nodes and weights for repeated averaging.
#[derive(Debug, Clone)]
pub struct PhaseQuadrature {
    cosines: Vec<f64>,
    weights: Vec<f64>,
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

impl PhaseQuadrature {
    /// The true relative phase is the announced one plus Gaussian jitter of
    /// standard deviation `sigma`; the weights are the resulting density on
    /// a uniform grid over one period.
    pub fn new(window: PhaseWindow, sigma: f64) -> Self {
        let n = QUADRATURE_POINTS;
        let h = TAU / n as f64;
        match window {
            PhaseWindow::Full => Self {
                cosines: (0..n).map(|i| (i as f64 * h).cos()).collect(),
                weights: vec![1.0 / n as f64; n],
            },
            PhaseWindow::Slice { center, half_width } => {
                // Grid centered on the slice so it never straddles the seam.
                let offsets: Vec<f64> = (0..n).map(|i| -PI + i as f64 * h).collect();
                let mut weights: Vec<f64> = offsets
                    .iter()
                    .map(|&d| {
                        if sigma > 0.0 {
                            (-3..=3)
                                .map(|k| {
                                    let s = d + TAU * k as f64;
                                    normal_cdf((s + half_width) / sigma)
                                        - normal_cdf((s - half_width) / sigma)
                                })
                                .sum::<f64>()
                        } else {
                            // Overlap of the node's cell with the slice.
                            let lo = (d - h / 2.0).max(-half_width);
                            let hi = (d + h / 2.0).min(half_width);
                            (hi - lo).max(0.0)
                        }
                    })
                    .collect();
                let total: f64 = weights.iter().sum();
                if total > 0.0 {
                    weights.iter_mut().for_each(|w| *w /= total);
                } else {
                    weights = vec![0.0; n];
                    weights[n / 2] = 1.0;
                }
                Self {
                    cosines: offsets.iter().map(|d| (center + d).cos()).collect(),
                    weights,
                }
            }
        }
    }

    pub fn average(&self, x: f64, y: f64, noise: f64) -> ClickProbabilities {
        if x == 0.0 || y == 0.0 {
            return instantaneous(x, y, 0.0, noise);
        }
        let mut acc = ClickProbabilities::default();
        for (&c, &w) in self.cosines.iter().zip(&self.weights) {
            let p = instantaneous(x, y, c, noise);
            acc.left += w * p.left;
            acc.right += w * p.right;
            acc.both += w * p.both;
        }
        acc
    }
}

fn check_inputs(intens_a: f64, intens_b: f64, eta_a: f64, eta_b: f64, noise: f64) -> Result<()> {
    if !(intens_a >= 0.0) || !(intens_b >= 0.0) {
        return Err(invalid("intensity", "mean photon numbers must be >= 0"));
    }
    if !(0.0..=1.0).contains(&eta_a) || !(0.0..=1.0).contains(&eta_b) {
        return Err(invalid("eta", "transmittance must lie in [0, 1]"));
    }
    if !(0.0..1.0).contains(&noise) {
        return Err(invalid("noise", "must lie in [0, 1)"));
    }
    Ok(())
}

/// Phase-averaged click probabilities for fully phase-randomized pulses.
pub fn click_probabilities(
    intens_a: f64,
    intens_b: f64,
    eta_a: f64,
    eta_b: f64,
    phase_sigma: f64,
    noise: f64,
) -> Result<ClickProbabilities> {
    click_probabilities_in(
        PhaseWindow::Full,
        intens_a,
        intens_b,
        eta_a,
        eta_b,
        phase_sigma,
        noise,
    )
}

/// As [`click_probabilities`], restricted to an announced-phase window.
pub fn click_probabilities_in(
    window: PhaseWindow,
    intens_a: f64,
    intens_b: f64,
    eta_a: f64,
    eta_b: f64,
    phase_sigma: f64,
    noise: f64,
) -> Result<ClickProbabilities> {
    check_inputs(intens_a, intens_b, eta_a, eta_b, noise)?;
    Ok(PhaseQuadrature::new(window, phase_sigma.max(0.0)).average(
        intens_a * eta_a,
        intens_b * eta_b,
        noise,
    ))
}
