//! Pulse-by-pulse event generation.
//!
//! Pulses are grouped into fixed blocks of [`BLOCK_PULSES`]; each block draws
//! from its own ChaCha stream keyed by `(seed, block index)`. Partitions
//! only decide which thread runs which contiguous range of blocks, so the
//! merged tally does not depend on the partition count.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;

use super::tally::{z_bit_assignment, SessionTally, ZEvent};
use crate::error::{invalid, Result};
use crate::model::{DetectorModel, LinkModel, Setting, SourceParams};

pub const BLOCK_PULSES: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Click {
    None,
    Left,
    Right,
    Both,
}

/// Where the announced relative phase of a weak/weak decoy window fell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliceMembership {
    Outside,
    /// Near 0: constructive interference expected at the left detector.
    NearZero,
    /// Near pi: expected at the right detector.
    NearPi,
}

/// Everything that happened in one time window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowOutcome {
    pub setting_a: Setting,
    pub setting_b: Setting,
    pub intensity_a: f64,
    pub intensity_b: f64,
    pub alice_sent: bool,
    pub bob_sent: bool,
    pub click: Click,
    pub slice: SliceMembership,
    /// Photons emitted by both parties together (simulator ground truth).
    pub true_photon_count_total: u32,
}

struct Sampler {
    cumulative: [f64; 5],
    intensity: [f64; 5],
    poisson: [Option<Poisson<f64>>; 5],
    eta_a: f64,
    eta_b: f64,
    noise: f64,
    sigma: f64,
    slice_half_width: f64,
}

impl Sampler {
    fn new(link: &LinkModel, det: &DetectorModel, src: &SourceParams) -> Result<Self> {
        link.validate()?;
        det.validate()?;
        src.validate_emission()?;
        let (eta_a, eta_b) = link.arm_transmittances(det)?;
        let mut cumulative = [0.0; 5];
        let mut acc = 0.0;
        for s in Setting::ALL {
            acc += src.setting_probability(s);
            cumulative[s.index()] = acc;
        }
        let intensity = Setting::ALL.map(|s| src.intensity(s));
        let poisson = intensity.map(|m| if m > 0.0 { Poisson::new(m).ok() } else { None });
        Ok(Self {
            cumulative,
            intensity,
            poisson,
            eta_a,
            eta_b,
            noise: link.noise_per_pulse,
            sigma: src.phase_sigma(),
            slice_half_width: src.slice_half_width,
        })
    }

    fn pick(&self, rng: &mut ChaCha8Rng) -> Setting {
        let u: f64 = rng.random::<f64>() * self.cumulative[4];
        Setting::ALL
            .into_iter()
            .find(|s| u < self.cumulative[s.index()])
            .unwrap_or(Setting::SignalSkip)
    }

    fn photons(&self, rng: &mut ChaCha8Rng, s: Setting) -> u32 {
        self.poisson[s.index()].map_or(0, |d| d.sample(rng) as u32)
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> WindowOutcome {
        let a = self.pick(rng);
        let b = self.pick(rng);
        let (ma, mb) = (self.intensity[a.index()], self.intensity[b.index()]);
        let mut slice = SliceMembership::Outside;
        let mut photons = 0;
        let (light_l, light_r) = if ma > 0.0 && mb > 0.0 {
            // Interference of two phase-randomized coherent states.
            let theta_a: f64 = rng.random::<f64>() * TAU;
            let theta_b: f64 = rng.random::<f64>() * TAU;
            let jitter: f64 = rng.sample::<f64, _>(StandardNormal) * self.sigma;
            let announced = (theta_a - theta_b).rem_euclid(TAU);
            if a == Setting::DecoyWeak && b == Setting::DecoyWeak {
                let hw = self.slice_half_width;
                if announced <= hw || announced >= TAU - hw {
                    slice = SliceMembership::NearZero;
                } else if (announced - PI).abs() <= hw {
                    slice = SliceMembership::NearPi;
                }
            }
            let (x, y) = (ma * self.eta_a, mb * self.eta_b);
            let cross = 2.0 * (x * y).sqrt() * (announced + jitter).cos();
            let lam_l = ((x + y + cross) / 2.0).max(0.0);
            let lam_r = ((x + y - cross) / 2.0).max(0.0);
            photons = self.photons(rng, a) + self.photons(rng, b);
            let l = rng.random::<f64>() < -(-lam_l).exp_m1();
            let r = rng.random::<f64>() < -(-lam_r).exp_m1();
            (l, r)
        } else if ma > 0.0 || mb > 0.0 {
            // A single emitter: every photon is lost or lands on a random port.
            let (s, eta) = if ma > 0.0 { (a, self.eta_a) } else { (b, self.eta_b) };
            photons = self.photons(rng, s);
            let (mut l, mut r) = (false, false);
            for _ in 0..photons {
                if rng.random::<f64>() < eta {
                    if rng.random::<bool>() {
                        l = true;
                    } else {
                        r = true;
                    }
                }
            }
            (l, r)
        } else {
            (false, false)
        };
        let noise_l = rng.random::<f64>() < self.noise;
        let noise_r = rng.random::<f64>() < self.noise;
        let click = match (light_l || noise_l, light_r || noise_r) {
            (false, false) => Click::None,
            (true, false) => Click::Left,
            (false, true) => Click::Right,
            (true, true) => Click::Both,
        };
        WindowOutcome {
            setting_a: a,
            setting_b: b,
            intensity_a: ma,
            intensity_b: mb,
            alice_sent: ma > 0.0,
            bob_sent: mb > 0.0,
            click,
            slice,
            true_photon_count_total: photons,
        }
    }

    fn record(&self, tally: &mut SessionTally, w: &WindowOutcome) {
        tally.n_pulses += 1.0;
        let heralded = matches!(w.click, Click::Left | Click::Right);
        let cell = tally.cell_mut(w.setting_a, w.setting_b);
        cell.pulses += 1.0;
        if w.slice != SliceMembership::Outside {
            cell.accepted_pulses += 1.0;
        }
        if !heralded {
            return;
        }
        cell.one_detector_events += 1.0;
        match w.slice {
            SliceMembership::Outside => {}
            SliceMembership::NearZero => {
                cell.accepted_events += 1.0;
                if w.click == Click::Right {
                    cell.error_events += 1.0;
                }
            }
            SliceMembership::NearPi => {
                cell.accepted_events += 1.0;
                if w.click == Click::Left {
                    cell.error_events += 1.0;
                }
            }
        }
        if w.setting_a.is_signal_window() && w.setting_b.is_signal_window() {
            let alice_sent = w.setting_a == Setting::SignalSend;
            let bob_sent = w.setting_b == Setting::SignalSend;
            if z_bit_assignment(alice_sent, bob_sent).is_error {
                cell.error_events += 1.0;
            }
            tally.z_events.push(ZEvent {
                alice_sent,
                bob_sent,
                photons: w.true_photon_count_total,
            });
        }
    }

    fn run_block(&self, seed: u64, block: u64, pulses: u64) -> SessionTally {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(block);
        let mut tally = SessionTally::default();
        for _ in 0..pulses {
            let w = self.sample(&mut rng);
            self.record(&mut tally, &w);
        }
        tally
    }
}

/// Samples every window of an `n_pulses` session. Deterministic in `seed`.
pub fn monte_carlo_session(
    link: &LinkModel,
    det: &DetectorModel,
    src: &SourceParams,
    n_pulses: u64,
    seed: u64,
) -> Result<SessionTally> {
    monte_carlo_session_partitioned(link, det, src, n_pulses, seed, rayon::current_num_threads())
}

/// As [`monte_carlo_session`] with an explicit number of work partitions.
/// The result is identical for every `partitions >= 1`.
pub fn monte_carlo_session_partitioned(
    link: &LinkModel,
    det: &DetectorModel,
    src: &SourceParams,
    n_pulses: u64,
    seed: u64,
    partitions: usize,
) -> Result<SessionTally> {
    if n_pulses == 0 {
        return Err(invalid("n_pulses", "must be > 0"));
    }
    if partitions == 0 {
        return Err(invalid("partitions", "must be >= 1"));
    }
    let sampler = Sampler::new(link, det, src)?;
    let blocks = n_pulses.div_ceil(BLOCK_PULSES);
    let per_part = blocks.div_ceil(partitions as u64);
    let block_len = |blk: u64| BLOCK_PULSES.min(n_pulses - blk * BLOCK_PULSES);

    let run_range = |part: u64| {
        let start = part * per_part;
        let end = ((part + 1) * per_part).min(blocks);
        let mut acc = SessionTally::default();
        for blk in start..end {
            acc.merge(sampler.run_block(seed, blk, block_len(blk)));
        }
        acc
    };
    let parts: Vec<SessionTally> = if partitions == 1 {
        vec![run_range(0)]
    } else {
        (0..partitions as u64).into_par_iter().map(run_range).collect()
    };
    let mut total = SessionTally::default();
    for p in parts {
        total.merge(p);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desk() -> (LinkModel, DetectorModel, SourceParams) {
        (
            LinkModel::experiment().desk_scaled(20.0).unwrap(),
            DetectorModel::experiment(),
            SourceParams::experiment(),
        )
    }

    #[test]
    fn same_seed_same_tally() {
        let (l, d, s) = desk();
        let a = monte_carlo_session(&l, &d, &s, 200_000, 11).unwrap();
        let b = monte_carlo_session(&l, &d, &s, 200_000, 11).unwrap();
        assert_eq!(a, b);
        let c = monte_carlo_session(&l, &d, &s, 200_000, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn partition_count_does_not_matter() {
        let (l, d, s) = desk();
        let n = 5 * BLOCK_PULSES + 123;
        let serial = monte_carlo_session_partitioned(&l, &d, &s, n, 3, 1).unwrap();
        for parts in [2, 3, 7, 16] {
            let par = monte_carlo_session_partitioned(&l, &d, &s, n, 3, parts).unwrap();
            assert_eq!(serial, par, "partitions = {parts}");
        }
        assert_eq!(serial.n_pulses, n as f64);
    }

    #[test]
    fn silent_source_gives_no_events() {
        let (l, d, mut s) = desk();
        let mut l = l;
        l.noise_per_pulse = 0.0;
        (s.mu1, s.mu2, s.epsilon_send) = (0.0, 0.0, 0.0);
        let t = monte_carlo_session(&l, &d, &s, 100_000, 1).unwrap();
        assert_eq!(t.total_heralded(), 0.0);
        assert!(t.z_events.is_empty());
    }

    #[test]
    fn z_records_match_cells() {
        let (l, d, s) = desk();
        let t = monte_carlo_session(&l, &d, &s, 300_000, 5).unwrap();
        assert_eq!(t.z_events.len() as f64, t.z_heralded());
        let errors = t.z_events.iter().filter(|e| e.bits().is_error).count();
        assert!((t.z_qber() - errors as f64 / t.z_events.len() as f64).abs() < 1e-12);
        for (_, _, c) in t.cells() {
            assert!(c.one_detector_events <= c.pulses);
            assert!(c.error_events <= c.one_detector_events);
        }
    }

    #[test]
    fn rejects_empty_session() {
        let (l, d, s) = desk();
        assert!(monte_carlo_session(&l, &d, &s, 0, 1).is_err());
    }
}
