//! Derivative-free search for source parameters maximizing the key rate.
//!
//! Multi-start coordinate descent: starts come from a seeded Latin hypercube
//! over the search box; each start walks one coordinate at a time in the
//! box-normalized space and halves its step after a sweep with no gain. The
//! objective is the analytic (expectation-valued) pipeline, so it is free of
//! sampling noise.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{DetectorModel, LinkModel, SecurityParams, SourceParams};
use crate::security::analyze_expected;
use crate::simulate::expected_tallies;

/// Rate reported for parameter sets the decoy analysis cannot certify.
pub const INFEASIBLE_RATE: f64 = -1.0;

/// Default evaluation budget.
pub const DEFAULT_BUDGET: usize = 20_000;

const DIM: usize = 7;
const MIN_STEP: f64 = 1e-4;
const INITIAL_STEP: f64 = 0.25;
/// Smallest admissible vacuum-decoy probability.
const MIN_P_VAC: f64 = 1e-3;

/// Closed intervals for each free source parameter. Misalignment and the
/// phase-slice width are carried along unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpace {
    pub mu1: (f64, f64),
    pub mu2: (f64, f64),
    pub muz: (f64, f64),
    pub p_signal_window: (f64, f64),
    pub p_mu1: (f64, f64),
    pub p_mu2: (f64, f64),
    pub epsilon_send: (f64, f64),
    pub misalignment: f64,
    pub slice_half_width: f64,
}

impl Default for SearchSpace {
    fn default() -> Self {
        let src = SourceParams::experiment();
        Self {
            mu1: (0.01, 0.3),
            mu2: (0.1, 0.8),
            muz: (0.1, 0.8),
            p_signal_window: (0.2, 0.95),
            p_mu1: (0.05, 0.9),
            p_mu2: (0.02, 0.5),
            epsilon_send: (0.05, 0.45),
            misalignment: src.misalignment,
            slice_half_width: src.slice_half_width,
        }
    }
}

impl SearchSpace {
    /// Box of `+/- rel` (relative) around `p`, clipped to probabilities.
    pub fn around(p: &SourceParams, rel: f64) -> Self {
        let iv = |v: f64, hi: f64| ((v * (1.0 - rel)).max(0.0), (v * (1.0 + rel)).min(hi));
        Self {
            mu1: iv(p.mu1, f64::MAX),
            mu2: iv(p.mu2, f64::MAX),
            muz: iv(p.muz, f64::MAX),
            p_signal_window: iv(p.p_signal_window, 1.0),
            p_mu1: iv(p.p_mu1, 1.0),
            p_mu2: iv(p.p_mu2, 1.0),
            epsilon_send: iv(p.epsilon_send, 1.0),
            misalignment: p.misalignment,
            slice_half_width: p.slice_half_width,
        }
    }

    fn intervals(&self) -> [(f64, f64); DIM] {
        [
            self.mu1,
            self.mu2,
            self.muz,
            self.p_signal_window,
            self.p_mu1,
            self.p_mu2,
            self.epsilon_send,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let names = ["mu1", "mu2", "muz", "p_signal_window", "p_mu1", "p_mu2", "epsilon_send"];
        for (name, (lo, hi)) in names.into_iter().zip(self.intervals()) {
            if !(lo <= hi) || lo < 0.0 || !hi.is_finite() {
                return Err(invalid("search_space", format!("interval for {name} is [{lo}, {hi}]")));
            }
            if name.starts_with("p_") || name == "epsilon_send" {
                if hi > 1.0 {
                    return Err(invalid("search_space", format!("{name} exceeds 1")));
                }
            }
        }
        if self.mu1.0 >= self.mu2.1 {
            return Err(invalid("search_space", "no point satisfies mu1 < mu2"));
        }
        Ok(())
    }

    fn to_params(&self, u: &[f64; DIM]) -> SourceParams {
        let v: Vec<f64> = self
            .intervals()
            .iter()
            .zip(u)
            .map(|(&(lo, hi), &t)| lo + t.clamp(0.0, 1.0) * (hi - lo))
            .collect();
        let mut p = SourceParams::from_free(v[0], v[1], v[2], v[3], v[4], v[5], v[6]);
        p.misalignment = self.misalignment;
        p.slice_half_width = self.slice_half_width;
        p
    }

    fn to_unit(&self, p: &SourceParams) -> [f64; DIM] {
        let v = [p.mu1, p.mu2, p.muz, p.p_signal_window, p.p_mu1, p.p_mu2, p.epsilon_send];
        let mut u = [0.0; DIM];
        for (k, ((lo, hi), x)) in self.intervals().into_iter().zip(v).enumerate() {
            u[k] = if hi > lo { ((x - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.5 };
        }
        u
    }

    /// Seeded Latin-hypercube sample of `n` points.
    pub fn latin_hypercube(&self, n: usize, seed: u64) -> Vec<SourceParams> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut units = vec![[0.0; DIM]; n];
        for d in 0..DIM {
            let mut strata: Vec<usize> = (0..n).collect();
            strata.shuffle(&mut rng);
            for (i, s) in strata.into_iter().enumerate() {
                units[i][d] = (s as f64 + rng.random::<f64>()) / n as f64;
            }
        }
        units.iter().map(|u| self.to_params(u)).collect()
    }
}

/// Key rate per pulse of a parameter set, from expected tallies through
/// decoy bounds and expected pairing. Returns [`INFEASIBLE_RATE`] when the
/// source parameters are invalid or the decoy bounds are not positive.
pub fn evaluate(
    params: &SourceParams,
    link: &LinkModel,
    det: &DetectorModel,
    sec: &SecurityParams,
    n_pulses: f64,
) -> Result<f64> {
    link.validate()?;
    det.validate()?;
    sec.validate()?;
    if !(n_pulses > 0.0) {
        return Err(invalid("n_pulses", "must be > 0"));
    }
    if params.validate().is_err() || params.p_vac < MIN_P_VAC {
        return Ok(INFEASIBLE_RATE);
    }
    let tally = expected_tallies(link, det, params, n_pulses)?;
    let analysis = analyze_expected(&tally, params, sec, det.pulse_rate_hz)?;
    Ok(if analysis.feasible() {
        analysis.report.rate_per_pulse
    } else {
        INFEASIBLE_RATE
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub best_params: SourceParams,
    /// `-inf` when every evaluated point was infeasible.
    pub best_rate: f64,
    pub evaluations: usize,
    /// Index of the start point whose descent produced the best rate.
    pub start_index: usize,
}

struct Problem<'a> {
    space: &'a SearchSpace,
    link: &'a LinkModel,
    det: &'a DetectorModel,
    sec: &'a SecurityParams,
    n_pulses: f64,
}

impl Problem<'_> {
    fn rate(&self, u: &[f64; DIM]) -> f64 {
        evaluate(&self.space.to_params(u), self.link, self.det, self.sec, self.n_pulses)
            .unwrap_or(INFEASIBLE_RATE)
    }

    /// Coordinate descent from `start`; returns (point, rate, evaluations).
    fn descend(&self, start: [f64; DIM], budget: usize) -> ([f64; DIM], f64, usize) {
        let mut best = start;
        let mut best_rate = self.rate(&best);
        let mut used = 1;
        let mut step = INITIAL_STEP;
        while used < budget && step >= MIN_STEP {
            let mut improved = false;
            for d in 0..DIM {
                for dir in [1.0, -1.0] {
                    if used >= budget {
                        break;
                    }
                    let mut cand = best;
                    cand[d] = (cand[d] + dir * step).clamp(0.0, 1.0);
                    if cand[d] == best[d] {
                        continue;
                    }
                    let r = self.rate(&cand);
                    used += 1;
                    if r > best_rate {
                        best = cand;
                        best_rate = r;
                        improved = true;
                        break;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        (best, best_rate, used)
    }
}

fn finish(space: &SearchSpace, runs: Vec<([f64; DIM], f64, usize)>) -> OptimizeResult {
    let evaluations = runs.iter().map(|r| r.2).sum();
    // Strictly-greater keeps the lowest start index on ties.
    let (start_index, (u, rate, _)) = runs
        .iter()
        .enumerate()
        .fold(None, |acc: Option<(usize, &([f64; DIM], f64, usize))>, (i, r)| match acc {
            Some((_, b)) if b.1 >= r.1 => acc,
            _ => Some((i, r)),
        })
        .expect("at least one start");
    OptimizeResult {
        best_params: space.to_params(u),
        best_rate: if *rate <= INFEASIBLE_RATE { f64::NEG_INFINITY } else { *rate },
        evaluations,
        start_index,
    }
}

/// Runs coordinate descent from each given start, sharing `budget`
/// evaluations evenly, and returns the best point found.
pub fn optimize_from(
    starts: &[SourceParams],
    space: &SearchSpace,
    link: &LinkModel,
    det: &DetectorModel,
    sec: &SecurityParams,
    n_pulses: f64,
    budget: usize,
) -> Result<OptimizeResult> {
    space.validate()?;
    if budget == 0 {
        return Err(invalid("budget", "must be >= 1"));
    }
    if starts.is_empty() {
        return Err(invalid("starts", "need at least one start point"));
    }
    let starts = &starts[..starts.len().min(budget)];
    let problem = Problem {
        space,
        link,
        det,
        sec,
        n_pulses,
    };
    let share = budget / starts.len();
    let extra = budget % starts.len();
    let runs: Vec<_> = starts
        .par_iter()
        .enumerate()
        .map(|(i, s)| problem.descend(space.to_unit(s), share + usize::from(i < extra)))
        .collect();
    Ok(finish(space, runs))
}

/// Multi-start search over `space` with Latin-hypercube starts drawn from
/// `seed`. Deterministic given its arguments.
pub fn optimize_params(
    space: &SearchSpace,
    link: &LinkModel,
    det: &DetectorModel,
    sec: &SecurityParams,
    n_pulses: f64,
    budget: usize,
    seed: u64,
) -> Result<OptimizeResult> {
    let n_starts = (budget / 500).clamp(1, 16);
    let starts = space.latin_hypercube(n_starts, seed);
    optimize_from(&starts, space, link, det, sec, n_pulses, budget)
}
