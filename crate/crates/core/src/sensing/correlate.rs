//! Delay estimation and source localization.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::propagate::LinkGeometry;
use super::trace::PhaseTrace;
use crate::error::{invalid, Error, Result};

/// Samples with the best-fit line removed.
pub fn detrend(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    if x.len() < 2 {
        return vec![0.0; x.len()];
    }
    let t_mean = (n - 1.0) / 2.0;
    let x_mean = x.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (k, &v) in x.iter().enumerate() {
        let dt = k as f64 - t_mean;
        sxy += dt * (v - x_mean);
        sxx += dt * dt;
    }
    let slope = sxy / sxx;
    x.iter()
        .enumerate()
        .map(|(k, &v)| v - x_mean - slope * (k as f64 - t_mean))
        .collect()
}

/// Pearson correlation of two equal-length sequences.
pub fn correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(invalid("b", "sequences differ in length"));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 {
        return Err(Error::ZeroVariance("a"));
    }
    if sbb == 0.0 {
        return Err(Error::ZeroVariance("b"));
    }
    Ok(sab / (saa * sbb).sqrt())
}

/// Normalized correlation of `a[i]` with `b[i + lag]` over their overlap.
fn lagged(a: &[f64], b: &[f64], lag: i64) -> f64 {
    let n = a.len() as i64;
    let (a0, b0) = if lag >= 0 { (0, lag) } else { (-lag, 0) };
    let len = (n - lag.abs()).max(0) as usize;
    let xa = &a[a0 as usize..a0 as usize + len];
    let xb = &b[b0 as usize..b0 as usize + len];
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in xa.iter().zip(xb) {
        sab += x * y;
        saa += x * x;
        sbb += y * y;
    }
    if saa > 0.0 && sbb > 0.0 {
        sab / (saa * sbb).sqrt()
    } else {
        0.0
    }
}

/// Delay of `b` relative to `a` in seconds (positive when `b` lags), and
/// the normalized correlation at the peak.
///
/// Both traces are detrended, correlated over integer lags up to
/// `max_lag_s`, and the peak is refined by a parabola through it and its
/// neighbours.
pub fn cross_correlate_delay(a: &PhaseTrace, b: &PhaseTrace, max_lag_s: f64) -> Result<(f64, f64)> {
    let fs = a.sample_rate_hz();
    if fs != b.sample_rate_hz() {
        return Err(Error::SampleRateMismatch(fs, b.sample_rate_hz()));
    }
    if a.len() != b.len() || a.len() < 3 {
        return Err(invalid("b", "traces must cover the same span of at least 3 samples"));
    }
    if !(max_lag_s >= 0.0) {
        return Err(invalid("max_lag_s", "must be >= 0"));
    }
    let da = detrend(a.samples());
    let db = detrend(b.samples());
    let flat = |x: &[f64]| x.iter().all(|&v| v.abs() <= 1e-12 * (1.0 + v.abs()));
    if flat(&da) {
        return Err(Error::ZeroVariance("a"));
    }
    if flat(&db) {
        return Err(Error::ZeroVariance("b"));
    }
    let max_lag = ((max_lag_s * fs).ceil() as i64).min(a.len() as i64 - 2);
    let corr: Vec<f64> = (-max_lag..=max_lag)
        .into_par_iter()
        .map(|lag| lagged(&da, &db, lag))
        .collect();
    let (i, &peak) = corr
        .iter()
        .enumerate()
        .fold(None, |acc: Option<(usize, &f64)>, (i, c)| match acc {
            Some((_, best)) if best >= c => acc,
            _ => Some((i, c)),
        })
        .expect("at least one lag");
    let mut offset = 0.0;
    if i > 0 && i + 1 < corr.len() {
        let (l, c, r) = (corr[i - 1], corr[i], corr[i + 1]);
        let denom = l - 2.0 * c + r;
        if denom < 0.0 {
            offset = (0.5 * (l - r) / denom).clamp(-0.5, 0.5);
        }
    }
    let lag = (i as i64 - max_lag) as f64 + offset;
    Ok((lag / fs, peak))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizationResult {
    /// Bob-side arrival minus Alice-side arrival.
    pub delay_s: f64,
    pub position_from_bob_km: f64,
    pub correlation_peak: f64,
    /// The raw position fell outside the link and was clamped.
    pub clamped: bool,
    pub length_km: f64,
}

impl LocalizationResult {
    pub fn position_from_alice_km(&self) -> f64 {
        self.length_km - self.position_from_bob_km
    }
}

/// Unclamped distance from Bob, `(L + v * delay) / 2`.
pub fn raw_position_from_bob_km(delay_s: f64, geom: &LinkGeometry) -> f64 {
    (geom.length_km + geom.light_speed_km_per_s * delay_s) / 2.0
}

/// Converts a relative delay into a position. Delays up to one sample
/// (`1 / fs`) beyond the link transit time are clamped to the nearest end.
pub fn locate(delay_s: f64, geom: &LinkGeometry, fs: f64) -> Result<LocalizationResult> {
    geom.validate()?;
    if !(fs > 0.0) {
        return Err(invalid("fs", "must be > 0"));
    }
    let max_s = geom.transit_s() + 1.0 / fs;
    if !(delay_s.abs() <= max_s) {
        return Err(Error::DelayOutOfRange { delay_s, max_s });
    }
    let raw = raw_position_from_bob_km(delay_s, geom);
    let pos = raw.clamp(0.0, geom.length_km);
    Ok(LocalizationResult {
        delay_s,
        position_from_bob_km: pos,
        correlation_peak: f64::NAN,
        clamped: pos != raw,
        length_km: geom.length_km,
    })
}

/// Cross-correlates the Alice- and Bob-side traces and locates the source.
pub fn localize(alice: &PhaseTrace, bob: &PhaseTrace, geom: &LinkGeometry) -> Result<LocalizationResult> {
    geom.validate()?;
    let (delay, peak) = cross_correlate_delay(alice, bob, geom.transit_s())?;
    let mut res = locate(delay, geom, alice.sample_rate_hz())?;
    res.correlation_peak = peak;
    Ok(res)
}
