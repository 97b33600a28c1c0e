//! Dominant-frequency estimation.

use std::f64::consts::TAU;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::trace::PhaseTrace;
use crate::error::{invalid, Error, Result};

fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| 0.5 - 0.5 * (TAU * k as f64 / n as f64).cos())
        .collect()
}

/// Magnitude of the windowed signal's DTFT at `f` cycles per sample.
fn dtft_mag(x: &[f64], f: f64) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (k, &v) in x.iter().enumerate() {
        let w = TAU * f * k as f64;
        re += v * w.cos();
        im -= v * w.sin();
    }
    re.hypot(im)
}

/// Frequency (Hz) of the strongest non-DC spectral component.
///
/// The mean-removed trace is Hann-windowed and transformed; the largest
/// FFT bin is then refined by a golden-section search of the windowed DTFT
/// magnitude within one bin either side.
pub fn dominant_frequency(trace: &PhaseTrace) -> Result<f64> {
    let n = trace.len();
    if n < 4 {
        return Err(invalid("trace", "need at least 4 samples"));
    }
    let mean = trace.samples().iter().sum::<f64>() / n as f64;
    let x: Vec<f64> = trace
        .samples()
        .iter()
        .zip(hann(n))
        .map(|(s, w)| (s - mean) * w)
        .collect();
    if x.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroVariance("trace"));
    }
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let (k, _) = buf[1..=n / 2]
        .iter()
        .enumerate()
        .map(|(i, c)| (i + 1, c.norm()))
        .fold((1, f64::NEG_INFINITY), |acc, (i, m)| if m > acc.1 { (i, m) } else { acc });

    let (mut lo, mut hi) = ((k as f64 - 1.0) / n as f64, ((k as f64 + 1.0) / n as f64).min(0.5));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (dtft_mag(&x, a), dtft_mag(&x, b));
    while hi - lo > 1e-6 / n as f64 {
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = dtft_mag(&x, b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = dtft_mag(&x, a);
        }
    }
    Ok((lo + hi) / 2.0 * trace.sample_rate_hz())
}

/// Block-averages a trace down by an integer factor.
pub fn decimate(trace: &PhaseTrace, factor: usize) -> Result<PhaseTrace> {
    if factor == 0 {
        return Err(invalid("factor", "must be >= 1"));
    }
    let samples = trace
        .samples()
        .chunks_exact(factor)
        .map(|c| c.iter().sum::<f64>() / factor as f64)
        .collect();
    PhaseTrace::new(samples, trace.sample_rate_hz() / factor as f64, trace.origin())
}
