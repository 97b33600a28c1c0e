//! Acceptance checks. Runs as a plain binary and prints one line per
//! criterion; exits nonzero if any criterion fails.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::process::ExitCode;
use std::time::Instant;

use tfqkd_core::optimize::{evaluate, optimize_from, optimize_params, SearchSpace};
use tfqkd_core::security::{aopp, analyze_session, decoy_bounds, key_rate, plob_bound, KeyRateInputs};
use tfqkd_core::sensing::{
    correlation, decimate, dominant_frequency, localize, recover_phase_from_reference,
    reference_counts, simulate_phase_traces, LinkGeometry, Origin, TraceNoise,
    VibrationSource, Waveform, REFERENCE_FRAME_RATE_HZ,
};
use tfqkd_core::simulate::{expected_tallies, monte_carlo_session_partitioned, CellTally};
use tfqkd_core::{transmittance, DetectorModel, LinkModel, SecurityParams, SourceParams};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg)
    }
}

fn table_inputs() -> KeyRateInputs {
    KeyRateInputs {
        n1_prime: 244731.0,
        e1_ph: 0.1336,
        nt_prime: 558729.0,
        e_z: 0.0212,
        n_total: 1.007e13,
    }
}

fn criterion_1() -> Check {
    let start = Instant::now();
    let sec = SecurityParams::experiment();
    let r = key_rate(&table_inputs(), &sec).map_err(|e| e.to_string())?;
    let bps = r * DetectorModel::experiment().pulse_rate_hz;
    let elapsed = start.elapsed().as_secs_f64();
    ensure((r / 9.22e-10 - 1.0).abs() <= 0.10, format!("R = {r:.4e}"))?;
    ensure((bps / 0.092 - 1.0).abs() <= 0.10, format!("rate_bps = {bps:.4}"))?;
    ensure(elapsed < 1.0, format!("took {elapsed:.3} s"))?;
    Ok(format!("R = {r:.4e}, {bps:.4} bps"))
}

fn criterion_2() -> Check {
    let eta = transmittance(106.0).map_err(|e| e.to_string())?;
    let plob = plob_bound(eta).map_err(|e| e.to_string())?;
    let r = key_rate(&table_inputs(), &SecurityParams::experiment()).map_err(|e| e.to_string())?;
    ensure((plob / 3.62e-11 - 1.0).abs() <= 0.01, format!("PLOB = {plob:.4e}"))?;
    ensure(r / plob >= 10.0, format!("ratio {:.1}", r / plob))?;
    Ok(format!("PLOB = {plob:.4e}, R/PLOB = {:.1}", r / plob))
}

fn criterion_3() -> Check {
    let start = Instant::now();
    let geom = LinkGeometry::new(200.0);
    let source = VibrationSource {
        position_km: 0.0,
        waveform: Waveform::DcPlusSinusoid {
            offset: 1.0,
            frequency_hz: 1000.0,
            amplitude_rad: 0.5,
        },
        start_s: 2.0,
        duration_s: 5.0,
    };
    let noise = TraceNoise {
        drift_rate: 1e-4,
        noise_rad: 0.02,
    };
    let (alice, bob) =
        simulate_phase_traces(&geom, &[source], 200e3, 10.0, noise, 11).map_err(|e| e.to_string())?;
    let loc = localize(&alice, &bob, &geom).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    ensure((loc.delay_s - 1.0e-3).abs() <= 5e-6, format!("delay {:.6} ms", loc.delay_s * 1e3))?;
    ensure(
        (loc.position_from_bob_km - 200.0).abs() <= 1.0,
        format!("position {:.2} km", loc.position_from_bob_km),
    )?;
    ensure(elapsed < 10.0, format!("took {elapsed:.2} s"))?;
    Ok(format!(
        "delay {:.4} ms, {:.2} km from Bob, {elapsed:.2} s",
        loc.delay_s * 1e3,
        loc.position_from_bob_km
    ))
}

fn criterion_4() -> Check {
    let mut report = Vec::new();
    for f in [1.0f64, 10.0, 100.0, 1000.0] {
        let fs = REFERENCE_FRAME_RATE_HZ;
        let n = ((4.0 / f).max(0.02) * fs) as usize;
        let drive: Vec<f64> = (0..n)
            .map(|k| FRAC_PI_2 + 1.2 * (TAU * f * k as f64 / fs).sin())
            .collect();
        let frames = reference_counts(&drive, 1e4, f as u64).map_err(|e| e.to_string())?;
        let rec = recover_phase_from_reference(&frames, fs, Origin::Bob).map_err(|e| e.to_string())?;
        let corr = correlation(rec.samples(), &drive).map_err(|e| e.to_string())?;
        // The tone sits far below the frame rate; average down before the
        // spectral estimate.
        let factor = (fs / (50.0 * f)).min(1000.0) as usize;
        let slow = decimate(&rec, factor).map_err(|e| e.to_string())?;
        let peak = dominant_frequency(&slow).map_err(|e| e.to_string())?;
        ensure((peak / f - 1.0).abs() <= 0.01, format!("{f} Hz: peak at {peak:.4} Hz"))?;
        ensure(corr >= 0.99, format!("{f} Hz: correlation {corr:.5}"))?;
        report.push(format!("{f} Hz -> {peak:.3} Hz (r = {corr:.5})"));
    }
    Ok(report.join("; "))
}

/// Worst localization error over positions `offset + k` km on a 500 km link.
fn worst_grid_error(fs: f64, offset: f64) -> Result<f64, String> {
    let geom = LinkGeometry::new(500.0);
    let mut worst: f64 = 0.0;
    let mut x = offset;
    while x <= geom.length_km {
        let source = VibrationSource {
            position_km: x,
            waveform: Waveform::DcPlusSinusoid {
                offset: 1.0,
                frequency_hz: 137.0,
                amplitude_rad: 0.4,
            },
            start_s: 0.005,
            duration_s: 0.02,
        };
        let (alice, bob) = simulate_phase_traces(&geom, &[source], fs, 0.035, TraceNoise::default(), 0)
            .map_err(|e| e.to_string())?;
        let loc = localize(&alice, &bob, &geom).map_err(|e| e.to_string())?;
        worst = worst.max((loc.position_from_alice_km() - x).abs());
        x += 1.0;
    }
    Ok(worst)
}

fn criterion_5() -> Check {
    // Grid offset from whole kilometres so the delays are not whole samples
    // at either rate.
    let offset = 0.3;
    let fine = worst_grid_error(200e3, offset)?;
    let coarse = worst_grid_error(100e3, offset)?;
    let bound = 2e5 / (2.0 * 200e3) + 0.1;
    ensure(fine <= bound, format!("worst error {fine:.3} km exceeds {bound:.3} km"))?;
    ensure(coarse >= 2.0 * fine, format!("100 kHz worst {coarse:.3} km vs 200 kHz {fine:.3} km"))?;
    Ok(format!("worst error {fine:.3} km at 200 kHz, {coarse:.3} km at 100 kHz"))
}

fn desk_link(loss_db: f64) -> LinkModel {
    LinkModel::experiment().desk_scaled(loss_db).expect("valid loss")
}

fn within_5_sigma(name: &str, mc: f64, expected: f64, trials: f64) -> Result<(), String> {
    let p = if trials > 0.0 { (expected / trials).min(1.0) } else { 0.0 };
    let sd = (expected * (1.0 - p)).sqrt();
    ensure(
        (mc - expected).abs() <= 5.0 * sd + 1e-9,
        format!("{name}: {mc} vs expected {expected:.2} (sd {sd:.2})"),
    )
}

fn criterion_6() -> Check {
    let (link, det, src) = (desk_link(20.0), DetectorModel::experiment(), SourceParams::experiment());
    let n = 1_000_000u64;
    let expected = expected_tallies(&link, &det, &src, n as f64).map_err(|e| e.to_string())?;
    let mut compared = 0;
    for seed in 1..=30u64 {
        let serial = monte_carlo_session_partitioned(&link, &det, &src, n, seed, 1).map_err(|e| e.to_string())?;
        let parallel =
            monte_carlo_session_partitioned(&link, &det, &src, n, seed, 4).map_err(|e| e.to_string())?;
        ensure(serial == parallel, format!("seed {seed}: partitioned run differs"))?;
        for ((a, b, m), (_, _, e)) in serial.cells().zip(expected.cells()) {
            let label = |f: &str| format!("seed {seed} ({}, {}) {f}", a.label(), b.label());
            let fields: [(&str, fn(&CellTally) -> f64, f64); 5] = [
                ("pulses", |c| c.pulses, n as f64),
                ("one_detector_events", |c| c.one_detector_events, e.pulses),
                ("error_events", |c| c.error_events, e.pulses),
                ("accepted_pulses", |c| c.accepted_pulses, e.pulses),
                ("accepted_events", |c| c.accepted_events, e.accepted_pulses),
            ];
            for (name, get, trials) in fields {
                within_5_sigma(&label(name), get(m), get(e), trials)?;
                compared += 1;
            }
        }
    }
    Ok(format!("{compared} counts over 30 seeds within 5 sd; partitioned runs identical"))
}

fn criterion_7() -> Check {
    let (link, det, src, sec) = (
        desk_link(10.0),
        DetectorModel::experiment(),
        SourceParams::experiment(),
        SecurityParams::experiment(),
    );
    let (mut sound, mut feasible) = (0, 0);
    for seed in 0..100u64 {
        let t = monte_carlo_session_partitioned(&link, &det, &src, 1_000_000, 1000 + seed, 1)
            .map_err(|e| e.to_string())?;
        let d = decoy_bounds(&t, &src, &sec).map_err(|e| e.to_string())?;
        feasible += usize::from(d.feasible);
        sound += usize::from(d.n1_lower <= t.true_untagged() as f64);
    }
    ensure(sound >= 99, format!("sound in {sound}/100"))?;
    ensure(feasible >= 90, format!("only {feasible}/100 sessions gave a positive bound"))?;
    Ok(format!("sound in {sound}/100 sessions ({feasible} with a positive bound)"))
}

/// Checks one pairing run against the rules: Bob's pairs match distinct
/// ones with distinct zeros, as many as the minority count; survivors are
/// exactly the pairs of odd parity on Alice's side; distilled bits are the
/// first elements' bits.
fn check_pairing(a: &[u8], b: &[u8], seed: u64) -> Result<(), String> {
    let out = aopp(a, b, seed).map_err(|e| e.to_string())?;
    let ones = b.iter().filter(|&&x| x == 1).count();
    let want_pairs = ones.min(b.len() - ones);
    let mut used = vec![false; b.len()];
    if out.pairs.len() != want_pairs {
        return Err(format!("{a:?}/{b:?}: {} pairs, expected {want_pairs}", out.pairs.len()));
    }
    let (mut surv, mut bits_a, mut bits_b) = (Vec::new(), Vec::new(), Vec::new());
    for (k, p) in out.pairs.iter().enumerate() {
        if used[p.first] || used[p.second] || b[p.first] == b[p.second] {
            return Err(format!("{a:?}/{b:?}: invalid pair {p:?}"));
        }
        used[p.first] = true;
        used[p.second] = true;
        if a[p.first] != a[p.second] {
            surv.push(k);
            bits_a.push(a[p.first]);
            bits_b.push(b[p.first]);
        }
    }
    if out.survivors != surv || out.paired_bits_a != bits_a || out.paired_bits_b != bits_b {
        return Err(format!("{a:?}/{b:?}: survivors or distilled bits disagree"));
    }
    Ok(())
}

fn criterion_8() -> Check {
    let mut cases = 0u64;
    let (mut a, mut b) = (Vec::with_capacity(12), Vec::with_capacity(12));
    for n in 0..=12usize {
        for bm in 0u32..(1 << n) {
            for am in 0u32..(1 << n) {
                a.clear();
                b.clear();
                a.extend((0..n).map(|i| ((am >> i) & 1) as u8));
                b.extend((0..n).map(|i| ((bm >> i) & 1) as u8));
                check_pairing(&a, &b, cases)?;
                cases += 1;
            }
        }
    }

    let (link, det, src, sec) = (
        desk_link(20.0),
        DetectorModel::experiment(),
        SourceParams::experiment(),
        SecurityParams::experiment(),
    );
    let t = monte_carlo_session_partitioned(&link, &det, &src, 2_000_000, 8, 1).map_err(|e| e.to_string())?;
    let analysis = analyze_session(&t, &src, &sec, det.pulse_rate_hz, 9).map_err(|e| e.to_string())?;
    let (before, after) = (analysis.z_qber_before, analysis.aopp.qber_after);
    ensure((0.24..=0.29).contains(&before), format!("pre-pairing QBER {before:.4}"))?;
    ensure(after < before, format!("post-pairing QBER {after:.4} >= {before:.4}"))?;
    Ok(format!(
        "{cases} bit-string pairs checked; Monte Carlo QBER {:.2}% -> {:.2}%",
        before * 100.0,
        after * 100.0
    ))
}

fn criterion_9() -> Check {
    let (link, det, sec) = (LinkModel::experiment(), DetectorModel::experiment(), SecurityParams::experiment());
    let n = 1.007e13;
    let good = SourceParams::experiment();
    let r_good = evaluate(&good, &link, &det, &sec, n).map_err(|e| e.to_string())?;
    ensure(
        r_good > 0.0 && (r_good / 9.22e-10).max(9.22e-10 / r_good) <= 3.0,
        format!("rate at the operating point {r_good:.3e}"),
    )?;
    let space = SearchSpace::around(&good, 0.25);
    let patterns: [[f64; 7]; 4] = [
        [1.0; 7],
        [-1.0; 7],
        [1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0],
        [-1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0],
    ];
    let mut worst = f64::INFINITY;
    for s in patterns {
        let k = |i: usize| 1.0 + 0.2 * s[i];
        let start = SourceParams::from_free(
            good.mu1 * k(0),
            good.mu2 * k(1),
            good.muz * k(2),
            good.p_signal_window * k(3),
            good.p_mu1 * k(4),
            good.p_mu2 * k(5),
            good.epsilon_send * k(6),
        );
        let res = optimize_from(&[start], &space, &link, &det, &sec, n, 2000).map_err(|e| e.to_string())?;
        ensure(
            res.best_rate >= 0.99 * r_good,
            format!("perturbation {s:?}: {:.4e} vs {r_good:.4e}", res.best_rate),
        )?;
        worst = worst.min(res.best_rate / r_good);
    }
    let first = optimize_params(&space, &link, &det, &sec, n, 1500, 21).map_err(|e| e.to_string())?;
    let again = optimize_params(&space, &link, &det, &sec, n, 1500, 21).map_err(|e| e.to_string())?;
    ensure(first == again, "optimize_params differs between identical runs".into())?;
    Ok(format!(
        "operating point {r_good:.3e}/pulse; perturbed starts reach >= {worst:.4}x; deterministic"
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 9] = [
        ("key-rate formula on the 658.7 km aggregates", criterion_1),
        ("PLOB comparison at 106 dB", criterion_2),
        ("localization, source at Alice on 200 km", criterion_3),
        ("waveform recovery from reference counts", criterion_4),
        ("localization resolution on 500 km", criterion_5),
        ("Monte Carlo consistency", criterion_6),
        ("decoy bound soundness", criterion_7),
        ("AOPP oracle equivalence", criterion_8),
        ("optimizer sanity", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = check();
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {}: {name} ({detail}) [{secs:.2} s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {}: {name} ({why}) [{secs:.2} s]", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

