use std::f64::consts::FRAC_PI_2;
use std::fs;
use std::io::BufWriter;
use std::path::Path;

use tfqkd_core::optimize::{evaluate, optimize_params};
use tfqkd_core::security::{
    analyze_expected, analyze_session, plob_bound, KeyRateReport, SessionAnalysis,
};
use tfqkd_core::sensing::{
    dominant_frequency, localize, recover_phase_from_reference, reference_counts,
    simulate_phase_traces, PhaseTrace,
};
use tfqkd_core::simulate::{expected_tallies, monte_carlo_session, SessionTally};
use tfqkd_core::{transmittance, LinkModel, SourceParams};

use crate::config::{RunConfig, SessionMode};
use crate::error::CliError;
use crate::output::{emit, Cell, Format, Table};

pub struct Ctx<'a> {
    pub cfg: &'a RunConfig,
    pub seed: u64,
    pub format: Format,
    pub out: Option<&'a Path>,
}

fn report_fields(r: &KeyRateReport) -> Vec<(&'static str, Cell)> {
    vec![
        ("n1_prime", r.n1_prime.into()),
        ("e1_ph", r.e1_ph.into()),
        ("nt_prime", r.nt_prime.into()),
        ("e_z", r.e_z.into()),
        ("n_total", r.n_total.into()),
        ("privacy_term", r.terms.privacy.into()),
        ("error_correction_term", r.terms.error_correction.into()),
        ("correctness_overhead", r.terms.correctness_overhead.into()),
        ("privacy_amplification_overhead", r.terms.privacy_amplification_overhead.into()),
        ("rate_per_pulse", r.rate_per_pulse.into()),
        ("rate_bps", r.rate_bps.into()),
        ("clamped", r.is_clamped().into()),
    ]
}

fn simulate_tally(ctx: &Ctx) -> Result<SessionTally, CliError> {
    let cfg = ctx.cfg;
    let session = cfg.session();
    let link = cfg.session_link()?;
    let (det, src) = (cfg.detector(), cfg.source());
    Ok(match session.mode {
        SessionMode::Expected => expected_tallies(&link, &det, &src, session.n_pulses)?,
        SessionMode::MonteCarlo => {
            monte_carlo_session(&link, &det, &src, session.n_pulses.round() as u64, ctx.seed)?
        }
    })
}

fn analyze(ctx: &Ctx, tally: &SessionTally) -> Result<SessionAnalysis, CliError> {
    let cfg = ctx.cfg;
    let (src, sec, rate) = (cfg.source(), cfg.security(), cfg.detector().pulse_rate_hz);
    Ok(match cfg.session().mode {
        SessionMode::Expected => analyze_expected(tally, &src, &sec, rate)?,
        SessionMode::MonteCarlo => analyze_session(tally, &src, &sec, rate, ctx.seed)?,
    })
}

/// Key rate from raw inputs, or from a simulated session when the config
/// has no `[keyrate]` section.
pub fn keyrate(ctx: &Ctx) -> Result<(), CliError> {
    ctx.cfg.validate_keyrate()?;
    let sec = ctx.cfg.security();
    let pulse_rate = ctx.cfg.detector().pulse_rate_hz;
    if let Some(inputs) = &ctx.cfg.keyrate {
        let report = KeyRateReport::new(inputs, &sec, pulse_rate)?;
        return emit(&Table::record(report_fields(&report)), "keyrate", ctx.format, ctx.out);
    }
    let tally = simulate_tally(ctx)?;
    let a = analyze(ctx, &tally)?;
    let mut fields = vec![
        ("z_qber_before", a.z_qber_before.into()),
        ("x_qber", a.x_qber.into()),
        ("n1_lower", a.decoy.n1_lower.into()),
        ("e1ph_upper", a.decoy.e1ph_upper.into()),
        ("decoy_feasible", a.feasible().into()),
    ];
    fields.extend(report_fields(&a.report));
    emit(&Table::record(fields), "keyrate", ctx.format, ctx.out)?;
    if !a.feasible() {
        return Err(CliError::Infeasible(
            "decoy bounds give no positive single-photon yield".into(),
        ));
    }
    Ok(())
}

pub fn simulate(ctx: &Ctx) -> Result<(), CliError> {
    ctx.cfg.validate_qkd()?;
    ctx.cfg.validate_session()?;
    let tally = simulate_tally(ctx)?;
    let mut t = Table::new(&[
        "alice",
        "bob",
        "pulses",
        "one_detector_events",
        "error_events",
        "accepted_pulses",
        "accepted_events",
    ]);
    for (a, b, c) in tally.cells() {
        t.push(vec![
            a.label().into(),
            b.label().into(),
            c.pulses.into(),
            c.one_detector_events.into(),
            c.error_events.into(),
            c.accepted_pulses.into(),
            c.accepted_events.into(),
        ]);
    }
    emit(&t, "tally", ctx.format, ctx.out)?;
    if let Some(dir) = ctx.out {
        let summary = Table::record(vec![
            ("n_pulses", tally.n_pulses.into()),
            ("total_heralded", tally.total_heralded().into()),
            ("z_heralded", tally.z_heralded().into()),
            ("z_qber", tally.z_qber().into()),
            ("x_qber", tally.x_qber().into()),
            ("true_untagged", tally.true_untagged().into()),
        ]);
        fs::write(
            dir.join(format!("summary.{}", ctx.format.extension())),
            summary.encode(ctx.format)?,
        )?;
    }
    Ok(())
}

/// Symmetric link of `distance_km` sharing the configured fiber, station
/// and noise parameters.
fn link_at(base: &LinkModel, distance_km: f64) -> LinkModel {
    LinkModel {
        length_a_km: distance_km / 2.0,
        length_b_km: distance_km / 2.0,
        ..*base
    }
}

fn plob_or_inf(eta: f64) -> f64 {
    plob_bound(eta).unwrap_or(f64::INFINITY)
}

pub fn curve(ctx: &Ctx) -> Result<(), CliError> {
    ctx.cfg.validate_curve()?;
    let cfg = ctx.cfg;
    let (base, det, src, sec) = (cfg.link(), cfg.detector(), cfg.source(), cfg.security());
    let c = cfg.curve();
    let mut t = Table::new(&["distance_km", "loss_db", "simulated_rate", "plob_absolute", "plob_relative"]);
    for &d in &c.distances_km {
        let link = link_at(&base, d);
        let loss_db = link.fiber_loss_db();
        let rate = evaluate(&src, &link, &det, &sec, c.n_pulses)?;
        let eta = transmittance(loss_db)?;
        // Same channel with the station loss and detector efficiency included.
        let eta_rel = eta * transmittance(link.station_loss_db)? * det.efficiency;
        t.push(vec![
            d.into(),
            loss_db.into(),
            rate.max(0.0).into(),
            plob_or_inf(eta).into(),
            plob_or_inf(eta_rel).into(),
        ]);
    }
    emit(&t, "curve", ctx.format, ctx.out)
}

fn source_fields(p: &SourceParams) -> Vec<(&'static str, Cell)> {
    vec![
        ("mu1", p.mu1.into()),
        ("mu2", p.mu2.into()),
        ("muz", p.muz.into()),
        ("p_decoy_window", p.p_decoy_window.into()),
        ("p_signal_window", p.p_signal_window.into()),
        ("p_mu1", p.p_mu1.into()),
        ("p_mu2", p.p_mu2.into()),
        ("p_vac", p.p_vac.into()),
        ("epsilon_send", p.epsilon_send.into()),
        ("misalignment", p.misalignment.into()),
        ("slice_half_width", p.slice_half_width.into()),
    ]
}

pub fn optimize(ctx: &Ctx) -> Result<(), CliError> {
    ctx.cfg.validate_optimize()?;
    let cfg = ctx.cfg;
    let o = cfg.optimize();
    let det = cfg.detector();
    let res = optimize_params(
        &cfg.search_space(),
        &cfg.link(),
        &det,
        &cfg.security(),
        o.n_pulses,
        o.budget,
        ctx.seed,
    )?;
    if res.best_rate == f64::NEG_INFINITY {
        return Err(CliError::Infeasible("no feasible point in the search space".into()));
    }
    let mut fields = vec![
        ("best_rate", res.best_rate.into()),
        ("rate_bps", (res.best_rate * det.pulse_rate_hz).into()),
        ("evaluations", res.evaluations.into()),
        ("start_index", res.start_index.into()),
    ];
    fields.extend(source_fields(&res.best_params));
    emit(&Table::record(fields), "optimize", ctx.format, ctx.out)?;
    if let Some(dir) = ctx.out {
        // Ready to paste into a config file.
        let mut block = String::from("[source]\n");
        for (name, cell) in source_fields(&res.best_params) {
            if let Cell::Real(x) = cell {
                block.push_str(&format!("{name} = {x:?}\n"));
            }
        }
        fs::write(dir.join("source.toml"), block)?;
    }
    Ok(())
}

fn write_trace(dir: &Path, name: &str, t: &PhaseTrace) -> Result<(), CliError> {
    let f = fs::File::create(dir.join(name))?;
    t.write_to(BufWriter::new(f))?;
    Ok(())
}

/// Simulates the sensing scenario, writes both end traces and the
/// waveform recovered from reference-pulse counts at Bob, and localizes
/// the source.
pub fn sense(ctx: &Ctx) -> Result<(), CliError> {
    ctx.cfg.validate_sensing()?;
    let s = ctx.cfg.sensing();
    let geom = s.geometry();
    let (alice, bob) =
        simulate_phase_traces(&geom, &s.sources, s.sample_rate_hz, s.duration_s, s.noise(), ctx.seed)?;
    let biased: Vec<f64> = bob.samples().iter().map(|p| p + FRAC_PI_2).collect();
    let frames = reference_counts(&biased, s.photons_per_frame, ctx.seed ^ 0x5eed)?;
    let rec = recover_phase_from_reference(&frames, s.sample_rate_hz, bob.origin())?;
    let recovered = PhaseTrace::new(
        rec.samples().iter().map(|p| p - FRAC_PI_2).collect(),
        rec.sample_rate_hz(),
        rec.origin(),
    )?;
    let loc = localize(&alice, &bob, &geom)?;
    let peak_hz = dominant_frequency(&recovered)?;

    let dir = ctx.out.unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    write_trace(dir, "trace_alice.txt", &alice)?;
    write_trace(dir, "trace_bob.txt", &bob)?;
    write_trace(dir, "recovered_waveform.txt", &recovered)?;
    let record = Table::record(vec![
        ("delay_s", loc.delay_s.into()),
        ("position_from_bob_km", loc.position_from_bob_km.into()),
        ("position_from_alice_km", loc.position_from_alice_km().into()),
        ("correlation_peak", loc.correlation_peak.into()),
        ("clamped", loc.clamped.into()),
        ("recovered_peak_hz", peak_hz.into()),
    ]);
    emit(&record, "localization", ctx.format, Some(dir))
}

pub fn plob(ctx: &Ctx, loss_db: &[f64], eta: &[f64]) -> Result<(), CliError> {
    let mut etas: Vec<(f64, f64)> = Vec::new();
    for &db in loss_db {
        etas.push((db, transmittance(db)?));
    }
    for &e in eta {
        if !(0.0..=1.0).contains(&e) {
            return Err(CliError::Config(format!("invalid parameter `eta`: {e} is not a probability")));
        }
        etas.push((-10.0 * e.log10(), e));
    }
    if etas.is_empty() {
        ctx.cfg.link().validate()?;
        let db = ctx.cfg.link().fiber_loss_db();
        etas.push((db, transmittance(db)?));
    }
    let mut t = Table::new(&["loss_db", "eta", "plob"]);
    for (db, e) in etas {
        t.push(vec![(db + 0.0).into(), e.into(), plob_or_inf(e).into()]);
    }
    emit(&t, "plob", ctx.format, ctx.out)
}
