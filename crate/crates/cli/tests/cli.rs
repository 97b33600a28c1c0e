use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn tfqkd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tfqkd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn config_file(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    assert!(o.status.success(), "{}", stderr(o));
    serde_json::from_str(&stdout(o)).unwrap()
}

/// Rows of a CSV table as header-keyed string maps.
fn csv_rows(text: &str) -> Vec<Vec<(String, String)>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers: Vec<String> = r.headers().unwrap().iter().map(str::to_owned).collect();
    r.records()
        .map(|rec| headers.iter().cloned().zip(rec.unwrap().iter().map(str::to_owned)).collect())
        .collect()
}

fn field(row: &[(String, String)], name: &str) -> f64 {
    let v = &row.iter().find(|(k, _)| k == name).unwrap().1;
    v.parse().unwrap()
}

#[test]
fn aggregates_keyrate() {
    let cfg = configs().join("aggregates_658km.toml");
    let r = json(&tfqkd(&["keyrate", "--config", cfg.to_str().unwrap(), "--format", "json"]));
    let rate = r["rate_per_pulse"].as_f64().unwrap();
    assert!((rate / 9.22e-10 - 1.0).abs() < 0.1, "{rate}");
    let bps = r["rate_bps"].as_f64().unwrap();
    assert!((bps / 0.092 - 1.0).abs() < 0.1, "{bps}");
    assert_eq!(r["clamped"], Value::Bool(false));
    for term in ["privacy_term", "error_correction_term", "correctness_overhead", "privacy_amplification_overhead"] {
        assert!(r[term].as_f64().unwrap() > 0.0, "{term}");
    }
}

#[test]
fn zero_untagged_bits_is_negative_but_succeeds() {
    let dir = TempDir::new().unwrap();
    let cfg = config_file(
        &dir,
        "zero.toml",
        "[keyrate]\nn1_prime = 0.0\ne1_ph = 0.1336\nnt_prime = 558729.0\ne_z = 0.0212\nn_total = 1.007e13\n",
    );
    let o = tfqkd(&["keyrate", "--config", &cfg, "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let r = json(&o);
    assert!(r["rate_per_pulse"].as_f64().unwrap() < 0.0);
    assert_eq!(r["clamped"], Value::Bool(true));
}

#[test]
fn missing_field_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = config_file(&dir, "bad.toml", "[keyrate]\nn1_prime = 1.0\ne1_ph = 0.1\nnt_prime = 5.0\nn_total = 1e9\n");
    let o = tfqkd(&["keyrate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("e_z"), "{}", stderr(&o));
}

#[test]
fn invalid_value_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = config_file(
        &dir,
        "bad.toml",
        "[detector]\nefficiency = 1.5\ndark_rate_hz = 4.0\ngate_ns = 0.3\npulse_rate_hz = 1e8\n",
    );
    let o = tfqkd(&["simulate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("efficiency"), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
}

#[test]
fn missing_config_file_is_a_config_error() {
    let o = tfqkd(&["keyrate", "--config", "/nonexistent/run.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn far_link_is_infeasible() {
    let dir = TempDir::new().unwrap();
    let cfg = config_file(
        &dir,
        "far.toml",
        "[link]\nlength_a_km = 1500.0\nlength_b_km = 1500.0\natten_db_per_km = 0.161\n\
         station_loss_db = 1.3\nnoise_per_pulse = 6e-9\n\
         [optimize]\nbudget = 100\nn_pulses = 1e10\n\
         [session]\nn_pulses = 1e10\nmode = \"expected\"\n",
    );
    assert_eq!(tfqkd(&["optimize", "--config", &cfg]).status.code(), Some(3));
    let o = tfqkd(&["keyrate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(3));
    // The report is still printed before the failure.
    assert!(stdout(&o).contains("decoy_feasible"));
}

#[test]
fn experiment_session_keyrate_is_positive() {
    let cfg = configs().join("experiment.toml");
    let r = json(&tfqkd(&["keyrate", "--config", cfg.to_str().unwrap(), "--format", "json"]));
    let z = r["z_qber_before"].as_f64().unwrap();
    assert!((0.24..=0.29).contains(&z), "{z}");
    assert!(r["rate_per_pulse"].as_f64().unwrap() > 0.0);
    assert_eq!(r["decoy_feasible"], Value::Bool(true));
}

#[test]
fn curve_columns() {
    let cfg = configs().join("curve.toml");
    let o = tfqkd(&["curve", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&stdout(&o));
    let names: Vec<&str> = rows[0].iter().map(|(k, _)| k.as_str()).collect();
    assert_eq!(names, ["distance_km", "loss_db", "simulated_rate", "plob_absolute", "plob_relative"]);

    let at = |d: f64| rows.iter().find(|r| field(r, "distance_km") == d).unwrap();
    assert!(field(at(658.7), "simulated_rate") > 0.0);
    assert!(field(at(658.7), "simulated_rate") > field(at(658.7), "plob_absolute"));
    let zero = at(0.0);
    assert!(field(zero, "plob_absolute").is_infinite());
    assert!(field(zero, "simulated_rate") < field(zero, "plob_relative"));

    let rates: Vec<f64> = rows.iter().map(|r| field(r, "simulated_rate")).collect();
    assert!(rates.windows(2).all(|w| w[1] <= w[0]), "{rates:?}");
    for r in &rows {
        assert!(field(r, "plob_relative") <= field(r, "plob_absolute"));
    }
}

#[test]
fn plob_values() {
    let o = tfqkd(&["plob", "--loss-db", "106", "--eta", "1", "--format", "json"]);
    let v = json(&o);
    let rows = v.as_array().unwrap();
    let p = rows[0]["plob"].as_f64().unwrap();
    assert!((p / 3.62e-11 - 1.0).abs() < 0.01, "{p}");
    assert_eq!(rows[1]["plob"], Value::Null);
    assert_eq!(tfqkd(&["plob", "--eta", "1.5"]).status.code(), Some(2));
}

fn sense(cfg: &str, dir: &Path) -> Value {
    let cfg = configs().join(cfg);
    json(&tfqkd(&[
        "sense",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
        "--format",
        "json",
    ]))
}

#[test]
fn sense_locates_source_at_alice() {
    let dir = TempDir::new().unwrap();
    let r = sense("sense_alice_end.toml", dir.path());
    let pos = r["position_from_bob_km"].as_f64().unwrap();
    assert!((pos - 200.0).abs() <= 1.0, "{pos}");
    let delay = r["delay_s"].as_f64().unwrap();
    assert!((delay - 1e-3).abs() <= 5e-6, "{delay}");
    assert_eq!(r["clamped"], Value::Bool(false));
    for f in ["trace_alice.txt", "trace_bob.txt", "recovered_waveform.txt", "localization.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let bob = fs::read_to_string(dir.path().join("trace_bob.txt")).unwrap();
    assert!(bob.starts_with("# sample_rate_hz=200000 origin=bob\ntime_s,phase_rad\n"));
    assert_eq!(bob.lines().count(), 2 + 200_000);
}

#[test]
fn sense_midpoint_has_zero_delay() {
    let dir = TempDir::new().unwrap();
    let r = sense("sense_midpoint.toml", dir.path());
    assert!(r["delay_s"].as_f64().unwrap().abs() < 2.5e-6);
    assert!((r["position_from_bob_km"].as_f64().unwrap() - 100.0).abs() < 1.0);
}

#[test]
fn sense_tone_peak() {
    let dir = TempDir::new().unwrap();
    let r = sense("sense_1khz.toml", dir.path());
    let f = r["recovered_peak_hz"].as_f64().unwrap();
    assert!((f / 1000.0 - 1.0).abs() < 0.01, "{f}");
    let pos = r["position_from_alice_km"].as_f64().unwrap();
    assert!((pos - 50.0).abs() <= 1.0, "{pos}");
}

#[test]
fn sense_rejects_aliased_source() {
    let dir = TempDir::new().unwrap();
    let text = fs::read_to_string(configs().join("sense_1khz.toml"))
        .unwrap()
        .replace("sample_rate_hz = 2e5", "sample_rate_hz = 1500.0");
    let cfg = config_file(&dir, "alias.toml", &text);
    let o = tfqkd(&["sense", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn repeated_runs_are_byte_identical() {
    let desk = configs().join("desk.toml");
    let desk = desk.to_str().unwrap();
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for d in [&a, &b] {
        let o = tfqkd(&["simulate", "--config", desk, "--out", d.path().to_str().unwrap(), "--format", "json"]);
        assert!(o.status.success(), "{}", stderr(&o));
        let o = tfqkd(&["sense", "--config", configs().join("sense_midpoint.toml").to_str().unwrap(), "--out", d.path().to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(dir_contents(a.path()), dir_contents(b.path()));

    let other = tfqkd(&["simulate", "--config", desk, "--seed", "8"]);
    let again = tfqkd(&["simulate", "--config", desk, "--seed", "7"]);
    let base = tfqkd(&["simulate", "--config", desk]);
    assert_eq!(base.stdout, again.stdout);
    assert_ne!(base.stdout, other.stdout);
}

#[test]
fn reports_round_trip() {
    let cfg = configs().join("experiment.toml");
    let cfg = cfg.to_str().unwrap();

    let text = stdout(&tfqkd(&["keyrate", "--config", cfg, "--format", "json"]));
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string_pretty(&v).unwrap() + "\n", text);

    let text = stdout(&tfqkd(&["curve", "--config", configs().join("curve.toml").to_str().unwrap()]));
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(r.headers().unwrap()).unwrap();
    for rec in r.records() {
        let rec = rec.unwrap();
        // Values parse as numbers and print back to the same text.
        for cell in rec.iter() {
            let x: f64 = cell.parse().unwrap();
            let back = if x.is_infinite() { "inf".to_owned() } else { format!("{x:.9e}") };
            assert_eq!(back, cell);
        }
        w.write_record(&rec).unwrap();
    }
    assert_eq!(String::from_utf8(w.into_inner().unwrap()).unwrap(), text);
}

#[test]
fn optimize_writes_source_block() {
    let dir = TempDir::new().unwrap();
    let cfg = config_file(&dir, "opt.toml", "seed = 2\n[optimize]\nbudget = 300\nn_pulses = 1.007e13\n");
    let out = dir.path().join("out");
    let o = tfqkd(&["optimize", "--config", &cfg, "--out", out.to_str().unwrap(), "--format", "json"]);
    let r = json(&o);
    assert!(r["best_rate"].as_f64().unwrap() > 1e-9);
    assert!(r["evaluations"].as_u64().unwrap() <= 300);

    // The written block is a valid [source] section that reproduces the rate.
    let block = fs::read_to_string(out.join("source.toml")).unwrap();
    let cfg2 = config_file(&dir, "again.toml", &block);
    let k = json(&tfqkd(&["keyrate", "--config", &cfg2, "--format", "json"]));
    let rate = k["rate_per_pulse"].as_f64().unwrap();
    assert!((rate / r["best_rate"].as_f64().unwrap() - 1.0).abs() < 1e-6, "{rate}");
}

#[test]
fn config_format_and_out_apply_without_flags() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("res");
    let cfg = config_file(
        &dir,
        "fmt.toml",
        &format!("format = \"json\"\nout = {:?}\n", out.to_str().unwrap()),
    );
    let o = tfqkd(&["plob", "--config", &cfg, "--loss-db", "10"]);
    assert!(stdout(&o).trim_start().starts_with('['));
    assert!(out.join("plob.json").exists());
    let o = tfqkd(&["plob", "--config", &cfg, "--loss-db", "10", "--format", "csv"]);
    assert!(stdout(&o).starts_with("loss_db,eta,plob"));
}
