use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qdrap::cli::{csv_to_json, json_to_csv};
use qdrap::photonstats::CoincidenceHistogram;
use qdrap::sweep::PowerCurve;
use serde_json::Value;

fn qdrap(args: &[&str], cfg: Option<&Path>, out: &Path) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_qdrap"));
    c.args(args).arg("--out").arg(out);
    if let Some(p) = cfg {
        c.arg("--config").arg(p);
    }
    c.output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn fixture_histogram() -> CoincidenceHistogram {
    let t = 1e3 / 82.0;
    let mut h = CoincidenceHistogram::new(0.05, t, 4.5 * t).unwrap();
    for k in -4i64..=4 {
        let i = h.bin_of(k as f64 * t).unwrap();
        h.counts[i] = if k == 0 { 36 } else { 12000 };
    }
    h
}

#[test]
fn g2_from_fixture_histogram() {
    let tmp = tempfile::tempdir().unwrap();
    let mut csv = Vec::new();
    fixture_histogram().write_csv(&mut csv).unwrap();
    let hist = tmp.path().join("hist.csv");
    fs::write(&hist, &csv).unwrap();
    let cfg = write(
        tmp.path(),
        "g2.json",
        &format!(r#"{{"g2": {{"histogram": {:?}, "window_ns": 3.2, "n_side_peaks": 6}}}}"#, hist),
    );
    let out = tmp.path().join("out");
    let o = qdrap(&["g2"], Some(&cfg), &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&out.join("g2.json"));
    assert_eq!(r["g2"].as_f64().unwrap(), 0.003);
    assert_eq!(r["zero_peak"], 36);

    // the same histogram stored as a JSON table
    let table = csv_to_json(std::str::from_utf8(&csv).unwrap()).unwrap();
    let hist_json = tmp.path().join("hist.json");
    fs::write(&hist_json, table.to_string()).unwrap();
    let cfg = write(
        tmp.path(),
        "g2b.json",
        &format!(r#"{{"g2": {{"histogram": {:?}, "window_ns": 3.2, "n_side_peaks": 6}}}}"#, hist_json),
    );
    let out2 = tmp.path().join("out2");
    assert!(qdrap(&["g2"], Some(&cfg), &out2).status.success());
    assert_eq!(json(&out2.join("g2.json"))["g2"].as_f64().unwrap(), 0.003);
}

#[test]
fn missing_key_is_named_and_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "bad.json",
        r#"{"pulse": {"shape": "sech", "area_pi": 1.0}, "scan": {"areas_pi": [0.5, 1.0]}}"#,
    );
    let o = qdrap(&["rabi"], Some(&cfg), &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("pulse.fwhm_ps"), "{err}");
}

#[test]
fn invalid_value_and_unknown_key_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let neg = write(tmp.path(), "neg.json", r#"{"pulse": {"fwhm_ps": -3.0}}"#);
    let o = qdrap(&["dressed", "--paper-defaults"], Some(&neg), &tmp.path().join("a"));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("pulse.fwhm_ps"));

    let typo = write(tmp.path(), "typo.json", r#"{"hbt": {"n_pulse": 10}}"#);
    let o = qdrap(&["hbt", "--paper-defaults"], Some(&typo), &tmp.path().join("b"));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("hbt.n_pulse"));

    let o = qdrap(&["gdd", "--paper-defaults"], None, &tmp.path().join("c"));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("stretcher"));
}

#[test]
fn rabi_curve_round_trips_and_manifest_lists_it() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", r#"{"scan": {"areas_pi": {"start": 0.0, "stop": 2.0, "points": 5}}}"#);
    let out = tmp.path().join("out");
    let o = qdrap(&["rabi", "--paper-defaults", "--threads", "1"], Some(&cfg), &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let curve = PowerCurve::read_csv(fs::read(out.join("rabi.csv")).unwrap().as_slice(), 0.0).unwrap();
    assert_eq!(curve.area_pi, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
    assert!(curve.p_e[2] > 0.95);

    let m = json(&out.join("manifest.json"));
    assert_eq!(m["subcommand"], "rabi");
    assert_eq!(m["seed"], 12345);
    assert_eq!(m["artifacts"][0], "rabi.csv");
    assert_eq!(m["config"]["pulse"]["fwhm_ps"], 3.0);
    assert!(m["config"]["output"].get("dir").is_none());
}

#[test]
fn json_format_matches_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", r#"{"hbt": {"n_pulses": 20000}}"#);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(qdrap(&["hbt", "--paper-defaults"], Some(&cfg), &a).status.success());
    assert!(qdrap(&["hbt", "--paper-defaults", "--format", "json"], Some(&cfg), &b).status.success());
    let csv = fs::read_to_string(a.join("hbt_histogram.csv")).unwrap();
    let table = json(&b.join("hbt_histogram.json"));
    assert_eq!(json_to_csv(&table).unwrap(), csv);
    assert_eq!(json(&a.join("g2.json")), json(&b.join("g2.json")));
}

#[test]
fn seed_changes_monte_carlo_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", r#"{"hbt": {"n_pulses": 20000}}"#);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(qdrap(&["hbt", "--paper-defaults", "--seed", "1"], Some(&cfg), &a).status.success());
    assert!(qdrap(&["hbt", "--paper-defaults", "--seed", "2"], Some(&cfg), &b).status.success());
    assert_ne!(fs::read(a.join("hbt_histogram.csv")).unwrap(), fs::read(b.join("hbt_histogram.csv")).unwrap());
}

#[test]
fn spectrum_fit_recovers_widths() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    assert!(qdrap(&["spectrum", "--paper-defaults"], None, &out).status.success());
    let fit = json(&out.join("voigt_fit.json"));
    let l = fit["params"]["lorentzian_fwhm_ghz"].as_f64().unwrap();
    let g = fit["params"]["gaussian_fwhm_ghz"].as_f64().unwrap();
    assert!((l - 0.48).abs() < 0.05 && (g - 0.55).abs() < 0.05, "{l} {g}");

    // refit the written spectrum from disk
    let cfg = write(
        tmp.path(),
        "refit.json",
        &format!(r#"{{"spectrum": {{"input": {:?}}}}}"#, out.join("spectrum.csv")),
    );
    let out2 = tmp.path().join("out2");
    assert!(qdrap(&["spectrum"], Some(&cfg), &out2).status.success());
    assert_eq!(json(&out2.join("voigt_fit.json")), fit);
}

#[test]
fn gdd_from_stretcher() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "s.json",
        r#"{"stretcher": {"groove_density_per_mm": 1500, "wavelength_nm": 920,
            "incidence_angle_deg": 45, "effective_separation_mm": 20}}"#,
    );
    let out = tmp.path().join("out");
    assert!(qdrap(&["gdd"], Some(&cfg), &out).status.success());
    let g = json(&out.join("gdd.json"))["gdd_ps2"].as_f64().unwrap();
    assert!(g < 0.0 && g.is_finite());
}

#[test]
fn zero_threads_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let o = qdrap(&["spectrum", "--paper-defaults", "--threads", "0"], None, tmp.path());
    assert_eq!(o.status.code(), Some(1));
}
