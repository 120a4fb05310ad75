use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sdr_core::{build_spectrum, variance_exact, AcquisitionParams, Geometry, PulseSequence, SpectrumMode};

const FIG3: &str = r#"
[geometry]
kind = "cylinder"
diameter_um = 5.0
d0_um2_per_ms = 2.3

[acquisition]
gradient_g_per_cm = 21.6

[sequence]
kind = "sdr"
n_pulses = 8
te_ms = 80.0
x_points = 50
"#;

fn sdr(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_sdr"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap()
}

fn ok(out: Output) -> Output {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn out_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

#[test]
fn predict_fig3_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_path(dir.path(), "p.csv");
    ok(sdr(dir.path(), FIG3, &["predict", "--out", out.to_str().unwrap()]));
    let (header, rows) = read_csv(&out);
    assert_eq!(header, ["x_delay_s", "magnetization"]);
    assert_eq!(rows.len(), 50);

    let geom = Geometry::cylinder(5e-6, 2.3e-9).unwrap();
    let spec = build_spectrum(&geom, &AcquisitionParams::proton(0.216).unwrap(), SpectrumMode::Single).unwrap();
    let hahn = variance_exact(&PulseSequence::hahn(0.08).unwrap(), &spec).magnetization;
    assert!((rows[0][1] / hahn - 1.0).abs() < 1e-3, "{} vs Hahn {hahn}", rows[0][1]);

    let cpmg = ok(sdr(dir.path(), FIG3, &["predict", "--cpmg"]));
    let cpmg: f64 = String::from_utf8(cpmg.stdout).unwrap().trim().parse().unwrap();
    assert_eq!(rows[49][0], 0.01);
    assert_eq!(rows[49][1], cpmg);

    let meta = std::fs::read_to_string(dir.path().join("p.csv.meta.toml")).unwrap();
    assert!(meta.contains("version = \"0.1.0\""));
    assert!(meta.contains("tau_c_s"));
    assert!(meta.contains("diameter_um = 5.0"));
}

#[test]
fn predict_zero_gradient_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_path(dir.path(), "p.csv");
    let cfg = FIG3.replace("21.6", "0.0");
    ok(sdr(dir.path(), &cfg, &["predict", "--out", out.to_str().unwrap()]));
    let (_, rows) = read_csv(&out);
    assert!(rows.iter().all(|r| r[1] == 1.0));
}

#[test]
fn spectrum_mode_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let single = out_path(dir.path(), "s.csv");
    let multi = out_path(dir.path(), "m.csv");
    ok(sdr(dir.path(), FIG3, &["spectrum", "--out", single.to_str().unwrap()]));
    ok(sdr(
        dir.path(),
        FIG3,
        &[
            "spectrum",
            "--spectrum-mode",
            "multi:4",
            "--out",
            multi.to_str().unwrap(),
        ],
    ));
    let (header, s) = read_csv(&single);
    assert_eq!(header, ["omega_rad_s", "s_omega_s"]);
    let tau_c = 0.26f64.powi(2) * 25e-12 / 2.3e-9;
    assert_eq!(s[0][0], 0.0);
    assert!((s[0][1] / (tau_c / std::f64::consts::PI) - 1.0).abs() < 1e-12);
    let (_, m) = read_csv(&multi);
    assert_ne!(s[0][1], m[0][1]);
    let bad = sdr(dir.path(), FIG3, &["spectrum", "--spectrum-mode", "multi:x"]);
    assert!(!bad.status.success());
}

const SIM: &str = r#"
[geometry]
kind = "cylinder"
diameter_um = 5.0

[acquisition]
gradient_g_per_cm = 21.6

[sequence]
kind = "cpmg"
n_pulses = 8
te_list_ms = [10.0, 20.0, 40.0]

[walk]
n_walkers = 2000
seed = 3
"#;

#[test]
fn simulate_is_deterministic_across_workers() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for (i, workers) in ["1", "8", "8"].iter().enumerate() {
        let out = out_path(dir.path(), &format!("s{i}.csv"));
        ok(sdr(
            dir.path(),
            SIM,
            &["simulate", "--workers", workers, "--out", out.to_str().unwrap()],
        ));
        files.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(files[0], files[1]);
    assert_eq!(files[1], files[2]);
    let (header, rows) = read_csv(&dir.path().join("s0.csv"));
    assert_eq!(header, ["te_s", "magnetization", "stderr"]);
    assert_eq!(rows.len(), 3);

    let other = out_path(dir.path(), "seed.csv");
    ok(sdr(
        dir.path(),
        SIM,
        &["simulate", "--seed", "4", "--out", other.to_str().unwrap()],
    ));
    assert_ne!(std::fs::read(&other).unwrap(), files[0]);
}

#[test]
fn simulate_free_hahn_matches_closed_form() {
    let cfg = r#"
[geometry]
kind = "free"

[acquisition]
gradient_g_per_cm = 30.0

[sequence]
kind = "hahn"
te_list_ms = [20.0, 40.0]

[walk]
dt_ms = 0.1
n_walkers = 20000
seed = 8
"#;
    let dir = tempfile::tempdir().unwrap();
    let out = out_path(dir.path(), "f.csv");
    ok(sdr(dir.path(), cfg, &["simulate", "--out", out.to_str().unwrap()]));
    let (_, rows) = read_csv(&out);
    let gg = 2.675221e8 * 0.3;
    for r in rows {
        let expected = (-gg * gg * 2.3e-9 * r[0].powi(3) / 12.0).exp();
        assert!((r[1] - expected).abs() <= 3.0 * r[2], "{r:?} vs {expected}");
    }
}

#[test]
fn step_size_error_suggests_dt() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SIM.replace("[walk]", "[walk]\ndt_ms = 0.1");
    let out = sdr(
        dir.path(),
        &cfg,
        &["simulate", "--out", dir.path().join("x.csv").to_str().unwrap()],
    );
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("try dt <="), "{err}");
}

#[test]
fn fit_round_trip_and_sorting() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = FIG3.replace("x_points = 50", "x_points = 20");
    let pred = out_path(dir.path(), "p.csv");
    ok(sdr(dir.path(), &cfg, &["predict", "--out", pred.to_str().unwrap()]));
    let (_, rows) = read_csv(&pred);
    // Reverse the rows to exercise canonicalization.
    let mut text = String::from("x_delay_s,signal\n");
    for r in rows.iter().rev() {
        text.push_str(&format!("{},{}\n", r[0], 0.8 * r[1]));
    }
    let data = out_path(dir.path(), "data.csv");
    std::fs::write(&data, text).unwrap();
    let report = out_path(dir.path(), "fit.json");
    let out = ok(sdr(
        dir.path(),
        &cfg,
        &["fit", data.to_str().unwrap(), "--out", report.to_str().unwrap()],
    ));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let d = json["diameter_um"].as_f64().unwrap();
    assert!((d / 5.0 - 1.0).abs() < 0.01, "{d}");
    assert_eq!(json["rows_sorted"], true);
    assert_eq!(json["converged"], true);
    let xs = json["x_delay_s"].as_array().unwrap();
    assert!(xs.windows(2).all(|w| w[0].as_f64() < w[1].as_f64()));
    assert_eq!(json["model"].as_array().unwrap().len(), 20);
    assert!(dir.path().join("fit.json.meta.toml").exists());
}

#[test]
fn fit_reports_bad_rows_and_short_data() {
    let dir = tempfile::tempdir().unwrap();
    let data = out_path(dir.path(), "bad.csv");
    std::fs::write(&data, "x_delay_s,signal\n0.001,1.0\n0.002,oops\n").unwrap();
    let out = sdr(
        dir.path(),
        FIG3,
        &[
            "fit",
            data.to_str().unwrap(),
            "--out",
            dir.path().join("f.json").to_str().unwrap(),
        ],
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 3"));

    std::fs::write(&data, "x_delay_s,signal\n0.001,1.0\n0.002,0.9\n0.003,0.8\n").unwrap();
    let out = sdr(
        dir.path(),
        FIG3,
        &[
            "fit",
            data.to_str().unwrap(),
            "--out",
            dir.path().join("f.json").to_str().unwrap(),
        ],
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("insufficient data"));
}

#[test]
fn msd_plateau_and_free_slope() {
    let dir = tempfile::tempdir().unwrap();
    let cyl = r#"
[geometry]
kind = "cylinder"
diameter_um = 5.0

[walk]
n_walkers = 20000
seed = 2
msd_points = 20
"#;
    let out = out_path(dir.path(), "m.csv");
    ok(sdr(dir.path(), cyl, &["msd", "--out", out.to_str().unwrap()]));
    let (header, rows) = read_csv(&out);
    assert_eq!(header, ["t_s", "msd_m2", "stderr_m2"]);
    let last = rows.last().unwrap();
    let plateau = 25e-12 / 8.0;
    assert!((last[1] - plateau).abs() <= 3.0 * last[2], "{last:?} vs {plateau}");

    let norm = out_path(dir.path(), "n.csv");
    ok(sdr(
        dir.path(),
        cyl,
        &["msd", "--normalize", "--out", norm.to_str().unwrap()],
    ));
    let (header, _) = read_csv(&norm);
    assert_eq!(header[1], "msd_over_lc2");

    let free = r#"
[geometry]
kind = "free"

[walk]
dt_ms = 0.05
duration_ms = 10.0
n_walkers = 20000
seed = 2
msd_points = 10
"#;
    ok(sdr(dir.path(), free, &["msd", "--out", out.to_str().unwrap()]));
    let (_, rows) = read_csv(&out);
    for r in rows {
        let expected = 2.0 * 2.3e-9 * r[0];
        assert!((r[1] - expected).abs() <= 4.0 * r[2], "{r:?} vs {expected}");
    }
}

#[test]
fn missing_config_and_bad_field() {
    let out = Command::new(env!("CARGO_BIN_EXE_sdr")).arg("predict").output().unwrap();
    assert!(!out.status.success());
    let dir = tempfile::tempdir().unwrap();
    let out = sdr(dir.path(), "[geometry]\nkind = \"cylinder\"\ndiam = 5\n", &["predict"]);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(!out.status.success());
    assert!(err.contains("diam") && err.contains("line 3"), "{err}");
}
