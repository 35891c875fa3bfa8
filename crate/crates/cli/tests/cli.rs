use std::f64::consts::{LN_2, PI};
use std::path::Path;
use std::process::{Command, Output};

fn spdc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spdc")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// (header, rows) of a CSV body, metadata lines dropped.
fn csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let head = lines.next().unwrap().split(',').map(String::from).collect();
    (head, lines.map(|l| l.split(',').map(String::from).collect()).collect())
}

fn field(text: &str, name: &str) -> String {
    let (head, rows) = csv(text);
    let j = head.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows[0][j].clone()
}

fn meta(text: &str, key: &str) -> String {
    let prefix = format!("# {key} = ");
    text.lines().find_map(|l| l.strip_prefix(&prefix)).unwrap_or_else(|| panic!("no {key}")).to_string()
}

fn write_cfg(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const MATCHED: &str = "\
name = matched
material = PPKTP-800-typeII
lambda_s = 800 nm
lambda_i = 800 nm
length = 1 cm
auto_qpm = true
zeta_R = 0.5
pump_power = 1 mW
filter_s = lorentzian 1 MHz
filter_i = lorentzian 1 MHz
";

#[test]
fn bundled_ppktp_pair_brightness() {
    let out = stdout(&spdc(&["--config", "ppktp_800_typeII", "--format", "csv", "pairs"]));
    let b: f64 = field(&out, "pairs_per_s_mW_MHz").parse().unwrap();
    // Corrected overlap normalization: four times the commonly quoted 0.8.
    assert!((b - 3.157).abs() < 1e-3, "{b}");
    let g: f64 = field(&out, "gamma_eff_MHz").parse().unwrap();
    assert!((g - 1.0).abs() < 1e-12);
}

#[test]
fn matched_correlation_fwhm() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "m.cfg", MATCHED);
    let out = stdout(&spdc(&["--config", &cfg, "--format", "csv", "correlation"]));
    let fwhm: f64 = meta(&out, "fwhm_s").parse().unwrap();
    let gamma = 2.0 * PI * 1e6;
    let want = 2.0 * LN_2 / gamma;
    assert!((fwhm - want).abs() < 1e-3 * want, "{fwhm} vs {want}");
    // Symmetric: f(−τ) = f(τ) on the symmetric grid.
    let (head, rows) = csv(&out);
    let j = head.iter().position(|h| h == "f_re_per_s").unwrap();
    let n = rows.len();
    for k in 0..n / 2 {
        let (a, b): (f64, f64) = (rows[k][j].parse().unwrap(), rows[n - 1 - k][j].parse().unwrap());
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }
    // The density integrates back to the pair rate.
    let t = head.iter().position(|h| h == "tau_s").unwrap();
    let w = head.iter().position(|h| h == "w2_per_s2").unwrap();
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r[t].parse().unwrap(), r[w].parse().unwrap())).collect();
    let integral: f64 = pts.windows(2).map(|p| 0.5 * (p[1].0 - p[0].0) * (p[0].1 + p[1].1)).sum();
    let rate: f64 = meta(&out, "pair_rate_per_s").parse().unwrap();
    assert!((integral - rate).abs() < 1e-3 * rate, "{integral} vs {rate}");
}

#[test]
fn one_point_sweep_matches_pairs() {
    let pairs = stdout(&spdc(&["--config", "ppktp_800_typeII", "--format", "csv", "pairs"]));
    let sweep =
        stdout(&spdc(&["--config", "ppktp_800_typeII", "--format", "csv", "sweep", "--sweep", "zeta_R=0.17808"]));
    for col in ["pair_rate_per_s", "pairs_per_s_mW_MHz", "gamma_eff_rad_s"] {
        assert_eq!(field(&pairs, col), field(&sweep, col), "{col}");
    }
    assert_eq!(field(&pairs, "q_sfg_per_W"), field(&sweep, "pair_efficiency_per_W"));
}

#[test]
fn two_axis_sweep_is_row_major() {
    let out = stdout(&spdc(&[
        "--config",
        "ppktp_800_typeII",
        "--format",
        "csv",
        "--basis-order",
        "8",
        "sweep",
        "--sweep",
        "kappa=-4:-2:3",
        "--sweep",
        "P_p=1:2:2 mW",
    ]));
    let (head, rows) = csv(&out);
    assert_eq!(&head[..2], ["kappa", "P_p_W"]);
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r[0].parse().unwrap(), r[1].parse().unwrap())).collect();
    assert_eq!(pts, [(-4.0, 1e-3), (-4.0, 2e-3), (-3.0, 1e-3), (-3.0, 2e-3), (-2.0, 1e-3), (-2.0, 2e-3)]);
    // Pair rate is linear in pump power.
    let j = head.iter().position(|h| h == "pair_rate_per_s").unwrap();
    let r: Vec<f64> = rows.iter().map(|r| r[j].parse().unwrap()).collect();
    assert!((r[1] / r[0] - 2.0).abs() < 1e-12);
}

#[test]
fn output_is_bit_stable() {
    for fmt in ["table", "csv", "ndjson"] {
        let a = stdout(&spdc(&["--config", "ppktp_800_typeII", "--format", fmt, "singles"]));
        let b = stdout(&spdc(&["--config", "ppktp_800_typeII", "--format", fmt, "singles"]));
        assert_eq!(a, b);
    }
}

#[test]
fn every_command_speaks_ndjson() {
    let cmds: [&[&str]; 6] = [
        &["sfg"],
        &["pairs"],
        &["singles"],
        &["correlation", "--points", "101"],
        &["optimize", "--restarts", "1"],
        &["sweep", "--sweep", "kappa=-4:-3:2"],
    ];
    for cmd in cmds {
        let mut args = vec!["--config", "ppktp_800_typeII", "--format", "ndjson"];
        args.extend_from_slice(cmd);
        let out = stdout(&spdc(&args));
        let lines: Vec<serde_json::Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines[0]["meta"]["schema"], "1", "{cmd:?}");
        assert!(lines.len() >= 2, "{cmd:?}");
    }
}

#[test]
fn config_errors_are_listed_together() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "bad.cfg", "lambda_s = 800 parsecs\nlength = 1 cm\nbogus = 3\n");
    let o = spdc(&["--config", &cfg, "--format", "ndjson", "pairs"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
    let err = String::from_utf8(o.stderr).unwrap();
    let v: serde_json::Value = serde_json::from_str(err.trim()).unwrap();
    assert_eq!(v["error"]["kind"], "config");
    let msg = v["error"]["message"].as_str().unwrap();
    for needle in ["bogus", "lambda_s", "lambda_i", "pump_power", "filter_s"] {
        assert!(msg.contains(needle), "{needle} missing from {msg}");
    }
}

#[test]
fn plain_error_line() {
    let o = spdc(&["--config", "/nonexistent/x.cfg", "pairs"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.starts_with("error\tkind=io\tmessage="), "{err}");
    assert_eq!(err.lines().count(), 1);
}

#[test]
fn auto_qpm_flag_counts_as_poling() {
    let dir = tempfile::tempdir().unwrap();
    let body = MATCHED.replace("auto_qpm = true\n", "");
    let cfg = write_cfg(dir.path(), "m.cfg", &body);
    assert_eq!(spdc(&["--config", &cfg, "pairs"]).status.code(), Some(2));
    let out = stdout(&spdc(&["--config", &cfg, "--auto-qpm", "--format", "csv", "sfg"]));
    let kappa: f64 = field(&out, "kappa").parse().unwrap();
    assert!(kappa.abs() < 1e-9, "{kappa}");
    let period: f64 = field(&out, "poling_period_m").parse().unwrap();
    assert!(period > 1e-6 && period < 1e-5);
}

#[test]
fn optimize_objectives() {
    let out = stdout(&spdc(&["optimize", "--r-k", "0.04", "--objective", "defined", "--format", "csv"]));
    let k: f64 = field(&out, "best_kappa").parse().unwrap();
    let z: f64 = field(&out, "best_zeta_R").parse().unwrap();
    assert!((k + 3.0).abs() < 0.1 && (z - 0.18).abs() < 0.01);
    let out = stdout(&spdc(&["--config", "ppktp_800_typeII", "--threads", "2", "--format", "csv", "optimize"]));
    let k: f64 = field(&out, "best_kappa").parse().unwrap();
    assert!((k + 3.484).abs() < 0.01, "{k}");
    assert!(spdc(&["optimize"]).status.code() == Some(1));
}

#[test]
fn validate_passes() {
    let out = stdout(&spdc(&["--format", "ndjson", "validate"]));
    let rows: Vec<serde_json::Value> = out.lines().skip(1).map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(rows.len() >= 13);
    for r in &rows {
        assert_eq!(r["pass"], true, "{r}");
        assert!(r["relative_diff"].as_f64().unwrap() <= r["tolerance"].as_f64().unwrap());
    }
}
