use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use zpf_cli::commands::RAINBOW_COLUMNS;
use zpf_cli::config::DEFAULT_CONFIG;

fn zpfsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zpfsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn rainbow_file_has_full_header_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let o = zpfsim(&["rainbow", "--output", p.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    for col in RAINBOW_COLUMNS {
        assert!(header.contains(&col), "missing column {col}");
    }
    assert_eq!(text.lines().count(), 1 + 21);
}

#[test]
fn monte_carlo_rainbow_is_reproducible_per_seed() {
    let args = ["rainbow", "--engine", "montecarlo", "--trials", "5000", "--seed", "9"];
    let first = zpfsim(&args);
    assert!(first.status.success());
    assert_eq!(first.stdout, zpfsim(&args).stdout);
    let other = zpfsim(&["rainbow", "--engine", "montecarlo", "--trials", "5000", "--seed", "10"]);
    assert_ne!(first.stdout, other.stdout);
}

#[test]
fn json_output() {
    let o = zpfsim(&["angles", "--format", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 21);
    assert!(v["config_fingerprint"].as_str().unwrap().len() == 64);
}

#[test]
fn flat_dispersion_is_collinear() {
    let dir = tempfile::tempdir().unwrap();
    let text = DEFAULT_CONFIG
        .replace("terms = [[1.7, 0.0003]]", "terms = [[0.0, 0.01]]")
        .replace("terms = [[1.05, 0.0003]]", "terms = [[0.0, 0.01]]");
    let cfg = write_config(dir.path(), "flat.toml", &text);
    let o = zpfsim(&["angles", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for line in stdout(&o).lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[1].parse::<f64>().unwrap(), 0.0);
        assert_eq!(f[2].parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();

    let bad = write_config(dir.path(), "bad.toml", &DEFAULT_CONFIG.replace("steps = 21", "steps = 1"));
    assert_eq!(zpfsim(&["rainbow", "--config", bad.to_str().unwrap()]).status.code(), Some(2));

    let typo = write_config(dir.path(), "typo.toml", &DEFAULT_CONFIG.replace("seed =", "sead ="));
    let o = zpfsim(&["angles", "--config", typo.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sead"));

    let at_mean = write_config(
        dir.path(),
        "mean.toml",
        &DEFAULT_CONFIG.replace("threshold = 0.6", "threshold = 0.5"),
    );
    assert_eq!(zpfsim(&["darkrate", "--config", at_mean.to_str().unwrap()]).status.code(), Some(2));

    // pump index above both pair indices: nothing can match
    let unmatched = write_config(
        dir.path(),
        "unmatched.toml",
        &DEFAULT_CONFIG
            .replace("terms = [[1.7, 0.0003]]", "terms = [[0.0, 0.01]]")
            .replace("terms = [[1.05, 0.0003]]", "terms = [[0.2, 0.01]]")
            .replace("optic_axis_deg = -11.2912", "optic_axis_deg = 90.0"),
    );
    let path = unmatched.to_str().unwrap();
    assert_eq!(zpfsim(&["angles", "--config", path]).status.code(), Some(3));
    assert_eq!(zpfsim(&["rainbow", "--config", path]).status.code(), Some(3));

    // a dark pair has no defined rate ratio
    let dark = write_config(
        dir.path(),
        "dark.toml",
        &DEFAULT_CONFIG
            .replace("couplings = \"auto\"", "couplings = { g_down = 0.0, g_up = 0.0, phi_down = 0.0, phi_up = 0.0 }")
            .replace("omega = 0.45\n\n[darkrate]", "omega = 0.45\nforce_angles_deg = [10.0, 12.0]\n\n[darkrate]"),
    );
    assert_eq!(zpfsim(&["ratios", "--config", dark.to_str().unwrap()]).status.code(), Some(4));
}

#[test]
fn failed_run_leaves_no_file() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.toml", &DEFAULT_CONFIG.replace("steps = 21", "steps = 0"));
    let out = dir.path().join("never.csv");
    let o = zpfsim(&["rainbow", "--config", bad.to_str().unwrap(), "--output", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(!out.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn forced_angles_report_both_theories() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "forced.toml",
        &DEFAULT_CONFIG.replace(
            "omega = 0.45\n\n[darkrate]",
            "omega = 0.45\nforce_angles_deg = [10.0, 12.0]\n\n[darkrate]",
        ),
    );
    let o = zpfsim(&["ratios", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    let value = |q: &str| -> f64 {
        let line = text.lines().find(|l| l.starts_with(&format!("{q},"))).unwrap();
        line.split(',').nth(1).unwrap().parse().unwrap()
    };
    let expect = 12f64.to_radians().cos() / 10f64.to_radians().cos();
    assert!((value("eq1_ratio") - expect).abs() < 1e-14);
    assert_eq!(value("photon_theory_ratio"), 1.0);
}

#[test]
fn degenerate_ratio_is_one() {
    let o = zpfsim(&["ratios", "--omega", "0.5"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let line = text.lines().find(|l| l.starts_with("eq1_ratio,")).unwrap();
    let v: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
    assert!((v - 1.0).abs() < 1e-12);
}

#[test]
fn simulate_dumps_one_row_per_trial() {
    let o = zpfsim(&["simulate", "--trials", "100", "--seed", "4"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 101);
    assert!(text.starts_with("trial,input_re,input_im,idler_re,idler_im,signal_re,signal_im,"));
    assert_eq!(text, stdout(&zpfsim(&["simulate", "--trials", "100", "--seed", "4"])));
}

#[test]
fn darkrate_window_flag() {
    let o = zpfsim(&["darkrate", "--windows", "1,4", "--trials", "2000"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().nth(2).unwrap().starts_with("4,2000,"));
}
