use std::path::Path;
use std::process::{Command, Output};

fn isolab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isolab"))
        .args(args)
        .env("ISO_LAB_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn verify_gaussian_is_all_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = isolab(&["verify", "--measure", "gaussian", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let r = json(&dir.path().join("verify.json"));
    assert_eq!(r["pass"], true);
    assert!(r["deficit"]["deficit"].as_f64().unwrap().abs() < 1e-12);
    for lp in r["lp"].as_array().unwrap() {
        assert!(lp["value"].as_f64().unwrap() < 1e-10);
    }
    assert!(r["w2"]["value"].as_f64().unwrap() < 1e-10);
    assert!(r["entropy"].as_f64().unwrap() < 1e-10);
    assert!(dir.path().join("config.toml").exists());
}

#[test]
fn verify_truncated_matches_closed_forms() {
    let dir = tempfile::tempdir().unwrap();
    let out = isolab(&[
        "verify", "--measure", "truncated:2", "--theta", "0.5", "--p", "1,2", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let r = json(&dir.path().join("verify.json"));
    let reference = &r["reference"];
    assert!((reference["deficit"].as_f64().unwrap() - 0.019_017_269_833_701_9).abs() < 1e-12);
    let got = r["lp"][0]["value"].as_f64().unwrap();
    assert!((got - 0.091_000_527_792_716_83).abs() < 1e-8);
    assert!(r["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));
}

#[test]
fn verify_rejects_bad_theta() {
    let out = isolab(&["verify", "--theta", "1.5"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("theta out of range"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "measure = \"truncated:2\"\ntheta = 0.3\np = [2.0]\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = isolab(&[
        "verify", "--config", cfg.to_str().unwrap(), "--theta", "0.5", "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let r = json(&out_dir.join("verify.json"));
    assert_eq!(r["theta"], 0.5);
    assert_eq!(r["lp"].as_array().unwrap().len(), 1);

    std::fs::write(&cfg, "thetaa = 0.3\n").unwrap();
    let out = isolab(&["verify", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
}

#[test]
fn sweep_example23_orders() {
    let dir = tempfile::tempdir().unwrap();
    let out = isolab(&[
        "sweep", "--family", "example23", "--metric", "lp", "--p", "1,2", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let lp2 = json(&dir.path().join("sweep_lp2.json"));
    assert!((lp2["alpha"].as_f64().unwrap() - 0.5).abs() < 0.05);
    let lp1 = json(&dir.path().join("sweep_lp1.json"));
    assert!((lp1["alpha"].as_f64().unwrap() - 1.0).abs() < 0.05);
    let csv = std::fs::read_to_string(dir.path().join("sweep_lp1.csv")).unwrap();
    assert!(csv.starts_with("delta,value\n"));
    assert_eq!(csv.lines().count(), 10);
    let dat = std::fs::read_to_string(dir.path().join("sweep_lp1.dat")).unwrap();
    assert!(dat.lines().skip(1).all(|l| l.split(' ').count() == 2));
}

#[test]
fn sweep_empty_grid_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "delta_grid = []\n").unwrap();
    let out = isolab(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("delta grid is empty"));
}

#[test]
fn needles_all_gaussian_and_fully_bad() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let cfg = dir.path().join("zero.toml");
    // no bad needles at all
    std::fs::write(&cfg, "delta_grid = [1e-3]\n[needles]\nneedle_count = 10\nbad_fraction = 0.0\n").unwrap();
    let out = isolab(&["needles", "--config", cfg.to_str().unwrap(), "--out", d]);
    assert!(out.status.success());
    let r = json(&dir.path().join("needles.json"));
    assert_eq!(r["pass"], true);

    let out = isolab(&["needles", "--bad-fraction", "1", "--delta-grid", "1e-3", "--needle-count", "10", "--out", d]);
    assert!(out.status.success());
    let r = json(&dir.path().join("needles.json"));
    let row = &r["per_delta"][0];
    assert_eq!(row["fully_bad"], true);
    assert!(row["experiment"]["mixture_l1"].as_f64().unwrap() <= 2.0);
}

#[test]
fn needles_sweep_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let out = isolab(&[
        "needles", "--needle-count", "30", "--seed", "3", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let r = json(&dir.path().join("needles.json"));
    assert_eq!(r["monotone_in_delta"], true);
    let csv = std::fs::read_to_string(dir.path().join("needles.csv")).unwrap();
    assert!(csv.starts_with("delta,epsilon,mixture_l1,good_mass,centered_mass,fitted_exponent\n"));
}

#[test]
fn example23_command() {
    let out = isolab(&["example23", "--half-width", "2"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("[PASS] lp(p=4)"));
}

#[test]
fn selftest_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = isolab(&["selftest", "--seed", "5", "--out", d.path().to_str().unwrap()]);
        assert!(out.status.success());
    }
    let ra = std::fs::read(a.path().join("selftest.json")).unwrap();
    let rb = std::fs::read(b.path().join("selftest.json")).unwrap();
    assert_eq!(ra, rb);
}

#[test]
fn selftest_names_the_injected_fault() {
    let out = isolab(&["selftest", "--inject-fault", "gaussian_cdf"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("gaussian_cdf"));
}
