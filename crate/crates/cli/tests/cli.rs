use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use ziegler_core::sweep::{SweepResult, CSV_HEADER};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn config(name: &str) -> String {
    configs().join(name).to_str().unwrap().to_string()
}

fn ziegler(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ziegler"))
        .args(args)
        .env_remove("ZIEGLER_JOBS")
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is json")
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("stderr is json")
}

#[test]
fn classify_ziegler_above_onset_is_flutter() {
    let v = stdout_json(&ziegler(&[
        "classify",
        "--config",
        &config("ziegler.json"),
        "--load",
        "3.0",
    ]));
    assert_eq!(v["report"]["class"], "FLUTTER");
    let v = stdout_json(&ziegler(&[
        "classify",
        "--config",
        &config("ziegler.json"),
        "--load",
        "1.0",
    ]));
    assert_eq!(v["report"]["class"], "MARGINALLY_STABLE");
}

#[test]
fn critical_load_of_ziegler_design() {
    let v = stdout_json(&ziegler(&[
        "critical-load",
        "--config",
        &config("ziegler.json"),
    ]));
    let want = 3.5 - 2f64.sqrt();
    let got = v["critical_load"]["normalized"].as_f64().unwrap();
    assert!((got - want).abs() <= 1e-9, "{got}");
    assert_eq!(v["critical_load"]["transition"], "FLUTTER_ONSET");
    let upper = v["boundaries"][1]["normalized"].as_f64().unwrap();
    assert!((upper - (3.5 + 2f64.sqrt())).abs() <= 1e-9);
    let closed = v["closed_form"]["lower_normalized"].as_f64().unwrap();
    assert!((closed - want).abs() <= 1e-12);
}

#[test]
fn damped_critical_load_and_overrides() {
    let v = stdout_json(&ziegler(&[
        "critical-load",
        "--config",
        &config("ziegler_damped.json"),
    ]));
    let got = v["critical_load"]["normalized"].as_f64().unwrap();
    assert!((got - 55.0 / 28.0).abs() <= 1e-9, "{got}");
    // equal masses move the undamped onset to the absolute minimum p = 2
    let v = stdout_json(&ziegler(&[
        "critical-load",
        "--config",
        &config("ziegler.json"),
        "--masses",
        "1,1",
    ]));
    assert!((v["critical_load"]["normalized"].as_f64().unwrap() - 2.0).abs() <= 1e-9);
}

#[test]
fn sweep_writes_csv_schema_json_mirror_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("plane23.csv");
    let json = dir.path().join("plane23.json");
    let out = ziegler(&[
        "sweep",
        "--config",
        &config("m3.json"),
        "--plane",
        "2,3",
        "--r",
        "1.0",
        "--alpha-steps",
        "40",
        "--p-max",
        "30",
        "--out",
        csv.to_str().unwrap(),
        "--json-out",
        json.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
    let mut alphas = Vec::new();
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), CSV_HEADER.len(), "{line}");
        let alpha: f64 = fields[0].parse().unwrap();
        assert_eq!(fields[1], "1");
        if !fields[3].is_empty() {
            let p: f64 = fields[3].parse().unwrap();
            assert!(p > 0.0 && p <= 30.0);
        }
        if alphas.last() != Some(&alpha) {
            alphas.push(alpha);
        }
    }
    assert_eq!(alphas.len(), 41);
    assert!(alphas.windows(2).all(|w| w[0] < w[1]));

    // the JSON mirror carries the full result and reproduces the CSV exactly
    let mirror: SweepResult =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(mirror.to_csv_string(), text);
    assert_eq!(mirror.spec.plane.plane, (1, 2));

    let manifest: Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("plane23.csv.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["subcommand"], "sweep");
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);
    assert_eq!(manifest["parameters"]["sweep"]["alpha_steps"], 40);
    assert!(manifest["wall_time_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn grid_csv_has_one_line_per_node() {
    let out = ziegler(&[
        "grid",
        "--config",
        &config("ziegler.json"),
        "--plane",
        "1,2",
        "--alpha-steps",
        "5",
        "--load-steps",
        "7",
        "--load-range",
        "0,6",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "alpha,load_P,load_p_normalized,class");
    assert_eq!(lines.len(), 1 + 5 * 7);
    // zero load is stable everywhere except the corner where the top mass vanishes
    for l in lines[1..]
        .iter()
        .filter(|l| l.split(',').nth(1) == Some("0"))
    {
        let class = l.split(',').nth(3).unwrap();
        assert!(class == "MARGINALLY_STABLE" || l.starts_with("0,"), "{l}");
    }
}

#[test]
fn identical_runs_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, jobs: &str| {
        let path = dir.path().join(name);
        let out = ziegler(&[
            "--jobs",
            jobs,
            "optimize",
            "--config",
            &config("ziegler.json"),
            "--starts",
            "6",
            "--seed",
            "3",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        std::fs::read(path).unwrap()
    };
    let a = run("a.json", "1");
    let b = run("b.json", "3");
    assert_eq!(a, b);
    let v: Value = serde_json::from_slice(&a).unwrap();
    let best = v["reports"][0]["objective"].as_f64().unwrap();
    assert!((best - 2.0).abs() <= 1e-6);

    let sweep = |name: &str, jobs: &str| {
        let path = dir.path().join(name);
        let out = ziegler(&[
            "sweep",
            "--jobs",
            jobs,
            "--config",
            &config("ziegler.json"),
            "--plane",
            "1,2",
            "--alpha-steps",
            "30",
            "--p-max",
            "50",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        std::fs::read(path).unwrap()
    };
    assert_eq!(sweep("s1.csv", "1"), sweep("s2.csv", "2"));
}

#[test]
fn singular_cusp_from_guess() {
    let v = stdout_json(&ziegler(&[
        "singular",
        "--config",
        &config("m3.json"),
        "--plane",
        "2,3",
        "--guess",
        "0.04,12,-1.35",
    ]));
    let p = &v[0];
    assert_eq!(p["kind"], "TRIPLE_IMAGINARY_CUSP");
    assert!((p["location"]["alpha"].as_f64().unwrap() - 0.0403477).abs() <= 1e-4);
    assert!((p["location"]["load"].as_f64().unwrap() - 11.961144).abs() <= 1e-4);
    assert!((p["lambda_value"][1].as_f64().unwrap() - 1.1635243).abs() <= 1e-4);
}

#[test]
fn exit_codes_and_machine_readable_errors() {
    let out = ziegler(&[
        "classify",
        "--config",
        "/nonexistent/ziegler.json",
        "--load",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(stderr_json(&out)["error"]["kind"], "io");

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"link_count": 2, "link_length": 1.0, "masses": [1.0]}"#,
    )
    .unwrap();
    let out = ziegler(&["classify", "--config", bad.to_str().unwrap(), "--load", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"]["kind"], "config");

    let out = ziegler(&[
        "classify",
        "--config",
        &config("ziegler.json"),
        "--load",
        "1",
        "--masses=-1,1",
    ]);
    assert_eq!(out.status.code(), Some(2));

    // double-eigenvalue certification is defined for undamped systems only
    let out = ziegler(&[
        "singular",
        "--config",
        &config("ziegler_damped.json"),
        "--kind",
        "boundary",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_json(&out)["error"]["exit_code"], 3);

    let missing = dir.path().join("no/such/dir/out.json");
    let out = ziegler(&[
        "classify",
        "--config",
        &config("ziegler.json"),
        "--load",
        "1",
        "--out",
        missing.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4));

    let out = ziegler(&["sweep", "--config", &config("ziegler.json")]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn jobs_flag_wins_over_environment() {
    let run = |env: &str, flag: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_ziegler"));
        cmd.env("ZIEGLER_JOBS", env);
        if let Some(j) = flag {
            cmd.args(["--jobs", j]);
        }
        cmd.args([
            "classify",
            "--config",
            &config("ziegler.json"),
            "--load",
            "1",
        ]);
        cmd.output().unwrap().status.code()
    };
    assert_eq!(run("0", None), Some(2));
    assert_eq!(run("0", Some("2")), Some(0));
    assert_eq!(run("2", None), Some(0));
}

#[test]
fn verify_prints_table_and_reports_failures() {
    let out = ziegler(&["verify", "--check", "1,4"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 2);
    assert!(text.contains("2 of 2 checks passed"));

    let out = ziegler(&["verify", "--check", "5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("FAIL"));

    let out = ziegler(&["verify", "--check", "99"]);
    assert_eq!(out.status.code(), Some(2));
}
