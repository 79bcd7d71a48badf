use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn matscat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_matscat")).args(args).output().expect("spawn matscat")
}

fn write_job(dir: &Path, name: &str, job: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(job).unwrap()).unwrap();
    p
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    matscat(&args)
}

fn validate(config: &Path) -> Output {
    matscat(&["validate", "--config", config.to_str().unwrap()])
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn csv_rows(p: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(p).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    (header, rows)
}

fn error_lines(o: &Output) -> Vec<String> {
    stderr(o).lines().filter(|l| l.starts_with("error:")).map(str::to_string).collect()
}

#[test]
fn free_dirichlet_scattering_is_minus_identity() {
    let dir = TempDir::new().unwrap();
    let job = json!({
        "mode": "forward",
        "potential": { "preset": "zero", "n": 2 },
        "boundary": { "kind": "dirichlet", "n": 2 },
        "grid": { "x_max": 1.0, "k_max": 10.0, "dk": 0.25 }
    });
    let cfg = write_job(dir.path(), "job.json", &job);
    let out = dir.path().join("out");
    let o = run(&cfg, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));

    let (header, rows) = csv_rows(&out.join("scattering.csv"));
    assert_eq!(header.len(), 9);
    assert_eq!(rows.len(), 80);
    for row in &rows {
        let expect = [-1.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0];
        for (v, e) in row[1..].iter().zip(expect) {
            assert!((v - e).abs() < 1e-12, "k = {}: {v} vs {e}", row[0]);
        }
    }

    let manifest = read_json(&out.join("manifest.json"));
    let files = manifest["files"].as_array().unwrap();
    let mut listed: Vec<&str> = files.iter().map(|f| f["path"].as_str().unwrap()).collect();
    listed.sort();
    assert_eq!(listed, ["report.json", "scattering.csv", "scattering.json"]);
    for f in files {
        let bytes = std::fs::read(out.join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(f["bytes"].as_u64().unwrap() as usize, bytes.len());
        assert_eq!(f["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)));
    }
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["bound_states"].as_array().unwrap().len(), 0);
}

#[test]
fn roundtrip_on_a_gaussian_well() {
    let dir = TempDir::new().unwrap();
    let job = json!({
        "mode": "roundtrip",
        "potential": { "preset": "gaussian", "amplitude": -2.0, "center": 1.5, "width": 0.5 },
        "boundary": { "kind": "robin", "n": 1, "phases": [1.0] },
        "grid": { "x_max": 3.0, "k_max": 60.0, "dk": 0.05 }
    });
    let cfg = write_job(dir.path(), "job.json", &job);
    let out = dir.path().join("out");
    let o = run(&cfg, &out, &["--parallel", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = read_json(&out.join("report.json"));
    assert!(report["q_error"].as_f64().unwrap() < 1e-3, "{report}");
    assert!(report["u_error"].as_f64().unwrap() < 1e-6, "{report}");
    assert!((report["q_error_window"][1].as_f64().unwrap() - 2.4).abs() < 1e-12);
    for name in ["potential.json", "potential.csv", "boundary.json", "kernel.csv", "scattering.json"] {
        assert!(out.join(name).exists(), "{name}");
    }
}

fn free_partial(dir: &Path, with_rays: bool) -> PathBuf {
    let dk = 0.05;
    let k: Vec<f64> = (0..1600).map(|i| -40.0 + dk * (i as f64 + 0.5)).collect();
    let r = vec![[-1.0 / 3.0, 0.0]; k.len()];
    let mut data = json!({ "n": 3, "k": k });
    if with_rays {
        data["rays"] = json!([{ "j": 1, "R": r }, { "j": 2, "R": r }]);
    }
    write_job(dir, "partial.json", &data)
}

#[test]
fn graph_recovery_from_free_data_gives_zero_ray() {
    let dir = TempDir::new().unwrap();
    free_partial(dir.path(), true);
    let job = json!({
        "mode": "graph-recover",
        "input": "partial.json",
        "grid": { "x_max": 2.0 },
        "recovery": { "virtual_order": 1 }
    });
    let cfg = write_job(dir.path(), "job.json", &job);
    let out = dir.path().join("out");
    let o = run(&cfg, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (_, rows) = csv_rows(&out.join("q_hat.csv"));
    let worst = rows.iter().map(|r| r[1].abs().max(r[2].abs())).fold(0.0, f64::max);
    assert!(worst < 1e-8, "q_hat sup {worst:e}");
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["recovered_ray"], 3);
    let s = read_json(&out.join("scattering.json"));
    assert_eq!(s["n"], 3);
    assert!(out.join("dispersion.csv").exists());
}

#[test]
fn validate_accepts_a_complete_job() {
    let dir = TempDir::new().unwrap();
    let job = json!({
        "mode": "forward",
        "potential": { "preset": "constant_well", "amplitude": [[-1.0, 0.0], [0.0, -2.0]], "width": 1.0 },
        "boundary": { "n": 2, "U": [[{ "re": 0.0, "im": 1.0 }, { "re": 0.0, "im": 0.0 }], [{ "re": 0.0, "im": 0.0 }, { "re": 1.0, "im": 0.0 }]] },
        "grid": { "k_max": 5.0, "k_count": 100 }
    });
    let o = validate(&write_job(dir.path(), "job.json", &job));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(error_lines(&o).is_empty());
}

#[test]
fn validate_reports_short_t_max_once() {
    let dir = TempDir::new().unwrap();
    let job = json!({
        "mode": "roundtrip",
        "potential": { "preset": "gaussian", "amplitude": -1.0, "center": 1.0, "width": 0.3 },
        "boundary": { "kind": "neumann", "n": 1 },
        "grid": { "x_max": 3.0, "t_max": 2.5, "k_max": 40.0 }
    });
    let o = validate(&write_job(dir.path(), "job.json", &job));
    assert_eq!(o.status.code(), Some(2));
    let errs = error_lines(&o);
    assert_eq!(errs.len(), 1, "{errs:?}");
    assert!(errs[0].contains("t_max") && errs[0].contains("x_max"), "{}", errs[0]);
}

#[test]
fn validate_reports_missing_rays_once() {
    let dir = TempDir::new().unwrap();
    free_partial(dir.path(), false);
    let job = json!({ "mode": "graph-recover", "input": "partial.json", "grid": { "x_max": 2.0 } });
    let o = validate(&write_job(dir.path(), "job.json", &job));
    assert_eq!(o.status.code(), Some(2));
    let errs = error_lines(&o);
    assert_eq!(errs.len(), 1, "{errs:?}");
    assert!(errs[0].contains("rays"), "{}", errs[0]);
}

#[test]
fn schema_errors_carry_position() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("job.json");
    std::fs::write(&p, "{\n  \"mode\": \"forward\",\n  \"grdi\": {}\n}\n").unwrap();
    let o = validate(&p);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("grdi") && e.contains("line 3"), "{e}");
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let job = json!({
        "mode": "forward",
        "potential": { "preset": "sech2", "amplitude": [[-2.0, 0.5], [0.5, -1.0]], "center": 1.0, "width": 0.4 },
        "boundary": { "kind": "kirchhoff", "n": 2 },
        "grid": { "x_max": 4.0, "k_max": 8.0, "dk": 0.2 }
    });
    let cfg = write_job(dir.path(), "job.json", &job);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run(&cfg, &a, &["--parallel", "1"]).status.success());
    assert!(run(&cfg, &b, &["--parallel", "1"]).status.success());
    for name in ["scattering.json", "scattering.csv", "report.json", "manifest.json"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn exit_codes_distinguish_failures_and_warnings() {
    let dir = TempDir::new().unwrap();
    let fwd = json!({
        "mode": "forward",
        "potential": { "preset": "gaussian", "amplitude": -1.5, "center": 1.0, "width": 0.4 },
        "boundary": { "kind": "dirichlet", "n": 1 },
        "grid": { "x_max": 2.5, "k_max": 50.0, "dk": 0.05 }
    });
    let data_dir = dir.path().join("data");
    assert!(run(&write_job(dir.path(), "fwd.json", &fwd), &data_dir, &[]).status.success());

    let strict_tol = json!({ "mode": "inverse", "input": "data/scattering.json", "grid": { "x_max": 2.5 }, "tolerances": { "tail_bound": 1e-14 } });
    let o = run(&write_job(dir.path(), "tail.json", &strict_tol), &dir.path().join("o1"), &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("stage marchenko"), "{}", stderr(&o));

    let spread = json!({ "mode": "inverse", "input": "data/scattering.json", "grid": { "x_max": 2.5 }, "tolerances": { "u_spread": 1e-16 } });
    let cfg = write_job(dir.path(), "spread.json", &spread);
    let o = run(&cfg, &dir.path().join("o2"), &[]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("warning:"));
    let o = run(&cfg, &dir.path().join("o3"), &["--strict"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(dir.path().join("o3/manifest.json").exists());
}
