//! End-to-end tests of the binary: exit-code contract, artifact formats,
//! and byte-level determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_infharm")
}

fn spec_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../specs")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(binary())
        .args(args)
        .output()
        .expect("binary runs")
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("no signal")
}

/// Parse the pixel triples of a plain-text P3 image.
fn ppm_pixels(image: &str) -> Vec<(u8, u8, u8)> {
    let values: Vec<u8> = image
        .lines()
        .skip(3)
        .flat_map(|l| l.split_whitespace())
        .map(|v| v.parse().unwrap())
        .collect();
    values.chunks(3).map(|c| (c[0], c[1], c[2])).collect()
}

#[test]
fn affine_residual_passes_with_exit_zero() {
    let spec = spec_path("affine.json");
    let out = run(&[
        "residual",
        "--map",
        spec.to_str().unwrap(),
        "--grid",
        "32x32",
    ]);
    assert_eq!(
        exit_code(&out),
        0,
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn trig_family_residual_passes_on_default_grid() {
    let spec = spec_path("exp2.json");
    let out = run(&["residual", "--map", spec.to_str().unwrap(), "--tol", "1e-9"]);
    assert_eq!(exit_code(&out), 0);
}

#[test]
fn non_solution_fails_with_checks_failed_code() {
    let spec = spec_path("quadratic.json");
    let out = run(&[
        "residual",
        "--map",
        spec.to_str().unwrap(),
        "--grid",
        "32x32",
        "--tol",
        "1e-9",
    ]);
    assert_eq!(exit_code(&out), 4);
}

#[test]
fn corrupted_spec_is_rejected_with_config_code() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.json");
    // plateau value 2.0 is outside the open (-pi/2, pi/2) band
    std::fs::write(
        &path,
        r#"{"family":"kprofile","params":{"profile":{"kind":"user-piecewise",
            "intervals":[{"start":-1.0,"end":1.0,"value":2.0}],"width":0.5}}}"#,
    )
    .unwrap();
    let out = run(&["residual", "--map", path.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("pi/2"));
}

#[test]
fn missing_spec_file_is_a_config_error() {
    let out = run(&["residual", "--map", "/nonexistent/never.json"]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn unknown_flag_uses_clap_exit_code_two() {
    let out = run(&["residual", "--no-such-flag"]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn nonexistent_output_directory_is_rejected_before_compute() {
    let spec = spec_path("affine.json");
    let out = run(&[
        "residual",
        "--map",
        spec.to_str().unwrap(),
        "--csv",
        "/nonexistent-dir/field.csv",
    ]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn classify_writes_the_expected_pixmap_palette() {
    let dir = TempDir::new().unwrap();
    let ppm = dir.path().join("phases.ppm");
    let spec = spec_path("plateau2.json");
    let out = run(&[
        "classify",
        "--map",
        spec.to_str().unwrap(),
        "--grid",
        "64x64",
        "--ppm",
        ppm.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0);
    let image = std::fs::read_to_string(&ppm).unwrap();
    assert!(image.starts_with("P3\n64 64\n255\n"));
    // blue rank-one squares, white full-rank field, red interface
    let pixels = ppm_pixels(&image);
    assert_eq!(pixels.len(), 64 * 64);
    assert!(pixels.contains(&(0, 0, 255)));
    assert!(pixels.contains(&(255, 255, 255)));
    assert!(pixels.contains(&(255, 0, 0)));

    // the trig family shows white with red lines and no blue open regions
    let ppm2 = dir.path().join("trig.ppm");
    let out = run(&[
        "classify",
        "--map",
        spec_path("exp2.json").to_str().unwrap(),
        "--grid",
        "64x64",
        "--ppm",
        ppm2.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0);
    let pixels = ppm_pixels(&std::fs::read_to_string(&ppm2).unwrap());
    assert!(pixels.contains(&(255, 255, 255)));
    assert!(pixels.contains(&(255, 0, 0)));
    assert!(!pixels.contains(&(0, 0, 255)));
}

#[test]
fn classify_json_counts_plateau_components() {
    let dir = TempDir::new().unwrap();
    let json = dir.path().join("phases.json");
    let spec = spec_path("plateau2.json");
    let out = run(&[
        "classify",
        "--map",
        spec.to_str().unwrap(),
        "--grid",
        "128x128",
        "--json",
        json.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report["phases"]["component_count_by_rank"]["1"], 2);
    assert_eq!(report["phases"]["component_count_by_rank"]["2"], 2);
}

#[test]
fn artifacts_are_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let spec = spec_path("plateau3.json");
    let mut artifacts = Vec::new();
    for round in 0..2 {
        let csv = dir.path().join(format!("phases-{round}.csv"));
        let ppm = dir.path().join(format!("phases-{round}.ppm"));
        let json = dir.path().join(format!("phases-{round}.json"));
        let out = run(&[
            "classify",
            "--map",
            spec.to_str().unwrap(),
            "--grid",
            "48x48",
            "--csv",
            csv.to_str().unwrap(),
            "--ppm",
            ppm.to_str().unwrap(),
            "--json",
            json.to_str().unwrap(),
        ]);
        assert_eq!(exit_code(&out), 0);
        artifacts.push((
            std::fs::read(&csv).unwrap(),
            std::fs::read(&ppm).unwrap(),
            std::fs::read_to_string(&json).unwrap(),
        ));
    }
    assert_eq!(artifacts[0].0, artifacts[1].0, "CSV differs between runs");
    assert_eq!(artifacts[0].1, artifacts[1].1, "PPM differs between runs");

    // JSON identical modulo the wall-time field
    let strip = |text: &str| -> serde_json::Value {
        let mut v: serde_json::Value = serde_json::from_str(text).unwrap();
        v.as_object_mut().unwrap().remove("wall_time_ms");
        v
    };
    assert_eq!(strip(&artifacts[0].2), strip(&artifacts[1].2));
}

#[test]
fn flow_on_trig_family_passes_and_exports_csv() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("traj.csv");
    let spec = spec_path("exp2.json");
    let out = run(&[
        "flow",
        "--map",
        spec.to_str().unwrap(),
        "--start",
        "0.3,0.7",
        "--xi",
        "2,0", // normalized on input
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(
        exit_code(&out),
        0,
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with(
        "t,gamma0,gamma1,du_norm_sq,xi_dot_u,xi_du_norm,defect_energy_rate,defect_slope\n"
    ));
    assert!(text.lines().count() > 1000);
}

#[test]
fn flow_rejects_zero_direction() {
    let spec = spec_path("exp2.json");
    let out = run(&[
        "flow",
        "--map",
        spec.to_str().unwrap(),
        "--start",
        "0.3,0.7",
        "--xi",
        "0,0",
    ]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn flow_conservation_failure_yields_checks_failed() {
    let spec = spec_path("quadratic.json");
    let out = run(&[
        "flow",
        "--map",
        spec.to_str().unwrap(),
        "--start",
        "1.0,0.5",
        "--xi",
        "1,0",
    ]);
    assert_eq!(exit_code(&out), 4);
}

#[test]
fn verify_passes_on_solution_families() {
    let dir = TempDir::new().unwrap();
    for name in ["exp2.json", "plateau2.json"] {
        let json = dir.path().join(format!("verify-{name}"));
        let out = run(&[
            "verify",
            "--map",
            spec_path(name).to_str().unwrap(),
            "--grid",
            "128x128",
            "--flows",
            "5",
            "--json",
            json.to_str().unwrap(),
        ]);
        assert_eq!(
            exit_code(&out),
            0,
            "{name} stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let report: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
        assert_eq!(report["overall_pass"], true);
        assert_eq!(report["flows"]["pass"], true);
    }
}

#[test]
fn verify_flags_junctions_for_the_three_level_profile() {
    let dir = TempDir::new().unwrap();
    let json = dir.path().join("verify.json");
    let out = run(&[
        "verify",
        "--map",
        spec_path("plateau3.json").to_str().unwrap(),
        "--grid",
        "128x128",
        "--json",
        json.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report["overall_pass"], true);
    assert!(!report["interface"]["junction_nodes"]
        .as_array()
        .unwrap()
        .is_empty());
    assert!(report["rank_one"].as_array().unwrap().len() >= 3);
}

#[test]
fn verify_fails_on_the_non_solution() {
    let out = run(&[
        "verify",
        "--map",
        spec_path("quadratic.json").to_str().unwrap(),
        "--grid",
        "32x32",
    ]);
    assert_eq!(exit_code(&out), 4);
}

#[test]
fn embedded_spec_classifies_like_the_base_map() {
    let dir = TempDir::new().unwrap();
    let base_csv = dir.path().join("base.csv");
    let lifted_csv = dir.path().join("lifted.csv");
    for (spec, csv) in [
        ("exp2.json", &base_csv),
        ("exp2-embedded.json", &lifted_csv),
    ] {
        let out = run(&[
            "classify",
            "--map",
            spec_path(spec).to_str().unwrap(),
            "--grid",
            "48x48",
            "--csv",
            csv.to_str().unwrap(),
        ]);
        assert_eq!(exit_code(&out), 0);
    }
    assert_eq!(
        std::fs::read(&base_csv).unwrap(),
        std::fs::read(&lifted_csv).unwrap()
    );
}

#[test]
fn thread_override_does_not_change_artifacts() {
    let dir = TempDir::new().unwrap();
    let one = dir.path().join("one.csv");
    let many = dir.path().join("many.csv");
    for (threads, csv) in [("1", &one), ("4", &many)] {
        let out = Command::new(binary())
            .env("INFHARM_THREADS", threads)
            .args([
                "residual",
                "--map",
                spec_path("plateau2.json").to_str().unwrap(),
                "--grid",
                "48x48",
                "--csv",
                csv.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert_eq!(exit_code(&out), 0);
    }
    assert_eq!(std::fs::read(&one).unwrap(), std::fs::read(&many).unwrap());
}
