//! End-to-end runs of the command-line interface.

use std::path::Path;
use std::process::Command;

use isoimm::presets::{GridSpec, MetricKind, MetricSpec, SphereChart};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_isoimm"))
}

fn write_spec(path: &Path, spec: &MetricSpec) {
    isoimm::io::write_toml(spec, path).unwrap();
}

fn sphere2(dir: &Path) -> std::path::PathBuf {
    let p = dir.join("sphere2.toml");
    write_spec(
        &p,
        &MetricSpec {
            kind: MetricKind::Sphere {
                dim: 2,
                radius: 1.0,
                chart: SphereChart::PolarCap,
            },
            grid: GridSpec {
                origin: vec![0.5, 0.5],
                spacing: vec![0.02, 0.02],
                shape: vec![33, 33],
            },
        },
    );
    p
}

#[test]
fn embed_writes_obj_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let spec = sphere2(dir.path());
    let out = dir.path().join("cap.obj");
    let status = bin()
        .args(["embed", "--format", "obj", "--metric"])
        .arg(&spec)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 33 * 33);
    assert!(text.lines().any(|l| l.starts_with("f ")));
    let report = std::fs::read_to_string(dir.path().join("cap.report.toml")).unwrap();
    assert!(report.contains("induced_residual"));
}

#[test]
fn embed_csv_format() {
    let dir = tempfile::tempdir().unwrap();
    let spec = sphere2(dir.path());
    let out = dir.path().join("cap.csv");
    let status = bin()
        .args(["embed", "--metric"])
        .arg(&spec)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("x_1,x_2,X_1,X_2,X_3,valid"));
    assert_eq!(text.lines().count(), 1 + 33 * 33);
}

#[test]
fn missing_spec_is_input_error() {
    let status = bin()
        .args(["analyze", "--metric", "/nonexistent/spec.toml"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(3));
}

#[test]
fn unknown_flag_rejected() {
    let status = bin()
        .args(["analyze", "--metric", "x.toml", "--frobnicate"])
        .output()
        .unwrap();
    assert_ne!(status.status.code(), Some(0));
}

#[test]
fn presets_then_verify_k_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .arg("presets")
        .arg("--out")
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(dir.path().join("sphere3.toml").exists());
    assert!(dir.path().join("flat_polar.toml").exists());

    // k = 1 candidate on the generated sphere3 spec: reconstruct the height
    // field in-process, write it as samples, verify through the CLI
    let spec: MetricSpec = isoimm::io::read_toml(&dir.path().join("sphere3.toml")).unwrap();
    let metric = isoimm::presets::generate(&spec).unwrap();
    let g = metric.analytic.as_ref().unwrap().g.clone();
    let pi = move |x: &[f64]| g(x);
    let hf = isoimm::height::integrate_height(
        &isoimm::height::PiSource::Analytic(&pi),
        &metric,
        &metric.grid.center(),
        0.0,
        &[0.0, 0.0, 0.0],
        &isoimm::height::IntegrateOptions::default(),
    )
    .unwrap();
    let fields = dir.path().join("h.csv");
    isoimm::io::write_field_samples(&[hf.h], &fields).unwrap();

    let out = dir.path().join("vk.toml");
    let output = bin()
        .args(["verify-k", "--metric"])
        .arg(dir.path().join("sphere3.toml"))
        .arg("--fields")
        .arg(&fields)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "{output:?}");
    let report = std::fs::read_to_string(&out).unwrap();
    assert!(report.contains("residual"));
}

#[test]
fn cross_section_subcommand_runs() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("s3.toml");
    write_spec(
        &spec_path,
        &MetricSpec {
            kind: MetricKind::Sphere {
                dim: 3,
                radius: 1.0,
                chart: SphereChart::PolarCap,
            },
            grid: GridSpec {
                origin: vec![0.7, 0.2, 0.2],
                spacing: vec![0.02; 3],
                shape: vec![17; 3],
            },
        },
    );
    let output = bin()
        .args(["cross-section", "--tol-codazzi", "1e-3", "--level", "0.005", "--metric"])
        .arg(&spec_path)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "{output:?}");
    let text = String::from_utf8_lossy(&output.stdout);
    assert!(text.contains("scaling residual"));
}
