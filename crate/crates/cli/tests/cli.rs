use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::Path;
use std::process::{Command, Output};

use modalvox::eigensolve::read_modes;
use modalvox::ffat::read_ffat;
use modalvox::synth::read_wav;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

fn modalvox(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modalvox"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = modalvox(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn radii(path: &Path) -> Vec<f64> {
    read_ffat(BufReader::new(File::open(path).unwrap())).unwrap().radii
}

#[test]
fn exit_codes() {
    assert_eq!(modalvox(&["modal", "-o", "/dev/null"]).status.code(), Some(2));
    assert_eq!(modalvox(&["modal", "--shape", "torus", "-o", "/dev/null"]).status.code(), Some(2));
    assert_eq!(
        modalvox(&["--material", "unobtainium", "modal", "--shape", "cube", "-o", "/dev/null"]).status.code(),
        Some(2)
    );
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.vgrid");
    assert_eq!(modalvox(&["check-equivalence", "--grid", missing.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(modalvox(&["--help"]).status.code(), Some(0));
}

#[test]
fn shapes_and_equivalence() {
    let out = ok(&["shapes"]);
    assert_eq!(out.lines().count(), 6);
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("l.vgrid");
    ok(&["shapes", "l", "--res", "8", "-o", grid.to_str().unwrap()]);
    let out = ok(&["check-equivalence", "--grid", grid.to_str().unwrap(), "--trials", "2"]);
    let err: f64 = out.trim().rsplit(' ').next().unwrap().parse().unwrap();
    assert!(err < 1e-10);
}

#[test]
fn voxelize_mesh_then_solve() {
    let dir = tempfile::tempdir().unwrap();
    let stl = dir.path().join("box.stl");
    modalvox::TriMesh::cuboid([0.0; 3], [0.04, 0.02, 0.02]).save_stl(&stl).unwrap();
    let grid = dir.path().join("box.vgrid");
    ok(&["voxelize", stl.to_str().unwrap(), "--res", "4", "-o", grid.to_str().unwrap()]);
    let modes = dir.path().join("box.modes");
    ok(&["--modes", "3", "modal", "--grid", grid.to_str().unwrap(), "-o", modes.to_str().unwrap()]);
    let (header, m) = read_modes(BufReader::new(File::open(&modes).unwrap())).unwrap();
    assert_eq!(header.k, 3);
    assert_eq!(header.material, "ceramic");
    assert!(m.freqs_hz.windows(2).all(|w| w[0] <= w[1]));
    assert!(m.residuals.iter().all(|&r| r < 1e-6));
}

#[test]
fn staged_commands_match_pipeline_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let common = ["--material", "plastic", "--modes", "2"];
    let src = ["--shape", "cube", "--res", "3", "--h", "0.02"];
    ok(&[&common[..], &["modal"], &src[..], &["-o", &p("m.modes")]].concat());
    ok(&[&common[..], &["ffat"], &src[..], &["--modes-file", &p("m.modes"), "-o", &p("far")]].concat());
    ok(&[&common[..], &["--ffat-range", "near", "ffat"], &src[..], &["--modes-file", &p("m.modes"), "-o", &p("near")]]
        .concat());
    let a: f64 = 0.06;
    let far = radii(&dir.path().join("far/mode_000.ffat"));
    let near = radii(&dir.path().join("near/mode_000.ffat"));
    for i in 0..3 {
        assert!((far[i] - 3f64.powi(i as i32 + 1) * a).abs() < 1e-12);
        assert!((near[i] - 1.25f64.powi(i as i32 + 1) * a).abs() < 1e-12);
    }
    assert!(dir.path().join("far/mode_001.png").exists());

    fs::write(p("ev.json"), r#"[{"t":0.0,"vertex":0,"dir":[0,0,1],"amp":1.0}]"#).unwrap();
    ok(&[
        "render", "--modes-file", &p("m.modes"), "--ffat-dir", &p("far"), "--events", &p("ev.json"),
        "--listener", "0.5,0.5,0.5", "--duration", "0.5", "-o", &p("a.wav"),
    ]);
    let wav = read_wav(Path::new(&p("a.wav"))).unwrap();
    assert_eq!(wav.samples.len(), 22_050);
    assert!(wav.peak() > 0.8);
    // inside the innermost sphere
    let close = modalvox(&[
        "render", "--modes-file", &p("m.modes"), "--ffat-dir", &p("far"), "--events", &p("ev.json"),
        "--listener", "0.01,0,0", "-o", &p("b.wav"),
    ]);
    assert_eq!(close.status.code(), Some(2));
}

#[test]
fn plastic_pipeline_uses_boundary_solve() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    ok(&[
        "--material", "plastic", "--modes", "3", "pipeline", "--shape", "cube", "--res", "3", "--h", "0.02",
        "--duration", "0.5", "-o", out.to_str().unwrap(),
    ]);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let transfers = summary["transfers"].as_array().unwrap();
    assert_eq!(transfers.len(), 3);
    assert!(transfers.iter().all(|t| t["kind"] == "bem"));
    assert!(transfers.iter().all(|t| t["kappa_h"].as_f64().unwrap() < 1.0));
    for i in 0..3 {
        assert!(out.join(format!("ffat/mode_{i:03}.ffat")).exists());
    }
    assert!(out.join("modes.modes").exists());
}

#[test]
fn ceramic_tap_spectrum_peaks_at_a_mode() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    ok(&["--modes", "4", "pipeline", "--shape", "cube", "--res", "4", "--h", "0.04", "-o", out.to_str().unwrap()]);
    let (_, modes) = read_modes(BufReader::new(File::open(out.join("modes.modes")).unwrap())).unwrap();
    let wav = read_wav(&out.join("render.wav")).unwrap();
    assert!((wav.peak() - 0.891).abs() < 1e-3);

    let n = wav.samples.len();
    let mut spec: Vec<Complex<f64>> = wav.samples.iter().map(|&s| Complex::new(s, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut spec);
    let df = wav.sample_rate as f64 / n as f64;
    let bin = (1..n / 2).max_by(|&a, &b| spec[a].norm().total_cmp(&spec[b].norm())).unwrap();
    let hz = bin as f64 * df;
    let nearest = modes
        .omega_damped
        .iter()
        .map(|w| (w / (2.0 * PI) - hz).abs())
        .fold(f64::INFINITY, f64::min);
    assert!(nearest <= df, "peak {hz} Hz, modes {:?}", modes.freqs_hz);
}

#[test]
fn zero_amplitude_tap_is_silent() {
    let dir = tempfile::tempdir().unwrap();
    let ev = dir.path().join("ev.json");
    fs::write(&ev, r#"[{"t":0.1,"vertex":2,"dir":[1,0,0],"amp":0.0}]"#).unwrap();
    let out = dir.path().join("run");
    ok(&[
        "--modes", "2", "pipeline", "--shape", "bar", "--res", "8", "--h", "0.02", "--events", ev.to_str().unwrap(),
        "--duration", "0.3", "-o", out.to_str().unwrap(),
    ]);
    let wav = read_wav(&out.join("render.wav")).unwrap();
    assert_eq!(wav.samples.len(), 13_230);
    assert!(wav.samples.iter().all(|&s| s == 0.0));
}

#[test]
fn bench_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench");
    let md = ok(&[
        "--modes", "4", "bench", "--shapes", "bar:8", "--seeds", "2", "--tols", "1e-2", "--no-timing", "-o",
        out.to_str().unwrap(),
    ]);
    assert!(md.contains("lobpcg-random"));
    assert!(md.contains("mixed-krylov(20,1)"));
    let csv = fs::read_to_string(out.join("bench.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}
