use std::path::{Path, PathBuf};

use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use ptspec::io::{load_config, read_matrix, write_matrix, CacheStatus, EigenCache, RunConfig, TaskKind};
use ptspec::linalg::CMat;
use ptspec::operator::Perturbation;
use ptspec::tasks::{run_task, RunOptions, TaskOutput};
use ptspec::Error;

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn without_timestamp(out: &TaskOutput) -> Value {
    let mut v: Value = serde_json::from_str(&out.report.to_json()).unwrap();
    v.as_object_mut().unwrap().remove("timestamp");
    v
}

const SMALL: &str = "\
[problem]
V = x^2*(1+x)^2
W = (x + 1/2)/(1 + (x + 1/2)^2)
kinetic = 0.01
length_scale = 0.3
center = -1/2
modes = 40
[task]
epsilon = 0, 0.05
";

#[test]
fn random_200_matrix_file_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    let a = CMat::from_fn(200, 200, |_, _| {
        let scale = 10f64.powi(rng.random_range(-30..30));
        C::new(rng.random_range(-1.0..1.0) * scale, rng.random_range(-1.0..1.0) / scale)
    });
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.mat");
    write_matrix(&path, &a).unwrap();
    let b = read_matrix(&path).unwrap();
    assert!(a.iter().zip(b.iter()).all(|(x, y)| x.re.to_bits() == y.re.to_bits() && x.im.to_bits() == y.im.to_bits()));
}

#[test]
fn truncated_matrix_file_is_a_format_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.mat");
    write_matrix(&path, &CMat::identity(3, 3)).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let cut: String = text.lines().take(3).map(|l| format!("{l}\n")).collect();
    std::fs::write(&path, cut).unwrap();
    assert!(matches!(read_matrix(&path), Err(Error::Format { line: 4, .. })));
}

#[test]
fn bundled_two_dimensional_config() {
    let c = load_config(&bundled("remark2.cfg")).unwrap();
    let spec = c.problem_spec().unwrap();
    for p in [[0.3, -1.2], [2.0, 0.5]] {
        let expected = (p[0] * p[0] + 4.0 * p[1] * p[1]) / 2.0;
        assert!((spec.potential.evaluate(&p).unwrap() - expected).abs() < 1e-14);
    }
    assert_eq!(spec.reflection.flags, vec![false, true]);
    let Perturbation::Pt(w) = &spec.perturbation else { panic!("expected a PT perturbation") };
    assert_eq!(w.source(), "x1^2*x2/(1 + x1^2 + x2^2)");
    assert_eq!(c.declared_task(), Some(TaskKind::Classify));
}

#[test]
fn every_bundled_config_loads() {
    for name in ["remark2", "doublewell_hbar", "doublewell_g", "quartic_reality", "harmonic_reality"] {
        let c = load_config(&bundled(&format!("{name}.cfg"))).unwrap();
        assert!(c.declared_task().is_some(), "{name}");
    }
}

#[test]
fn matrix_perturbation_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let n = 12;
    let parity: Vec<f64> = (0..n).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let h1 = CMat::from_fn(n, n, |i, j| {
        if parity[i] * parity[j] < 0.0 {
            C::new(0.0, 0.1 / (1.0 + (i + j) as f64))
        } else {
            C::new(0.0, 0.0)
        }
    });
    write_matrix(&dir.path().join("h1.mat"), &h1).unwrap();
    let src = format!("[problem]\nV = x^2/2\nperturbation = matrix\nh1_file = h1.mat\nmodes = {n}\n");
    let config = RunConfig::parse(&src, dir.path()).unwrap();
    let out = run_task(&config, TaskKind::Reality, &RunOptions::default());
    assert_eq!(out.exit_code(), 0, "{}", out.report.to_json());

    let missing = "[problem]\nV = x^2\nperturbation = matrix\nh1_file = nowhere.mat\n";
    assert!(matches!(RunConfig::parse(missing, dir.path()), Err(Error::Config { line: 4, .. })));
}

#[test]
fn repeated_runs_are_identical_apart_from_the_timestamp() {
    let config = RunConfig::parse(SMALL, Path::new(".")).unwrap();
    let a = run_task(&config, TaskKind::Spectrum, &RunOptions::default());
    let b = run_task(&config, TaskKind::Spectrum, &RunOptions::default());
    assert_eq!(a.exit_code(), 0);
    assert_eq!(without_timestamp(&a), without_timestamp(&b));
    assert_eq!(a.artifacts, b.artifacts);
}

#[test]
fn cache_is_transparent_and_self_healing() {
    let dir = tempfile::tempdir().unwrap();
    let config = RunConfig::parse(SMALL, Path::new(".")).unwrap();
    let cached = RunOptions {
        epsilon: None,
        cache: EigenCache::at(dir.path()),
    };
    let plain = run_task(&config, TaskKind::Spectrum, &RunOptions::default());
    let first = run_task(&config, TaskKind::Spectrum, &cached);
    let second = run_task(&config, TaskKind::Spectrum, &cached);
    assert_eq!(first.cache_status, Some(CacheStatus::Miss));
    assert_eq!(second.cache_status, Some(CacheStatus::Hit));
    assert_eq!(without_timestamp(&plain), without_timestamp(&first));
    assert_eq!(without_timestamp(&plain), without_timestamp(&second));
    assert_eq!(plain.artifacts, second.artifacts);

    let entries: Vec<PathBuf> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "eig"))
        .collect();
    assert_eq!(entries.len(), 1);
    let mut bytes = std::fs::read(&entries[0]).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    std::fs::write(&entries[0], &bytes).unwrap();
    let healed = run_task(&config, TaskKind::Spectrum, &cached);
    assert_eq!(healed.cache_status, Some(CacheStatus::Corrupt));
    assert_eq!(without_timestamp(&plain), without_timestamp(&healed));
    let again = run_task(&config, TaskKind::Spectrum, &cached);
    assert_eq!(again.cache_status, Some(CacheStatus::Hit));

    let bigger = RunConfig::parse(&SMALL.replace("modes = 40", "modes = 44"), Path::new(".")).unwrap();
    assert_eq!(run_task(&bigger, TaskKind::Spectrum, &cached).cache_status, Some(CacheStatus::Miss));
}

#[test]
fn spectrum_at_zero_coupling_lists_h0() {
    let config = RunConfig::parse("[problem]\nV = x^2\nW = x\nkinetic = 1\nmodes = 10\n", Path::new(".")).unwrap();
    let out = run_task(&config, TaskKind::Spectrum, &RunOptions { epsilon: Some(0.0), ..RunOptions::default() });
    assert_eq!(out.exit_code(), 0);
    let table = &out.report.results["tables"][0]["eigenvalues"];
    for k in 0..10 {
        let re = table[k][0].as_f64().unwrap();
        assert!((re - (2 * k + 1) as f64).abs() < 1e-10, "{re}");
        assert_eq!(table[k][1].as_f64().unwrap(), 0.0);
    }
    assert!(out.artifacts.iter().any(|a| a.path == "eigenvalues.csv"));
}

#[test]
fn task_failures_map_to_exit_codes() {
    let degenerate = load_config(&bundled("remark2.cfg")).unwrap();
    let out = run_task(&degenerate, TaskKind::Reality, &RunOptions::default());
    assert_eq!(out.exit_code(), 1, "declared task mismatch is an operational error");

    let src = std::fs::read_to_string(bundled("remark2.cfg")).unwrap().replace("kind = classify", "kind = reality");
    let degenerate = RunConfig::parse(&src, Path::new(".")).unwrap();
    let out = run_task(&degenerate, TaskKind::Reality, &RunOptions::default());
    assert_eq!(out.exit_code(), 2);
    assert_eq!(out.report.error.as_ref().unwrap().kind, "Simplicity");

    let even = RunConfig::parse("[problem]\nV = x^2\nW = x^2/(1+x^2)\nmodes = 20\n", Path::new(".")).unwrap();
    let out = run_task(&even, TaskKind::Classify, &RunOptions::default());
    assert_eq!(out.exit_code(), 2);
    assert_eq!(out.report.error.as_ref().unwrap().kind, "SymmetryViolation");

    let incomplete = RunConfig::parse("[problem]\nV = x^2\nW = x\nmodes = 20\n", Path::new(".")).unwrap();
    let out = run_task(&incomplete, TaskKind::Sweep, &RunOptions::default());
    assert_eq!(out.exit_code(), 1);
    assert_eq!(out.report.error.as_ref().unwrap().kind, "Config");
}
