use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
depth = 2
input_dim = 4
samples = 3
widths = [16, 64]
seeds = [0, 1, 2]
quad_order = 40
confirm_quadrature = false
max_steps = 4000
step_check = false
gram_every = 50
norm_every = 50
"#;

fn lazylab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lazylab"))
        .args(args)
        .current_dir(dir)
        .env_remove("LAZYLAB_OUT")
        .output()
        .expect("spawn lazylab")
}

fn write_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("cfg.toml");
    fs::write(&path, format!("{SMALL}{extra}")).unwrap();
    path.to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn lazy_suite_output_does_not_depend_on_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let mut outputs = Vec::new();
    for workers in ["1", "2"] {
        let out = dir.path().join(format!("w{workers}"));
        let o = lazylab(
            &["lazy-suite", "--config", &cfg, "--workers", workers, "--out", out.to_str().unwrap()],
            dir.path(),
        );
        assert!(o.status.code().is_some_and(|c| c <= 1), "{}", stderr(&o));
        outputs.push((
            fs::read(out.join("sweep.csv")).unwrap(),
            fs::read(out.join("widths.csv")).unwrap(),
        ));
        assert!(out.join("summary.json").exists());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn check_init_below_threshold_is_reported_not_gated() {
    let dir = tempfile::tempdir().unwrap();
    let o = lazylab(&["check-init", "--width", "4", "--seeds", "3", "--out", "o"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("below"));
    let csv = fs::read_to_string(dir.path().join("o/init_bounds.csv")).unwrap();
    assert!(csv.contains("a_norm"));
}

#[test]
fn bad_config_exits_with_one_line_reason() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "depth = 2\nnot_a_field = 1\n").unwrap();
    let o = lazylab(&["kernel", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.starts_with("lazylab: "));
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
}

#[test]
fn non_lazy_exponents_are_refused_by_lazy_suite() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "gamma = [0.5, 0.5, 0.5]\n");
    let o = lazylab(&["lazy-suite", "--config", &cfg, "--out", "o"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("lazylab: "));
}

#[test]
fn kernel_prints_summary_and_writes_matrices() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let o = lazylab(&["kernel", "--config", &cfg, "--out", "k"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let line = String::from_utf8(o.stdout).unwrap();
    let fields: Vec<&str> = line.trim().split(',').collect();
    assert_eq!(fields[0], "lambda_S");
    assert!(fields[1].parse::<f64>().unwrap() > 0.0);
    assert_eq!(fields[3], "40");
    assert!(dir.path().join("k/ktilde_l0.csv").exists());
}

#[test]
fn phase_scan_rows_are_sorted_by_laziness() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "gamma_grid = [[0.5, 0.5, 0.0], [0.0, 0.0, 0.0], [0.25, 0.25, 0.0]]\n",
    );
    let o = lazylab(&["phase-scan", "--config", &cfg, "--out", "p"], dir.path());
    assert!(o.status.code().is_some_and(|c| c <= 1), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("p/phase.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "s").expect("s column");
    let s: Vec<f64> = lines.map(|l| l.split(',').nth(col).unwrap().parse().unwrap()).collect();
    assert_eq!(s.len(), 6);
    assert!(s.windows(2).all(|w| w[0] <= w[1]), "{s:?}");
}

#[test]
fn train_writes_trace_and_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let o = lazylab(&["train", "--config", &cfg, "--width", "64", "--seed", "3", "--out", "t"], dir.path());
    assert!(o.status.code().is_some_and(|c| c <= 1), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("m=64 seed=3 "));
    for f in ["trace.csv", "dataset.csv", "params_init.txt", "params_final.txt"] {
        assert!(dir.path().join("t").join(f).exists(), "{f}");
    }
    let trace = fs::read_to_string(dir.path().join("t/trace.csv")).unwrap();
    assert!(trace.lines().count() > 2);
}

#[test]
fn train_accepts_dataset_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let first = lazylab(&["train", "--config", &cfg, "--width", "16", "--out", "a"], dir.path());
    assert!(first.status.code().is_some_and(|c| c <= 1));
    let data = dir.path().join("a/dataset.csv");
    let second = lazylab(
        &["train", "--config", &cfg, "--width", "16", "--data", data.to_str().unwrap(), "--out", "b"],
        dir.path(),
    );
    assert_eq!(first.status.code(), second.status.code());
    assert_eq!(
        fs::read(dir.path().join("a/trace.csv")).unwrap(),
        fs::read(dir.path().join("b/trace.csv")).unwrap()
    );
}

#[test]
fn verify_runs_selected_criteria() {
    let dir = tempfile::tempdir().unwrap();
    let o = lazylab(&["verify", "--only", "1,2", "--out", "v"], dir.path());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().count(), 2, "{stdout}");
    assert!(stdout.lines().all(|l| l.contains("PASS")), "{stdout}");
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn out_dir_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_lazylab"))
        .args(["check-init", "--width", "4", "--seeds", "2"])
        .current_dir(dir.path())
        .env("LAZYLAB_OUT", &target)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(target.join("init_bounds.csv").exists());
}
