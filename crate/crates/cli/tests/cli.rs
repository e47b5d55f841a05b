use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_clasmk");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("CLASK_THREADS").output().unwrap()
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

fn moons_file(dir: &Path, n: usize) -> PathBuf {
    let path = dir.join("moons.csv");
    let n = n.to_string();
    let o = run(&["synth", "--kind", "moons", "--n-per-class", &n, "--seed", "3", "--output", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o));
    path
}

const SMALL: [&str; 6] = ["--kernel", "rbf:1", "--kernel", "rbf:0.3", "--max-rank", "32"];

fn train(dir: &Path, data: &Path, out: &str, extra: &[&str]) -> PathBuf {
    let out = dir.join(out);
    let mut args = vec!["train", "--data", data.to_str().unwrap(), "--output", out.to_str().unwrap()];
    args.extend_from_slice(&SMALL);
    args.extend_from_slice(extra);
    let o = run(&args);
    assert!(o.status.success(), "{}", text(&o));
    out
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["synth", "--kind", "nope", "--output", "x"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["eval"]).status.code(), Some(1));
}

#[test]
fn bad_thread_count_is_a_usage_error() {
    let o = Command::new(BIN).args(["synth", "--kind", "moons", "--output", "/dev/null"]).env("CLASK_THREADS", "zero").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o).contains("CLASK_THREADS"));
}

#[test]
fn missing_input_is_a_runtime_error_naming_the_path() {
    let o = run(&["train", "--data", "/no/such/file.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("/no/such/file.csv"), "{}", text(&o));
}

#[test]
fn one_layer_training_writes_model_and_weights() {
    let dir = tempfile::tempdir().unwrap();
    let data = moons_file(dir.path(), 60);
    let out = train(dir.path(), &data, "m", &["--l-max", "1"]);
    assert!(out.join("model.clasmk").exists());
    assert!(out.join("config.txt").exists());
    assert!(out.join("nu_layer1.csv").exists());
    assert!(!out.join("nu_layer2.csv").exists());

    let test = dir.path().join("test.csv");
    let o = run(&["synth", "--kind", "moons", "--n-per-class", "30", "--seed", "9", "--output", test.to_str().unwrap()]);
    assert!(o.status.success());
    let model = out.join("model.clasmk");
    let o = run(&["eval", "--model", model.to_str().unwrap(), "--test", test.to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o));
    assert!(text(&o).starts_with("error "));
}

#[test]
fn weight_files_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let data = moons_file(dir.path(), 50);
    let a = train(dir.path(), &data, "a", &["--l-max", "2", "--seed", "7"]);
    let b = train(dir.path(), &data, "b", &["--l-max", "2", "--seed", "7"]);
    let read = |d: &Path| fs::read(d.join("nu_layer1.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn heatmap_cells_follow_the_weights() {
    let dir = tempfile::tempdir().unwrap();
    let data = moons_file(dir.path(), 50);
    let out = train(dir.path(), &data, "m", &["--l-max", "1"]);
    let maps = dir.path().join("maps");
    let model = out.join("model.clasmk");
    let o = run(&["heatmap", "--model", model.to_str().unwrap(), "--output", maps.to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o));

    let csv = fs::read_to_string(maps.join("nu_layer1.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').skip(1).map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 2);
    for row in &rows {
        assert_eq!(row.len(), 2);
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    let img = fs::read(maps.join("nu_layer1.ppm")).unwrap();
    let header = b"P6\n32 32\n255\n";
    assert!(img.starts_with(header));
    let pixels = &img[header.len()..];
    assert_eq!(pixels.len(), 32 * 32 * 3);
    for (c, row) in rows.iter().enumerate() {
        for (k, v) in row.iter().enumerate() {
            let at = ((c * 16 + 8) * 32 + k * 16 + 8) * 3;
            assert_eq!(pixels[at], (v * 255.0).round() as u8);
        }
    }
}

#[test]
fn kfold_prints_one_line_per_fold() {
    let dir = tempfile::tempdir().unwrap();
    let data = moons_file(dir.path(), 40);
    let mut args = vec!["eval", "--data", data.to_str().unwrap(), "--kfold", "10", "--l-max", "1"];
    args.extend_from_slice(&SMALL);
    let o = run(&args);
    assert!(o.status.success(), "{}", text(&o));
    let out = String::from_utf8_lossy(&o.stdout);
    assert_eq!(out.lines().filter(|l| l.starts_with("fold ")).count(), 10);
    assert!(out.contains("over 10 folds"));
}

#[test]
fn single_point_sweep_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let data = moons_file(dir.path(), 40);
    let mut args = vec!["sweep", "--data", data.to_str().unwrap(), "--grid", "layers=1"];
    args.extend_from_slice(&SMALL);
    let o = run(&args);
    assert!(o.status.success(), "{}", text(&o));
    let out = String::from_utf8_lossy(&o.stdout);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 2, "{out}");
    assert!(lines[0].starts_with("# layers,"));
    assert!(lines[1].ends_with(','), "{}", lines[1]);
}

#[test]
fn bad_grid_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = moons_file(dir.path(), 20);
    let o = run(&["sweep", "--data", data.to_str().unwrap(), "--grid", "depth=1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn embeddings_have_one_row_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let data = moons_file(dir.path(), 30);
    let out = train(dir.path(), &data, "m", &["--l-max", "1"]);
    let model = out.join("model.clasmk");
    let o = run(&["embed", "--model", model.to_str().unwrap(), "--data", data.to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    let rows: Vec<&str> = stdout.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 60);
}

#[test]
fn subspace_synth_bounds_report() {
    let dir = tempfile::tempdir().unwrap();
    let feats = dir.path().join("f.csv");
    let bases = dir.path().join("b.csv");
    let o = run(&[
        "synth", "--kind", "subspace", "--classes", "2", "--rank", "2", "--dim", "8", "--lambda", "0.2",
        "--n-per-class", "300", "--output", feats.to_str().unwrap(), "--bases-output", bases.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", text(&o));
    let o = run(&["bounds", "--features", feats.to_str().unwrap(), "--bases", bases.to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o));
    assert!(!o.stdout.is_empty());
}
