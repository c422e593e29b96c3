use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"{
  "experiment": "custom",
  "seed": 5,
  "geometry": { "image_side": 12, "num_angles": 12, "detector_bins": 12 },
  "methods": ["classical_tikhonov", "lsvd_diag"],
  "latent_dim": null,
  "network": { "y_layers": 1, "x_layers": 1, "bias": false, "activation": { "kind": "linear" } },
  "loss": { "reconstruction": 1.0, "alpha_y": 2.0, "alpha_x": 1.0 },
  "noise": { "kind": "gaussian_level", "level": 0.05 },
  "training": { "epochs": 4, "batch_size": 10, "start_lr": 1e-3, "final_lr": 2e-4 },
  "dataset": { "source": { "kind": "phantoms" }, "count": 100, "split_fraction": 0.9 },
  "output_dir": "unused"
}"#;

fn lsvd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lsvd"))
        .args(args)
        .env_remove("LSVD_THREADS")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_tiny(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("tiny.json");
    fs::write(&path, TINY).unwrap();
    path
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(lsvd(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(lsvd(&["metrics", "only-one.pgm"]).status.code(), Some(2));
    assert_eq!(lsvd(&["run", "--preset", "exp1", "--config", "x.json"]).status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_lsvd"))
        .args(["presets"])
        .env("LSVD_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_with_one_and_name_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    let o = lsvd(&["run", "--config", s(&dir.path().join("missing.json"))]);
    assert_eq!(o.status.code(), Some(1));

    let bad = dir.path().join("bad.json");
    fs::write(&bad, TINY.replace("\"count\": 100", "\"count\": 1")).unwrap();
    let o = lsvd(&["run", "--config", s(&bad), "--dry-run", "--out", s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("dataset.count"), "{}", stderr(&o));
}

#[test]
fn presets_are_listed() {
    let o = lsvd(&["presets"]);
    assert!(o.status.success());
    let names: Vec<String> = stdout(&o).lines().map(str::to_owned).collect();
    for want in ["exp1", "exp2", "exp2-semi", "exp3", "paper-exp1", "paper-exp2"] {
        assert!(names.iter().any(|n| n == want), "missing {want}");
    }
}

#[test]
fn metrics_of_an_image_with_itself() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.pgm");
    let mut bytes = b"P5\n4 4\n255\n".to_vec();
    bytes.extend((0..16u8).map(|v| v * 16));
    fs::write(&path, bytes).unwrap();
    let o = lsvd(&["metrics", s(&path), s(&path)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("mse,psnr,ssim"));
    let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(fields[0].parse::<f64>().unwrap(), 0.0);
    assert!((fields[2].parse::<f64>().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn dry_run_echoes_the_paper_hyperparameters() {
    let dir = tempfile::tempdir().unwrap();
    let o = lsvd(&["run", "--preset", "paper-exp2", "--dry-run", "--quiet", "--out", s(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    let cfg = &manifest["config"];
    assert_eq!(cfg["training"]["epochs"], 250);
    assert_eq!(cfg["training"]["batch_size"], 100);
    assert_eq!(cfg["training"]["start_lr"], 1e-3);
    assert_eq!(cfg["training"]["final_lr"], 2e-4);
    assert_eq!(cfg["network"]["init_std"], 0.01);
    assert_eq!(cfg["network"]["x_layers"], 4);
    assert_eq!(cfg["latent_dim"], 64);
    assert_eq!(cfg["geometry"]["image_side"], 64);
    assert_eq!(cfg["dataset"]["count"], 60000);
}

#[test]
fn runs_are_reproducible_and_models_reconstruct() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_tiny(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let first = lsvd(&["run", "--config", s(&cfg), "--quiet", "--out", s(&a)]);
    assert!(first.status.success(), "{}", stderr(&first));
    let second = lsvd(&["run", "--config", s(&cfg), "--quiet", "--out", s(&b)]);
    assert_eq!(stdout(&first), stdout(&second));
    assert_eq!(fs::read(a.join("metrics.csv")).unwrap(), fs::read(b.join("metrics.csv")).unwrap());
    assert!(stdout(&first).starts_with("method,test_mse"));

    let data = dir.path().join("data");
    let o = lsvd(&["gen-data", "--config", s(&cfg), "--quiet", "--out", s(&data)]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["train_images.idx", "test_images.idx", "test_sinograms.csv", "train_paired.csv", "dataset.json"] {
        assert!(data.join(f).is_file(), "missing {f}");
    }

    let recon = dir.path().join("recon");
    let model = a.join("models").join("lsvd_diag");
    let o = lsvd(&[
        "reconstruct",
        "--model",
        s(&model),
        "--input",
        s(&data.join("test_sinograms.csv")),
        "--quiet",
        "--out",
        s(&recon),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(recon.join("recon_0000.pgm").is_file());
    let rows = fs::read_to_string(recon.join("reconstructions.csv")).unwrap();
    assert_eq!(rows.lines().count(), 10);

    let o = lsvd(&["analyze", "stability", "--model", s(&model), "--config", s(&cfg), "--out", s(&dir.path().join("st"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("holds true"), "{}", stdout(&o));
}

#[test]
fn appendix_b_grid_passes() {
    let o = lsvd(&["analyze", "appendix-b", "--lambda-max", "4.0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("passed true"));
}
