use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tfi_cli::manifest::Manifest;

fn tfi(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tfi")).args(args).current_dir(cwd).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_radar_recipe(dir: &Path) -> std::path::PathBuf {
    let p = dir.join("radar.json");
    fs::write(
        &p,
        r#"{"n_samples": 256,
            "transform": {"method": "stft", "window": {"kind": "hann", "length": 64}, "hop": 16, "nfft": 64},
            "raster": {"scaling": {"mode": "db"}, "db_floor": -60.0, "height": 16, "width": 16, "resize": "bilinear"},
            "n_per_class": 2,
            "snr_db": [-5, 0, 5]}"#,
    )
    .unwrap();
    p
}

#[test]
fn synth_transform_render_chain() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    let o = tfi(&["synth", "--class", "P3", "--snr", "-2", "--seed", "4", "--out", "x.tfsg"], dir);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = tfi(&["transform", "--method", "fsst", "--input", "x.tfsg", "--out", "x.tftm"], dir);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = tfi_core::tft::load_tftm(&dir.join("x.tftm")).unwrap();
    assert_eq!(m.kind(), tfi_core::TransformKind::Fsst);
    // TFSG carries no metadata, so the label does not survive the file hop.
    assert_eq!(m.descriptor().source, None);
    let o = tfi(&["render", "--input", "x.tftm", "--out", "x.png", "--height", "32", "--width", "48"], dir);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(&fs::read(dir.join("x.png")).unwrap()[1..4], b"PNG");
    let o = tfi(&["render", "--input", "x.tftm", "--out", "x.tftn", "--format", "tensor"], dir);
    assert_eq!(code(&o), 0);
    assert_eq!(tfi_core::raster::load_tensor(&dir.join("x.tftn")).unwrap().shape(), (224, 224, 1));
}

#[test]
fn transform_parameters_come_from_config() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    assert_eq!(code(&tfi(&["synth", "--class", "LFM", "--samples", "256", "--out", "x.tfsg"], dir)), 0);
    fs::write(dir.join("p.json"), r#"{"nfft": 64, "hop": 8, "window": {"kind": "hann", "length": 32}}"#).unwrap();
    let o = tfi(&["transform", "--method", "stft", "--input", "x.tfsg", "--config", "p.json", "--out", "y.tftm"], dir);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(tfi_core::tft::load_tftm(&dir.join("y.tftm")).unwrap().n_freq(), 64);
}

#[test]
fn unknown_method_lists_the_choices() {
    let d = tempfile::tempdir().unwrap();
    let o = tfi(&["transform", "--method", "bogus", "--input", "x", "--out", "y"], d.path());
    assert_eq!(code(&o), 1);
    let e = stderr(&o);
    for m in ["stft", "fsst", "wvd", "spwvd", "cwd", "cwt", "rp", "gadf", "dwt"] {
        assert!(e.contains(m), "{e}");
    }
}

#[test]
fn usage_errors_exit_one_and_io_errors_exit_two() {
    let d = tempfile::tempdir().unwrap();
    let o = tfi(&["frobnicate"], d.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("Usage"));
    assert_eq!(code(&tfi(&["synth", "--class", "LFM", "--out", "x", "--bogus"], d.path())), 1);
    let o = tfi(&["transform", "--method", "wvd", "--input", "missing.tfsg", "--out", "y"], d.path());
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert_eq!(code(&tfi(&["synth", "--class", "Q9", "--out", "x"], d.path())), 1);
    assert_eq!(code(&tfi(&["--version"], d.path())), 0);
}

#[test]
fn radar_dataset_is_reproducible_and_verified() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    small_radar_recipe(dir);
    for out in ["a", "b"] {
        let o = tfi(&["dataset", "radar", "--config", "radar.json", "--seed", "11", "--out", out], dir);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let a = Manifest::load(&dir.join("a/manifest.json")).unwrap();
    let b = Manifest::load(&dir.join("b/manifest.json")).unwrap();
    assert_eq!(a.items.len(), 18 * 2 * 3);
    assert_eq!(a, b);
    assert!(fs::read(dir.join("a/run.json")).is_ok());

    assert_eq!(code(&tfi(&["dataset", "verify", "--manifest", "a/manifest.json"], dir)), 0);
    // flip one byte of a tensor
    let victim = dir.join("a").join(&a.items[5].path);
    let mut bytes = fs::read(&victim).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 1;
    fs::write(&victim, bytes).unwrap();
    let o = tfi(&["dataset", "verify", "--manifest", "a/manifest.json"], dir);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("hash mismatch"));
    // remove another
    fs::remove_file(dir.join("b").join(&b.items[0].path)).unwrap();
    assert_eq!(code(&tfi(&["dataset", "verify", "--manifest", "b/manifest.json"], dir)), 2);
}

#[test]
fn radar_recipe_errors_name_the_field() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    fs::write(dir.join("bad.json"), r#"{"transform": {"method": "fourier"}, "n_per_class": 1, "snr_db": [0]}"#).unwrap();
    let o = tfi(&["dataset", "radar", "--config", "bad.json", "--out", "o"], dir);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("transform.method"), "{}", stderr(&o));
    fs::write(dir.join("bad2.json"), "{\n  \"transform\": {\"method\": \"stft\"},\n  \"n_per_class\": 1,\n  \"snr\": [0]\n}").unwrap();
    let o = tfi(&["dataset", "radar", "--config", "bad2.json", "--out", "o"], dir);
    assert_eq!(code(&o), 1);
    let e = stderr(&o);
    assert!(e.contains("bad2.json") && e.contains("line 4"), "{e}");
}

#[test]
fn train_and_eval_on_a_manifest() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    small_radar_recipe(dir);
    assert_eq!(code(&tfi(&["dataset", "radar", "--config", "radar.json", "--out", "ds"], dir)), 0);
    fs::write(dir.join("train.json"), r#"{"arch": {"type": "logreg"}, "hyper": {"lr": 0.05, "epochs": 10, "batch": 16, "l2": 0.0001}}"#).unwrap();
    let o = tfi(&["train", "--manifest", "ds/manifest.json", "--config", "train.json", "--out", "m.tfmd"], dir);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = tfi(&["eval", "--manifest", "ds/manifest.json", "--model", "m.tfmd", "--split", "train"], dir);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let acc = v["acc"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
}

#[test]
fn pipeline_sweep_trains_desk_models_and_writes_reports() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    let raster = r#"{"scaling": {"mode": "db"}, "db_floor": -60.0, "height": 16, "width": 16, "resize": "bilinear"}"#;
    let cfg = format!(
        r#"{{"n_samples": 128,
            "stage1": {{"transform": {{"method": "fsst", "window": {{"kind": "gauss", "length": 32, "shape": 0.25}}, "nfft": 64}}, "raster": {raster}}},
            "branch_poly": {{"transform": {{"method": "spwvd", "g_time": {{"kind": "hann", "length": 9}}, "h_lag": {{"kind": "hann", "length": 33}}}}, "raster": {raster}}},
            "branch_other": {{"transform": {{"method": "fsst", "window": {{"kind": "gauss", "length": 32, "shape": 0.25}}, "nfft": 64}}, "raster": {raster}}}}}"#
    );
    fs::write(dir.join("cfg.json"), cfg).unwrap();
    fs::write(
        dir.join("desk.json"),
        r#"{"n_per_class": 3, "snr_db": [0, 10], "seed": 0, "arch": {"type": "mlp", "hidden": [8]},
            "hyper": {"lr": 0.05, "epochs": 5, "batch": 16, "l2": 0.0001}, "baselines": true}"#,
    )
    .unwrap();
    let o = tfi(
        &["pipeline", "sweep", "--config", "cfg.json", "--desk", "desk.json", "--grid", "-4,4", "--n-per-class", "1", "--out", "report"],
        dir,
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(dir.join("report/sweep.csv")).unwrap();
    assert!(csv.starts_with("class,snr_db,accuracy,method"));
    for m in ["pipeline", "branch_poly", "fsst18", "spwvd18"] {
        assert!(csv.contains(m), "{m}");
    }
    assert!(dir.join("report/confusion.json").exists());
    assert!(dir.join("report/run.json").exists());

    // the trained config is directly usable by `pipeline run`
    assert_eq!(code(&tfi(&["synth", "--class", "P2", "--samples", "128", "--snr", "5", "--out", "p2.tfsg"], dir)), 0);
    let o = tfi(&["pipeline", "run", "--config", "report/pipeline.json", "--input", "p2.tfsg"], dir);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["trace"].as_array().unwrap().len(), 2);
}

#[test]
fn tsa_run_writes_metrics() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    fs::write(dir.join("tsa.json"), r#"{"imaging": "gadf", "n_cases": 40, "hyper": {"lr": 0.05, "epochs": 20, "batch": 16, "l2": 0.0001}}"#).unwrap();
    let o = tfi(&["tsa", "run", "--config", "tsa.json", "--seed", "3", "--out", "t"], dir);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("t/metrics.json")).unwrap()).unwrap();
    assert!(v["tur"].is_number() && v["tsr"].is_number());
    let run: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("t/run.json")).unwrap()).unwrap();
    assert_eq!(run["seed"], 3);
}

#[test]
fn tsa_dataset_builds_a_balanced_manifest() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    fs::write(dir.join("tsa.json"), r#"{"imaging": "rp", "n_cases": 20}"#).unwrap();
    let o = tfi(&["dataset", "tsa", "--config", "tsa.json", "--out", "ds"], dir);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = Manifest::load(&dir.join("ds/manifest.json")).unwrap();
    assert_eq!(m.items.len(), 20);
    assert_eq!(m.items.iter().filter(|i| i.label == "unstable").count(), 10);
}
