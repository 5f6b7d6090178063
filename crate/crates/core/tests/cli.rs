use std::path::Path;
use std::process::Command;

fn fastkan(out: &Path, args: &[&str]) -> (i32, String, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_fastkan"))
        .args(args)
        .env("FASTKAN_OUT", out)
        .output()
        .unwrap();
    (
        o.status.code().unwrap(),
        String::from_utf8_lossy(&o.stdout).into_owned(),
        String::from_utf8_lossy(&o.stderr).into_owned(),
    )
}

#[test]
fn fit_basis_defaults_write_report_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = fastkan(dir.path(), &["fit-basis"]);
    assert_eq!(code, 0, "{err}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("fit_report.json")).unwrap()).unwrap();
    assert!(report["max_abs_error"].as_f64().unwrap() < 0.05);
    let t = report["transform"].as_array().unwrap();
    assert_eq!(t.len(), 8);
    assert!(t.iter().all(|row| row.as_array().unwrap().len() == 8));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("fit-basis_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "fit-basis");
    assert_eq!(manifest["config"]["samples"], 1000);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 3);
}

#[test]
fn fit_basis_with_few_centers_still_runs() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(fastkan(dir.path(), &["fit-basis", "--centers", "3"]).0, 0);
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(fastkan(dir.path(), &["fit-basis", "--range", "2", "-2"]).0, 2);
    assert_eq!(fastkan(dir.path(), &["fit-basis", "--samples", "12"]).0, 2);
    assert_eq!(fastkan(dir.path(), &["bench", "--rounds", "1"]).0, 2);
    assert_eq!(fastkan(dir.path(), &["train", "--epochs", "0", "--synth", "xor"]).0, 2);
    assert_eq!(fastkan(dir.path(), &["train", "--family", "cubic"]).0, 2);
    assert_eq!(fastkan(dir.path(), &["no-such-command"]).0, 2);
}

#[test]
fn missing_mnist_exits_3_and_names_the_files() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    let (code, _, err) = fastkan(dir.path(), &["train", "--mnist-dir", empty.to_str().unwrap()]);
    assert_eq!(code, 3);
    assert!(err.contains("train-images-idx3-ubyte"), "{err}");
}

#[test]
fn divergence_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = fastkan(
        dir.path(),
        &["train", "--arch", "1,1", "--synth", "sine", "--family", "spline", "--optimizer", "sgd", "--lr", "1e200", "--epochs", "5"],
    );
    assert_eq!(code, 4, "{err}");
    assert!(err.contains("epoch"), "{err}");
}

#[test]
fn gradcheck_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, _) = fastkan(dir.path(), &["gradcheck"]);
    assert_eq!(code, 0);
    for kind in ["spline_kan", "rbf_kan", "layernorm", "linear"] {
        assert!(out.contains(kind), "{out}");
    }
    let (code, _, err) = fastkan(dir.path(), &["gradcheck", "--tolerance", "1e-12"]);
    assert_eq!(code, 1);
    assert!(err.contains("worst is"), "{err}");
    let (code, out, _) = fastkan(dir.path(), &["gradcheck", "--family", "spline"]);
    assert_eq!(code, 0);
    assert!(!out.contains("rbf") && !out.contains("layernorm"), "{out}");
}

#[test]
fn bench_single_mode_table() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) = fastkan(
        dir.path(),
        &["bench", "--mode", "forward", "--rounds", "2", "--repeats", "5", "--warmup", "1", "--in-dim", "4", "--out-dim", "4"],
    );
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("spline_kan") && out.contains("rbf_kan"), "{out}");
    let csv = std::fs::read_to_string(dir.path().join("bench.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(dir.path().join("bench_manifest.json").exists());
}

#[test]
fn xor_training_reaches_full_accuracy_and_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["train", "--arch", "2,4,2", "--synth", "xor", "--epochs", "300", "--lr", "1e-2", "--batch", "4"];
    let (code, out, err) = fastkan(a.path(), &args);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("final val accuracy: 1.0000"), "{out}");
    assert_eq!(fastkan(b.path(), &args).0, 0);
    for name in ["train_rbf.csv", "train_rbf.kanf"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name} differs between runs");
    }
    let csv = std::fs::read_to_string(a.path().join("train_rbf.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "epoch,train_loss,val_loss,val_accuracy");
    assert_eq!(csv.lines().count(), 301);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.path().join("train_rbf_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["epoch_wall_times_s"].as_array().unwrap().len(), 300);
}
