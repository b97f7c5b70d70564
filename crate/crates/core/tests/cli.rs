use std::path::Path;
use std::process::{Command, Output};

use vertseq::cord::{Detector32, DetectorConfig};
use vertseq::model::{Model32, ModelConfig, SeqVariant};
use vertseq::phantom::{Manifest, MANIFEST_FILE};

fn vertseq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vertseq")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(o: Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    stdout(&o)
}

/// Small untrained models plus a detector beside them.
fn write_models(dir: &Path) -> Vec<String> {
    Detector32::init(DetectorConfig::default(), 0).to_checkpoint().save(dir.join("detector.ckpt")).unwrap();
    SeqVariant::ALL[..3]
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let cfg = ModelConfig {
                patch: [16, 16, 8],
                feature_dim: 8,
                base_filters: 2,
                lstm_hidden: 4,
                ..ModelConfig::for_variant(v)
            };
            let p = dir.join(format!("m{i}.ckpt"));
            Model32::init(cfg, i as u64).unwrap().to_checkpoint().save(&p).unwrap();
            p.display().to_string()
        })
        .collect()
}

#[test]
fn gen_reports_positive_count() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("d");
    let s = ok(vertseq(&["gen", "--n", "100", "--pos", "0.33", "--seed", "42", "--out", out.to_str().unwrap()]));
    assert!(s.starts_with("series=100 positive=33 "), "{s}");
    let m = Manifest::load(out.join(MANIFEST_FILE)).unwrap();
    assert_eq!(m.entries.iter().filter(|e| e.positive).count(), 33);
}

#[test]
fn unknown_flag_prints_usage_and_fails() {
    let o = vertseq(&["gen", "--bogus"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert!(!vertseq(&["train", "--variant", "median"]).status.success());
    assert!(!vertseq(&[]).status.success());
}

#[test]
fn predict_eval_and_render() {
    let d = tempfile::tempdir().unwrap();
    let data = d.path().join("data");
    ok(vertseq(&["gen", "--n", "10", "--pos", "0.5", "--seed", "3", "--out", data.to_str().unwrap()]));
    let models = write_models(d.path());
    let ens = models.join(",");
    let vol = data.join("series_0000.vsq");

    let s = ok(vertseq(&["predict", "--volume", vol.to_str().unwrap(), "--ensemble", &ens, "--tta", "flip,id,id"]));
    assert_eq!(s.lines().count(), 1);
    let score: f64 = s.trim().split(' ').next().unwrap().strip_prefix("score=").unwrap().parse().unwrap();
    assert!((0.0..=1.0).contains(&score));

    let bad = vertseq(&["predict", "--volume", vol.to_str().unwrap(), "--ensemble", &ens, "--tta", "flip"]);
    assert!(!bad.status.success());

    let s = ok(vertseq(&["eval", "--data", data.to_str().unwrap(), "--partition", "train", "--ensemble", &ens]));
    for key in ["auc=", "sens@0.5=", "spec@0.5=", "mean_infer_s=", "reference_clinical_s=61.36"] {
        assert!(s.lines().any(|l| l.starts_with(key)), "{key} missing from {s}");
    }

    let png = d.path().join("o.pgm");
    ok(vertseq(&["render", "--volume", vol.to_str().unwrap(), "--ensemble", &models[0], "--out", png.to_str().unwrap()]));
    assert!(std::fs::read(&png).unwrap().starts_with(b"P5\n"));
}

#[test]
fn eval_on_one_class_partition_fails() {
    let d = tempfile::tempdir().unwrap();
    let data = d.path().join("data");
    ok(vertseq(&["gen", "--n", "10", "--pos", "0", "--out", data.to_str().unwrap()]));
    let models = write_models(d.path());
    let o = vertseq(&["eval", "--data", data.to_str().unwrap(), "--ensemble", &models[0]]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("both classes"));
}

#[test]
fn train_detector_train_and_experiment() {
    let d = tempfile::tempdir().unwrap();
    let data = d.path().join("data");
    ok(vertseq(&["gen", "--n", "20", "--pos", "0.5", "--seed", "4", "--out", data.to_str().unwrap()]));
    let det = d.path().join("detector.ckpt");
    let s = ok(vertseq(&["train-detector", "--slices", "8", "--per-series", "4", "--epochs", "1", "--out", det.to_str().unwrap()]));
    assert!(s.starts_with("slices=8 "));

    let model = d.path().join("m.ckpt");
    let common = [
        "--data", data.to_str().unwrap(), "--detector", det.to_str().unwrap(),
        "--patch", "16,16,8", "--epochs", "2", "--iters", "1", "--batch", "2", "--lr", "1e-3", "--seed", "5",
    ];
    let mut args = vec!["train", "--variant", "maxloc", "--out", model.to_str().unwrap(), "--lambda", "0.5", "--smooth-width", "5"];
    args.extend(common);
    let s = ok(vertseq(&args));
    assert_eq!(s.lines().filter(|l| l.starts_with("epoch=")).count(), 2);
    let ck = vertseq::checkpoint::Checkpoint::<f32>::load(&model).unwrap();
    assert_eq!(ck.get("seq_variant"), Some("maxloc"));
    assert_eq!(ck.get("lambda"), Some("0.5"));
    assert_eq!(ck.get("seed"), Some("5"));
    assert!(ck.get("best_tuning_auc").is_some());

    let report = d.path().join("report.txt");
    let mut args = vec!["experiment", "--out", report.to_str().unwrap()];
    args.extend(common);
    ok(vertseq(&args));
    let text = std::fs::read_to_string(&report).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("variant=")).count(), 3);

    let members: Vec<String> = ["max", "maxloc", "bilstm"]
        .iter()
        .map(|v| d.path().join(format!("{v}.ckpt")).to_str().unwrap().to_string())
        .collect();
    let vol = data.join("series_0000.vsq");
    let s = ok(vertseq(&[
        "predict", "--volume", vol.to_str().unwrap(), "--ensemble", &members.join(","),
        "--tta", "flip,id,id", "--detector", det.to_str().unwrap(),
    ]));
    assert!(s.starts_with("score="));
}
