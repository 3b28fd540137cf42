//! End-to-end runs of the `cartoseg` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cartoseg::bias::{MetadataRecord, Partition};
use cartoseg::evaluation::{aggregate, per_image_metrics, ClassSet, Strategy};
use cartoseg::synth::ColorModel;
use cartoseg::{LabelMask, SemanticClass};

fn cartoseg(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cartoseg")).current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = cartoseg(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}\n{}",
        String::from_utf8_lossy(&out.stderr),
        String::from_utf8_lossy(&out.stdout)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

/// Fixture corpus plus `n` synthesized samples at 256×256.
fn corpus(dir: &Path, n: u32) {
    std::fs::write(dir.join("run.toml"), "[synth.generation]\nwidth = 256\nheight = 256\n").unwrap();
    ok(dir, &["fixtures", "--out", "fx", "--regions", "3"]);
    ok(dir, &["--config", "run.toml", "synth", "--features", "fx", "--count", &n.to_string(), "--seed", "5", "--out", "data"]);
}

fn files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

#[test]
fn version_is_printed() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["--version"]);
    assert!(out.starts_with("cartoseg 0.1.0"), "{out}");
}

#[test]
fn missing_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = cartoseg(dir.path(), &["eval", "--pred", "p"]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--gt") || err.contains("does not exist"), "{err}");
    assert!(err.contains("Usage: cartoseg eval"), "{err}");

    let out = cartoseg(dir.path(), &["synth", "--bogus"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn oracle_pipeline_reproduces_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    corpus(d, 10);
    ok(d, &["infer", "--input", "data", "--backend", "oracle:data", "--patch", "96", "--overlap", "16", "--out", "pred"]);
    let preds: Vec<PathBuf> = files(&d.join("pred")).into_iter().filter(|p| p.extension().unwrap() == "png").collect();
    assert_eq!(preds.len(), 10);
    for p in &preds {
        let stem = p.file_stem().unwrap().to_string_lossy();
        let gt = LabelMask::load_png(d.join("data").join(format!("{stem}_mask.png"))).unwrap();
        assert_eq!(LabelMask::load_png(p).unwrap(), gt, "{stem}");
    }
    let stdout = ok(d, &["eval", "--pred", "pred", "--gt", "data", "--report", "report.json", "--confusion", "c.csv"]);
    assert!(stdout.contains("mIoU 1.0000"), "{stdout}");
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["miou"], 1.0);
    assert_eq!(report["images"], 10);
    assert_eq!(report["strategy"], "sample-normalized-macro");
    let csv = std::fs::read_to_string(d.join("c.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    assert!(d.join("report.provenance.json").is_file());
    assert!(d.join("pred/provenance.json").is_file());
}

#[test]
fn outputs_do_not_depend_on_job_count() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["fixtures", "--out", "fx", "--regions", "2"]);
    std::fs::write(d.join("run.toml"), "[synth.generation]\nwidth = 192\nheight = 160\n").unwrap();
    for (jobs, out) in [("1", "a"), ("3", "b")] {
        ok(d, &["--jobs", jobs, "--config", "run.toml", "synth", "--features", "fx", "--count", "4", "--seed", "1", "--out", out]);
    }
    let (a, b) = (files(&d.join("a")), files(&d.join("b")));
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.file_name(), y.file_name());
        let (bx, by) = (std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
        if x.file_name().unwrap() == "provenance.json" {
            // Only the output path differs.
            let s = String::from_utf8(bx).unwrap().replace("\"out\": \"a\"", "\"out\": \"b\"");
            let t = String::from_utf8(by).unwrap();
            assert_eq!(s.lines().filter(|l| !l.contains("config_digest")).collect::<Vec<_>>(), t.lines().filter(|l| !l.contains("config_digest")).collect::<Vec<_>>());
        } else {
            assert!(bx == by, "{} differs", x.display());
        }
    }
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let gt = LabelMask::filled(8, 8, SemanticClass::Water);
    std::fs::create_dir_all(d.join("gt")).unwrap();
    std::fs::create_dir_all(d.join("pred")).unwrap();
    gt.save_png(d.join("gt/a.png")).unwrap();
    gt.save_png(d.join("pred/a.png")).unwrap();
    std::fs::write(d.join("c.toml"), "[eval]\nstrategy = \"micro\"\nreport = \"from_config.json\"\n").unwrap();

    ok(d, &["--config", "c.toml", "eval", "--pred", "pred", "--gt", "gt"]);
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("from_config.json")).unwrap()).unwrap();
    assert_eq!(r["strategy"], "micro");

    ok(d, &["--config", "c.toml", "eval", "--pred", "pred", "--gt", "gt", "--strategy", "macro", "--report", "flag.json"]);
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("flag.json")).unwrap()).unwrap();
    assert_eq!(r["strategy"], "macro");

    std::fs::write(d.join("bad.toml"), "[eval]\nstratgey = \"micro\"\n").unwrap();
    let out = cartoseg(d, &["--config", "bad.toml", "eval", "--pred", "pred", "--gt", "gt", "--report", "x.json"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("stratgey"));
}

#[test]
fn runtime_failures_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    image::RgbImage::new(16, 16).save(d.join("in.png")).unwrap();
    let out = cartoseg(d, &["infer", "--input", "in.png", "--backend", "extern:exit 4", "--out", "o.png"]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));

    let out = cartoseg(d, &["infer", "--input", "in.png", "--backend", "telepathy:x", "--out", "o.png"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn heuristic_inference_writes_logits() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    corpus(d, 1);
    ok(d, &[
        "infer", "--input", "data/sample_00000.jpg", "--backend", "heuristic:default", "--scales", "1.0,0.5", "--out",
        "h/mask.png", "--logits", "h/logits.lgt",
    ]);
    let bytes = std::fs::read(d.join("h/logits.lgt")).unwrap();
    assert_eq!(&bytes[..4], b"LGT1");
    let l = cartoseg::Logits::read_lgt(&bytes[..]).unwrap();
    assert_eq!((l.width(), l.height(), l.classes()), (256, 256, 6));
    assert_eq!(l.argmax(), LabelMask::load_png(d.join("h/mask.png")).unwrap());
}

#[test]
fn colorfit_produces_a_usable_model() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    corpus(d, 3);
    ok(d, &["colorfit", "--images", "data", "--components", "2", "--samples-per-class", "3000", "--out", "fit.json"]);
    let model = ColorModel::from_json(&std::fs::read_to_string(d.join("fit.json")).unwrap()).unwrap();
    model.require_all().unwrap();
    ok(d, &["infer", "--input", "data", "--backend", "heuristic:fit.json", "--scales", "1.0", "--out", "pred"]);
    ok(d, &["eval", "--pred", "pred", "--gt", "data", "--report", "r.json"]);
}

#[test]
fn bias_regression_from_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // Forty synthetic per-image scores and matching metadata.
    let mut counts = Vec::new();
    let mut csv = String::from("id,partition,institution,pub_country,cov_country,scale_denominator,pub_year\n");
    for i in 0..40u32 {
        let gt = LabelMask::filled(10, 10, SemanticClass::NonBuilt);
        let mut pred = gt.clone();
        for k in 0..(i * 7 % 37) {
            pred.set(k % 10, k / 10, SemanticClass::Water);
        }
        counts.push(per_image_metrics(&format!("m{i}"), &pred, &gt).unwrap());
        let r = MetadataRecord {
            id: format!("m{i}"),
            partition: if i % 2 == 0 { Partition::Train } else { Partition::Test },
            institution: ["BnF", "LoC"][i as usize % 2].into(),
            pub_country: "France".into(),
            cov_country: ["France", "Chile", "Japan"][i as usize % 3].into(),
            scale_denominator: [1e4, 5e4, 2e5][i as usize % 3] * (1.0 + i as f64 / 100.0),
            pub_year: 1800 + i as i32 * 3,
            miou: 0.0,
        };
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.id,
            r.partition.name(),
            r.institution,
            r.pub_country,
            r.cov_country,
            r.scale_denominator,
            r.pub_year
        ));
    }
    csv.push_str("ghost,val,X,Y,Z,1000,1900\n");
    let report = aggregate(&counts, Strategy::SampleNormalizedMacro, ClassSet::All).unwrap();
    std::fs::write(d.join("report.json"), serde_json::to_string(&report).unwrap()).unwrap();
    std::fs::write(d.join("meta.csv"), csv).unwrap();

    ok(d, &["bias", "--metrics", "report.json", "--metadata", "meta.csv", "--out", "coeffs.json"]);
    let out: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("coeffs.json")).unwrap()).unwrap();
    assert_eq!(out["n"], 40);
    assert_eq!(out["unscored_ids"], serde_json::json!(["ghost"]));
    let names: Vec<&str> = out["coefficients"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert_eq!(names[0], "Intercept");
    assert!(names.contains(&"C(institution)[T.LoC]"));
    assert!(names.contains(&"log_scale") && names.contains(&"pub_year"));
    for c in out["coefficients"].as_array().unwrap() {
        for key in ["estimate", "ci_low", "ci_high", "p"] {
            assert!(c[key].is_number(), "{key} missing");
        }
    }
    assert!(out["r2"].as_f64().unwrap() >= 0.0);

    let out = cartoseg(d, &["bias", "--metrics", "meta.csv", "--metadata", "meta.csv", "--out", "x.json"]);
    assert_eq!(code(&out), 1);
}
