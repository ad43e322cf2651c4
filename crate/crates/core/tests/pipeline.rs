use std::collections::BTreeMap;
use std::path::Path;

use percepbench::evaluation::ScoreType;
use percepbench::pipeline::config::RunConfig;
use percepbench::pipeline::run::{surface_dir, RunFlags, RunRecord, RUN_FILE, SURFACE_FILE};
use percepbench::pipeline::score::{resolve_pack, score_all, SUMMARY_FILE};
use percepbench::pipeline::suite::{read_json, sha256_hex, suite_dir, GenOutcome, MANIFEST_FILE};
use percepbench::pipeline::{gen_all, run_all, PipelineError};
use percepbench::report::render_report;
use percepbench::stimgen::{GridDensity, TestId};

fn config(out: &Path, tests: &[TestId], metrics: &[&str], axis: usize, contrast: usize) -> RunConfig {
    let mut cfg = RunConfig {
        output: out.to_path_buf(),
        reference_pack: "builtin:synthetic".into(),
        tests: tests.to_vec(),
        metrics: metrics.iter().map(|s| s.to_string()).collect(),
        reproducible: true,
        ..RunConfig::default()
    };
    cfg.display.duration = 0.05;
    for &t in tests {
        cfg.grid.insert(t, GridDensity { axis_points: axis, contrast_points: contrast });
    }
    cfg.validate().unwrap();
    cfg
}

/// Relative path to sha256 of every file below `root`.
fn tree(root: &Path) -> BTreeMap<String, String> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, String>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, sha256_hex(&std::fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

#[test]
fn oracle_scores_one_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let tests = [TestId::DetectionSfAch, TestId::DetectionLuminance, TestId::DetectionArea];
    let cfg = config(tmp.path(), &tests, &["oracle", "constant"], 5, 8);
    gen_all(&cfg, false).unwrap();
    let report = run_all(&cfg, RunFlags::default()).unwrap();
    assert_eq!(report.failed_cells(), 0);
    let summary = score_all(&cfg, &resolve_pack(&cfg.reference_pack).unwrap()).unwrap();
    assert_eq!(summary.records.len(), 6);
    for r in &summary.records {
        assert_eq!(r.score_type, ScoreType::Alignment);
        match r.metric.as_str() {
            "oracle" => assert!((r.value.unwrap() - 1.0).abs() < 1e-12, "{r:?}"),
            _ => assert!(r.degenerate && r.value == Some(0.0), "{r:?}"),
        }
    }
    assert!(cfg.scores_dir().join(SUMMARY_FILE).exists());
}

#[test]
fn second_pass_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), &[TestId::DetectionSfAch, TestId::MatchingFreq], &["psnr_y", "ssim"], 3, 4);
    let pack = resolve_pack(&cfg.reference_pack).unwrap();
    let pass = || {
        gen_all(&cfg, false).unwrap();
        run_all(&cfg, RunFlags::default()).unwrap();
        score_all(&cfg, &pack).unwrap();
        render_report(&cfg.output, &cfg.report_dir(), true).unwrap();
        tree(tmp.path())
    };
    let first = pass();
    assert_eq!(gen_all(&cfg, false).unwrap(), vec![
        (TestId::DetectionSfAch, GenOutcome::UpToDate),
        (TestId::MatchingFreq, GenOutcome::UpToDate)
    ]);
    assert_eq!(first, pass());
    assert!(first.keys().any(|k| k.ends_with("figure.svg")));
    assert!(first.contains_key("report/index.html"));

    // A fresh output root reproduces everything.
    let tmp2 = tempfile::tempdir().unwrap();
    let cfg2 = RunConfig { output: tmp2.path().to_path_buf(), ..cfg.clone() };
    gen_all(&cfg2, false).unwrap();
    run_all(&cfg2, RunFlags::default()).unwrap();
    score_all(&cfg2, &pack).unwrap();
    render_report(&cfg2.output, &cfg2.report_dir(), true).unwrap();
    assert_eq!(first, tree(tmp2.path()));
}

#[test]
fn changed_inputs_need_force() {
    let tmp = tempfile::tempdir().unwrap();
    let t = TestId::DetectionLuminance;
    let cfg = config(tmp.path(), &[t], &["psnr_y"], 3, 3);
    gen_all(&cfg, false).unwrap();
    run_all(&cfg, RunFlags::default()).unwrap();

    let mut changed = cfg.clone();
    changed.display.peak_luminance = 200.0;
    assert!(matches!(gen_all(&changed, false), Err(PipelineError::ManifestMismatch { .. })));
    assert_eq!(gen_all(&changed, true).unwrap(), vec![(t, GenOutcome::Generated)]);
    assert!(matches!(run_all(&changed, RunFlags::default()), Err(PipelineError::ManifestMismatch { .. })));
    let r = run_all(&changed, RunFlags { resume: false, force: true }).unwrap();
    assert_eq!(r.failed_cells(), 0);
}

#[test]
fn run_without_gen_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), &[TestId::DetectionArea], &["psnr_y"], 3, 3);
    assert!(matches!(run_all(&cfg, RunFlags::default()), Err(PipelineError::MissingStage { stage: "gen", .. })));
}

#[test]
fn resume_only_recomputes_missing_cells() {
    let tmp = tempfile::tempdir().unwrap();
    let t = TestId::DetectionSfAch;
    let cfg = config(tmp.path(), &[t], &["gmsd"], 3, 4);
    gen_all(&cfg, false).unwrap();
    run_all(&cfg, RunFlags::default()).unwrap();
    let sdir = surface_dir(&cfg, t, "gmsd");
    let full = std::fs::read(sdir.join(SURFACE_FILE)).unwrap();

    // Poison one cell value and drop another; resume keeps the first and
    // recomputes the second.
    let mut v: serde_json::Value = serde_json::from_slice(&full).unwrap();
    v["scores"][0][0] = serde_json::json!(12345.0);
    v["scores"][2][3] = serde_json::Value::Null;
    std::fs::write(sdir.join(SURFACE_FILE), serde_json::to_vec_pretty(&v).unwrap()).unwrap();
    run_all(&cfg, RunFlags { resume: true, force: false }).unwrap();
    let after: serde_json::Value = read_json(&sdir.join(SURFACE_FILE)).unwrap();
    let orig: serde_json::Value = serde_json::from_slice(&full).unwrap();
    assert_eq!(after["scores"][0][0], serde_json::json!(12345.0));
    assert_eq!(after["scores"][2][3], orig["scores"][2][3]);

    // Without resume everything is recomputed.
    run_all(&cfg, RunFlags::default()).unwrap();
    assert_eq!(std::fs::read(sdir.join(SURFACE_FILE)).unwrap(), full);
}

#[test]
fn every_test_runs_or_is_marked_skipped() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), &TestId::ALL, &["psnr_y", "ciede2000", "oracle"], 3, 3);
    gen_all(&cfg, false).unwrap();
    for t in TestId::ALL {
        assert!(suite_dir(&cfg, t).join(MANIFEST_FILE).exists(), "{t}");
    }
    let report = run_all(&cfg, RunFlags::default()).unwrap();
    assert_eq!(report.runs.len(), 33);
    assert_eq!(report.failed_cells(), 0);
    for r in &report.runs {
        let rec: RunRecord = read_json(&surface_dir(&cfg, r.test_id, &r.metric).join(RUN_FILE)).unwrap();
        let video = r.test_id.info().video;
        let colour = matches!(r.test_id, TestId::DetectionSfRg | TestId::DetectionSfYv | TestId::MatchingColor);
        let expect_skip = match r.metric.as_str() {
            "psnr_y" => video || colour,
            "ciede2000" => video,
            _ => !r.test_id.is_threshold_test(),
        };
        assert_eq!(rec.skipped.is_some(), expect_skip, "{} {}", r.test_id, r.metric);
        assert_eq!(surface_dir(&cfg, r.test_id, &r.metric).join(SURFACE_FILE).exists(), !expect_skip);
    }
    let summary = score_all(&cfg, &resolve_pack(&cfg.reference_pack).unwrap()).unwrap();
    assert_eq!(summary.records.len() + summary.unscorable.len() + summary.failed.len(), 33);
    assert!(summary.failed.is_empty(), "{:?}", summary.failed);
    let oracle: Vec<_> = summary.records.iter().filter(|r| r.metric == "oracle").collect();
    assert!(!oracle.is_empty());
    for r in oracle {
        assert_eq!(r.value, Some(1.0), "{r:?}");
    }
}

#[test]
fn shipped_configs_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["default.toml", "quick.toml"] {
        let cfg = RunConfig::load(&dir.join(name)).unwrap();
        cfg.validate().unwrap();
    }
}
