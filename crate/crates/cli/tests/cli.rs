use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

const BIN: &str = env!("CARGO_BIN_EXE_percepbench");

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let p = dir.join("run.toml");
    let text = format!(
        r#"schema_version = 1
output = "out"
reference_pack = "builtin:synthetic"
tests = ["detection_luminance"]
metrics = ["psnr_y"]
reproducible = true

[grid.detection_luminance]
axis_points = 3
contrast_points = 3
{extra}"#
    );
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "schema_version = 1\nbogus_key = 3\n").unwrap();
    let out = run(&["gen", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    std::fs::write(&cfg, "metrics = [\"no_such_metric\"]\n").unwrap();
    assert_eq!(run(&["run", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["gen", "--config", "/nonexistent/run.toml"]).status.code(), Some(2));
    assert_eq!(run(&["adapter-serve", "--metric", "nope"]).status.code(), Some(2));
}

#[test]
fn run_before_gen_is_a_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let out = run(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gen"));
}

#[test]
fn crashing_adapter_only_fails_under_strict() {
    let tmp = tempfile::tempdir().unwrap();
    let crash = repo().join("crates/core/tests/fixtures/adapters/crash.sh");
    let extra = format!("\n[[adapters]]\nname = \"crashy\"\ncommand = \"sh {}\"\ntimeout_s = 30\n", crash.display());
    let cfg = write_config(tmp.path(), &extra);
    let c = cfg.to_str().unwrap();

    let out = run(&["all", "--config", c]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("crashy: 6/9 cells failed"), "{stderr}");
    let root = tmp.path().join("out");
    for p in [
        "surfaces/detection_luminance/psnr_y/surface.json",
        "surfaces/detection_luminance/crashy/run.json",
        "scores/summary.json",
        "scores/detection_luminance/psnr_y/score.json",
        "report/index.html",
        "report/detection_luminance/psnr_y/figure.svg",
        "report/detection_luminance/psnr_y/surface.csv",
    ] {
        assert!(root.join(p).exists(), "{p}");
    }

    let out = run(&["run", "--config", c, "--strict"]);
    assert_eq!(out.status.code(), Some(3));
    // The native metric is unaffected.
    let out = run(&["score", "--config", c]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("psnr_y\tdetection_luminance\tAlignment"));
}

#[test]
fn adapter_that_never_says_hello_is_isolated() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = repo().join("crates/core/tests/fixtures/adapters/badhello.sh");
    let cfg = write_config(tmp.path(), "");
    let c = cfg.to_str().unwrap();
    assert_eq!(run(&["gen", "--config", c]).status.code(), Some(0));
    let cmd = format!("sh {}", bad.display());
    let out = run(&["run", "--config", c, "--adapter", &cmd]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(run(&["run", "--config", c, "--adapter", &cmd, "--strict"]).status.code(), Some(3));
}

#[test]
fn builtin_metric_served_as_an_adapter() {
    let tmp = tempfile::tempdir().unwrap();
    let cmd = format!("{BIN} adapter-serve --metric psnr_y");
    let extra = format!("\n[[adapters]]\nname = \"psnr_y_served\"\ncommand = \"{cmd}\"\n");
    let cfg = write_config(tmp.path(), &extra);
    let out = run(&["all", "--config", cfg.to_str().unwrap(), "--strict"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let surf = |m: &str| {
        let p = tmp.path().join(format!("out/surfaces/detection_luminance/{m}/surface.json"));
        let v: serde_json::Value = serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap();
        v["scores"].clone()
    };
    assert_eq!(surf("psnr_y"), surf("psnr_y_served"));
}

#[test]
fn adapter_serve_conformance() {
    let dir = repo().join("crates/core/tests/fixtures/protocol");
    for metric in ["psnr_y", "constant"] {
        let mut child = Command::new(BIN)
            .args(["adapter-serve", "--metric", metric])
            .current_dir(&dir)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .unwrap();
        let input = std::fs::read(dir.join("session.in.ndjson")).unwrap();
        child.stdin.take().unwrap().write_all(&input).unwrap();
        let out = child.wait_with_output().unwrap();
        assert!(out.status.success());
        let expected = std::fs::read_to_string(dir.join(format!("session.{metric}.out.ndjson"))).unwrap();
        assert_eq!(String::from_utf8(out.stdout).unwrap(), expected, "{metric}");
    }
}

#[test]
fn metrics_list_names_every_builtin() {
    let out = run(&["metrics", "list"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for m in ["psnr_y", "ssim", "ms_ssim", "gmsd", "ciede2000", "hyab", "ictcp_de", "constant", "oracle"] {
        assert!(text.lines().any(|l| l.starts_with(&format!("{m}\t"))), "{m}");
    }
}

#[test]
fn shipped_reference_packs_are_current() {
    for model in ["castle", "synthetic"] {
        let tmp = tempfile::tempdir().unwrap();
        let out = run(&["refpack", "export", "--model", model, "--out", tmp.path().to_str().unwrap()]);
        assert!(out.status.success());
        let shipped = repo().join("refpacks").join(model);
        let mut names: Vec<_> = std::fs::read_dir(&shipped).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        let mut fresh: Vec<_> = std::fs::read_dir(tmp.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        fresh.sort();
        assert_eq!(names, fresh, "{model}");
        for n in names {
            assert_eq!(std::fs::read(shipped.join(&n)).unwrap(), std::fs::read(tmp.path().join(&n)).unwrap(), "{model}/{n:?}");
        }
    }
}

#[test]
fn shipped_pack_directory_scores_like_the_builtin() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let c = cfg.to_str().unwrap();
    assert_eq!(run(&["gen", "--config", c]).status.code(), Some(0));
    assert_eq!(run(&["run", "--config", c]).status.code(), Some(0));
    let builtin = run(&["score", "--config", c]);
    let pack = repo().join("refpacks/synthetic");
    let text = std::fs::read_to_string(&cfg).unwrap().replace("builtin:synthetic", pack.to_str().unwrap());
    std::fs::write(&cfg, text).unwrap();
    let from_dir = run(&["score", "--config", c]);
    assert!(from_dir.status.success());
    assert_eq!(builtin.stdout, from_dir.stdout);
}
