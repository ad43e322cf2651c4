use std::path::{Path, PathBuf};
use std::time::Duration;

use percepbench::adapter::{answer, run_adapter, serve, AdapterError, AdapterOptions, AdapterRequest, AdapterResponse};
use percepbench::colorimetry::{EncodeManifest, EncodedStimulus};
use percepbench::metrics::{lookup, psnr_y};
use percepbench::pngio::{read_stimulus, write_stimulus};
use proptest::prelude::*;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn script(name: &str) -> String {
    format!("sh {}", fixtures().join("adapters").join(name).display())
}

fn requests(n: u64) -> Vec<AdapterRequest> {
    (1..=n)
        .map(|id| AdapterRequest {
            request_id: id,
            test_path: format!("t{id}.png"),
            ref_path: "r.png".into(),
            ppd: 60.0,
            fps: 0.0,
            color_encoding: "srgb16".into(),
        })
        .collect()
}

fn quick() -> AdapterOptions {
    AdapterOptions { timeout: Duration::from_secs(20), in_flight: 4 }
}

fn sorted(mut v: Vec<AdapterResponse>) -> Vec<AdapterResponse> {
    v.sort_by_key(|r| r.request_id);
    v
}

#[test]
fn echo_adapter_scores_zero() {
    let (hello, out) = run_adapter(&script("echo.sh"), requests(9), quick()).unwrap();
    assert_eq!(hello.name, "echo");
    assert!(hello.descriptor().color);
    let out = sorted(out);
    assert_eq!(out.len(), 9);
    for (k, r) in out.iter().enumerate() {
        assert_eq!(r.request_id, k as u64 + 1);
        assert_eq!(r.outcome, Ok(0.0));
    }
}

#[test]
fn responses_matched_by_id_not_order() {
    let (_, out) = run_adapter(&script("reverse.sh"), requests(4), quick()).unwrap();
    assert_eq!(out[0].request_id, 2);
    for r in &out {
        assert_eq!(r.outcome, Ok(r.request_id as f64));
    }
}

#[test]
fn malformed_lines_become_errors_for_that_request() {
    let (_, out) = run_adapter(&script("malformed.sh"), requests(5), AdapterOptions { in_flight: 1, ..quick() }).unwrap();
    let out = sorted(out);
    assert_eq!(out.len(), 5);
    assert!(out[1].outcome.as_ref().unwrap_err().starts_with("malformed response"));
    assert!(out[2].outcome.as_ref().unwrap_err().contains("non-numeric score"));
    for k in [0, 3, 4] {
        assert_eq!(out[k].outcome, Ok(0.5));
    }
}

#[test]
fn crash_fails_outstanding_and_remaining() {
    let (_, out) = run_adapter(&script("crash.sh"), requests(8), quick()).unwrap();
    let out = sorted(out);
    assert_eq!(out.len(), 8);
    let ok = out.iter().filter(|r| r.outcome.is_ok()).count();
    assert_eq!(ok, 3);
    for r in &out[3..] {
        assert!(r.outcome.is_err());
    }
}

#[test]
fn timeout_is_an_error_response_and_the_rest_continue() {
    let opts = AdapterOptions { timeout: Duration::from_millis(1500), in_flight: 1 };
    let (_, out) = run_adapter(&script("slow.sh"), requests(3), opts).unwrap();
    let out = sorted(out);
    assert_eq!(out[0].outcome, Err(AdapterError::Timeout(1.5).to_string()));
    assert_eq!(out[1].outcome, Ok(2.0));
    assert_eq!(out[2].outcome, Ok(3.0));
}

#[test]
fn handshake_failures() {
    assert!(matches!(run_adapter(&script("badhello.sh"), requests(1), quick()), Err(AdapterError::HandshakeFailed(_))));
    assert!(matches!(run_adapter("exit 0", requests(1), quick()), Err(AdapterError::HandshakeFailed(_))));
}

fn stim(w: usize, h: usize, f: impl Fn(usize) -> u16) -> EncodedStimulus {
    EncodedStimulus {
        width: w,
        height: h,
        frames: 1,
        bit_depth: 16,
        data: (0..w * h * 3).map(f).collect(),
        manifest: EncodeManifest { ppd: 60.0, fps: 0.0, peak_luminance: 100.0, clamp_count: 0, seed: None },
    }
}

/// Stimuli of the conformance vectors, derived from closed-form patterns.
fn fixture_stimuli() -> Vec<(&'static str, EncodedStimulus)> {
    vec![
        ("a.png", stim(16, 16, |_| 30000)),
        ("b.png", stim(16, 16, |i| 30000 + ((i / 3) % 16) as u16 * 400)),
        ("c.png", stim(16, 16, |i| ((i as u64 * 2654435761) % 65536) as u16)),
    ]
}

fn run_serve(metric: &str, dir: &Path, input: &str) -> String {
    let m = lookup(metric, None).unwrap();
    let mut out = Vec::new();
    serve(m.as_ref(), Some(dir), input.as_bytes(), &mut out).unwrap();
    String::from_utf8(out).unwrap()
}

// Set PERCEPBENCH_BLESS=1 to rewrite the vectors after a deliberate change.
#[test]
fn conformance_vectors() {
    let dir = fixtures().join("protocol");
    let bless = std::env::var_os("PERCEPBENCH_BLESS").is_some();
    for (name, s) in fixture_stimuli() {
        let p = dir.join(name);
        if bless {
            write_stimulus(&p, &s).unwrap();
        }
        assert_eq!(read_stimulus(&p, 60.0, 0.0).unwrap().data, s.data, "{name}");
    }
    let input = std::fs::read_to_string(dir.join("session.in.ndjson")).unwrap();
    for metric in ["psnr_y", "constant"] {
        let got = run_serve(metric, &dir, &input);
        let path = dir.join(format!("session.{metric}.out.ndjson"));
        if bless {
            std::fs::write(&path, &got).unwrap();
        }
        assert_eq!(got, std::fs::read_to_string(&path).unwrap(), "{metric}");
    }
}

#[test]
fn served_psnr_matches_in_process() {
    let dir = fixtures().join("protocol");
    let stims = fixture_stimuli();
    let m = lookup("psnr_y", None).unwrap();
    for (k, (name, s)) in stims.iter().enumerate() {
        let req = AdapterRequest {
            request_id: k as u64,
            test_path: name.to_string(),
            ref_path: "a.png".into(),
            ppd: 60.0,
            fps: 0.0,
            color_encoding: "srgb16".into(),
        };
        let direct = psnr_y(s, &stims[0].1).unwrap();
        let served = answer(m.as_ref(), &req, Some(&dir)).outcome.unwrap();
        assert!((direct - served).abs() <= 1e-9, "{name}");
    }
}

fn request_strategy() -> impl Strategy<Value = AdapterRequest> {
    (any::<u64>(), "[ -~]{0,40}", "\\PC{0,20}", 0.01f64..1e4, 0.0f64..1e3, "[a-z0-9]{1,8}").prop_map(
        |(request_id, test_path, ref_path, ppd, fps, color_encoding)| AdapterRequest {
            request_id,
            test_path,
            ref_path,
            ppd,
            fps,
            color_encoding,
        },
    )
}

proptest! {
    #[test]
    fn request_roundtrip(r in request_strategy()) {
        prop_assert_eq!(AdapterRequest::parse_line(&r.to_line()).unwrap(), r);
    }

    #[test]
    fn response_roundtrip(id in any::<u64>(), score in prop::num::f64::NORMAL | prop::num::f64::ZERO, msg in "\\PC{0,30}", is_err in any::<bool>()) {
        let r = if is_err { AdapterResponse::error(id, msg) } else { AdapterResponse::score(id, score) };
        let line = r.to_line();
        prop_assert!(!line.contains('\n'));
        prop_assert_eq!(AdapterResponse::parse_line(&line).unwrap(), r);
    }
}
