//! Stimulus suites on disk.
//!
//! `suites/<test_id>/` holds `suite_manifest.json`, one test image per cell
//! under `cells/` and one reference per axis value under `refs/` (the
//! reference does not depend on the test contrast). Video stimuli are frame
//! directories.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use super::{CellError, PipelineError};
use crate::colorimetry::{linear_to_encoded, DisplayModel};
use crate::pngio::write_stimulus;
use crate::stimgen::{generate_pair, StimulusSpec, TestGrid, TestId};

pub const MANIFEST_FILE: &str = "suite_manifest.json";
/// Bumped whenever generated pixels could change for identical inputs.
pub const GENERATOR_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteInputs {
    pub generator_version: u32,
    pub grid: TestGrid,
    pub base: StimulusSpec,
    pub display: DisplayModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellEntry {
    pub axis_index: usize,
    pub contrast_index: usize,
    pub spec: StimulusSpec,
    /// Relative to the suite directory.
    pub test_path: String,
    pub ref_path: String,
    pub clamp_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteManifest {
    pub test_id: TestId,
    pub fingerprint: String,
    pub inputs: SuiteInputs,
    pub cells: Vec<CellEntry>,
}

impl SuiteManifest {
    pub fn load(dir: &Path) -> Result<Self, PipelineError> {
        read_json(&dir.join(MANIFEST_FILE))
    }

    pub fn total_clamps(&self) -> u64 {
        self.cells.iter().map(|c| c.clamp_count).sum()
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex(&Sha256::digest(data))
}

pub fn fingerprint<T: Serialize>(v: &T) -> String {
    sha256_hex(serde_json::to_string(v).expect("serializable").as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, PipelineError> {
    let text = fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Format { path: path.to_path_buf(), msg: e.to_string() })
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<(), PipelineError> {
    if let Some(d) = path.parent() {
        fs::create_dir_all(d).map_err(|e| PipelineError::io(d, e))?;
    }
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    fs::write(path, s).map_err(|e| PipelineError::io(path, e))
}

/// Base specification and display of a test under a config.
pub fn suite_inputs(cfg: &RunConfig, test: TestId) -> SuiteInputs {
    let mut base = StimulusSpec::base(test);
    let info = test.info();
    if let Some(ppd) = cfg.display.ppd {
        base.ppd = ppd;
    }
    if info.video {
        base.fps = cfg.display.fps;
        base.duration = cfg.display.duration;
    }
    if base.seed.is_some() {
        base.seed = Some(cfg.seed);
    }
    let display = DisplayModel { peak_luminance: cfg.display.peak_luminance, ..DisplayModel::new(base.ppd, base.fps) };
    SuiteInputs {
        generator_version: GENERATOR_VERSION,
        grid: TestGrid::new(test, cfg.density(test), cfg.display.fps),
        base,
        display,
    }
}

fn cell_name(i: usize, j: usize, video: bool) -> String {
    if video {
        format!("cells/a{i:02}_c{j:02}")
    } else {
        format!("cells/a{i:02}_c{j:02}.png")
    }
}

fn ref_name(i: usize, video: bool) -> String {
    if video {
        format!("refs/a{i:02}")
    } else {
        format!("refs/a{i:02}.png")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenOutcome {
    Generated,
    UpToDate,
}

fn files_present(dir: &Path, m: &SuiteManifest) -> bool {
    m.cells.iter().all(|c| dir.join(&c.test_path).exists() && dir.join(&c.ref_path).exists())
}

/// Writes one suite. An existing suite with the same fingerprint is left
/// alone; one with a different fingerprint is a `ManifestMismatch` unless
/// `force` is set.
pub fn generate_suite(dir: &Path, inputs: &SuiteInputs, force: bool) -> Result<GenOutcome, PipelineError> {
    let fp = fingerprint(inputs);
    let test = inputs.grid.test_id;
    let mpath = dir.join(MANIFEST_FILE);
    if mpath.exists() {
        match SuiteManifest::load(dir) {
            Ok(old) if old.fingerprint == fp && files_present(dir, &old) => return Ok(GenOutcome::UpToDate),
            Ok(old) if old.fingerprint != fp && !force => {
                return Err(PipelineError::ManifestMismatch {
                    path: mpath,
                    detail: format!("suite for {test} was generated from different inputs; use --force to regenerate"),
                })
            }
            _ => {}
        }
    }
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    }
    for sub in ["cells", "refs"] {
        let d = dir.join(sub);
        fs::create_dir_all(&d).map_err(|e| PipelineError::io(&d, e))?;
    }
    let grid = &inputs.grid;
    let video = test.info().video;
    let nc = grid.contrasts.len();
    let n = grid.axis_values.len() * nc;
    let cells: Vec<Result<CellEntry, PipelineError>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / nc, k % nc);
            let spec = grid.spec(&inputs.base, i, j);
            let wrap = |e: CellError| PipelineError::Cell { test, axis_index: i, contrast_index: j, msg: e.to_string() };
            let (t, r) = generate_pair(&spec).map_err(|e| wrap(e.into()))?;
            let te = linear_to_encoded(&t, &inputs.display).map_err(|e| wrap(e.into()))?;
            let test_path = cell_name(i, j, video);
            let ref_path = ref_name(i, video);
            write_stimulus(&dir.join(&test_path), &te).map_err(|e| wrap(CellError::Other(e.to_string())))?;
            if j == 0 {
                let re = linear_to_encoded(&r, &inputs.display).map_err(|e| wrap(e.into()))?;
                write_stimulus(&dir.join(&ref_path), &re).map_err(|e| wrap(CellError::Other(e.to_string())))?;
            }
            Ok(CellEntry {
                axis_index: i,
                contrast_index: j,
                spec,
                test_path,
                ref_path,
                clamp_count: te.manifest.clamp_count,
            })
        })
        .collect();
    let cells = cells.into_iter().collect::<Result<Vec<_>, _>>()?;
    let manifest = SuiteManifest { test_id: test, fingerprint: fp, inputs: inputs.clone(), cells };
    write_json(&mpath, &manifest)?;
    Ok(GenOutcome::Generated)
}

pub fn suite_dir(cfg: &RunConfig, test: TestId) -> PathBuf {
    cfg.suites_dir().join(test.as_str())
}
