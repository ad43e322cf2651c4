//! Metric responses over generated suites.
//!
//! `surfaces/<test_id>/<metric>/` holds `surface.json` and `run.json`, the
//! latter recording the suite fingerprint, the metric descriptor and one
//! entry per failed cell. A metric that is not eligible for a test gets a
//! `run.json` with the reason and no surface.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{AdapterConfig, RunConfig};
use super::suite::{read_json, suite_dir, write_json, SuiteManifest};
use super::{eligible, ineligible_reason, PipelineError};
use crate::adapter::{run_adapter, AdapterOptions, AdapterProcess, AdapterRequest, COLOR_ENCODING};
use crate::evaluation::ResponseSurface;
use crate::metrics::{Metric, MetricDescriptor};
use crate::pngio::read_stimulus;
use crate::stimgen::TestId;

pub const SURFACE_FILE: &str = "surface.json";
pub const RUN_FILE: &str = "run.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellFailure {
    pub axis_index: usize,
    pub contrast_index: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRecord {
    pub test_id: TestId,
    pub metric: MetricDescriptor,
    pub suite_fingerprint: String,
    /// Set when the metric was not run on this test.
    pub skipped: Option<String>,
    pub errors: Vec<CellFailure>,
}

/// Where a metric's responses come from.
#[derive(Clone)]
pub enum MetricSource {
    Native(Arc<dyn Metric>),
    Adapter { cfg: AdapterConfig, descriptor: MetricDescriptor },
}

impl MetricSource {
    pub fn name(&self) -> &str {
        match self {
            MetricSource::Native(m) => &m.descriptor().name,
            MetricSource::Adapter { cfg, .. } => &cfg.name,
        }
    }

    pub fn descriptor(&self) -> MetricDescriptor {
        match self {
            MetricSource::Native(m) => m.descriptor().clone(),
            MetricSource::Adapter { cfg, descriptor } => MetricDescriptor { name: cfg.name.clone(), ..descriptor.clone() },
        }
    }

    /// Starts the adapter once to read its descriptor. An empty name is
    /// taken from the handshake.
    pub fn probe_adapter(cfg: &AdapterConfig) -> Result<Self, PipelineError> {
        let timeout = Duration::from_secs_f64(cfg.timeout_s);
        let p = AdapterProcess::spawn(&cfg.command, timeout)
            .map_err(|e| PipelineError::Adapter { name: cfg.name.clone(), msg: e.to_string() })?;
        let descriptor = p.hello().descriptor();
        p.finish();
        let mut cfg = cfg.clone();
        if cfg.name.is_empty() {
            cfg.name = descriptor.name.chars().map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' }).collect();
        }
        Ok(MetricSource::Adapter { cfg, descriptor })
    }
}

pub fn surface_dir(cfg: &RunConfig, test: TestId, metric: &str) -> PathBuf {
    cfg.surfaces_dir().join(test.as_str()).join(metric)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunFlags {
    pub resume: bool,
    pub force: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub test_id: TestId,
    pub metric: String,
    pub skipped: Option<String>,
    pub failed_cells: usize,
    pub total_cells: usize,
}

type CellResults = BTreeMap<(usize, usize), Result<f64, String>>;

fn score_native(metric: &dyn Metric, suite: &Path, m: &SuiteManifest, todo: &[usize]) -> CellResults {
    let display = &m.inputs.display;
    let mut by_axis: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &k in todo {
        by_axis.entry(m.cells[k].axis_index).or_default().push(k);
    }
    let mut out = CellResults::new();
    for (_, ks) in by_axis {
        let first = &m.cells[ks[0]];
        let reference = read_stimulus(&suite.join(&first.ref_path), display.ppd, display.fps);
        let results: Vec<_> = ks
            .par_iter()
            .map(|&k| {
                let c = &m.cells[k];
                let r = reference.as_ref().map_err(|e| e.to_string()).and_then(|r| {
                    let t = read_stimulus(&suite.join(&c.test_path), display.ppd, display.fps).map_err(|e| e.to_string())?;
                    match metric.score(&t, r, Some(&c.spec)) {
                        Ok(q) if q.is_finite() => Ok(q),
                        Ok(q) => Err(format!("non-finite score {q}")),
                        Err(e) => Err(e.to_string()),
                    }
                });
                ((c.axis_index, c.contrast_index), r)
            })
            .collect();
        out.extend(results);
    }
    out
}

fn score_adapter(cfg: &AdapterConfig, suite: &Path, m: &SuiteManifest, todo: &[usize]) -> Result<CellResults, PipelineError> {
    let abs = |p: &str| {
        let path = suite.join(p);
        std::path::absolute(&path).unwrap_or(path).to_string_lossy().into_owned()
    };
    let requests: Vec<AdapterRequest> = todo
        .iter()
        .map(|&k| {
            let c = &m.cells[k];
            AdapterRequest {
                request_id: k as u64,
                test_path: abs(&c.test_path),
                ref_path: abs(&c.ref_path),
                ppd: m.inputs.display.ppd,
                fps: m.inputs.display.fps,
                color_encoding: COLOR_ENCODING.into(),
            }
        })
        .collect();
    let opts = AdapterOptions { timeout: Duration::from_secs_f64(cfg.timeout_s), in_flight: cfg.in_flight };
    let (_, responses) = run_adapter(&cfg.command, requests, opts)
        .map_err(|e| PipelineError::Adapter { name: cfg.name.clone(), msg: e.to_string() })?;
    Ok(responses
        .into_iter()
        .map(|r| {
            let c = &m.cells[r.request_id as usize];
            ((c.axis_index, c.contrast_index), r.outcome)
        })
        .collect())
}

/// Runs one metric on one generated suite.
pub fn run_metric(cfg: &RunConfig, test: TestId, source: &MetricSource, flags: RunFlags) -> Result<RunSummary, PipelineError> {
    let sdir = suite_dir(cfg, test);
    let manifest = SuiteManifest::load(&sdir).map_err(|_| PipelineError::MissingStage {
        stage: "gen",
        path: sdir.join(super::suite::MANIFEST_FILE),
    })?;
    let desc = source.descriptor();
    let out = surface_dir(cfg, test, source.name());
    let run_path = out.join(RUN_FILE);
    let surf_path = out.join(SURFACE_FILE);
    let total = manifest.cells.len();

    if !eligible(&desc, test) {
        let reason = ineligible_reason(&desc, test);
        let rec = RunRecord {
            test_id: test,
            metric: desc.clone(),
            suite_fingerprint: manifest.fingerprint.clone(),
            skipped: Some(reason.clone()),
            errors: vec![],
        };
        if surf_path.exists() {
            std::fs::remove_file(&surf_path).map_err(|e| PipelineError::io(&surf_path, e))?;
        }
        write_json(&run_path, &rec)?;
        return Ok(RunSummary { test_id: test, metric: desc.name, skipped: Some(reason), failed_cells: 0, total_cells: total });
    }

    let grid = &manifest.inputs.grid;
    let mut surface = ResponseSurface::from_fn(
        test,
        desc.name.clone(),
        desc.higher_is_better,
        grid.axis_values.clone(),
        grid.contrasts.clone(),
        |_, _| None,
    );
    let mut previous_errors: BTreeMap<(usize, usize), String> = BTreeMap::new();
    if run_path.exists() {
        let old: RunRecord = read_json(&run_path)?;
        if old.suite_fingerprint != manifest.fingerprint || old.metric != desc {
            if !flags.force {
                return Err(PipelineError::ManifestMismatch {
                    path: run_path,
                    detail: format!("{test}/{} was run on a different suite or metric; use --force", desc.name),
                });
            }
        } else if flags.resume && surf_path.exists() {
            let s: ResponseSurface = read_json(&surf_path)?;
            if s.axis_values == surface.axis_values && s.contrasts == surface.contrasts {
                surface = s;
                previous_errors = old.errors.into_iter().map(|f| ((f.axis_index, f.contrast_index), f.error)).collect();
            }
        }
    }

    let todo: Vec<usize> = (0..total)
        .filter(|&k| {
            let c = &manifest.cells[k];
            surface.scores[c.axis_index][c.contrast_index].is_none()
        })
        .collect();
    let results = match source {
        MetricSource::Native(m) => score_native(m.as_ref(), &sdir, &manifest, &todo),
        MetricSource::Adapter { cfg: a, .. } => score_adapter(a, &sdir, &manifest, &todo)?,
    };
    let mut errors = Vec::new();
    for ((i, j), r) in results {
        previous_errors.remove(&(i, j));
        match r {
            Ok(q) => surface.scores[i][j] = Some(q),
            Err(e) => errors.push(CellFailure { axis_index: i, contrast_index: j, error: e }),
        }
    }
    errors.sort_by_key(|f| (f.axis_index, f.contrast_index));
    let failed = surface.masked_cells();
    write_json(&surf_path, &surface)?;
    let rec = RunRecord { test_id: test, metric: desc.clone(), suite_fingerprint: manifest.fingerprint, skipped: None, errors };
    write_json(&run_path, &rec)?;
    Ok(RunSummary { test_id: test, metric: desc.name, skipped: None, failed_cells: failed, total_cells: total })
}
