//! End-to-end runs: generate stimuli, collect metric responses, score and
//! report.

pub mod config;
pub mod run;
pub mod score;
pub mod suite;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::colorimetry::{linear_to_encoded, ColorError, DisplayModel, EncodedStimulus};
use crate::evaluation::ResponseSurface;
use crate::metrics::{lookup, Metric, MetricDescriptor, MetricError};
use crate::stimgen::{generate_pair, StimError, StimulusSpec, TestGrid, TestId};
use config::RunConfig;
use run::{run_metric, MetricSource, RunFlags, RunSummary};
use suite::{generate_suite, suite_dir, suite_inputs, GenOutcome};

#[derive(Debug, Error)]
pub enum CellError {
    #[error(transparent)]
    Stim(#[from] StimError),
    #[error(transparent)]
    Color(#[from] ColorError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("{0}")]
    Other(String),
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error("{path}: {msg}")]
    Io { path: PathBuf, msg: String },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("manifest mismatch at {path}: {detail}")]
    ManifestMismatch { path: PathBuf, detail: String },
    #[error("{path} missing; run the {stage} stage first")]
    MissingStage { stage: &'static str, path: PathBuf },
    #[error("{test} cell ({axis_index}, {contrast_index}): {msg}")]
    Cell { test: TestId, axis_index: usize, contrast_index: usize, msg: String },
    #[error("adapter {name}: {msg}")]
    Adapter { name: String, msg: String },
    #[error("reference pack: {0}")]
    Pack(String),
    #[error("{0}")]
    Metric(#[from] MetricError),
}

impl PipelineError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        PipelineError::Io { path: path.to_path_buf(), msg: e.to_string() }
    }
}

/// Encoded test and reference of one grid cell.
pub fn encode_cell(spec: &StimulusSpec, peak: f64) -> Result<(EncodedStimulus, EncodedStimulus), CellError> {
    let (t, r) = generate_pair(spec)?;
    let dm = DisplayModel { peak_luminance: peak, ..DisplayModel::new(spec.ppd, spec.fps) };
    Ok((linear_to_encoded(&t, &dm)?, linear_to_encoded(&r, &dm)?))
}

pub fn score_cell(spec: &StimulusSpec, metric: &dyn Metric, peak: f64) -> Result<f64, CellError> {
    let (t, r) = encode_cell(spec, peak)?;
    let q = metric.score(&t, &r, Some(spec))?;
    if q.is_finite() {
        Ok(q)
    } else {
        Err(CellError::Other(format!("non-finite score {q}")))
    }
}

/// Whether a metric is run on a test at all: video tests need a video
/// metric and chromatic tests a colour metric. The oracle only exists where
/// there is a threshold.
pub fn eligible(desc: &MetricDescriptor, test: TestId) -> bool {
    let info = test.info();
    if desc.name == ORACLE && !test.is_threshold_test() {
        return false;
    }
    if info.video && !desc.supports_video {
        return false;
    }
    if test == TestId::MatchingColor || matches!(test, TestId::DetectionSfRg | TestId::DetectionSfYv) {
        return desc.color;
    }
    true
}

const ORACLE: &str = "oracle";

pub fn ineligible_reason(desc: &MetricDescriptor, test: TestId) -> String {
    if desc.name == ORACLE && !test.is_threshold_test() {
        format!("the oracle needs a detection threshold; {test} has none")
    } else if test.info().video && !desc.supports_video {
        format!("{} is an image metric; {test} needs video", desc.name)
    } else {
        format!("{} ignores chromatic differences; {test} is a colour test", desc.name)
    }
}

/// Metric responses over a grid computed in memory, cells in parallel.
/// The reference of each axis value is encoded once. Failed cells are
/// masked.
pub fn compute_surface(grid: &TestGrid, base: &StimulusSpec, metric: &dyn Metric, peak: f64) -> ResponseSurface {
    let na = grid.axis_values.len();
    let nc = grid.contrasts.len();
    let dm = DisplayModel { peak_luminance: peak, ..DisplayModel::new(base.ppd, base.fps) };
    let refs: Vec<Option<EncodedStimulus>> = (0..na)
        .into_par_iter()
        .map(|i| {
            let (_, r) = generate_pair(&grid.spec(base, i, 0)).ok()?;
            linear_to_encoded(&r, &dm).ok()
        })
        .collect();
    let flat: Vec<Option<f64>> = (0..na * nc)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / nc, k % nc);
            let r = refs[i].as_ref()?;
            let spec = grid.spec(base, i, j);
            let (t, _) = generate_pair(&spec).ok()?;
            let t = linear_to_encoded(&t, &dm).ok()?;
            metric.score(&t, r, Some(&spec)).ok().filter(|q| q.is_finite())
        })
        .collect();
    let desc = metric.descriptor();
    ResponseSurface::from_fn(
        grid.test_id,
        desc.name.clone(),
        desc.higher_is_better,
        grid.axis_values.clone(),
        grid.contrasts.clone(),
        |i, j| flat[i * nc + j],
    )
}

/// Runs `f` on a pool of `threads` workers (0: one per core).
pub fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

pub fn gen_all(cfg: &RunConfig, force: bool) -> Result<Vec<(TestId, GenOutcome)>, PipelineError> {
    cfg.tests
        .iter()
        .map(|&t| generate_suite(&suite_dir(cfg, t), &suite_inputs(cfg, t), force).map(|o| (t, o)))
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub runs: Vec<RunSummary>,
    /// Adapters that could not be started, with the reason.
    pub adapter_failures: Vec<(String, String)>,
}

impl RunReport {
    pub fn failed_cells(&self) -> usize {
        self.runs.iter().map(|r| r.failed_cells).sum()
    }
}

/// Every configured metric, natives first. Adapters that fail their
/// handshake are returned separately.
pub fn metric_sources(cfg: &RunConfig) -> Result<(Vec<MetricSource>, Vec<(String, String)>), PipelineError> {
    let mut sources = Vec::new();
    for name in &cfg.metrics {
        let threshold = if name == "oracle" { Some(score::resolve_pack(&cfg.reference_pack)?) } else { None };
        let threshold = threshold.map(|p| std::sync::Arc::new(p).threshold_fn());
        sources.push(MetricSource::Native(lookup(name, threshold)?));
    }
    let mut failures = Vec::new();
    for a in &cfg.adapters {
        match MetricSource::probe_adapter(a) {
            Ok(MetricSource::Adapter { mut cfg, descriptor }) => {
                // Unnamed adapters take the handshake name; keep it unique.
                let base = cfg.name.clone();
                let mut k = 2;
                while sources.iter().any(|s| s.name() == cfg.name) {
                    cfg.name = format!("{base}_{k}");
                    k += 1;
                }
                sources.push(MetricSource::Adapter { cfg, descriptor });
            }
            Ok(s) => sources.push(s),
            Err(e) => failures.push((if a.name.is_empty() { a.command.clone() } else { a.name.clone() }, e.to_string())),
        }
    }
    Ok((sources, failures))
}

pub fn run_all(cfg: &RunConfig, flags: RunFlags) -> Result<RunReport, PipelineError> {
    let (sources, adapter_failures) = metric_sources(cfg)?;
    let mut report = RunReport { runs: vec![], adapter_failures };
    for &t in &cfg.tests {
        for s in &sources {
            report.runs.push(run_metric(cfg, t, s, flags)?);
        }
    }
    Ok(report)
}
