//! Scores surfaces against a reference pack.
//!
//! Writes `scores/<test_id>/<metric>/score.json`, `scores/summary.json` and
//! a copy of the pack under `scores/reference_pack/` so that reports can
//! draw the human data.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::run::{RunRecord, RUN_FILE, SURFACE_FILE};
use super::suite::{read_json, sha256_hex, write_json};
use super::PipelineError;
use crate::evaluation::{score_surface, EvalError, Pooling, ResponseSurface, ScoreRecord};
use crate::reference::{build_pack, load_reference_pack, save_reference_pack, CastleCsf, ReferencePack, SyntheticCsf};
use crate::stimgen::TestId;

pub const SCORE_FILE: &str = "score.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const PACK_COPY_DIR: &str = "reference_pack";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreFile {
    pub record: ScoreRecord,
    pub pack: String,
    pub pooling: Pooling,
    pub surface_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Unscored {
    pub test_id: TestId,
    pub metric: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Summary {
    pub pack: String,
    pub pooling: Pooling,
    pub records: Vec<ScoreRecord>,
    /// Metric not eligible, or no human data for the test.
    pub unscorable: Vec<Unscored>,
    /// Scoring attempted and failed.
    pub failed: Vec<Unscored>,
    /// Cells masked in the surfaces that were scored.
    pub masked_cells: usize,
}

/// Resolves `builtin:castle`, `builtin:synthetic` or a pack directory.
pub fn resolve_pack(spec: &str) -> Result<ReferencePack, PipelineError> {
    match spec {
        "builtin:castle" => Ok(build_pack(&CastleCsf)),
        "builtin:synthetic" => Ok(build_pack(&SyntheticCsf::default())),
        dir => load_reference_pack(Path::new(dir)).map_err(|e| PipelineError::Pack(e.to_string())),
    }
}

pub fn score_path(cfg: &RunConfig, test: TestId, metric: &str) -> PathBuf {
    cfg.scores_dir().join(test.as_str()).join(metric).join(SCORE_FILE)
}

/// Every `(test, metric)` directory under `surfaces/`, sorted.
pub fn surface_entries(surfaces: &Path) -> Result<Vec<(TestId, String, PathBuf)>, PipelineError> {
    let mut out = Vec::new();
    if !surfaces.is_dir() {
        return Ok(out);
    }
    for t in TestId::ALL {
        let tdir = surfaces.join(t.as_str());
        let Ok(rd) = std::fs::read_dir(&tdir) else { continue };
        let mut names: Vec<String> = rd
            .filter_map(|e| e.ok())
            .filter(|e| e.path().join(RUN_FILE).exists())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .collect();
        names.sort();
        for n in names {
            let p = tdir.join(&n);
            out.push((t, n, p));
        }
    }
    Ok(out)
}

pub fn score_all(cfg: &RunConfig, pack: &ReferencePack) -> Result<Summary, PipelineError> {
    let mut summary = Summary {
        pack: cfg.reference_pack.clone(),
        pooling: cfg.pooling,
        records: vec![],
        unscorable: vec![],
        failed: vec![],
        masked_cells: 0,
    };
    let entries = surface_entries(&cfg.surfaces_dir())?;
    if entries.is_empty() {
        return Err(PipelineError::MissingStage { stage: "run", path: cfg.surfaces_dir() });
    }
    for (test, metric, dir) in entries {
        let run: RunRecord = read_json(&dir.join(RUN_FILE))?;
        let unscored = |reason: String| Unscored { test_id: test, metric: metric.clone(), reason };
        let spath = score_path(cfg, test, &metric);
        if let Some(reason) = run.skipped {
            summary.unscorable.push(unscored(reason));
            let _ = std::fs::remove_file(&spath);
            continue;
        }
        let surf_path = dir.join(SURFACE_FILE);
        let bytes = std::fs::read(&surf_path).map_err(|e| PipelineError::io(&surf_path, e))?;
        let surface: ResponseSurface = serde_json::from_slice(&bytes)
            .map_err(|e| PipelineError::Format { path: surf_path.clone(), msg: e.to_string() })?;
        match score_surface(&surface, pack, cfg.pooling) {
            Ok(record) => {
                summary.masked_cells += surface.masked_cells();
                let file = ScoreFile {
                    record: record.clone(),
                    pack: cfg.reference_pack.clone(),
                    pooling: cfg.pooling,
                    surface_sha256: sha256_hex(&bytes),
                };
                write_json(&spath, &file)?;
                summary.records.push(record);
            }
            Err(EvalError::Unscorable(_, reason)) => {
                let _ = std::fs::remove_file(&spath);
                summary.unscorable.push(unscored(format!("no human data: {reason}")));
            }
            Err(e) => {
                let _ = std::fs::remove_file(&spath);
                summary.masked_cells += surface.masked_cells();
                summary.failed.push(unscored(e.to_string()));
            }
        }
    }
    save_reference_pack(pack, &cfg.scores_dir().join(PACK_COPY_DIR)).map_err(|e| PipelineError::Pack(e.to_string()))?;
    write_json(&cfg.scores_dir().join(SUMMARY_FILE), &summary)?;
    Ok(summary)
}
