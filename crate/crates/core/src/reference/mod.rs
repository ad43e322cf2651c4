//! Human reference data: threshold curves, matching data and the packs
//! that hold them.
//!
//! A pack is a directory with one CSV per test, named `<test_id>.csv`.
//! Lines starting with `#` are comments; `# source: ...` sets the source
//! tag. Schemas:
//!
//! * threshold tests: `<axis>,threshold_contrast` where `<axis>` is one of
//!   `freq_cpd`, `luminance_cdm2`, `radius_deg`, `temporal_freq_hz`,
//!   `mask_contrast`
//! * `matching_freq`: `ref_contrast,test_freq_cpd,matched_contrast`
//! * `matching_color`: `ach_contrast,rg_contrast,yv_contrast`

pub mod build;
pub mod castle;
pub mod models;
pub mod synthetic;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use crate::metrics::ThresholdFn;
use crate::stimgen::{AxisKind, StimulusSpec, TestId};

pub use build::{build_pack, Channel, ThresholdModel};
pub use castle::CastleCsf;
pub use synthetic::{LogParabola, SyntheticCsf};

#[derive(Debug, Error, PartialEq)]
pub enum RefError {
    #[error("{file}:{line}: {msg}")]
    Parse { file: PathBuf, line: usize, msg: String },
    #[error("{path}: {msg}")]
    Io { path: PathBuf, msg: String },
    #[error("{value} outside curve domain [{lo}, {hi}]")]
    OutOfDomain { value: f64, lo: f64, hi: f64 },
    #[error("invalid curve: {0}")]
    Invalid(String),
}

/// Threshold contrast as a function of one stimulus parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdCurve {
    pub axis: AxisKind,
    pub points: Vec<(f64, f64)>,
    pub source: String,
}

impl ThresholdCurve {
    pub fn new(axis: AxisKind, points: Vec<(f64, f64)>, source: impl Into<String>) -> Result<Self, RefError> {
        if points.is_empty() {
            return Err(RefError::Invalid("no points".into()));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(RefError::Invalid(format!("axis values not increasing at {}", w[1].0)));
            }
        }
        if let Some(p) = points.iter().find(|p| !(p.0 > 0.0 && p.1 > 0.0 && p.0.is_finite() && p.1.is_finite())) {
            return Err(RefError::Invalid(format!("non-positive point ({}, {})", p.0, p.1)));
        }
        Ok(Self { axis, points, source: source.into() })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.points[0].0, self.points[self.points.len() - 1].0)
    }

    /// Linear interpolation in log axis / log threshold. Exact at samples.
    pub fn threshold_at(&self, v: f64) -> Result<f64, RefError> {
        let (lo, hi) = self.domain();
        if !(v >= lo && v <= hi) {
            return Err(RefError::OutOfDomain { value: v, lo, hi });
        }
        let i = self.points.partition_point(|p| p.0 < v);
        if self.points[i].0 == v {
            return Ok(self.points[i].1);
        }
        let (x0, y0) = self.points[i - 1];
        let (x1, y1) = self.points[i];
        let t = (v.ln() - x0.ln()) / (x1.ln() - x0.ln());
        Ok((y0.ln() + t * (y1.ln() - y0.ln())).exp())
    }
}

/// Contrast matched at test frequencies against a fixed reference frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchingCurve {
    pub ref_freq: f64,
    pub ref_contrasts: Vec<f64>,
    pub test_freqs: Vec<f64>,
    /// `matched[r][f]` for reference contrast `r` and test frequency `f`.
    pub matched: Vec<Vec<Option<f64>>>,
    pub source: String,
}

impl MatchingCurve {
    pub fn get(&self, ref_contrast: f64, test_freq: f64) -> Option<f64> {
        let r = self.ref_contrasts.iter().position(|&c| c == ref_contrast)?;
        let f = self.test_freqs.iter().position(|&c| c == test_freq)?;
        self.matched[r][f]
    }
}

/// Contrast triplets (Ach, RG, YV) judged equal in apparent contrast.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorMatchSet {
    pub triplets: Vec<[f64; 3]>,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RefEntry {
    Threshold(ThresholdCurve),
    Matching(MatchingCurve),
    Color(ColorMatchSet),
}

impl RefEntry {
    pub fn source(&self) -> &str {
        match self {
            RefEntry::Threshold(c) => &c.source,
            RefEntry::Matching(c) => &c.source,
            RefEntry::Color(c) => &c.source,
        }
    }
}

/// Result of a registry lookup; never absent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lookup<'a> {
    Threshold(&'a ThresholdCurve),
    Matching(&'a MatchingCurve),
    Color(&'a ColorMatchSet),
    Unscorable(&'a str),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReferencePack {
    pub entries: BTreeMap<TestId, RefEntry>,
    pub unscorable: BTreeMap<TestId, String>,
    pub warnings: Vec<String>,
}

impl ReferencePack {
    pub fn insert(&mut self, test: TestId, entry: RefEntry) {
        self.unscorable.remove(&test);
        self.entries.insert(test, entry);
    }

    pub fn get(&self, test: TestId) -> Lookup<'_> {
        match self.entries.get(&test) {
            Some(RefEntry::Threshold(c)) => Lookup::Threshold(c),
            Some(RefEntry::Matching(c)) => Lookup::Matching(c),
            Some(RefEntry::Color(c)) => Lookup::Color(c),
            None => Lookup::Unscorable(self.unscorable.get(&test).map(String::as_str).unwrap_or("no reference data")),
        }
    }

    pub fn curve(&self, test: TestId) -> Option<&ThresholdCurve> {
        match self.get(test) {
            Lookup::Threshold(c) => Some(c),
            _ => None,
        }
    }

    pub fn scorable(&self) -> Vec<TestId> {
        self.entries.keys().copied().collect()
    }

    /// Threshold lookup for the oracle metric.
    pub fn threshold_fn(self: &Arc<Self>) -> ThresholdFn {
        let pack = Arc::clone(self);
        Arc::new(move |spec: &StimulusSpec| pack.curve(spec.test_id)?.threshold_at(spec.axis_value()).ok())
    }
}

pub fn pack_file(dir: &Path, test: TestId) -> PathBuf {
    dir.join(format!("{}.csv", test.as_str()))
}

struct Csv {
    source: String,
    header: Vec<String>,
    rows: Vec<(usize, Vec<f64>)>,
}

fn parse_csv(path: &Path, text: &str) -> Result<Csv, RefError> {
    let perr = |line: usize, msg: String| RefError::Parse { file: path.to_path_buf(), line, msg };
    let mut source = String::new();
    let mut header: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let n = i + 1;
        if line.is_empty() {
            continue;
        }
        if let Some(c) = line.strip_prefix('#') {
            if let Some(s) = c.trim().strip_prefix("source:") {
                source = s.trim().to_string();
            }
            continue;
        }
        match &header {
            None => header = Some(line.split(',').map(|s| s.trim().to_string()).collect()),
            Some(h) => {
                let vals: Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
                let vals = vals.map_err(|e| perr(n, format!("{e}: '{line}'")))?;
                if vals.len() != h.len() {
                    return Err(perr(n, format!("expected {} fields, found {}", h.len(), vals.len())));
                }
                rows.push((n, vals));
            }
        }
    }
    let header = header.ok_or_else(|| perr(1, "missing header".into()))?;
    Ok(Csv { source, header, rows })
}

fn expect_header(path: &Path, csv: &Csv, want: &[&str]) -> Result<(), RefError> {
    if csv.header.iter().map(String::as_str).eq(want.iter().copied()) {
        Ok(())
    } else {
        Err(RefError::Parse {
            file: path.to_path_buf(),
            line: 1,
            msg: format!("expected header '{}', found '{}'", want.join(","), csv.header.join(",")),
        })
    }
}

pub fn parse_entry(test: TestId, path: &Path, text: &str) -> Result<RefEntry, RefError> {
    let csv = parse_csv(path, text)?;
    let invalid = |line: usize, e: RefError| RefError::Parse { file: path.to_path_buf(), line, msg: e.to_string() };
    match test {
        TestId::MatchingFreq => {
            expect_header(path, &csv, &["ref_contrast", "test_freq_cpd", "matched_contrast"])?;
            let mut refs: Vec<f64> = csv.rows.iter().map(|r| r.1[0]).collect();
            let mut freqs: Vec<f64> = csv.rows.iter().map(|r| r.1[1]).collect();
            for v in [&mut refs, &mut freqs] {
                v.sort_by(f64::total_cmp);
                v.dedup();
            }
            let mut matched = vec![vec![None; freqs.len()]; refs.len()];
            for (line, r) in &csv.rows {
                if !(r[2] > 0.0 && r[2] <= 1.0) {
                    return Err(RefError::Parse {
                        file: path.to_path_buf(),
                        line: *line,
                        msg: format!("matched contrast {} outside (0, 1]", r[2]),
                    });
                }
                let ri = refs.iter().position(|&c| c == r[0]).unwrap();
                let fi = freqs.iter().position(|&c| c == r[1]).unwrap();
                matched[ri][fi] = Some(r[2]);
            }
            Ok(RefEntry::Matching(MatchingCurve {
                ref_freq: crate::stimgen::MATCHING_REF_FREQ,
                ref_contrasts: refs,
                test_freqs: freqs,
                matched,
                source: csv.source,
            }))
        }
        TestId::MatchingColor => {
            expect_header(path, &csv, &["ach_contrast", "rg_contrast", "yv_contrast"])?;
            for (line, r) in &csv.rows {
                if r.iter().any(|&v| !(v > 0.0 && v <= 1.0)) {
                    return Err(RefError::Parse {
                        file: path.to_path_buf(),
                        line: *line,
                        msg: "contrast outside (0, 1]".into(),
                    });
                }
            }
            Ok(RefEntry::Color(ColorMatchSet {
                triplets: csv.rows.iter().map(|r| [r.1[0], r.1[1], r.1[2]]).collect(),
                source: csv.source,
            }))
        }
        _ => {
            let axis = test.info().axis;
            expect_header(path, &csv, &[axis.column(), "threshold_contrast"])?;
            let points: Vec<(f64, f64)> = csv.rows.iter().map(|r| (r.1[0], r.1[1])).collect();
            let last = csv.rows.last().map(|r| r.0).unwrap_or(1);
            ThresholdCurve::new(axis, points, csv.source).map(RefEntry::Threshold).map_err(|e| invalid(last, e))
        }
    }
}

pub fn format_entry(entry: &RefEntry) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# source: {}", entry.source());
    match entry {
        RefEntry::Threshold(c) => {
            let _ = writeln!(s, "{},threshold_contrast", c.axis.column());
            for (a, t) in &c.points {
                let _ = writeln!(s, "{a},{t}");
            }
        }
        RefEntry::Matching(m) => {
            s.push_str("ref_contrast,test_freq_cpd,matched_contrast\n");
            for (r, row) in m.ref_contrasts.iter().zip(&m.matched) {
                for (f, v) in m.test_freqs.iter().zip(row) {
                    if let Some(v) = v {
                        let _ = writeln!(s, "{r},{f},{v}");
                    }
                }
            }
        }
        RefEntry::Color(c) => {
            s.push_str("ach_contrast,rg_contrast,yv_contrast\n");
            for t in &c.triplets {
                let _ = writeln!(s, "{},{},{}", t[0], t[1], t[2]);
            }
        }
    }
    s
}

/// Loads every `<test_id>.csv` found in `dir`. Missing files mark the test
/// unscorable; malformed files are errors.
pub fn load_reference_pack(dir: &Path) -> Result<ReferencePack, RefError> {
    let mut pack = ReferencePack::default();
    if !dir.is_dir() {
        return Err(RefError::Io { path: dir.to_path_buf(), msg: "not a directory".into() });
    }
    for test in TestId::ALL {
        let path = pack_file(dir, test);
        if !path.exists() {
            pack.unscorable.insert(test, format!("{} not found", path.display()));
            pack.warnings.push(format!("{test}: no reference file, test unscorable"));
            continue;
        }
        let text = fs::read_to_string(&path).map_err(|e| RefError::Io { path: path.clone(), msg: e.to_string() })?;
        let entry = parse_entry(test, &path, &text)?;
        pack.entries.insert(test, entry);
    }
    Ok(pack)
}

pub fn save_reference_pack(pack: &ReferencePack, dir: &Path) -> Result<(), RefError> {
    fs::create_dir_all(dir).map_err(|e| RefError::Io { path: dir.to_path_buf(), msg: e.to_string() })?;
    for (test, entry) in &pack.entries {
        let path = pack_file(dir, *test);
        fs::write(&path, format_entry(entry)).map_err(|e| RefError::Io { path, msg: e.to_string() })?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve() -> ThresholdCurve {
        ThresholdCurve::new(AxisKind::SpatialFreq, vec![(1.0, 0.01), (4.0, 0.04), (16.0, 0.02)], "t").unwrap()
    }

    #[test]
    fn exact_at_nodes() {
        let c = curve();
        for (a, t) in c.points.clone() {
            assert_eq!(c.threshold_at(a).unwrap(), t);
        }
    }

    #[test]
    fn log_midpoint_is_geometric_mean() {
        let c = curve();
        let v = c.threshold_at(2.0).unwrap();
        assert!((v - (0.01f64 * 0.04).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn out_of_domain() {
        assert!(matches!(curve().threshold_at(0.5), Err(RefError::OutOfDomain { .. })));
        assert!(matches!(curve().threshold_at(f64::NAN), Err(RefError::OutOfDomain { .. })));
    }

    #[test]
    fn invalid_curves() {
        assert!(ThresholdCurve::new(AxisKind::SpatialFreq, vec![(1.0, 0.1), (1.0, 0.2)], "").is_err());
        assert!(ThresholdCurve::new(AxisKind::SpatialFreq, vec![(1.0, -0.1)], "").is_err());
        assert!(ThresholdCurve::new(AxisKind::SpatialFreq, vec![], "").is_err());
    }

    #[test]
    fn empty_dir_all_unscorable() {
        let d = tempfile::tempdir().unwrap();
        let p = load_reference_pack(d.path()).unwrap();
        assert!(p.entries.is_empty());
        assert_eq!(p.warnings.len(), 11);
        for t in TestId::ALL {
            assert!(matches!(p.get(t), Lookup::Unscorable(_)));
        }
    }

    #[test]
    fn single_file_pack() {
        let d = tempfile::tempdir().unwrap();
        fs::write(pack_file(d.path(), TestId::DetectionSfAch), "# source: x\nfreq_cpd,threshold_contrast\n1,0.01\n2,0.02\n")
            .unwrap();
        let p = load_reference_pack(d.path()).unwrap();
        assert_eq!(p.scorable(), vec![TestId::DetectionSfAch]);
        assert_eq!(p.curve(TestId::DetectionSfAch).unwrap().source, "x");
    }

    #[test]
    fn parse_error_has_line() {
        let d = tempfile::tempdir().unwrap();
        let f = pack_file(d.path(), TestId::DetectionArea);
        fs::write(&f, "radius_deg,threshold_contrast\n1,0.01\n2,abc\n").unwrap();
        match load_reference_pack(d.path()) {
            Err(RefError::Parse { file, line, .. }) => {
                assert_eq!(file, f);
                assert_eq!(line, 3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wrong_header_rejected() {
        let r = parse_entry(TestId::DetectionArea, Path::new("x.csv"), "freq_cpd,threshold_contrast\n1,0.1\n");
        assert!(matches!(r, Err(RefError::Parse { line: 1, .. })));
    }

    #[test]
    fn matching_and_color_roundtrip() {
        let mut pack = ReferencePack::default();
        pack.insert(
            TestId::MatchingFreq,
            RefEntry::Matching(MatchingCurve {
                ref_freq: 5.0,
                ref_contrasts: vec![0.01, 0.1],
                test_freqs: vec![1.0, 5.0],
                matched: vec![vec![None, Some(0.01)], vec![Some(0.12), Some(0.1)]],
                source: "m".into(),
            }),
        );
        pack.insert(
            TestId::MatchingColor,
            RefEntry::Color(ColorMatchSet { triplets: vec![[0.01, 0.002, 0.03]], source: "c".into() }),
        );
        pack.insert(TestId::Flicker, RefEntry::Threshold(ThresholdCurve::new(AxisKind::TemporalFreq, vec![(1.0, 0.1 + 0.2)], "f").unwrap()));
        let d = tempfile::tempdir().unwrap();
        save_reference_pack(&pack, d.path()).unwrap();
        let back = load_reference_pack(d.path()).unwrap();
        assert_eq!(back.entries, pack.entries);
    }

    #[test]
    fn synthetic_pack_covers_every_test() {
        let p = build_pack(&SyntheticCsf::default());
        assert_eq!(p.entries.len(), 11, "{:?}", p.warnings);
    }

    #[test]
    fn castle_pack_lacks_flicker_only() {
        let p = build_pack(&CastleCsf);
        assert_eq!(p.entries.len(), 10);
        assert!(matches!(p.get(TestId::Flicker), Lookup::Unscorable(_)));
    }

    #[test]
    fn built_pack_roundtrips() {
        let p = build_pack(&CastleCsf);
        let d = tempfile::tempdir().unwrap();
        save_reference_pack(&p, d.path()).unwrap();
        let back = load_reference_pack(d.path()).unwrap();
        assert_eq!(back.entries, p.entries);
    }

    #[test]
    fn oracle_threshold_fn() {
        let mut pack = ReferencePack::default();
        pack.insert(TestId::DetectionSfAch, RefEntry::Threshold(curve()));
        let pack = Arc::new(pack);
        let f = pack.threshold_fn();
        let s = StimulusSpec::base(TestId::DetectionSfAch).with_axis(4.0);
        assert_eq!(f(&s), Some(0.04));
        assert_eq!(f(&StimulusSpec::base(TestId::DetectionArea)), None);
    }
}
