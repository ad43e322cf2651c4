//! Scores: alignment of metric responses with human thresholds, and
//! matching errors.
//!
//! Responses are direction-normalised before ranking: scores of
//! higher-is-better metrics are negated so that every response grows with
//! the visible difference.

pub mod matching;
pub mod pchip;
pub mod spearman;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::reference::{Lookup, ReferencePack, ThresholdCurve};
use crate::stimgen::{logspace, TestId};

pub use matching::{
    color_responses, match_contrast, matching_rmse_color, matching_rmse_freq, predict_freq_matches, MatchCell,
    MatchResult, RmseResult,
};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("point (axis {axis}, contrast {contrast}) outside the sampled grid")]
    OutOfHull { axis: f64, contrast: f64 },
    #[error("point (axis {axis}, contrast {contrast}) touches a failed cell")]
    Masked { axis: f64, contrast: f64 },
    #[error("no valid samples")]
    NoValidSamples,
    #[error("no cell has both a prediction and human data")]
    NoOverlap,
    #[error("responses have zero range")]
    DegenerateRange,
    #[error("surface has no column at the reference frequency {0}")]
    MissingReference(f64),
    #[error("malformed surface: {0}")]
    Shape(String),
    #[error("test {0} is unscorable: {1}")]
    Unscorable(TestId, String),
}

/// Metric responses over axis values × contrasts; `None` marks a failed cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseSurface {
    pub test_id: TestId,
    pub metric: String,
    pub higher_is_better: bool,
    pub axis_values: Vec<f64>,
    pub contrasts: Vec<f64>,
    /// `scores[axis][contrast]`
    pub scores: Vec<Vec<Option<f64>>>,
}

impl ResponseSurface {
    pub fn from_fn(
        test_id: TestId,
        metric: impl Into<String>,
        higher_is_better: bool,
        axis_values: Vec<f64>,
        contrasts: Vec<f64>,
        mut f: impl FnMut(usize, usize) -> Option<f64>,
    ) -> Self {
        let scores = (0..axis_values.len()).map(|i| (0..contrasts.len()).map(|j| f(i, j)).collect()).collect();
        Self { test_id, metric: metric.into(), higher_is_better, axis_values, contrasts, scores }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if self.scores.len() != self.axis_values.len() || self.scores.iter().any(|r| r.len() != self.contrasts.len()) {
            return Err(EvalError::Shape("score dimensions do not match axes".into()));
        }
        for v in [&self.axis_values, &self.contrasts] {
            if v.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(EvalError::Shape("axis values not strictly increasing".into()));
            }
        }
        if self.contrasts.iter().any(|&c| !(c > 0.0)) {
            return Err(EvalError::Shape("non-positive contrast".into()));
        }
        if self.test_id.info().axis.is_log() && self.axis_values.iter().any(|&a| !(a > 0.0)) {
            return Err(EvalError::Shape("non-positive value on a log axis".into()));
        }
        Ok(())
    }

    /// Smallest and largest valid response.
    pub fn valid_range(&self) -> Option<(f64, f64)> {
        self.scores.iter().flatten().flatten().fold(None, |acc, &v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((f64::min(lo, v), f64::max(hi, v))),
        })
    }

    pub fn masked_cells(&self) -> usize {
        self.scores.iter().flatten().filter(|v| v.is_none()).count()
    }

    pub fn axis_index(&self, v: f64) -> Option<usize> {
        self.axis_values.iter().position(|&a| a == v || (a - v).abs() <= 1e-9 * a.abs().max(v.abs()))
    }

    /// Response with the sign convention applied.
    pub fn normalised(&self, v: f64) -> f64 {
        if self.higher_is_better {
            -v
        } else {
            v
        }
    }
}

fn axis_coord(log: bool, v: f64) -> f64 {
    if log {
        v.ln()
    } else {
        v
    }
}

/// Bracketing nodes and weight of the upper node; exact nodes get weight 0.
fn bracket(nodes: &[f64], v: f64, log: bool) -> Option<(usize, usize, f64)> {
    let n = nodes.len();
    if n == 0 || !(v >= nodes[0] && v <= nodes[n - 1]) {
        return None;
    }
    if let Some(i) = nodes.iter().position(|&x| x == v) {
        return Some((i, i, 0.0));
    }
    let k = nodes.partition_point(|&x| x < v);
    let (a, b) = (axis_coord(log, nodes[k - 1]), axis_coord(log, nodes[k]));
    Some((k - 1, k, (axis_coord(log, v) - a) / (b - a)))
}

/// Bilinear interpolation in (log axis, log contrast); exact at grid nodes.
pub fn response_at_contrast(s: &ResponseSurface, axis_value: f64, contrast: f64) -> Result<f64, EvalError> {
    let log_axis = s.test_id.info().axis.is_log();
    let hull = EvalError::OutOfHull { axis: axis_value, contrast };
    let (a0, a1, wa) = bracket(&s.axis_values, axis_value, log_axis).ok_or(hull)?;
    let (c0, c1, wc) =
        bracket(&s.contrasts, contrast, true).ok_or(EvalError::OutOfHull { axis: axis_value, contrast })?;
    let get = |i: usize, j: usize| s.scores[i][j].ok_or(EvalError::Masked { axis: axis_value, contrast });
    let along = |i: usize| -> Result<f64, EvalError> {
        if c0 == c1 {
            get(i, c0)
        } else {
            let (lo, hi) = (get(i, c0)?, get(i, c1)?);
            Ok(lo + wc * (hi - lo))
        }
    };
    if a0 == a1 {
        along(a0)
    } else {
        let (lo, hi) = (along(a0)?, along(a1)?);
        Ok(lo + wa * (hi - lo))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// One correlation over all (axis value, multiplier) samples.
    #[default]
    Pooled,
    /// Mean of the per-axis-value correlations.
    PerAxisMean,
}

pub const MULTIPLIER_COUNT: usize = 10;
pub const MULTIPLIER_RANGE: (f64, f64) = (0.5, 2.0);

pub fn multipliers() -> Vec<f64> {
    logspace(MULTIPLIER_RANGE.0, MULTIPLIER_RANGE.1, MULTIPLIER_COUNT)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    pub score: f64,
    pub n_pairs: usize,
    pub excluded: usize,
    pub degenerate: bool,
    /// Per-axis-value correlation; `None` where undefined.
    pub per_axis: Vec<(f64, Option<f64>)>,
}

/// Spearman correlation between threshold multipliers and responses at
/// `m · c_thr(axis)`.
pub fn alignment_score(
    s: &ResponseSurface,
    curve: &ThresholdCurve,
    pooling: Pooling,
) -> Result<AlignmentResult, EvalError> {
    s.validate()?;
    let ms = multipliers();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let mut excluded = 0;
    let mut per_axis = Vec::new();
    for &a in &s.axis_values {
        let Ok(ct) = curve.threshold_at(a) else {
            excluded += ms.len();
            continue;
        };
        let (mut ax, mut ay) = (Vec::new(), Vec::new());
        for &m in &ms {
            let c = m * ct;
            if c > 1.0 {
                excluded += 1;
                continue;
            }
            match response_at_contrast(s, a, c) {
                Ok(q) => {
                    ax.push(m);
                    ay.push(s.normalised(q));
                }
                Err(_) => excluded += 1,
            }
        }
        per_axis.push((a, spearman::spearman(&ax, &ay)));
        xs.extend(ax);
        ys.extend(ay);
    }
    if xs.is_empty() {
        return Err(EvalError::NoValidSamples);
    }
    let score = match pooling {
        Pooling::Pooled => spearman::spearman(&xs, &ys),
        Pooling::PerAxisMean => {
            let v: Vec<f64> = per_axis.iter().filter_map(|p| p.1).collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        }
    };
    Ok(AlignmentResult {
        score: score.unwrap_or(0.0),
        n_pairs: xs.len(),
        excluded,
        degenerate: score.is_none(),
        per_axis,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreType {
    Alignment,
    LogRmse,
    ColorRmse,
}

/// One line of the score output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreRecord {
    pub metric: String,
    pub test_id: TestId,
    pub score_type: ScoreType,
    pub value: Option<f64>,
    pub degenerate: bool,
    pub n_samples: usize,
    pub excluded: usize,
}

/// Scores a surface against whatever the pack holds for its test.
pub fn score_surface(s: &ResponseSurface, pack: &ReferencePack, pooling: Pooling) -> Result<ScoreRecord, EvalError> {
    let rec = |score_type, value, degenerate, n_samples, excluded| ScoreRecord {
        metric: s.metric.clone(),
        test_id: s.test_id,
        score_type,
        value,
        degenerate,
        n_samples,
        excluded,
    };
    match pack.get(s.test_id) {
        Lookup::Unscorable(r) => Err(EvalError::Unscorable(s.test_id, r.to_string())),
        Lookup::Threshold(curve) => {
            let a = alignment_score(s, curve, pooling)?;
            Ok(rec(ScoreType::Alignment, Some(a.score), a.degenerate, a.n_pairs, a.excluded))
        }
        Lookup::Matching(human) => {
            if s.valid_range().is_some_and(|(lo, hi)| lo == hi) {
                // Flat responses never cross the reference level.
                return Ok(rec(ScoreType::LogRmse, None, true, 0, 0));
            }
            let pred = predict_freq_matches(s, &human.ref_contrasts, &human.test_freqs)?;
            let r = matching_rmse_freq(&pred, human)?;
            Ok(rec(ScoreType::LogRmse, Some(r.value), false, r.n, r.excluded))
        }
        Lookup::Color(set) => {
            let (q, excluded) = color_responses(s, &set.triplets);
            if q.is_empty() {
                return Err(EvalError::NoValidSamples);
            }
            match matching_rmse_color(&q) {
                Ok(v) => Ok(rec(ScoreType::ColorRmse, Some(v), false, q.len(), excluded)),
                Err(EvalError::DegenerateRange) => Ok(rec(ScoreType::ColorRmse, None, true, q.len(), excluded)),
                Err(e) => Err(e),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stimgen::AxisKind;

    fn curve() -> ThresholdCurve {
        ThresholdCurve::new(AxisKind::SpatialFreq, vec![(0.5, 0.02), (2.0, 0.005), (8.0, 0.01), (32.0, 0.1)], "t")
            .unwrap()
    }

    fn surface(f: impl Fn(f64, f64) -> f64, hib: bool) -> ResponseSurface {
        let axis = logspace(0.5, 32.0, 7);
        let cs = logspace(0.001, 1.0, 20);
        ResponseSurface::from_fn(TestId::DetectionSfAch, "m", hib, axis.clone(), cs.clone(), |i, j| {
            Some(f(axis[i], cs[j]))
        })
    }

    #[test]
    fn node_exact() {
        let s = surface(|a, c| a * 1000.0 + c, false);
        assert_eq!(response_at_contrast(&s, s.axis_values[3], s.contrasts[5]).unwrap(), s.scores[3][5].unwrap());
    }

    #[test]
    fn linear_in_log_midpoint_is_mean() {
        let s = surface(|a, c| a.ln() + 3.0 * c.ln(), false);
        let (a0, a1) = (s.axis_values[2], s.axis_values[3]);
        let (c0, c1) = (s.contrasts[4], s.contrasts[5]);
        let v = response_at_contrast(&s, (a0 * a1).sqrt(), (c0 * c1).sqrt()).unwrap();
        let mean = 0.25 * (s.scores[2][4].unwrap() + s.scores[2][5].unwrap() + s.scores[3][4].unwrap() + s.scores[3][5].unwrap());
        assert!((v - mean).abs() < 1e-12);
    }

    #[test]
    fn out_of_hull_and_masked() {
        let mut s = surface(|_, c| c, false);
        assert!(matches!(response_at_contrast(&s, 0.4, 0.1), Err(EvalError::OutOfHull { .. })));
        assert!(matches!(response_at_contrast(&s, 1.0, 1.5), Err(EvalError::OutOfHull { .. })));
        s.scores[0][0] = None;
        let r = response_at_contrast(&s, s.axis_values[0], s.contrasts[0]);
        assert!(matches!(r, Err(EvalError::Masked { .. })));
    }

    #[test]
    fn oracle_scores_one() {
        let c = curve();
        let s = surface(|a, x| (x / c.threshold_at(a).unwrap()).log10(), false);
        let r = alignment_score(&s, &c, Pooling::Pooled).unwrap();
        assert!((r.score - 1.0).abs() < 1e-9, "{r:?}");
        assert!(!r.degenerate);
    }

    #[test]
    fn constant_is_degenerate() {
        let s = surface(|_, _| 1.0, false);
        let r = alignment_score(&s, &curve(), Pooling::Pooled).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.score, 0.0);
    }

    /// A difference-type response that falls as contrast rises.
    #[test]
    fn anti_monotone_is_minus_one() {
        let c = curve();
        let s = surface(|a, x| -(x / c.threshold_at(a).unwrap()).log10(), false);
        let r = alignment_score(&s, &c, Pooling::Pooled).unwrap();
        assert!((r.score + 1.0).abs() < 1e-9, "{r:?}");
    }

    #[test]
    fn quality_scores_are_negated() {
        let c = curve();
        let s = surface(|a, x| -(x / c.threshold_at(a).unwrap()).log10(), true);
        let r = alignment_score(&s, &c, Pooling::Pooled).unwrap();
        assert!((r.score - 1.0).abs() < 1e-9);
    }

    #[test]
    fn per_axis_pooling() {
        let c = curve();
        let s = surface(|a, x| (x / c.threshold_at(a).unwrap()).log10(), false);
        let r = alignment_score(&s, &c, Pooling::PerAxisMean).unwrap();
        assert!((r.score - 1.0).abs() < 1e-9);
        assert_eq!(r.per_axis.len(), 7);
    }

    #[test]
    fn no_samples() {
        let far = ThresholdCurve::new(AxisKind::SpatialFreq, vec![(100.0, 0.1), (200.0, 0.1)], "").unwrap();
        assert_eq!(alignment_score(&surface(|_, c| c, false), &far, Pooling::Pooled), Err(EvalError::NoValidSamples));
    }

    #[test]
    fn multipliers_span() {
        let m = multipliers();
        assert_eq!(m.len(), 10);
        assert_eq!((m[0], m[9]), (0.5, 2.0));
        assert!((m[4] * m[5] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn score_record_json_fields() {
        let r = ScoreRecord {
            metric: "psnr_y".into(),
            test_id: TestId::DetectionArea,
            score_type: ScoreType::Alignment,
            value: Some(0.5),
            degenerate: false,
            n_samples: 10,
            excluded: 2,
        };
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(keys.len(), 7);
        assert_eq!(v["score_type"], "alignment");
        assert_eq!(v["test_id"], "detection_area");
    }
}
