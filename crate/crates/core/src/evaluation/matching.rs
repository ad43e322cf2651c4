//! Contrast matching: solving Q(test at c_t) = Q(reference at c_r) on the
//! sampled responses, and the matching errors.

use serde::{Deserialize, Serialize};

use super::pchip::Pchip;
use super::{response_at_contrast, EvalError, ResponseSurface};
use crate::reference::MatchingCurve;
use crate::stimgen::MATCHING_REF_FREQ;

/// Bisection stops below this width in log10 contrast.
pub const MATCH_TOL_DECADES: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchCell {
    pub matched: Option<f64>,
    /// Number of distinct crossings found along the contrast axis.
    pub crossings: usize,
}

impl MatchCell {
    pub const NONE: MatchCell = MatchCell { matched: None, crossings: 0 };
}

fn interpolant(contrasts: &[f64], responses: &[Option<f64>]) -> Option<Pchip> {
    let (x, y): (Vec<f64>, Vec<f64>) =
        contrasts.iter().zip(responses).filter_map(|(&c, q)| q.map(|q| (c.ln(), q))).unzip();
    (x.len() >= 2).then(|| Pchip::new(x, y))
}

fn bisect(p: &Pchip, k: usize, target: f64) -> f64 {
    let (mut lo, mut hi) = (p.x()[k], p.x()[k + 1]);
    let rising = p.y()[k + 1] > p.y()[k];
    let tol = MATCH_TOL_DECADES * std::f64::consts::LN_10;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let below = p.eval_segment(k, mid) < target;
        if below == rising {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Contrast on the sampled family whose interpolated response equals
/// `ref_response`. Segments are monotone under PCHIP, so each sign change
/// holds one crossing; with several, the one nearest `ref_contrast` in log
/// contrast wins.
pub fn match_contrast(contrasts: &[f64], responses: &[Option<f64>], ref_response: f64, ref_contrast: f64) -> MatchCell {
    let Some(p) = interpolant(contrasts, responses) else {
        return MatchCell::NONE;
    };
    let (x, y) = (p.x(), p.y());
    let mut found: Vec<f64> = Vec::new();
    for k in 0..x.len() - 1 {
        let (a, b) = (y[k], y[k + 1]);
        if a == b || (a - ref_response) * (b - ref_response) > 0.0 {
            continue;
        }
        let t = if a == ref_response {
            x[k]
        } else if b == ref_response {
            x[k + 1]
        } else {
            bisect(&p, k, ref_response)
        };
        if found.last().is_none_or(|&l| (t - l).abs() > 1e-9) {
            found.push(t);
        }
    }
    let target = ref_contrast.ln();
    let best = found.iter().copied().min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()));
    MatchCell { matched: best.map(f64::exp), crossings: found.len() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub ref_freq: f64,
    pub ref_contrasts: Vec<f64>,
    pub test_freqs: Vec<f64>,
    /// `cells[ref][freq]`
    pub cells: Vec<Vec<MatchCell>>,
}

impl MatchResult {
    pub fn multi_crossing_cells(&self) -> usize {
        self.cells.iter().flatten().filter(|c| c.crossings > 1).count()
    }
}

/// Matches at each (reference contrast, test frequency) from a
/// `matching_freq` surface whose axis includes the reference frequency.
pub fn predict_freq_matches(
    s: &ResponseSurface,
    ref_contrasts: &[f64],
    test_freqs: &[f64],
) -> Result<MatchResult, EvalError> {
    s.validate()?;
    let ri = s.axis_index(MATCHING_REF_FREQ).ok_or(EvalError::MissingReference(MATCHING_REF_FREQ))?;
    let ref_p = interpolant(&s.contrasts, &s.scores[ri]);
    let cells = ref_contrasts
        .iter()
        .map(|&cr| {
            let q_ref = ref_p.as_ref().and_then(|p| p.eval(cr.ln()));
            test_freqs
                .iter()
                .map(|&f| match (q_ref, s.axis_index(f)) {
                    (Some(q), Some(fi)) => match_contrast(&s.contrasts, &s.scores[fi], q, cr),
                    _ => MatchCell::NONE,
                })
                .collect()
        })
        .collect();
    Ok(MatchResult {
        ref_freq: MATCHING_REF_FREQ,
        ref_contrasts: ref_contrasts.to_vec(),
        test_freqs: test_freqs.to_vec(),
        cells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmseResult {
    pub value: f64,
    pub n: usize,
    /// Cells where only one of prediction and human data exists.
    pub excluded: usize,
}

/// RMSE of log10 contrast over cells with both a prediction and a human
/// match.
pub fn matching_rmse_freq(pred: &MatchResult, human: &MatchingCurve) -> Result<RmseResult, EvalError> {
    let (mut sum, mut n, mut excluded) = (0.0, 0usize, 0usize);
    for (ri, &cr) in human.ref_contrasts.iter().enumerate() {
        for (fi, &f) in human.test_freqs.iter().enumerate() {
            let truth = human.matched[ri][fi];
            let p = pred.ref_contrasts.iter().position(|&c| c == cr).and_then(|r| {
                pred.test_freqs.iter().position(|&x| x == f).and_then(|k| pred.cells[r][k].matched)
            });
            match (p, truth) {
                (Some(p), Some(t)) => {
                    let d = p.log10() - t.log10();
                    sum += d * d;
                    n += 1;
                }
                (None, None) => {}
                _ => excluded += 1,
            }
        }
    }
    if n == 0 {
        return Err(EvalError::NoOverlap);
    }
    Ok(RmseResult { value: (sum / n as f64).sqrt(), n, excluded })
}

/// Responses `Q[c][d]` for each triplet, directions ordered Ach, RG, YV.
/// Triplets with any point outside the grid are skipped and counted.
pub fn color_responses(s: &ResponseSurface, triplets: &[[f64; 3]]) -> (Vec<[f64; 3]>, usize) {
    let mut out = Vec::new();
    let mut skipped = 0;
    for t in triplets {
        let q: Result<Vec<f64>, _> = (0..3).map(|d| response_at_contrast(s, d as f64, t[d])).collect();
        match q {
            Ok(q) => out.push([q[0], q[1], q[2]]),
            Err(_) => skipped += 1,
        }
    }
    (out, skipped)
}

/// `sqrt( Σ_c (1/N) Σ_{d=1..2} (Q_{c,d} − Q_{c,d+1})² / (max Q − min Q)² )`
pub fn matching_rmse_color(q: &[[f64; 3]]) -> Result<f64, EvalError> {
    if q.is_empty() {
        return Err(EvalError::NoValidSamples);
    }
    let (lo, hi) = q.iter().flatten().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let range = hi - lo;
    if !(range > 0.0) {
        return Err(EvalError::DegenerateRange);
    }
    let n = q.len() as f64;
    let sum: f64 = q
        .iter()
        .map(|r| {
            let a = (r[0] - r[1]) / range;
            let b = (r[1] - r[2]) / range;
            (a * a + b * b) / n
        })
        .sum();
    Ok(sum.sqrt())
}
