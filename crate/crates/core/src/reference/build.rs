//! Sampling a threshold model into a complete reference pack.

use super::models::{coherent_mask_threshold, noise_mask_threshold, subtractive_match};
use super::{ColorMatchSet, MatchingCurve, RefEntry, ReferencePack, ThresholdCurve};
use crate::colorimetry::Direction;
use crate::stimgen::{logspace, TestId, COLOR_MATCH_ACH_RANGE, MATCHING_REF_CONTRASTS, MATCHING_REF_FREQ};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Channel {
    Sustained(Direction),
    /// Achromatic, 8 Hz drift.
    Transient,
    /// Uniform field flickering at the given frequency (Hz).
    Flicker(f64),
}

/// Detection threshold in this crate's contrast units for a Gabor-like
/// stimulus of frequency `rho`, background `luminance` and envelope `sigma`.
pub trait ThresholdModel {
    fn name(&self) -> String;
    fn threshold(&self, ch: Channel, rho: f64, luminance: f64, sigma: f64) -> Option<f64>;
}

pub const CURVE_POINTS: usize = 32;
/// 0.005 · 10^(0.3 k), k = 0..7, ends at 0.629.
pub const MATCHING_REF_COUNT: usize = 8;
pub const MATCHING_TEST_FREQS: usize = 16;
pub const COLOR_TRIPLETS: usize = 10;

/// Gaussian σ with the area of a square field of `pixels / ppd` degrees.
pub fn equivalent_sigma(pixels: usize, ppd: f64) -> f64 {
    pixels as f64 / ppd / std::f64::consts::PI.sqrt()
}

fn curve_entry(
    model: &dyn ThresholdModel,
    test: TestId,
    conditions: &str,
    f: impl Fn(f64) -> Option<f64>,
) -> Result<RefEntry, String> {
    let info = test.info();
    let points: Option<Vec<(f64, f64)>> = logspace(info.axis_range.0, info.axis_range.1, CURVE_POINTS)
        .into_iter()
        .map(|a| f(a).map(|t| (a, t)))
        .collect();
    let points = points.ok_or_else(|| format!("{} has no data for {test}", model.name()))?;
    ThresholdCurve::new(info.axis, points, format!("{}; {conditions}", model.name()))
        .map(RefEntry::Threshold)
        .map_err(|e| e.to_string())
}

fn entry_for(model: &dyn ThresholdModel, test: TestId) -> Result<RefEntry, String> {
    let info = test.info();
    let (rho, lum, sigma) = (info.spatial_freq, info.luminance, info.radius);
    let t = |ch, r, l, s| model.threshold(ch, r, l, s);
    match test {
        TestId::DetectionSfAch | TestId::DetectionSfRg | TestId::DetectionSfYv => {
            let ch = Channel::Sustained(info.direction);
            let cond = format!("{} direction, L={lum} cd/m2, sigma={sigma} deg, static", info.direction.name());
            curve_entry(model, test, &cond, |a| t(ch, a, lum, sigma))
        }
        TestId::DetectionSfTransient => {
            let cond = format!("achromatic, L={lum} cd/m2, sigma={sigma} deg, {} Hz", info.temporal_freq);
            curve_entry(model, test, &cond, |a| t(Channel::Transient, a, lum, sigma))
        }
        TestId::DetectionLuminance => {
            let cond = format!("achromatic, rho={rho} cpd, sigma={sigma} deg");
            curve_entry(model, test, &cond, |a| t(Channel::Sustained(Direction::Ach), rho, a, sigma))
        }
        TestId::DetectionArea => {
            let cond = format!("achromatic, rho={rho} cpd, L={lum} cd/m2");
            curve_entry(model, test, &cond, |a| t(Channel::Sustained(Direction::Ach), rho, lum, a))
        }
        TestId::Flicker => {
            let cond = format!("uniform disk, L={lum} cd/m2, radius={sigma} deg");
            curve_entry(model, test, &cond, |a| t(Channel::Flicker(a), 0.0, lum, sigma))
        }
        TestId::MaskingCoherent => {
            let c0 = t(Channel::Sustained(Direction::Ach), rho, lum, sigma).ok_or("no unmasked threshold")?;
            let cond = format!(
                "Legge-Foley transducer model (p=2.4, q=2) anchored at the unmasked threshold {c0} \
                 (rho={rho} cpd, L={lum} cd/m2, sigma={sigma} deg); model curve, not measured data"
            );
            curve_entry(model, test, &cond, |m| Some(coherent_mask_threshold(c0, m)))
        }
        TestId::MaskingIncoherent => {
            let c0 = t(Channel::Sustained(Direction::Ach), rho, lum, sigma).ok_or("no unmasked threshold")?;
            let cond = format!(
                "noise-masking model c0*(1+(cm/c0)^2)^0.3 anchored at the unmasked threshold {c0} \
                 (rho={rho} cpd, L={lum} cd/m2, sigma={sigma} deg); model curve, not measured data"
            );
            curve_entry(model, test, &cond, |m| Some(noise_mask_threshold(c0, m)))
        }
        TestId::MatchingFreq => {
            let s = equivalent_sigma(info.width, info.ppd);
            let thr = |f: f64| t(Channel::Sustained(Direction::Ach), f, lum, s).ok_or("no threshold");
            let t_ref = thr(MATCHING_REF_FREQ)?;
            let refs = logspace(MATCHING_REF_CONTRASTS.0, MATCHING_REF_CONTRASTS.1, MATCHING_REF_COUNT);
            let freqs = logspace(info.axis_range.0, info.axis_range.1, MATCHING_TEST_FREQS);
            let t_test: Vec<f64> = freqs.iter().map(|&f| thr(f)).collect::<Result<_, _>>()?;
            // references below threshold have no match at any frequency and are dropped
            let (refs, matched): (Vec<f64>, Vec<Vec<Option<f64>>>) = refs
                .iter()
                .map(|&c| (c, t_test.iter().map(|&tt| subtractive_match(c, t_ref, tt)).collect::<Vec<_>>()))
                .filter(|(_, row)| row.iter().any(Option::is_some))
                .unzip();
            Ok(RefEntry::Matching(MatchingCurve {
                ref_freq: MATCHING_REF_FREQ,
                ref_contrasts: refs,
                test_freqs: freqs,
                matched,
                source: format!(
                    "{}; subtractive matching model c_t - T(f_t) = c_r - T({MATCHING_REF_FREQ}) with thresholds \
                     at L={lum} cd/m2, sigma={s:.4} deg; model data, not measured",
                    model.name()
                ),
            }))
        }
        TestId::MatchingColor => {
            let s = equivalent_sigma(info.width, info.ppd);
            let thr = |d| t(Channel::Sustained(d), rho, lum, s).ok_or("no threshold");
            let (ta, tr, ty) = (thr(Direction::Ach)?, thr(Direction::Rg)?, thr(Direction::Yv)?);
            let triplets = logspace(COLOR_MATCH_ACH_RANGE.0, COLOR_MATCH_ACH_RANGE.1, COLOR_TRIPLETS)
                .into_iter()
                .map(|c| [c, c * tr / ta, c * ty / ta])
                .filter(|v| v.iter().all(|&x| x <= 1.0))
                .collect();
            Ok(RefEntry::Color(ColorMatchSet {
                triplets,
                source: format!(
                    "{}; threshold-proportional matches at rho={rho} cpd, L={lum} cd/m2, sigma={s:.4} deg; \
                     model data, not measured",
                    model.name()
                ),
            }))
        }
    }
}

/// Samples every test the model covers; the rest are marked unscorable.
pub fn build_pack(model: &dyn ThresholdModel) -> ReferencePack {
    let mut pack = ReferencePack::default();
    for test in TestId::ALL {
        match entry_for(model, test) {
            Ok(e) => pack.insert(test, e),
            Err(reason) => {
                pack.warnings.push(format!("{test}: {reason}"));
                pack.unscorable.insert(test, reason);
            }
        }
    }
    pack
}
