//! Built-in full-reference metrics.
//!
//! All metrics take display-encoded stimuli. Greyscale metrics work on
//! Rec.709 luma of the encoded values scaled to [0, 1]. Colour-difference
//! metrics decode to linear light first. Videos are scored frame by frame
//! and averaged.

mod color;
mod gmsd;
mod ssim;

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::colorimetry::{srgb_eotf, EncodedStimulus};
use crate::stimgen::StimulusSpec;

pub use color::{ciede2000, ciede2000_pair, hyab, hyab_pair, ictcp, ictcp_de, ictcp_pair, lab, srgb_to_xyz};
pub use gmsd::{gmsd, gmsd_planes};
pub use ssim::{ms_ssim, ms_ssim_planes, ssim, ssim_planes, MS_SSIM_WEIGHTS};

/// Score reported by PSNR for identical inputs. Above any finite 16-bit PSNR.
pub const PSNR_CEILING_DB: f64 = 200.0;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch((usize, usize, usize), (usize, usize, usize)),
    #[error("image too small: {width}x{height}, need at least {min} per side")]
    ImageTooSmall { width: usize, height: usize, min: usize },
    #[error("metric needs the stimulus specification")]
    MissingSpec,
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("unknown metric '{0}'")]
    Unknown(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputSpace {
    EncodedSrgb,
    LinearLuminance,
    Lab,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDescriptor {
    pub name: String,
    pub input_space: InputSpace,
    pub supports_video: bool,
    pub higher_is_better: bool,
    #[serde(default)]
    pub color: bool,
}

pub trait Metric: Send + Sync {
    fn descriptor(&self) -> &MetricDescriptor;

    /// Scores one pair. `spec` is available when the harness generated the
    /// stimuli itself.
    fn score(
        &self,
        test: &EncodedStimulus,
        reference: &EncodedStimulus,
        spec: Option<&StimulusSpec>,
    ) -> Result<f64, MetricError>;
}

pub fn check_shape(a: &EncodedStimulus, b: &EncodedStimulus) -> Result<(), MetricError> {
    let sa = (a.width, a.height, a.frames);
    let sb = (b.width, b.height, b.frames);
    if sa != sb {
        return Err(MetricError::ShapeMismatch(sa, sb));
    }
    Ok(())
}

/// Rec.709 luma of one frame, encoded values scaled to [0, 1].
pub fn luma_plane(s: &EncodedStimulus, frame: usize) -> Vec<f64> {
    let k = 1.0 / s.max_code();
    s.frame(frame)
        .chunks_exact(3)
        .map(|p| (0.2126 * p[0] as f64 + 0.7152 * p[1] as f64 + 0.0722 * p[2] as f64) * k)
        .collect()
}

/// Linear RGB of one frame relative to display peak, in [0, 1].
pub fn linear_rgb_plane(s: &EncodedStimulus, frame: usize) -> Vec<[f64; 3]> {
    static LUT8: OnceLock<Vec<f64>> = OnceLock::new();
    static LUT16: OnceLock<Vec<f64>> = OnceLock::new();
    let build = |max: usize| (0..=max).map(|c| srgb_eotf(c as f64 / max as f64)).collect::<Vec<_>>();
    let lut = if s.bit_depth == 8 { LUT8.get_or_init(|| build(255)) } else { LUT16.get_or_init(|| build(65535)) };
    s.frame(frame)
        .chunks_exact(3)
        .map(|p| [lut[p[0] as usize], lut[p[1] as usize], lut[p[2] as usize]])
        .collect()
}

/// Mean of a per-frame score.
pub fn frame_mean<F>(test: &EncodedStimulus, reference: &EncodedStimulus, f: F) -> Result<f64, MetricError>
where
    F: Fn(usize) -> Result<f64, MetricError>,
{
    check_shape(test, reference)?;
    let mut acc = 0.0;
    for i in 0..test.frames {
        acc += f(i)?;
    }
    Ok(acc / test.frames as f64)
}

pub fn psnr_planes(a: &[f64], b: &[f64]) -> f64 {
    let mse = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64;
    if mse == 0.0 {
        PSNR_CEILING_DB
    } else {
        (10.0 * (1.0 / mse).log10()).min(PSNR_CEILING_DB)
    }
}

/// PSNR of Rec.709 luma with peak 1.
pub fn psnr_y(test: &EncodedStimulus, reference: &EncodedStimulus) -> Result<f64, MetricError> {
    frame_mean(test, reference, |f| Ok(psnr_planes(&luma_plane(test, f), &luma_plane(reference, f))))
}

type ScoreFn = fn(&EncodedStimulus, &EncodedStimulus) -> Result<f64, MetricError>;

struct Native {
    desc: MetricDescriptor,
    f: ScoreFn,
}

impl Metric for Native {
    fn descriptor(&self) -> &MetricDescriptor {
        &self.desc
    }

    fn score(&self, t: &EncodedStimulus, r: &EncodedStimulus, _: Option<&StimulusSpec>) -> Result<f64, MetricError> {
        (self.f)(t, r)
    }
}

fn native(name: &str, space: InputSpace, higher_is_better: bool, color: bool, f: ScoreFn) -> Arc<dyn Metric> {
    Arc::new(Native {
        desc: MetricDescriptor {
            name: name.to_string(),
            input_space: space,
            supports_video: false,
            higher_is_better,
            color,
        },
        f,
    })
}

/// Threshold lookup used by the oracle metric.
pub type ThresholdFn = Arc<dyn Fn(&StimulusSpec) -> Option<f64> + Send + Sync>;

/// Diagnostic metric `Q = log10(c / c_thr)` computed from the stimulus
/// specification. It is a strictly increasing function of `c / c_thr`, and
/// it is exactly linear in log contrast, so interpolating a surface of it
/// reproduces the multiplier exactly.
pub struct OracleMetric {
    desc: MetricDescriptor,
    threshold: ThresholdFn,
}

impl OracleMetric {
    pub fn new(threshold: ThresholdFn) -> Self {
        Self {
            desc: MetricDescriptor {
                name: "oracle".into(),
                input_space: InputSpace::EncodedSrgb,
                supports_video: true,
                higher_is_better: false,
                color: true,
            },
            threshold,
        }
    }
}

impl Metric for OracleMetric {
    fn descriptor(&self) -> &MetricDescriptor {
        &self.desc
    }

    fn score(&self, t: &EncodedStimulus, r: &EncodedStimulus, spec: Option<&StimulusSpec>) -> Result<f64, MetricError> {
        check_shape(t, r)?;
        let spec = spec.ok_or(MetricError::MissingSpec)?;
        let thr = (self.threshold)(spec)
            .ok_or_else(|| MetricError::NotApplicable(format!("no threshold for {}", spec.test_id)))?;
        let q = (spec.contrast / thr).log10();
        if q.is_finite() {
            Ok(q)
        } else {
            Err(MetricError::NotApplicable(format!("contrast {}", spec.contrast)))
        }
    }
}

/// Returns the same value for every input.
pub struct ConstantMetric {
    desc: MetricDescriptor,
    value: f64,
}

impl ConstantMetric {
    pub fn new(value: f64) -> Self {
        Self {
            desc: MetricDescriptor {
                name: "constant".into(),
                input_space: InputSpace::EncodedSrgb,
                supports_video: true,
                higher_is_better: false,
                color: true,
            },
            value,
        }
    }
}

impl Metric for ConstantMetric {
    fn descriptor(&self) -> &MetricDescriptor {
        &self.desc
    }

    fn score(&self, t: &EncodedStimulus, r: &EncodedStimulus, _: Option<&StimulusSpec>) -> Result<f64, MetricError> {
        check_shape(t, r)?;
        Ok(self.value)
    }
}

/// Image metrics that need no external data.
pub fn native_metrics() -> Vec<Arc<dyn Metric>> {
    use InputSpace::*;
    vec![
        native("psnr_y", EncodedSrgb, true, false, psnr_y),
        native("ssim", EncodedSrgb, true, false, ssim),
        native("ms_ssim", EncodedSrgb, true, false, ms_ssim),
        native("gmsd", EncodedSrgb, false, false, gmsd),
        native("ciede2000", Lab, false, true, ciede2000),
        native("hyab", Lab, false, true, hyab),
        native("ictcp_de", LinearLuminance, false, true, ictcp_de),
        Arc::new(ConstantMetric::new(1.0)),
    ]
}

/// Looks up a metric by name. The oracle needs a threshold source and is
/// only available when one is given.
pub fn lookup(name: &str, threshold: Option<ThresholdFn>) -> Result<Arc<dyn Metric>, MetricError> {
    if name == "oracle" {
        return threshold
            .map(|t| Arc::new(OracleMetric::new(t)) as Arc<dyn Metric>)
            .ok_or_else(|| MetricError::NotApplicable("oracle needs a reference pack".into()));
    }
    native_metrics()
        .into_iter()
        .find(|m| m.descriptor().name == name)
        .ok_or_else(|| MetricError::Unknown(name.to_string()))
}

pub fn metric_names() -> Vec<String> {
    let mut v: Vec<String> = native_metrics().iter().map(|m| m.descriptor().name.clone()).collect();
    v.push("oracle".into());
    v
}


#[cfg(test)]
mod tests {
    use super::test_util::*;
    use super::*;

    #[test]
    fn psnr_identical_is_ceiling() {
        let a = gray(8, 8, 1000);
        assert_eq!(psnr_y(&a, &a).unwrap(), PSNR_CEILING_DB);
    }

    #[test]
    fn psnr_constant_offset() {
        let a = gray(8, 8, 1000);
        let b = gray(8, 8, 1000 + 655);
        let d: f64 = 655.0 / 65535.0;
        let want = 10.0 * (1.0 / (d * d)).log10();
        assert!((psnr_y(&b, &a).unwrap() - want).abs() < 1e-9);
    }

    #[test]
    fn shape_mismatch() {
        let a = gray(8, 8, 0);
        let b = gray(8, 9, 0);
        assert!(matches!(psnr_y(&a, &b), Err(MetricError::ShapeMismatch(..))));
    }

    #[test]
    fn registry_names_unique() {
        let mut names = metric_names();
        let n = names.len();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), n);
        assert!(lookup("psnr_y", None).is_ok());
        assert!(lookup("oracle", None).is_err());
        assert!(matches!(lookup("nope", None), Err(MetricError::Unknown(_))));
    }

    #[test]
    fn video_is_frame_mean() {
        let a = encoded(4, 4, [vec![100u16; 48], vec![200u16; 48]].concat());
        let b = encoded(4, 4, [vec![100u16; 48], vec![100u16; 48]].concat());
        let f1 = psnr_planes(&luma_plane(&a, 1), &luma_plane(&b, 1));
        assert!((psnr_y(&a, &b).unwrap() - (PSNR_CEILING_DB + f1) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn oracle_uses_spec() {
        let o = OracleMetric::new(Arc::new(|_| Some(0.01)));
        let a = gray(4, 4, 0);
        let spec = StimulusSpec::base(crate::stimgen::TestId::DetectionSfAch).with_contrast(0.1);
        assert!((o.score(&a, &a, Some(&spec)).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(o.score(&a, &a, None), Err(MetricError::MissingSpec));
    }
}
