//! Stimulus synthesis for the eleven tests.
//!
//! Coordinates: detection, flicker and matching patterns use pixel-centre
//! symmetric coordinates `x_i = i - (W - 1) / 2` (same for `y`), so the
//! pattern is centred exactly between the two middle pixels of an even-sized
//! image. Masking patterns place the carrier origin at the top-left pixel
//! (`x_i = i`) so that masker and target share phase, while the target
//! envelope stays centred.

pub mod noise;

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use thiserror::Error;

use crate::colorimetry::{modulation_basis, Direction};

pub use noise::gen_noise_field;

#[derive(Debug, Error, PartialEq)]
pub enum StimError {
    #[error("{what} frequency {freq} exceeds the Nyquist limit {limit}")]
    Aliasing { what: &'static str, freq: f64, limit: f64 },
    #[error("noise masker requires a seed")]
    SeedRequired,
    #[error("{param}={value} outside [{lo}, {hi}] for {test}")]
    OutOfRange { test: &'static str, param: &'static str, value: f64, lo: f64, hi: f64 },
    #[error("invalid stimulus geometry: {0}")]
    Geometry(String),
    #[error("{0} is not a {1} test")]
    WrongFamily(&'static str, &'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestId {
    DetectionSfAch,
    DetectionSfRg,
    DetectionSfYv,
    DetectionSfTransient,
    DetectionLuminance,
    DetectionArea,
    MaskingCoherent,
    MaskingIncoherent,
    Flicker,
    MatchingFreq,
    MatchingColor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisKind {
    SpatialFreq,
    Luminance,
    Radius,
    TemporalFreq,
    MaskContrast,
    Direction,
}

impl AxisKind {
    /// Column name used in reference-pack and surface files.
    pub fn column(self) -> &'static str {
        match self {
            AxisKind::SpatialFreq => "freq_cpd",
            AxisKind::Luminance => "luminance_cdm2",
            AxisKind::Radius => "radius_deg",
            AxisKind::TemporalFreq => "temporal_freq_hz",
            AxisKind::MaskContrast => "mask_contrast",
            AxisKind::Direction => "direction",
        }
    }

    pub fn from_column(s: &str) -> Option<Self> {
        [
            AxisKind::SpatialFreq,
            AxisKind::Luminance,
            AxisKind::Radius,
            AxisKind::TemporalFreq,
            AxisKind::MaskContrast,
            AxisKind::Direction,
        ]
        .into_iter()
        .find(|a| a.column() == s)
    }

    pub fn label(self) -> &'static str {
        match self {
            AxisKind::SpatialFreq => "spatial frequency [cpd]",
            AxisKind::Luminance => "luminance [cd/m²]",
            AxisKind::Radius => "radius [deg]",
            AxisKind::TemporalFreq => "temporal frequency [Hz]",
            AxisKind::MaskContrast => "masker contrast",
            AxisKind::Direction => "colour direction",
        }
    }

    /// Whether the axis is sampled and interpolated on a log scale.
    pub fn is_log(self) -> bool {
        self != AxisKind::Direction
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Gabor,
    Masking,
    Flicker,
    Matching,
}

/// Fixed conditions of one test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestInfo {
    pub id: TestId,
    pub family: Family,
    pub axis: AxisKind,
    pub axis_range: (f64, f64),
    pub contrast_range: (f64, f64),
    pub spatial_freq: f64,
    pub mask_freq: f64,
    pub luminance: f64,
    pub radius: f64,
    pub temporal_freq: f64,
    pub direction: Direction,
    pub ppd: f64,
    pub width: usize,
    pub height: usize,
    pub video: bool,
    pub color: bool,
}

pub const MATCHING_REF_FREQ: f64 = 5.0;
pub const MATCHING_REF_CONTRASTS: (f64, f64) = (0.005, 0.629);
pub const COLOR_MATCH_ACH_RANGE: (f64, f64) = (0.01, 0.2);
pub const NOISE_CUTOFF_CPD: f64 = 12.0;
pub const DEFAULT_FPS: f64 = 120.0;
pub const DEFAULT_DURATION: f64 = 1.0;
pub const DEFAULT_SEED: u64 = 0x5EED;

impl TestId {
    pub const ALL: [TestId; 11] = [
        TestId::DetectionSfAch,
        TestId::DetectionSfRg,
        TestId::DetectionSfYv,
        TestId::DetectionSfTransient,
        TestId::DetectionLuminance,
        TestId::DetectionArea,
        TestId::MaskingCoherent,
        TestId::MaskingIncoherent,
        TestId::Flicker,
        TestId::MatchingFreq,
        TestId::MatchingColor,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TestId::DetectionSfAch => "detection_sf_ach",
            TestId::DetectionSfRg => "detection_sf_rg",
            TestId::DetectionSfYv => "detection_sf_yv",
            TestId::DetectionSfTransient => "detection_sf_transient",
            TestId::DetectionLuminance => "detection_luminance",
            TestId::DetectionArea => "detection_area",
            TestId::MaskingCoherent => "masking_coherent",
            TestId::MaskingIncoherent => "masking_incoherent",
            TestId::Flicker => "flicker",
            TestId::MatchingFreq => "matching_freq",
            TestId::MatchingColor => "matching_color",
        }
    }

    pub fn parse(s: &str) -> Option<TestId> {
        TestId::ALL.into_iter().find(|t| t.as_str() == s)
    }

    pub fn title(self) -> &'static str {
        match self {
            TestId::DetectionSfAch => "Detection: spatial frequency (achromatic)",
            TestId::DetectionSfRg => "Detection: spatial frequency (red-green)",
            TestId::DetectionSfYv => "Detection: spatial frequency (yellow-violet)",
            TestId::DetectionSfTransient => "Detection: spatial frequency (transient)",
            TestId::DetectionLuminance => "Detection: luminance",
            TestId::DetectionArea => "Detection: area",
            TestId::MaskingCoherent => "Masking: phase coherent",
            TestId::MaskingIncoherent => "Masking: phase incoherent",
            TestId::Flicker => "Flicker detection",
            TestId::MatchingFreq => "Matching: spatial frequency",
            TestId::MatchingColor => "Matching: colour direction",
        }
    }

    /// Tests scored with the alignment score against a threshold curve.
    pub fn is_threshold_test(self) -> bool {
        !matches!(self, TestId::MatchingFreq | TestId::MatchingColor)
    }

    pub fn info(self) -> TestInfo {
        let base = TestInfo {
            id: self,
            family: Family::Gabor,
            axis: AxisKind::SpatialFreq,
            axis_range: (0.5, 32.0),
            contrast_range: (0.001, 1.0),
            spatial_freq: 2.0,
            mask_freq: 0.0,
            luminance: 21.4,
            radius: 2.0,
            temporal_freq: 0.0,
            direction: Direction::Ach,
            ppd: 66.0,
            width: 1920,
            height: 1080,
            video: false,
            color: false,
        };
        match self {
            TestId::DetectionSfAch => base,
            TestId::DetectionSfRg => TestInfo {
                contrast_range: (0.001, 0.12),
                direction: Direction::Rg,
                color: true,
                ..base
            },
            TestId::DetectionSfYv => TestInfo {
                contrast_range: (0.01, 0.8),
                direction: Direction::Yv,
                color: true,
                ..base
            },
            TestId::DetectionSfTransient => TestInfo {
                temporal_freq: 8.0,
                width: 256,
                height: 256,
                video: true,
                ..base
            },
            TestId::DetectionLuminance => TestInfo {
                axis: AxisKind::Luminance,
                axis_range: (0.1, 90.0),
                ppd: 60.0,
                ..base
            },
            TestId::DetectionArea => TestInfo {
                axis: AxisKind::Radius,
                axis_range: (0.25, 8.0),
                ppd: 60.0,
                ..base
            },
            TestId::MaskingCoherent => TestInfo {
                family: Family::Masking,
                axis: AxisKind::MaskContrast,
                axis_range: (0.005, 0.5),
                contrast_range: (0.005, 0.5),
                spatial_freq: 2.0,
                mask_freq: 2.0,
                luminance: 32.0,
                radius: 0.5,
                ppd: 60.0,
                width: 420,
                height: 300,
                ..base
            },
            TestId::MaskingIncoherent => TestInfo {
                family: Family::Masking,
                axis: AxisKind::MaskContrast,
                axis_range: (0.005, 0.5),
                contrast_range: (0.005, 0.5),
                spatial_freq: 1.2,
                mask_freq: NOISE_CUTOFF_CPD,
                luminance: 37.0,
                radius: 0.8,
                ppd: 60.0,
                width: 300,
                height: 300,
                ..base
            },
            TestId::Flicker => TestInfo {
                family: Family::Flicker,
                axis: AxisKind::TemporalFreq,
                axis_range: (0.5, 60.0),
                spatial_freq: 0.0,
                ppd: 60.0,
                width: 256,
                height: 256,
                video: true,
                ..base
            },
            TestId::MatchingFreq => TestInfo {
                family: Family::Matching,
                axis: AxisKind::SpatialFreq,
                axis_range: (0.25, 25.0),
                spatial_freq: MATCHING_REF_FREQ,
                luminance: 10.0,
                radius: 0.0,
                ppd: 50.0,
                width: 256,
                height: 256,
                ..base
            },
            TestId::MatchingColor => TestInfo {
                family: Family::Matching,
                axis: AxisKind::Direction,
                axis_range: (0.0, 2.0),
                spatial_freq: 1.0,
                radius: 0.0,
                ppd: 60.0,
                width: 256,
                height: 256,
                color: true,
                ..base
            },
        }
    }
}

impl std::fmt::Display for TestId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Full parameter set of one stimulus pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StimulusSpec {
    pub test_id: TestId,
    pub contrast: f64,
    pub spatial_freq: f64,
    pub mask_contrast: f64,
    pub mask_freq: f64,
    pub luminance: f64,
    pub radius: f64,
    pub temporal_freq: f64,
    pub direction: Direction,
    pub width: usize,
    pub height: usize,
    pub ppd: f64,
    pub fps: f64,
    pub duration: f64,
    pub seed: Option<u64>,
}

impl StimulusSpec {
    /// Defaults of a test with zero contrast.
    pub fn base(test_id: TestId) -> Self {
        let i = test_id.info();
        let (fps, duration) = if i.video { (DEFAULT_FPS, DEFAULT_DURATION) } else { (0.0, 0.0) };
        Self {
            test_id,
            contrast: 0.0,
            spatial_freq: i.spatial_freq,
            mask_contrast: 0.0,
            mask_freq: i.mask_freq,
            luminance: i.luminance,
            radius: i.radius,
            temporal_freq: i.temporal_freq,
            direction: i.direction,
            width: i.width,
            height: i.height,
            ppd: i.ppd,
            fps,
            duration,
            seed: (test_id == TestId::MaskingIncoherent).then_some(DEFAULT_SEED),
        }
    }

    pub fn with_contrast(mut self, c: f64) -> Self {
        self.contrast = c;
        self
    }

    pub fn axis_value(&self) -> f64 {
        match self.test_id.info().axis {
            AxisKind::SpatialFreq => self.spatial_freq,
            AxisKind::Luminance => self.luminance,
            AxisKind::Radius => self.radius,
            AxisKind::TemporalFreq => self.temporal_freq,
            AxisKind::MaskContrast => self.mask_contrast,
            AxisKind::Direction => self.direction.index() as f64,
        }
    }

    pub fn with_axis(mut self, v: f64) -> Self {
        match self.test_id.info().axis {
            AxisKind::SpatialFreq => self.spatial_freq = v,
            AxisKind::Luminance => self.luminance = v,
            AxisKind::Radius => self.radius = v,
            AxisKind::TemporalFreq => self.temporal_freq = v,
            AxisKind::MaskContrast => self.mask_contrast = v,
            AxisKind::Direction => self.direction = Direction::ALL[(v.round() as usize).min(2)],
        }
        self
    }

    pub fn frames(&self) -> usize {
        if self.test_id.info().video {
            ((self.fps * self.duration).round() as usize).max(1)
        } else {
            1
        }
    }

    /// Sampling checks that every generator enforces.
    pub fn check_sampling(&self) -> Result<(), StimError> {
        if self.width == 0 || self.height == 0 {
            return Err(StimError::Geometry(format!("{}x{}", self.width, self.height)));
        }
        if !(self.ppd > 0.0) {
            return Err(StimError::Geometry(format!("ppd {}", self.ppd)));
        }
        let nyq = self.ppd / 2.0;
        if self.spatial_freq > nyq {
            return Err(StimError::Aliasing { what: "spatial", freq: self.spatial_freq, limit: nyq });
        }
        if self.test_id == TestId::MaskingCoherent && self.mask_freq > nyq {
            return Err(StimError::Aliasing { what: "masker", freq: self.mask_freq, limit: nyq });
        }
        if self.test_id.info().video && self.temporal_freq > 0.0 && self.temporal_freq >= self.fps / 2.0 {
            return Err(StimError::Aliasing { what: "temporal", freq: self.temporal_freq, limit: self.fps / 2.0 });
        }
        Ok(())
    }

    /// Checks the axis value and contrast against the ranges of the test.
    pub fn check_ranges(&self) -> Result<(), StimError> {
        let i = self.test_id.info();
        let within = |v: f64, (lo, hi): (f64, f64)| v >= lo * (1.0 - 1e-9) && v <= hi * (1.0 + 1e-9);
        let test = self.test_id.as_str();
        if !within(self.contrast, i.contrast_range) {
            let (lo, hi) = i.contrast_range;
            return Err(StimError::OutOfRange { test, param: "contrast", value: self.contrast, lo, hi });
        }
        let v = self.axis_value();
        if !within(v, i.axis_range) {
            let (lo, hi) = i.axis_range;
            return Err(StimError::OutOfRange { test, param: i.axis.column(), value: v, lo, hi });
        }
        Ok(())
    }
}

/// Linear-light stimulus, `[frame][y][x][rgb]` in cd/m².
#[derive(Debug, Clone, PartialEq)]
pub struct LinearStimulus {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub ppd: f64,
    pub fps: f64,
    pub data: Vec<f64>,
    pub spec: Option<StimulusSpec>,
}

impl LinearStimulus {
    pub fn uniform(width: usize, height: usize, frames: usize, ppd: f64, fps: f64, level: f64) -> Self {
        Self { width, height, frames, ppd, fps, data: vec![level; width * height * frames * 3], spec: None }
    }

    fn from_spec(spec: &StimulusSpec, level: f64) -> Self {
        let mut s = Self::uniform(spec.width, spec.height, spec.frames(), spec.ppd, spec.fps, level);
        s.spec = Some(spec.clone());
        s
    }

    #[inline]
    pub fn idx(&self, f: usize, y: usize, x: usize) -> usize {
        ((f * self.height + y) * self.width + x) * 3
    }

    pub fn rgb(&self, f: usize, y: usize, x: usize) -> [f64; 3] {
        let i = self.idx(f, y, x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Luminance plane of one frame (achromatic mechanism).
    pub fn luminance_frame(&self, f: usize) -> Vec<f64> {
        (0..self.height)
            .flat_map(|y| (0..self.width).map(move |x| (y, x)))
            .map(|(y, x)| crate::colorimetry::luminance(&self.rgb(f, y, x)))
            .collect()
    }
}

/// Pixel-centre coordinate of index `i` on an axis of `n` samples.
#[inline]
pub fn centered(i: usize, n: usize) -> f64 {
    i as f64 - (n as f64 - 1.0) / 2.0
}

/// Scalar Gabor modulation (in units of `c·L_b`) at a point, sine carrier.
pub fn gabor_value(spec: &StimulusSpec, x: f64, y: f64, t: f64) -> f64 {
    let ppd = spec.ppd;
    let r = spec.radius;
    spec.contrast
        * (TAU * spec.spatial_freq * x / ppd).sin()
        * (-(x * x + y * y) / (2.0 * ppd * ppd * r * r)).exp()
        * (TAU * spec.temporal_freq * t).cos()
}

/// Sine-carrier Gabor on a uniform field (detection tests).
pub fn gen_gabor_pair(spec: &StimulusSpec) -> Result<(LinearStimulus, LinearStimulus), StimError> {
    if spec.test_id.info().family != Family::Gabor {
        return Err(StimError::WrongFamily(spec.test_id.as_str(), "detection"));
    }
    spec.check_sampling()?;
    let (w, h) = (spec.width, spec.height);
    let reference = LinearStimulus::from_spec(spec, spec.luminance);
    let mut test = reference.clone();
    if spec.contrast == 0.0 {
        return Ok((test, reference));
    }
    let (white, delta) = modulation_basis(spec.direction, spec.luminance);
    let s2 = 2.0 * spec.ppd * spec.ppd * spec.radius * spec.radius;
    let carrier: Vec<f64> = (0..w)
        .map(|i| {
            let x = centered(i, w);
            (TAU * spec.spatial_freq * x / spec.ppd).sin() * (-(x * x) / s2).exp()
        })
        .collect();
    let env_y: Vec<f64> = (0..h).map(|j| (-(centered(j, h).powi(2)) / s2).exp()).collect();
    for f in 0..test.frames {
        let t = if spec.fps > 0.0 { f as f64 / spec.fps } else { 0.0 };
        let temporal = (TAU * spec.temporal_freq * t).cos();
        for (j, ey) in env_y.iter().enumerate() {
            let row = test.idx(f, j, 0);
            for (i, cx) in carrier.iter().enumerate() {
                let g = spec.contrast * cx * ey * temporal;
                let k = row + 3 * i;
                test.data[k] = white[0] + g * delta[0];
                test.data[k + 1] = white[1] + g * delta[1];
                test.data[k + 2] = white[2] + g * delta[2];
            }
        }
    }
    Ok((test, reference))
}

/// Masker plus cosine-carrier Gabor; the reference is the masker alone.
pub fn gen_masking_pair(spec: &StimulusSpec) -> Result<(LinearStimulus, LinearStimulus), StimError> {
    if spec.test_id.info().family != Family::Masking {
        return Err(StimError::WrongFamily(spec.test_id.as_str(), "masking"));
    }
    spec.check_sampling()?;
    let (w, h) = (spec.width, spec.height);
    let lb = spec.luminance;
    let masker: Vec<f64> = match spec.test_id {
        TestId::MaskingCoherent => {
            let row: Vec<f64> = (0..w)
                .map(|i| spec.mask_contrast * (TAU * spec.mask_freq * i as f64 / spec.ppd).cos())
                .collect();
            (0..h).flat_map(|_| row.iter().copied()).collect()
        }
        _ => {
            let seed = spec.seed.ok_or(StimError::SeedRequired)?;
            let n = gen_noise_field(w, h, spec.ppd, spec.mask_freq, seed);
            n.into_iter().map(|v| spec.mask_contrast * v).collect()
        }
    };
    let mut reference = LinearStimulus::from_spec(spec, 0.0);
    for (k, m) in masker.iter().enumerate() {
        let v = lb * (1.0 + m);
        reference.data[3 * k..3 * k + 3].fill(v);
    }
    let mut test = reference.clone();
    if spec.contrast == 0.0 {
        return Ok((test, reference));
    }
    let s2 = 2.0 * spec.ppd * spec.ppd * spec.radius * spec.radius;
    let carrier: Vec<f64> = (0..w)
        .map(|i| {
            let xc = centered(i, w);
            (TAU * spec.spatial_freq * i as f64 / spec.ppd).cos() * (-(xc * xc) / s2).exp()
        })
        .collect();
    for j in 0..h {
        let ey = (-(centered(j, h).powi(2)) / s2).exp();
        for (i, cx) in carrier.iter().enumerate() {
            let k = j * w + i;
            let v = lb * (1.0 + masker[k] + spec.contrast * cx * ey);
            test.data[3 * k..3 * k + 3].fill(v);
        }
    }
    Ok((test, reference))
}

/// Disk flickering with a sine in time; the reference is static.
pub fn gen_flicker_pair(spec: &StimulusSpec) -> Result<(LinearStimulus, LinearStimulus), StimError> {
    if spec.test_id.info().family != Family::Flicker {
        return Err(StimError::WrongFamily(spec.test_id.as_str(), "flicker"));
    }
    spec.check_sampling()?;
    if spec.temporal_freq >= spec.fps / 2.0 {
        return Err(StimError::Aliasing { what: "temporal", freq: spec.temporal_freq, limit: spec.fps / 2.0 });
    }
    let (w, h) = (spec.width, spec.height);
    let lb = spec.luminance;
    let reference = LinearStimulus::from_spec(spec, lb);
    let mut test = reference.clone();
    let r2 = spec.radius * spec.radius;
    let inside: Vec<bool> = (0..h)
        .flat_map(|j| (0..w).map(move |i| (j, i)))
        .map(|(j, i)| {
            let (x, y) = (centered(i, w) / spec.ppd, centered(j, h) / spec.ppd);
            x * x + y * y <= r2
        })
        .collect();
    for f in 0..test.frames {
        let t = f as f64 / spec.fps;
        let s = (TAU * spec.temporal_freq * t).sin();
        if s == 0.0 || spec.contrast == 0.0 {
            continue;
        }
        let v = lb * (1.0 + spec.contrast * s);
        for (k, &d) in inside.iter().enumerate() {
            if d {
                let p = test.idx(f, 0, 0) + 3 * k;
                test.data[p..p + 3].fill(v);
            }
        }
    }
    Ok((test, reference))
}

/// Full-field sine grating. Vertical bars for achromatic frequency
/// matching, horizontal bars along a colour direction for colour matching.
pub fn gen_matching_grating(spec: &StimulusSpec) -> Result<LinearStimulus, StimError> {
    if spec.test_id.info().family != Family::Matching {
        return Err(StimError::WrongFamily(spec.test_id.as_str(), "matching"));
    }
    spec.check_sampling()?;
    let (w, h) = (spec.width, spec.height);
    let mut out = LinearStimulus::from_spec(spec, spec.luminance);
    if spec.contrast == 0.0 {
        return Ok(out);
    }
    let (white, delta) = modulation_basis(spec.direction, spec.luminance);
    let horizontal = spec.test_id == TestId::MatchingColor;
    let wave = |k: usize, n: usize| (TAU * spec.spatial_freq * centered(k, n) / spec.ppd).sin();
    let xs: Vec<f64> = (0..w).map(|i| wave(i, w)).collect();
    let ys: Vec<f64> = (0..h).map(|j| wave(j, h)).collect();
    for j in 0..h {
        for i in 0..w {
            let g = spec.contrast * if horizontal { ys[j] } else { xs[i] };
            let k = out.idx(0, j, i);
            out.data[k] = white[0] + g * delta[0];
            out.data[k + 1] = white[1] + g * delta[1];
            out.data[k + 2] = white[2] + g * delta[2];
        }
    }
    Ok(out)
}

/// Test and reference stimuli for any test.
pub fn generate_pair(spec: &StimulusSpec) -> Result<(LinearStimulus, LinearStimulus), StimError> {
    match spec.test_id.info().family {
        Family::Gabor => gen_gabor_pair(spec),
        Family::Masking => gen_masking_pair(spec),
        Family::Flicker => gen_flicker_pair(spec),
        Family::Matching => {
            let test = gen_matching_grating(spec)?;
            let reference = LinearStimulus::from_spec(spec, spec.luminance);
            Ok((test, reference))
        }
    }
}

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == n - 1 {
                hi
            } else {
                10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64)
            }
        })
        .collect()
}

/// Axis values × contrasts sampled for one test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestGrid {
    pub test_id: TestId,
    pub axis: AxisKind,
    pub axis_values: Vec<f64>,
    pub contrasts: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDensity {
    pub axis_points: usize,
    pub contrast_points: usize,
}

impl GridDensity {
    pub fn default_for(test_id: TestId) -> Self {
        match test_id.info().family {
            Family::Masking => Self { axis_points: 15, contrast_points: 15 },
            Family::Matching => Self { axis_points: 16, contrast_points: 41 },
            _ => Self { axis_points: 16, contrast_points: 20 },
        }
    }
}

/// Highest flicker frequency sampled at a given frame rate.
pub fn flicker_cap(fps: f64) -> f64 {
    (fps / 2.0 - 5.0).min(60.0)
}

impl TestGrid {
    pub fn new(test_id: TestId, density: GridDensity, fps: f64) -> Self {
        let info = test_id.info();
        let (lo, hi) = info.axis_range;
        let axis_values = match test_id {
            TestId::MatchingColor => vec![0.0, 1.0, 2.0],
            TestId::MatchingFreq => {
                let mut v = logspace(lo, hi, density.axis_points);
                if !v.iter().any(|&f| (f - MATCHING_REF_FREQ).abs() < 1e-9) {
                    v.push(MATCHING_REF_FREQ);
                    v.sort_by(f64::total_cmp);
                }
                v
            }
            TestId::Flicker => logspace(lo, hi.min(flicker_cap(fps)), density.axis_points),
            _ => logspace(lo, hi, density.axis_points),
        };
        let (clo, chi) = info.contrast_range;
        Self { test_id, axis: info.axis, axis_values, contrasts: logspace(clo, chi, density.contrast_points) }
    }

    pub fn default_for(test_id: TestId) -> Self {
        Self::new(test_id, GridDensity::default_for(test_id), DEFAULT_FPS)
    }

    pub fn spec(&self, base: &StimulusSpec, axis_index: usize, contrast_index: usize) -> StimulusSpec {
        base.clone().with_axis(self.axis_values[axis_index]).with_contrast(self.contrasts[contrast_index])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(test: TestId) -> StimulusSpec {
        StimulusSpec::base(test)
    }

    #[test]
    fn test_ids_roundtrip() {
        for t in TestId::ALL {
            assert_eq!(TestId::parse(t.as_str()), Some(t));
            let j = serde_json::to_string(&t).unwrap();
            assert_eq!(j, format!("\"{}\"", t.as_str()));
        }
    }

    #[test]
    fn detection_geometry() {
        let i = TestId::DetectionSfAch.info();
        assert_eq!((i.width, i.height, i.ppd), (1920, 1080, 66.0));
        let fov = (i.width as f64 / i.ppd, i.height as f64 / i.ppd);
        assert!((fov.0 - 29.0).abs() < 0.2 && (fov.1 - 16.4).abs() < 0.1);
        let m = TestId::MaskingCoherent.info();
        assert_eq!((m.width as f64 / m.ppd, m.height as f64 / m.ppd), (7.0, 5.0));
    }

    #[test]
    fn gabor_pointwise() {
        let mut s = spec(TestId::DetectionLuminance).with_contrast(0.5);
        s.spatial_freq = 2.0;
        s.radius = 2.0;
        assert_eq!(gabor_value(&s, 0.0, 0.0, 0.0), 0.0);
        let quarter = 21.4 * (1.0 + gabor_value(&s, 7.5, 0.0, 0.0));
        let expected = 21.4 * (1.0 + 0.5 * (-(7.5f64 * 7.5) / (2.0 * 3600.0 * 4.0)).exp());
        assert!((quarter - expected).abs() < 1e-12);
    }

    #[test]
    fn gabor_matches_scalar_definition() {
        let mut s = spec(TestId::DetectionSfAch).with_contrast(0.3);
        s.width = 64;
        s.height = 48;
        s.spatial_freq = 4.0;
        s.radius = 0.3;
        let (t, r) = gen_gabor_pair(&s).unwrap();
        for (j, i) in [(0, 0), (10, 40), (24, 32), (47, 63)] {
            let g = gabor_value(&s, centered(i, 64), centered(j, 48), 0.0);
            let want = s.luminance * (1.0 + g);
            assert!((t.rgb(0, j, i)[1] - want).abs() < 1e-12);
            assert_eq!(r.rgb(0, j, i), [s.luminance; 3]);
        }
    }

    #[test]
    fn zero_contrast_is_reference() {
        for test in [TestId::DetectionSfRg, TestId::MaskingCoherent, TestId::Flicker] {
            let mut s = spec(test);
            s.width = 32;
            s.height = 32;
            s.mask_contrast = 0.2;
            let (t, r) = generate_pair(&s).unwrap();
            assert_eq!(t, r, "{test}");
        }
    }

    #[test]
    fn aliasing_rejected() {
        let mut s = spec(TestId::DetectionSfAch).with_contrast(0.1);
        s.spatial_freq = 34.0;
        assert!(matches!(gen_gabor_pair(&s), Err(StimError::Aliasing { .. })));
        let mut f = spec(TestId::Flicker).with_contrast(0.1);
        f.temporal_freq = 60.0;
        assert!(matches!(gen_flicker_pair(&f), Err(StimError::Aliasing { .. })));
        f.temporal_freq = 55.0;
        f.width = 8;
        f.height = 8;
        assert!(gen_flicker_pair(&f).is_ok());
    }

    #[test]
    fn noise_masker_needs_seed() {
        let mut s = spec(TestId::MaskingIncoherent);
        s.seed = None;
        s.mask_contrast = 0.1;
        assert_eq!(gen_masking_pair(&s).unwrap_err(), StimError::SeedRequired);
    }

    #[test]
    fn flicker_quarter_period() {
        let mut s = spec(TestId::Flicker).with_contrast(0.4);
        s.temporal_freq = 10.0;
        s.width = 64;
        s.height = 64;
        s.radius = 0.4;
        let (t, r) = gen_flicker_pair(&s).unwrap();
        assert_eq!(t.frames, 120);
        // t = 1/(4f) = 0.025 s -> frame 3 at 120 fps
        assert!((t.rgb(3, 32, 32)[0] - 21.4 * 1.4).abs() < 1e-12);
        assert_eq!(t.rgb(3, 0, 0)[0], 21.4);
        assert_eq!(&t.data[..64 * 64 * 3], &r.data[..64 * 64 * 3]);
    }

    #[test]
    fn flicker_zero_frequency_static() {
        let mut s = spec(TestId::Flicker).with_contrast(0.4);
        s.temporal_freq = 0.0;
        s.width = 16;
        s.height = 16;
        let (t, r) = gen_flicker_pair(&s).unwrap();
        assert_eq!(t, r);
    }

    #[test]
    fn matching_gratings() {
        let s = spec(TestId::MatchingFreq).with_contrast(0.0);
        let g = gen_matching_grating(&s).unwrap();
        assert!(g.data.iter().all(|&v| v == 10.0));
        let mut c = spec(TestId::MatchingColor).with_contrast(0.05);
        c.direction = Direction::Rg;
        let g = gen_matching_grating(&c).unwrap();
        // horizontal bars: constant along x
        assert_eq!(g.rgb(0, 40, 0), g.rgb(0, 40, 200));
        assert_ne!(g.rgb(0, 40, 0), g.rgb(0, 45, 0));
    }

    #[test]
    fn grids() {
        let g = TestGrid::default_for(TestId::DetectionSfAch);
        assert_eq!((g.axis_values.len(), g.contrasts.len()), (16, 20));
        assert_eq!(g.axis_values[0], 0.5);
        assert_eq!(*g.axis_values.last().unwrap(), 32.0);
        let f = TestGrid::default_for(TestId::Flicker);
        assert_eq!(*f.axis_values.last().unwrap(), 55.0);
        let f240 = TestGrid::new(TestId::Flicker, GridDensity::default_for(TestId::Flicker), 240.0);
        assert_eq!(*f240.axis_values.last().unwrap(), 60.0);
        let m = TestGrid::default_for(TestId::MatchingFreq);
        assert_eq!(m.axis_values.len(), 17);
        assert!(m.axis_values.contains(&5.0));
        assert_eq!(TestGrid::default_for(TestId::MaskingIncoherent).contrasts.len(), 15);
    }

    #[test]
    fn range_checks() {
        let s = spec(TestId::DetectionSfRg).with_axis(2.0).with_contrast(0.2);
        assert!(matches!(s.check_ranges(), Err(StimError::OutOfRange { param: "contrast", .. })));
        assert!(s.with_contrast(0.1).check_ranges().is_ok());
    }
}
