//! Display model and colour conversions.
//!
//! Stimuli are built in linear display RGB expressed in cd/m² (a neutral
//! pixel of luminance `L` is `[L, L, L]`), then encoded with the sRGB
//! transfer function and quantized.
//!
//! Opponent directions follow a DKL construction on CIE 2006 2° cone
//! fundamentals:
//!
//! ```text
//! XYZ -> LMS   [ 0.187596268556126  0.585168649077728 -0.026384263306304]
//!              [-0.133397430663221  0.405505777260049  0.034502127690364]
//!              [ 0.000244379021663 -0.000542995890619  0.019406849066323]
//!
//! LMS -> DKL   [ 1  1                   0                  ]   (L+M)
//!              [ 1 -2.311130179947035   0                  ]   (L-kM)
//!              [-1 -1                   50.977571328718781 ]   (S-(L+M))
//! ```
//!
//! Contrast units (a convention, not a measured quantity):
//! * `Ach` modulates along the D65 white, so contrast is Michelson luminance
//!   contrast.
//! * `RG` modulates along ΔLMS ∝ (1, -1, 0) and `YV` along ΔLMS ∝ (0, 0, 1).
//!   Both leave L+M untouched. Their contrast is the Euclidean length of the
//!   cone-contrast vector ΔLMS / LMS_white.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stimgen::LinearStimulus;

pub const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];

pub const XYZ_TO_LMS2006: [[f64; 3]; 3] = [
    [0.187596268556126, 0.585168649077728, -0.026384263306304],
    [-0.133397430663221, 0.405505777260049, 0.034502127690364],
    [0.000244379021663, -0.000542995890619, 0.019406849066323],
];

pub const LMS2006_TO_DKL: [[f64; 3]; 3] = [
    [1.0, 1.0, 0.0],
    [1.0, -2.311130179947035, 0.0],
    [-1.0, -1.0, 50.977571328718781],
];

/// D65 reference white used for Lab conversions, Y normalised to 1.
pub const D65_WHITE: [f64; 3] = [0.95047, 1.0, 1.08883];

#[derive(Debug, Error, PartialEq)]
pub enum ColorError {
    #[error("non-finite sample at index {0}")]
    NonFiniteInput(usize),
    #[error("invalid display model: {0}")]
    InvalidDisplayModel(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisplayModel {
    pub peak_luminance: f64,
    pub bit_depth: u32,
    pub ppd: f64,
    pub fps: f64,
}

impl Default for DisplayModel {
    fn default() -> Self {
        Self { peak_luminance: 100.0, bit_depth: 16, ppd: 60.0, fps: 0.0 }
    }
}

impl DisplayModel {
    pub fn new(ppd: f64, fps: f64) -> Self {
        Self { ppd, fps, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), ColorError> {
        if !(self.peak_luminance > 0.0 && self.peak_luminance.is_finite()) {
            return Err(ColorError::InvalidDisplayModel(format!(
                "peak_luminance must be positive, got {}",
                self.peak_luminance
            )));
        }
        if self.bit_depth != 8 && self.bit_depth != 16 {
            return Err(ColorError::InvalidDisplayModel(format!(
                "bit_depth must be 8 or 16, got {}",
                self.bit_depth
            )));
        }
        if !(self.ppd > 0.0 && self.ppd.is_finite()) {
            return Err(ColorError::InvalidDisplayModel(format!("ppd must be positive, got {}", self.ppd)));
        }
        if !(self.fps >= 0.0 && self.fps.is_finite()) {
            return Err(ColorError::InvalidDisplayModel(format!("fps must be >= 0, got {}", self.fps)));
        }
        Ok(())
    }

    pub fn max_code(&self) -> u32 {
        (1u32 << self.bit_depth) - 1
    }

    /// Encodes one linear sample. The flag is set when the value had to be clamped.
    #[inline]
    pub fn encode_value(&self, v: f64) -> (u16, bool) {
        let x = v / self.peak_luminance;
        let clamped = !(0.0..=1.0).contains(&x);
        let x = x.clamp(0.0, 1.0);
        let code = (srgb_oetf(x) * self.max_code() as f64).round();
        (code as u16, clamped)
    }

    #[inline]
    pub fn decode_value(&self, code: u16) -> f64 {
        srgb_eotf(code as f64 / self.max_code() as f64) * self.peak_luminance
    }
}

/// sRGB OETF on relative linear values in [0, 1].
#[inline]
pub fn srgb_oetf(x: f64) -> f64 {
    if x <= 0.0031308 {
        12.92 * x
    } else {
        1.055 * x.powf(1.0 / 2.4) - 0.055
    }
}

#[inline]
pub fn srgb_eotf(v: f64) -> f64 {
    if v <= 0.04045 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Ach,
    Rg,
    Yv,
}

impl Direction {
    pub const ALL: [Direction; 3] = [Direction::Ach, Direction::Rg, Direction::Yv];

    pub fn name(self) -> &'static str {
        match self {
            Direction::Ach => "ach",
            Direction::Rg => "rg",
            Direction::Yv => "yv",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// A cardinal direction with its DKL unit vector and the DKL coordinates of
/// a 1 cd/m² D65 white.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColorDirection {
    pub id: Direction,
    pub unit_vector: [f64; 3],
    pub white_point: [f64; 3],
}

impl ColorDirection {
    pub fn new(id: Direction) -> Self {
        let white_point = mat_vec(&LMS2006_TO_DKL, &white_lms());
        let v = mat_vec(&LMS2006_TO_DKL, &unit_delta_lms(id, 1.0));
        let n = norm(&v);
        Self { id, unit_vector: [v[0] / n, v[1] / n, v[2] / n], white_point }
    }
}

pub fn mat_vec(m: &[[f64; 3]; 3], v: &[f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

pub fn mat_mul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut r = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            r[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    r
}

pub fn mat_inv(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let c00 = m[1][1] * m[2][2] - m[1][2] * m[2][1];
    let c01 = m[1][2] * m[2][0] - m[1][0] * m[2][2];
    let c02 = m[1][0] * m[2][1] - m[1][1] * m[2][0];
    let det = m[0][0] * c00 + m[0][1] * c01 + m[0][2] * c02;
    let d = 1.0 / det;
    [
        [c00 * d, (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * d, (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * d],
        [c01 * d, (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * d, (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * d],
        [c02 * d, (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * d, (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * d],
    ]
}

fn norm(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub fn rgb_to_lms_matrix() -> [[f64; 3]; 3] {
    mat_mul(&XYZ_TO_LMS2006, &RGB_TO_XYZ)
}

pub fn lms_to_rgb_matrix() -> [[f64; 3]; 3] {
    mat_inv(&rgb_to_lms_matrix())
}

/// LMS of a 1 cd/m² D65 white (display RGB [1, 1, 1]).
pub fn white_lms() -> [f64; 3] {
    mat_vec(&rgb_to_lms_matrix(), &[1.0, 1.0, 1.0])
}

pub fn rgb_to_lms(rgb: &[f64; 3]) -> [f64; 3] {
    mat_vec(&rgb_to_lms_matrix(), rgb)
}

/// Luminance as seen by the achromatic (L+M) mechanism, scaled so that
/// display white `[L, L, L]` has luminance `L`.
pub fn luminance(rgb: &[f64; 3]) -> f64 {
    let m = rgb_to_lms_matrix();
    let w = white_lms();
    let l = m[0][0] * rgb[0] + m[0][1] * rgb[1] + m[0][2] * rgb[2];
    let mm = m[1][0] * rgb[0] + m[1][1] * rgb[1] + m[1][2] * rgb[2];
    (l + mm) / (w[0] + w[1])
}

/// ΔLMS produced by unit contrast along `dir` on a background of `base` cd/m².
pub fn unit_delta_lms(dir: Direction, base: f64) -> [f64; 3] {
    let w = white_lms();
    match dir {
        Direction::Ach => [w[0] * base, w[1] * base, w[2] * base],
        Direction::Rg => {
            let k = base / (1.0 / (w[0] * w[0]) + 1.0 / (w[1] * w[1])).sqrt();
            [k, -k, 0.0]
        }
        Direction::Yv => [0.0, 0.0, w[2] * base],
    }
}

/// Background and per-unit-contrast RGB offset for a direction, so that a
/// sample with modulation `g` (contrast times pattern value) is
/// `white + g * delta`.
pub fn modulation_basis(dir: Direction, base: f64) -> ([f64; 3], [f64; 3]) {
    let white = [base, base, base];
    let delta = match dir {
        Direction::Ach => white,
        _ => mat_vec(&lms_to_rgb_matrix(), &unit_delta_lms(dir, base)),
    };
    (white, delta)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Modulated {
    pub rgb: [f64; 3],
    pub gamut_exceeded: bool,
}

/// One sample of `w_p·L_b + G·d_0` with `G = contrast · phase_value`.
pub fn dkl_modulation(
    dm: &DisplayModel,
    base_luminance: f64,
    contrast: f64,
    dir: Direction,
    phase_value: f64,
) -> Modulated {
    let (white, delta) = modulation_basis(dir, base_luminance);
    let g = contrast * phase_value;
    let rgb = [white[0] + g * delta[0], white[1] + g * delta[1], white[2] + g * delta[2]];
    let gamut_exceeded = rgb.iter().any(|&v| v < 0.0 || v > dm.peak_luminance);
    Modulated { rgb, gamut_exceeded }
}

/// Factor converting this crate's contrast units to DKL Weber contrast
/// (channel excursion divided by the achromatic background), the unit used
/// by published CSF tables.
pub fn dkl_weber_per_unit_contrast(dir: Direction) -> f64 {
    let bg = mat_vec(&LMS2006_TO_DKL, &white_lms())[0];
    let d = mat_vec(&LMS2006_TO_DKL, &unit_delta_lms(dir, 1.0));
    d[dir.index()].abs() / bg
}

/// Pooled cone-contrast length of a sample relative to a background.
pub fn cone_contrast(rgb: &[f64; 3], background_rgb: &[f64; 3]) -> f64 {
    let a = rgb_to_lms(rgb);
    let b = rgb_to_lms(background_rgb);
    let c = [(a[0] - b[0]) / b[0], (a[1] - b[1]) / b[1], (a[2] - b[2]) / b[2]];
    norm(&c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodeManifest {
    pub ppd: f64,
    pub fps: f64,
    pub peak_luminance: f64,
    pub clamp_count: u64,
    pub seed: Option<u64>,
}

/// Display-encoded, quantized stimulus. Samples are `[frame][y][x][rgb]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedStimulus {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub bit_depth: u32,
    pub data: Vec<u16>,
    pub manifest: EncodeManifest,
}

impl EncodedStimulus {
    pub fn frame(&self, f: usize) -> &[u16] {
        let n = self.width * self.height * 3;
        &self.data[f * n..(f + 1) * n]
    }

    pub fn max_code(&self) -> f64 {
        ((1u32 << self.bit_depth) - 1) as f64
    }
}

pub fn linear_to_encoded(img: &LinearStimulus, dm: &DisplayModel) -> Result<EncodedStimulus, ColorError> {
    dm.validate()?;
    let mut data = Vec::with_capacity(img.data.len());
    let mut clamp_count = 0u64;
    for (i, &v) in img.data.iter().enumerate() {
        if !v.is_finite() {
            return Err(ColorError::NonFiniteInput(i));
        }
        let (code, clamped) = dm.encode_value(v);
        clamp_count += clamped as u64;
        data.push(code);
    }
    Ok(EncodedStimulus {
        width: img.width,
        height: img.height,
        frames: img.frames,
        bit_depth: dm.bit_depth,
        data,
        manifest: EncodeManifest {
            ppd: img.ppd,
            fps: img.fps,
            peak_luminance: dm.peak_luminance,
            clamp_count,
            seed: img.spec.as_ref().and_then(|s| s.seed),
        },
    })
}

/// Decodes back to linear cd/m².
pub fn encoded_to_linear(enc: &EncodedStimulus, dm: &DisplayModel) -> LinearStimulus {
    LinearStimulus {
        width: enc.width,
        height: enc.height,
        frames: enc.frames,
        ppd: enc.manifest.ppd,
        fps: enc.manifest.fps,
        data: enc.data.iter().map(|&c| dm.decode_value(c)).collect(),
        spec: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oetf_pieces_meet() {
        let a = 12.92 * 0.0031308;
        let b = 1.055 * 0.0031308f64.powf(1.0 / 2.4) - 0.055;
        assert!((a - b).abs() < 1e-6);
        assert_eq!(srgb_oetf(0.0), 0.0);
        assert!((srgb_oetf(1.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eotf_inverts_oetf() {
        for i in 0..=1000 {
            let x = i as f64 / 1000.0;
            assert!((srgb_eotf(srgb_oetf(x)) - x).abs() < 1e-12);
        }
    }

    #[test]
    fn encode_known_levels() {
        let dm = DisplayModel::default();
        assert_eq!(dm.encode_value(100.0), (65535, false));
        assert_eq!(dm.encode_value(0.0), (0, false));
        // 1.055 * 0.214^(1/2.4) - 0.055 evaluated independently
        let expected = ((1.055 * (0.214f64.ln() / 2.4).exp() - 0.055) * 65535.0).round();
        assert_eq!(dm.encode_value(21.4).0 as f64, expected);
        assert_eq!(dm.encode_value(-1.0), (0, true));
        assert_eq!(dm.encode_value(100.5), (65535, true));
    }

    #[test]
    fn display_model_validation() {
        assert!(DisplayModel::default().validate().is_ok());
        let bad = DisplayModel { bit_depth: 10, ..DisplayModel::default() };
        assert!(bad.validate().is_err());
        let bad = DisplayModel { peak_luminance: 0.0, ..DisplayModel::default() };
        assert!(bad.validate().is_err());
        let bad = DisplayModel { ppd: -1.0, ..DisplayModel::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn matrix_inverse_roundtrip() {
        let m = rgb_to_lms_matrix();
        let p = mat_mul(&m, &mat_inv(&m));
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((p[i][j] - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn neutral_and_michelson_modulations() {
        let dm = DisplayModel::default();
        for dir in Direction::ALL {
            let m = dkl_modulation(&dm, 21.4, 0.0, dir, 0.7);
            assert_eq!(m.rgb, [21.4, 21.4, 21.4]);
        }
        let hi = dkl_modulation(&dm, 21.4, 1.0, Direction::Ach, 1.0);
        assert!(hi.rgb.iter().all(|&v| (v - 42.8).abs() < 1e-12));
        assert!(!hi.gamut_exceeded);
        let lo = dkl_modulation(&dm, 21.4, 1.0, Direction::Ach, -1.0);
        assert!(lo.rgb.iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn chromatic_directions_are_isoluminant() {
        let dm = DisplayModel::default();
        for (dir, c) in [(Direction::Rg, 0.12), (Direction::Yv, 0.8)] {
            for phase in [-1.0, 1.0] {
                let m = dkl_modulation(&dm, 21.4, c, dir, phase);
                assert!(!m.gamut_exceeded, "{dir:?} {phase}");
                let y = luminance(&m.rgb);
                assert!(((y - 21.4) / 21.4).abs() < 1e-9, "{dir:?}: {y}");
                let cc = cone_contrast(&m.rgb, &[21.4; 3]);
                assert!((cc - c).abs() < 1e-9);
            }
        }
        let rg = dkl_modulation(&dm, 21.4, 0.12, Direction::Rg, 1.0);
        let lms = rgb_to_lms(&rg.rgb);
        let w = rgb_to_lms(&[21.4; 3]);
        assert!(lms[0] > w[0] && lms[1] < w[1]);
    }

    #[test]
    fn dkl_unit_vectors() {
        let rg = ColorDirection::new(Direction::Rg);
        assert!(rg.unit_vector[0].abs() < 1e-12 && rg.unit_vector[2].abs() < 1e-12);
        let yv = ColorDirection::new(Direction::Yv);
        assert!(yv.unit_vector[0].abs() < 1e-12 && yv.unit_vector[1].abs() < 1e-12);
        let ach = ColorDirection::new(Direction::Ach);
        assert!(ach.unit_vector[0] > 0.99);
        assert!((ach.white_point[0] - (white_lms()[0] + white_lms()[1])).abs() < 1e-12);
    }

    #[test]
    fn weber_factors() {
        assert!((dkl_weber_per_unit_contrast(Direction::Ach) - 1.0).abs() < 1e-12);
        let rg = dkl_weber_per_unit_contrast(Direction::Rg);
        let yv = dkl_weber_per_unit_contrast(Direction::Yv);
        assert!((rg - 0.915).abs() < 0.005, "{rg}");
        assert!((yv - 1.01).abs() < 0.005, "{yv}");
    }

    #[test]
    fn rejects_nan() {
        let img = LinearStimulus::uniform(4, 4, 1, 60.0, 0.0, f64::NAN);
        assert_eq!(linear_to_encoded(&img, &DisplayModel::default()), Err(ColorError::NonFiniteInput(0)));
    }
}
