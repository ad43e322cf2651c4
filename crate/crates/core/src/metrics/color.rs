//! Per-pixel colour differences averaged over the image.
//!
//! CIEDE2000 and HyAB use CIELAB relative to the display white (D65,
//! Y = 1 at peak). ΔE_ITP uses absolute luminance with the display peak at
//! 100 cd/m² and the BT.2100 PQ non-linearity.

use super::{frame_mean, linear_rgb_plane, MetricError};
use crate::colorimetry::{mat_mul, mat_vec, EncodedStimulus, D65_WHITE, RGB_TO_XYZ};

const ICTCP_PEAK: f64 = 100.0;

pub fn srgb_to_xyz(rgb: &[f64; 3]) -> [f64; 3] {
    mat_vec(&RGB_TO_XYZ, rgb)
}

fn lab_f(t: f64) -> f64 {
    const D: f64 = 6.0 / 29.0;
    if t > D * D * D {
        t.cbrt()
    } else {
        t / (3.0 * D * D) + 4.0 / 29.0
    }
}

pub fn lab(xyz: &[f64; 3]) -> [f64; 3] {
    let fx = lab_f(xyz[0] / D65_WHITE[0]);
    let fy = lab_f(xyz[1] / D65_WHITE[1]);
    let fz = lab_f(xyz[2] / D65_WHITE[2]);
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

fn hue_deg(b: f64, a: f64) -> f64 {
    if a == 0.0 && b == 0.0 {
        return 0.0;
    }
    let h = b.atan2(a).to_degrees();
    if h < 0.0 {
        h + 360.0
    } else {
        h
    }
}

/// CIEDE2000 with kL = kC = kH = 1.
pub fn ciede2000_pair(lab1: &[f64; 3], lab2: &[f64; 3]) -> f64 {
    let (l1, a1, b1) = (lab1[0], lab1[1], lab1[2]);
    let (l2, a2, b2) = (lab2[0], lab2[1], lab2[2]);
    let p25 = 25f64.powi(7);
    let cbar = ((a1 * a1 + b1 * b1).sqrt() + (a2 * a2 + b2 * b2).sqrt()) / 2.0;
    let g = 0.5 * (1.0 - (cbar.powi(7) / (cbar.powi(7) + p25)).sqrt());
    let a1p = (1.0 + g) * a1;
    let a2p = (1.0 + g) * a2;
    let c1p = (a1p * a1p + b1 * b1).sqrt();
    let c2p = (a2p * a2p + b2 * b2).sqrt();
    let h1p = hue_deg(b1, a1p);
    let h2p = hue_deg(b2, a2p);

    let dl = l2 - l1;
    let dc = c2p - c1p;
    let dh = if c1p * c2p == 0.0 {
        0.0
    } else {
        let d = h2p - h1p;
        if d > 180.0 {
            d - 360.0
        } else if d < -180.0 {
            d + 360.0
        } else {
            d
        }
    };
    let dhh = 2.0 * (c1p * c2p).sqrt() * (dh.to_radians() / 2.0).sin();

    let lbar = (l1 + l2) / 2.0;
    let cbarp = (c1p + c2p) / 2.0;
    let hbar = if c1p * c2p == 0.0 {
        h1p + h2p
    } else if (h1p - h2p).abs() <= 180.0 {
        (h1p + h2p) / 2.0
    } else if h1p + h2p < 360.0 {
        (h1p + h2p + 360.0) / 2.0
    } else {
        (h1p + h2p - 360.0) / 2.0
    };
    let t = 1.0 - 0.17 * (hbar - 30.0).to_radians().cos()
        + 0.24 * (2.0 * hbar).to_radians().cos()
        + 0.32 * (3.0 * hbar + 6.0).to_radians().cos()
        - 0.20 * (4.0 * hbar - 63.0).to_radians().cos();
    let dtheta = 30.0 * (-((hbar - 275.0) / 25.0).powi(2)).exp();
    let rc = 2.0 * (cbarp.powi(7) / (cbarp.powi(7) + p25)).sqrt();
    let lm = (lbar - 50.0) * (lbar - 50.0);
    let sl = 1.0 + 0.015 * lm / (20.0 + lm).sqrt();
    let sc = 1.0 + 0.045 * cbarp;
    let sh = 1.0 + 0.015 * cbarp * t;
    let rt = -(2.0 * dtheta).to_radians().sin() * rc;
    let (x, y, z) = (dl / sl, dc / sc, dhh / sh);
    (x * x + y * y + z * z + rt * y * z).sqrt()
}

pub fn hyab_pair(lab1: &[f64; 3], lab2: &[f64; 3]) -> f64 {
    let da = lab1[1] - lab2[1];
    let db = lab1[2] - lab2[2];
    (lab1[0] - lab2[0]).abs() + (da * da + db * db).sqrt()
}

const BT709_TO_BT2020: [[f64; 3]; 3] = [
    [0.627404, 0.329283, 0.043313],
    [0.069097, 0.919540, 0.011362],
    [0.016391, 0.088013, 0.895595],
];

const BT2020_TO_LMS: [[f64; 3]; 3] = [
    [1688.0 / 4096.0, 2146.0 / 4096.0, 262.0 / 4096.0],
    [683.0 / 4096.0, 2951.0 / 4096.0, 462.0 / 4096.0],
    [99.0 / 4096.0, 309.0 / 4096.0, 3688.0 / 4096.0],
];

fn pq_inverse_eotf(l: f64) -> f64 {
    let m1 = 2610.0 / 16384.0;
    let m2 = 2523.0 / 4096.0 * 128.0;
    let c1 = 3424.0 / 4096.0;
    let c2 = 2413.0 / 4096.0 * 32.0;
    let c3 = 2392.0 / 4096.0 * 32.0;
    let y = (l / 10000.0).max(0.0).powf(m1);
    ((c1 + c2 * y) / (1.0 + c3 * y)).powf(m2)
}

/// ICtCp of a linear BT.709 sample given relative to a 100 cd/m² peak.
pub fn ictcp(rgb: &[f64; 3]) -> [f64; 3] {
    let m = mat_mul(&BT2020_TO_LMS, &BT709_TO_BT2020);
    let lms = mat_vec(&m, &[rgb[0] * ICTCP_PEAK, rgb[1] * ICTCP_PEAK, rgb[2] * ICTCP_PEAK]);
    let (l, mm, s) = (pq_inverse_eotf(lms[0]), pq_inverse_eotf(lms[1]), pq_inverse_eotf(lms[2]));
    [
        0.5 * l + 0.5 * mm,
        (6610.0 * l - 13613.0 * mm + 7003.0 * s) / 4096.0,
        (17933.0 * l - 17390.0 * mm - 543.0 * s) / 4096.0,
    ]
}

pub fn ictcp_pair(rgb1: &[f64; 3], rgb2: &[f64; 3]) -> f64 {
    let a = ictcp(rgb1);
    let b = ictcp(rgb2);
    let di = a[0] - b[0];
    let dt = 0.5 * (a[1] - b[1]);
    let dp = a[2] - b[2];
    720.0 * (di * di + dt * dt + dp * dp).sqrt()
}

fn mean_lab_difference(
    test: &EncodedStimulus,
    reference: &EncodedStimulus,
    d: fn(&[f64; 3], &[f64; 3]) -> f64,
) -> Result<f64, MetricError> {
    frame_mean(test, reference, |f| {
        let a = linear_rgb_plane(test, f);
        let b = linear_rgb_plane(reference, f);
        let sum: f64 = a.iter().zip(&b).map(|(x, y)| d(&lab(&srgb_to_xyz(x)), &lab(&srgb_to_xyz(y)))).sum();
        Ok(sum / a.len() as f64)
    })
}

pub fn ciede2000(test: &EncodedStimulus, reference: &EncodedStimulus) -> Result<f64, MetricError> {
    mean_lab_difference(test, reference, ciede2000_pair)
}

pub fn hyab(test: &EncodedStimulus, reference: &EncodedStimulus) -> Result<f64, MetricError> {
    mean_lab_difference(test, reference, hyab_pair)
}

pub fn ictcp_de(test: &EncodedStimulus, reference: &EncodedStimulus) -> Result<f64, MetricError> {
    frame_mean(test, reference, |f| {
        let a = linear_rgb_plane(test, f);
        let b = linear_rgb_plane(reference, f);
        let sum: f64 = a.iter().zip(&b).map(|(x, y)| ictcp_pair(x, y)).sum();
        Ok(sum / a.len() as f64)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn white_is_l100() {
        let l = lab(&srgb_to_xyz(&[1.0, 1.0, 1.0]));
        assert!((l[0] - 100.0).abs() < 1e-3);
        assert!(l[1].abs() < 0.01 && l[2].abs() < 0.01);
    }

    #[test]
    fn sharma_first_pair() {
        let d = ciede2000_pair(&[50.0, 2.6772, -79.7751], &[50.0, 0.0, -82.7485]);
        assert!((d - 2.0425).abs() < 1e-4);
    }

    #[test]
    fn hyab_lightness_only() {
        assert!((hyab_pair(&[40.0, 0.0, 0.0], &[50.0, 0.0, 0.0]) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn identical_zero() {
        let x = [0.3, 0.5, 0.2];
        assert_eq!(ciede2000_pair(&lab(&srgb_to_xyz(&x)), &lab(&srgb_to_xyz(&x))), 0.0);
        assert_eq!(ictcp_pair(&x, &x), 0.0);
    }

    #[test]
    fn ictcp_neutral_has_no_chroma() {
        let c = ictcp(&[0.5, 0.5, 0.5]);
        assert!(c[1].abs() < 1e-3 && c[2].abs() < 1e-3, "{c:?}");
    }

    #[test]
    fn pq_peak() {
        assert!((pq_inverse_eotf(10000.0) - 1.0).abs() < 1e-9);
        assert!(pq_inverse_eotf(0.0) < 1e-6);
    }
}
