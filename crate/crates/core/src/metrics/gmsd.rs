//! Gradient magnitude similarity deviation.
//!
//! Luma in [0, 1] is 2×2 average-pooled, Prewitt gradients (scaled by 1/3)
//! are taken over the valid region, and the score is the population
//! standard deviation of the similarity map with T = 170 / 255².

use super::{frame_mean, luma_plane, MetricError};
use crate::colorimetry::EncodedStimulus;

const T: f64 = 170.0 / (255.0 * 255.0);

fn pool2(p: &[f64], w: usize, h: usize) -> (Vec<f64>, usize, usize) {
    let (ow, oh) = (w / 2, h / 2);
    let mut out = Vec::with_capacity(ow * oh);
    for y in 0..oh {
        for x in 0..ow {
            let i = 2 * y * w + 2 * x;
            out.push(0.25 * (p[i] + p[i + 1] + p[i + w] + p[i + w + 1]));
        }
    }
    (out, ow, oh)
}

fn gradient_magnitude(p: &[f64], w: usize, h: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity((w - 2) * (h - 2));
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let at = |dy: isize, dx: isize| p[(y as isize + dy) as usize * w + (x as isize + dx) as usize];
            let gx = (at(-1, -1) + at(0, -1) + at(1, -1) - at(-1, 1) - at(0, 1) - at(1, 1)) / 3.0;
            let gy = (at(-1, -1) + at(-1, 0) + at(-1, 1) - at(1, -1) - at(1, 0) - at(1, 1)) / 3.0;
            out.push((gx * gx + gy * gy).sqrt());
        }
    }
    out
}

pub fn gmsd_planes(x: &[f64], y: &[f64], w: usize, h: usize) -> Result<f64, MetricError> {
    if w / 2 < 3 || h / 2 < 3 {
        return Err(MetricError::ImageTooSmall { width: w, height: h, min: 6 });
    }
    let (px, pw, ph) = pool2(x, w, h);
    let (py, _, _) = pool2(y, w, h);
    let mx = gradient_magnitude(&px, pw, ph);
    let my = gradient_magnitude(&py, pw, ph);
    let gms: Vec<f64> = mx.iter().zip(&my).map(|(a, b)| (2.0 * a * b + T) / (a * a + b * b + T)).collect();
    let n = gms.len() as f64;
    let mean = gms.iter().sum::<f64>() / n;
    let var = gms.iter().map(|g| (g - mean) * (g - mean)).sum::<f64>() / n;
    Ok(var.sqrt())
}

pub fn gmsd(test: &EncodedStimulus, reference: &EncodedStimulus) -> Result<f64, MetricError> {
    frame_mean(test, reference, |f| {
        gmsd_planes(&luma_plane(test, f), &luma_plane(reference, f), test.width, test.height)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pattern(w: usize, h: usize) -> Vec<f64> {
        (0..w * h).map(|i| (((i % w) * 7 + (i / w) * 3) % 11) as f64 / 10.0).collect()
    }

    #[test]
    fn identical_is_zero() {
        let x = pattern(20, 16);
        assert_eq!(gmsd_planes(&x, &x, 20, 16).unwrap(), 0.0);
    }

    #[test]
    fn constant_shift_is_zero() {
        let x: Vec<f64> = pattern(20, 16).iter().map(|v| v * 0.5).collect();
        let y: Vec<f64> = x.iter().map(|v| v + 0.25).collect();
        assert!(gmsd_planes(&x, &y, 20, 16).unwrap() < 1e-12);
    }

    #[test]
    fn different_is_positive() {
        let x = pattern(20, 16);
        let y: Vec<f64> = x.iter().rev().copied().collect();
        assert!(gmsd_planes(&x, &y, 20, 16).unwrap() > 0.0);
    }
}
