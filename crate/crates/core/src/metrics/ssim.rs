//! SSIM and MS-SSIM on luma planes in [0, 1].
//!
//! 11×11 Gaussian window (σ = 1.5), K1 = 0.01, K2 = 0.03, data range 1.
//! Only fully covered windows are used (no padding). MS-SSIM uses five
//! scales with 2×2 average pooling between scales.

use super::{frame_mean, luma_plane, MetricError};
use crate::colorimetry::EncodedStimulus;

const WIN: usize = 11;
const SIGMA: f64 = 1.5;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

pub const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

fn window() -> [f64; WIN] {
    let mut w = [0.0; WIN];
    let c = (WIN / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * SIGMA * SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Separable valid-region filter of `src` (w×h) into a (w-10)×(h-10) plane.
fn filter_valid(src: &[f64], w: usize, h: usize, k: &[f64; WIN]) -> Vec<f64> {
    let ow = w - WIN + 1;
    let oh = h - WIN + 1;
    let mut tmp = vec![0.0; ow * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        let out = &mut tmp[y * ow..(y + 1) * ow];
        for (x, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (t, kv) in k.iter().enumerate() {
                acc += kv * row[x + t];
            }
            *o = acc;
        }
    }
    let mut dst = vec![0.0; ow * oh];
    for y in 0..oh {
        let out = &mut dst[y * ow..(y + 1) * ow];
        for (t, kv) in k.iter().enumerate() {
            let row = &tmp[(y + t) * ow..(y + t + 1) * ow];
            for (o, r) in out.iter_mut().zip(row) {
                *o += kv * r;
            }
        }
    }
    dst
}

/// Mean SSIM and mean contrast-structure term.
pub(crate) fn ssim_cs(x: &[f64], y: &[f64], w: usize, h: usize) -> Result<(f64, f64), MetricError> {
    if w < WIN || h < WIN {
        return Err(MetricError::ImageTooSmall { width: w, height: h, min: WIN });
    }
    let k = window();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let mx = filter_valid(x, w, h, &k);
    let my = filter_valid(y, w, h, &k);
    let sxx = filter_valid(&xx, w, h, &k);
    let syy = filter_valid(&yy, w, h, &k);
    let sxy = filter_valid(&xy, w, h, &k);
    let n = mx.len() as f64;
    let (mut s_acc, mut cs_acc) = (0.0, 0.0);
    for i in 0..mx.len() {
        let (a, b) = (mx[i], my[i]);
        let vx = sxx[i] - a * a;
        let vy = syy[i] - b * b;
        let cov = sxy[i] - a * b;
        let cs = (2.0 * cov + C2) / (vx + vy + C2);
        let l = (2.0 * a * b + C1) / (a * a + b * b + C1);
        s_acc += l * cs;
        cs_acc += cs;
    }
    Ok((s_acc / n, cs_acc / n))
}

pub fn ssim_planes(x: &[f64], y: &[f64], w: usize, h: usize) -> Result<f64, MetricError> {
    ssim_cs(x, y, w, h).map(|r| r.0)
}

fn downsample(p: &[f64], w: usize, h: usize) -> (Vec<f64>, usize, usize) {
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

pub fn ms_ssim_planes(x: &[f64], y: &[f64], w: usize, h: usize) -> Result<f64, MetricError> {
    let scales = MS_SSIM_WEIGHTS.len();
    let div = 1 << (scales - 1);
    if w / div < WIN || h / div < WIN {
        return Err(MetricError::ImageTooSmall { width: w, height: h, min: WIN * div });
    }
    let (mut a, mut b, mut cw, mut ch) = (x.to_vec(), y.to_vec(), w, h);
    let mut score = 1.0;
    for (s, wt) in MS_SSIM_WEIGHTS.iter().enumerate() {
        let (full, cs) = ssim_cs(&a, &b, cw, ch)?;
        if s + 1 == scales {
            score *= full.max(0.0).powf(*wt);
        } else {
            score *= cs.max(0.0).powf(*wt);
            let (na, nw, nh) = downsample(&a, cw, ch);
            let (nb, _, _) = downsample(&b, cw, ch);
            a = na;
            b = nb;
            cw = nw;
            ch = nh;
        }
    }
    Ok(score)
}

pub fn ssim(test: &EncodedStimulus, reference: &EncodedStimulus) -> Result<f64, MetricError> {
    frame_mean(test, reference, |f| {
        ssim_planes(&luma_plane(test, f), &luma_plane(reference, f), test.width, test.height)
    })
}

pub fn ms_ssim(test: &EncodedStimulus, reference: &EncodedStimulus) -> Result<f64, MetricError> {
    frame_mean(test, reference, |f| {
        ms_ssim_planes(&luma_plane(test, f), &luma_plane(reference, f), test.width, test.height)
    })
}
