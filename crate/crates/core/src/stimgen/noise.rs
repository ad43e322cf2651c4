//! Seeded band-limited noise.
//!
//! The generator is SplitMix64 used as a counter-based stream: the i-th
//! 64-bit word is `mix(seed + (i + 1) * 0x9E3779B97F4A7C15)` with the
//! standard SplitMix64 finaliser. Uniforms take the top 53 bits. Gaussian
//! pairs come from Box–Muller on consecutive uniforms `(u1, u2)`:
//! `sqrt(-2 ln(1 - u1)) * (cos, sin)(2π u2)`, filled row-major.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

pub fn gaussian_field(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = SplitMix64::new(seed);
    let mut out = Vec::with_capacity(n + 1);
    while out.len() < n {
        let u1 = 1.0 - rng.next_f64();
        let u2 = rng.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let a = std::f64::consts::TAU * u2;
        out.push(r * a.cos());
        out.push(r * a.sin());
    }
    out.truncate(n);
    out
}

/// Signed frequency, in cycles per degree, of FFT bin `k` out of `n`.
pub fn bin_frequency(k: usize, n: usize, ppd: f64) -> f64 {
    let k = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
    k / n as f64 * ppd
}

/// The masker pass band: a bin survives when its radial frequency is below
/// `cutoff_cpd`; everything at or above the cutoff is removed.
pub fn in_pass_band(fx: f64, fy: f64, cutoff_cpd: f64) -> bool {
    (fx * fx + fy * fy).sqrt() < cutoff_cpd
}

pub fn fft2(data: &mut [Complex<f64>], width: usize, height: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let (row, col) = if inverse {
        (planner.plan_fft_inverse(width), planner.plan_fft_inverse(height))
    } else {
        (planner.plan_fft_forward(width), planner.plan_fft_forward(height))
    };
    for r in data.chunks_exact_mut(width) {
        row.process(r);
    }
    let mut column = vec![Complex::new(0.0, 0.0); height];
    for x in 0..width {
        for y in 0..height {
            column[y] = data[y * width + x];
        }
        col.process(&mut column);
        for y in 0..height {
            data[y * width + x] = column[y];
        }
    }
}

/// Gaussian white noise low-passed in the Fourier domain, real part taken,
/// then standardised to zero mean and unit variance. Row-major, `height`
/// rows of `width` samples.
pub fn gen_noise_field(width: usize, height: usize, ppd: f64, cutoff_cpd: f64, seed: u64) -> Vec<f64> {
    let n = width * height;
    let white = gaussian_field(n, seed);
    let mut spec: Vec<Complex<f64>> = white.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft2(&mut spec, width, height, false);
    for y in 0..height {
        let fy = bin_frequency(y, height, ppd);
        for x in 0..width {
            let fx = bin_frequency(x, width, ppd);
            if !in_pass_band(fx, fy, cutoff_cpd) {
                spec[y * width + x] = Complex::new(0.0, 0.0);
            }
        }
    }
    fft2(&mut spec, width, height, true);
    let mut field: Vec<f64> = spec.iter().map(|c| c.re / n as f64).collect();
    let mean = field.iter().sum::<f64>() / n as f64;
    let var = field.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    let sd = var.sqrt();
    for v in &mut field {
        *v = (*v - mean) / sd;
    }
    field
}
