//! Closed-form stand-ins for the masking and matching data.
//!
//! Masking thresholds are anchored at the unmasked threshold `c_t0`:
//!
//! * coherent (grating on grating): Legge–Foley transducer
//!   `R(c) = c^p / (z + c^q)`, p = 2.4, q = 2, z = c_t0^q; the threshold at
//!   mask contrast `c_m` solves `R(c_m + Δ) − R(c_m) = R(c_t0)`. This gives
//!   the dipper below `c_t0` and a slope of about 0.6 well above it.
//! * incoherent (noise mask): `c_t0 · (1 + (c_m / c_t0)²)^0.3`, no dipper.
//!
//! Suprathreshold matching across frequency follows the subtractive rule
//! `c_t − T(ρ_t) = c_r − T(ρ_r)`, which produces contrast constancy well
//! above threshold and the threshold-shaped curvature near it.

pub const LEGGE_FOLEY_P: f64 = 2.4;
pub const LEGGE_FOLEY_Q: f64 = 2.0;
pub const NOISE_MASK_EXPONENT: f64 = 0.3;

fn transducer(c: f64, z: f64) -> f64 {
    c.powf(LEGGE_FOLEY_P) / (z + c.powf(LEGGE_FOLEY_Q))
}

pub fn coherent_mask_threshold(c_t0: f64, c_m: f64) -> f64 {
    let z = c_t0.powf(LEGGE_FOLEY_Q);
    let k = transducer(c_t0, z);
    let r0 = transducer(c_m, z);
    let f = |d: f64| transducer(c_m + d, z) - r0 - k;
    let (mut lo, mut hi) = (0.0, c_t0);
    while f(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= hi * 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

pub fn noise_mask_threshold(c_t0: f64, c_m: f64) -> f64 {
    c_t0 * (1.0 + (c_m / c_t0).powi(2)).powf(NOISE_MASK_EXPONENT)
}

/// Matched test contrast, `None` when the reference is below threshold or
/// the match would exceed unit contrast.
pub fn subtractive_match(c_r: f64, t_ref: f64, t_test: f64) -> Option<f64> {
    if c_r <= t_ref {
        return None;
    }
    let c = c_r - t_ref + t_test;
    (c <= 1.0).then_some(c)
}
