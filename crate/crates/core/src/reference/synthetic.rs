//! Analytic CSF used as a self-test oracle and as a complete reference pack
//! that needs no external data.

use super::build::{Channel, ThresholdModel};
use crate::colorimetry::Direction;

/// `S(x) = S_max · 2^(−(log10(x/x_peak) / (bw/2))²)`, `bw` being the full
/// width at half maximum in decades.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogParabola {
    pub peak_sensitivity: f64,
    pub peak_freq: f64,
    pub bandwidth: f64,
}

impl LogParabola {
    pub fn sensitivity(&self, x: f64) -> f64 {
        let d = (x / self.peak_freq).log10() / (0.5 * self.bandwidth);
        self.peak_sensitivity * 2f64.powf(-d * d)
    }

    pub fn threshold(&self, x: f64) -> f64 {
        1.0 / self.sensitivity(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCsf {
    pub ach: LogParabola,
    pub rg: LogParabola,
    pub yv: LogParabola,
    /// Achromatic spatial CSF of a drifting 8 Hz pattern.
    pub transient: LogParabola,
    /// Temporal CSF of a uniform disk, over Hz.
    pub temporal: LogParabola,
    /// Half-saturation luminance of `sqrt(L / (L + L0))`.
    pub lum_half: f64,
    /// Critical area (deg²) of `sqrt(A / (A + A_c))`.
    pub area_crit: f64,
    pub ref_luminance: f64,
    pub ref_radius: f64,
}

impl Default for SyntheticCsf {
    fn default() -> Self {
        Self {
            ach: LogParabola { peak_sensitivity: 250.0, peak_freq: 3.0, bandwidth: 1.4 },
            rg: LogParabola { peak_sensitivity: 500.0, peak_freq: 0.5, bandwidth: 1.6 },
            yv: LogParabola { peak_sensitivity: 80.0, peak_freq: 0.3, bandwidth: 2.0 },
            transient: LogParabola { peak_sensitivity: 200.0, peak_freq: 1.5, bandwidth: 1.4 },
            temporal: LogParabola { peak_sensitivity: 150.0, peak_freq: 8.0, bandwidth: 1.6 },
            lum_half: 5.0,
            area_crit: 3.0,
            ref_luminance: 21.4,
            ref_radius: 2.0,
        }
    }
}

impl SyntheticCsf {
    fn lum_factor(&self, l: f64) -> f64 {
        (l / (l + self.lum_half)).sqrt() / (self.ref_luminance / (self.ref_luminance + self.lum_half)).sqrt()
    }

    fn area_factor(&self, sigma: f64) -> f64 {
        let a = std::f64::consts::PI * sigma * sigma;
        let ar = std::f64::consts::PI * self.ref_radius * self.ref_radius;
        (a / (a + self.area_crit)).sqrt() / (ar / (ar + self.area_crit)).sqrt()
    }

    pub fn channel(&self, dir: Direction) -> &LogParabola {
        match dir {
            Direction::Ach => &self.ach,
            Direction::Rg => &self.rg,
            Direction::Yv => &self.yv,
        }
    }
}

impl ThresholdModel for SyntheticCsf {
    fn name(&self) -> String {
        "synthetic log-parabola CSF".into()
    }

    fn threshold(&self, ch: Channel, rho: f64, luminance: f64, sigma: f64) -> Option<f64> {
        let base = match ch {
            Channel::Sustained(d) => self.channel(d).sensitivity(rho),
            Channel::Transient => self.transient.sensitivity(rho),
            Channel::Flicker(f) => self.temporal.sensitivity(f),
        };
        Some(1.0 / (base * self.lum_factor(luminance) * self.area_factor(sigma)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn peak_threshold() {
        let p = LogParabola { peak_sensitivity: 200.0, peak_freq: 4.0, bandwidth: 1.0 };
        assert_eq!(p.threshold(4.0), 1.0 / 200.0);
    }

    #[test]
    fn half_maximum_at_half_bandwidth() {
        let p = LogParabola { peak_sensitivity: 200.0, peak_freq: 4.0, bandwidth: 1.0 };
        let x = 4.0 * 10f64.powf(0.5);
        assert!((p.sensitivity(x) - 100.0).abs() < 1e-9);
    }

    #[test]
    fn reference_conditions_unscaled() {
        let s = SyntheticCsf::default();
        let t = s.threshold(Channel::Sustained(Direction::Ach), 3.0, 21.4, 2.0).unwrap();
        assert!((t - 1.0 / 250.0).abs() < 1e-15);
    }

    #[test]
    fn more_light_and_area_lower_threshold() {
        let s = SyntheticCsf::default();
        let ch = Channel::Sustained(Direction::Ach);
        let t = |l, r| s.threshold(ch, 2.0, l, r).unwrap();
        assert!(t(1.0, 2.0) > t(10.0, 2.0));
        assert!(t(10.0, 0.5) > t(10.0, 2.0));
    }
}
