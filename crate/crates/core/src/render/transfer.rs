use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub type Rgb = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColorStop {
    pub u: f64,
    pub rgb: Rgb,
}

/// Value to color/opacity mapping. Larger values map redder and more opaque.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferFunction {
    pub v_min: f64,
    pub v_max: f64,
    pub color_stops: Vec<ColorStop>,
    pub opacity_gamma: f64,
    pub opacity_max: f64,
    /// Path length over which the raw opacity applies unmodified.
    pub reference_step: f64,
}

pub const GREEN: Rgb = [0.0, 0.8, 0.0];
pub const YELLOW: Rgb = [1.0, 1.0, 0.0];
pub const RED: Rgb = [1.0, 0.0, 0.0];

impl TransferFunction {
    /// Green, yellow at mid-range, red; opacity `0.9 * u^2`.
    pub fn new(v_min: f64, v_max: f64) -> Self {
        Self {
            v_min,
            v_max,
            color_stops: vec![
                ColorStop { u: 0.0, rgb: GREEN },
                ColorStop { u: 0.5, rgb: YELLOW },
                ColorStop { u: 1.0, rgb: RED },
            ],
            opacity_gamma: 2.0,
            opacity_max: 0.9,
            reference_step: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v_min < self.v_max) {
            return Err(invalid("transfer function needs v_min < v_max"));
        }
        let stops = &self.color_stops;
        if stops.len() < 2 || stops[0].u != 0.0 || stops[stops.len() - 1].u != 1.0 {
            return Err(invalid("color stops must start at u=0 and end at u=1"));
        }
        if stops.windows(2).any(|w| w[1].u < w[0].u) {
            return Err(invalid("color stops must be ordered by u"));
        }
        if stops
            .iter()
            .flat_map(|s| s.rgb)
            .any(|c| !(0.0..=1.0).contains(&c))
        {
            return Err(invalid("color stop channels must lie in [0, 1]"));
        }
        if !(self.opacity_gamma > 0.0) {
            return Err(invalid("opacity_gamma must be positive"));
        }
        if !(self.opacity_max > 0.0 && self.opacity_max <= 1.0) {
            return Err(invalid("opacity_max must lie in (0, 1]"));
        }
        if !(self.reference_step > 0.0) {
            return Err(invalid("reference_step must be positive"));
        }
        Ok(())
    }

    #[inline]
    pub fn normalize(&self, v: f64) -> f64 {
        ((v - self.v_min) / (self.v_max - self.v_min)).clamp(0.0, 1.0)
    }

    pub fn color(&self, u: f64) -> Rgb {
        let stops = &self.color_stops;
        let i = stops.partition_point(|s| s.u <= u);
        if i == 0 {
            return stops[0].rgb;
        }
        if i >= stops.len() {
            return stops[stops.len() - 1].rgb;
        }
        let (a, b) = (&stops[i - 1], &stops[i]);
        let f = if b.u > a.u { (u - a.u) / (b.u - a.u) } else { 0.0 };
        [
            a.rgb[0] + (b.rgb[0] - a.rgb[0]) * f,
            a.rgb[1] + (b.rgb[1] - a.rgb[1]) * f,
            a.rgb[2] + (b.rgb[2] - a.rgb[2]) * f,
        ]
    }

    /// Raw opacity `opacity_max * u^gamma`.
    #[inline]
    pub fn opacity(&self, u: f64) -> f64 {
        self.opacity_max * u.powf(self.opacity_gamma)
    }

    /// Opacity of a segment of length `step`: `1 - (1 - a)^(step / reference_step)`.
    #[inline]
    pub fn corrected_alpha(&self, raw: f64, step: f64) -> f64 {
        if raw >= 1.0 {
            return 1.0;
        }
        1.0 - (1.0 - raw).powf(step / self.reference_step)
    }

    /// Color and step-corrected opacity for a value sampled over a segment of length `step`.
    pub fn transfer(&self, value: f64, step: f64) -> (Rgb, f64) {
        let u = self.normalize(value);
        (self.color(u), self.corrected_alpha(self.opacity(u), step))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_endpoints() {
        let mut tf = TransferFunction::new(0.0, 500.0);
        assert!(tf.validate().is_ok());
        let (c, a) = tf.transfer(0.0, tf.reference_step);
        assert_eq!((c, a), (GREEN, 0.0));
        tf.opacity_max = 1.0;
        assert_eq!(tf.color(tf.normalize(500.0)), RED);
        assert_eq!(tf.opacity(1.0), 1.0);
        assert_eq!(tf.color(0.5), YELLOW);
        assert_eq!(tf.color(0.25), [0.5, 0.9, 0.0]);
        assert_eq!(tf.normalize(-10.0), 0.0);
        assert_eq!(tf.normalize(900.0), 1.0);
    }

    #[test]
    fn step_correction() {
        let tf = TransferFunction::new(0.0, 1.0);
        let half = tf.corrected_alpha(0.19, tf.reference_step / 2.0);
        assert!((half - 0.1).abs() < 1e-12);
        // two half steps compose back to the full-step opacity
        assert!((1.0 - (1.0 - half).powi(2) - 0.19).abs() < 1e-12);
    }

    #[test]
    fn opacity_is_monotone() {
        let tf = TransferFunction::new(0.0, 1.0);
        let mut prev = 0.0;
        for i in 0..=100 {
            let a = tf.opacity(i as f64 / 100.0);
            assert!(a >= prev);
            prev = a;
        }
    }

    #[test]
    fn rejects_uncovered_stops() {
        let mut tf = TransferFunction::new(0.0, 1.0);
        tf.color_stops.remove(0);
        assert!(tf.validate().is_err());
    }
}
