//! Software raymarcher for space-time volumes.

pub(crate) mod accel;
mod composite;
mod frame;
mod march;
mod sample;
mod shade;
mod transfer;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::SpaceTimeVolume;

pub use composite::{composite, Accumulator};
pub use frame::{
    encode_png, map_plane_point, render_frame, AxisBox, Basemap, ContextOptions, FrameMeta,
    RgbaImage, DEFAULT_AXIS_BOXES,
};
pub use march::{clip_fill, march_ray, MarchResult, RayOutcome};
pub use sample::{gradient, sample_volume, Sampler};
pub use shade::{shade_phong, Lighting};
pub use transfer::{ColorStop, Rgb, TransferFunction, GREEN, RED, YELLOW};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderSettings {
    pub tf: TransferFunction,
    /// Samples below this value are not composited.
    pub lambda_v: f64,
    pub surface_enabled: bool,
    /// Iso-threshold for surface mode.
    pub lambda_i: f64,
    /// Sample spacing in render-space units.
    pub step: f64,
    /// Render-space height of one time step.
    pub z_scale: f64,
    pub lighting: Lighting,
    pub background: Rgb,
    pub early_termination_alpha: f64,
    /// Gradient magnitude (value units per voxel) above which volume samples are lit.
    pub gradient_min: f64,
}

impl RenderSettings {
    /// Defaults for a volume: full-range transfer function, `lambda_v = v_min`, default
    /// vertical scale, and a step of half the smallest voxel edge.
    pub fn for_volume(volume: &SpaceTimeVolume) -> Self {
        let range = volume.value_range();
        let z_scale = volume.default_z_scale();
        Self {
            tf: TransferFunction::new(range.min, range.max),
            lambda_v: range.min,
            surface_enabled: false,
            lambda_i: range.min,
            step: 0.5 * z_scale.min(1.0),
            z_scale,
            lighting: Lighting::default(),
            background: [1.0, 1.0, 1.0],
            early_termination_alpha: 0.99,
            gradient_min: 1e-3 * range.span(),
        }
    }

    /// Sets `lambda_v` and moves `lambda_i` along with it.
    pub fn with_lambda_v(mut self, lambda_v: f64) -> Self {
        self.lambda_v = lambda_v;
        self.lambda_i = lambda_v;
        self
    }

    /// Lowest threshold that can make a sample contribute.
    pub fn skip_threshold(&self) -> f64 {
        if self.surface_enabled {
            self.lambda_v.min(self.lambda_i)
        } else {
            self.lambda_v
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.tf.validate()?;
        self.lighting.validate()?;
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(invalid(format!("step must be positive, got {}", self.step)));
        }
        if !(self.z_scale > 0.0 && self.z_scale.is_finite()) {
            return Err(invalid(format!("z_scale must be positive, got {}", self.z_scale)));
        }
        if !(self.lambda_v.is_finite() && self.lambda_i.is_finite()) {
            return Err(invalid("thresholds must be finite"));
        }
        if !(self.early_termination_alpha > 0.0 && self.early_termination_alpha <= 1.0) {
            return Err(invalid("early_termination_alpha must lie in (0, 1]"));
        }
        if self.background.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(invalid("background channels must lie in [0, 1]"));
        }
        if !(self.gradient_min >= 0.0) {
            return Err(invalid("gradient_min must be non-negative"));
        }
        Ok(())
    }
}
