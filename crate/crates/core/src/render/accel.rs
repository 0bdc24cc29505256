//! Coarse max-value bricks used to skip empty space without changing sample positions.

use crate::model::SpaceTimeVolume;

pub const BRICK: usize = 8;
/// Voxels beyond each brick face included in its maximum; covers the trilinear footprint
/// plus rounding at brick boundaries.
const APRON: usize = 2;

#[derive(Debug)]
pub struct MaxGrid {
    dims: [usize; 3],
    voxel_dims: [usize; 3],
    max: Vec<f32>,
}

impl MaxGrid {
    pub fn build(volume: &SpaceTimeVolume) -> Self {
        let vd = [volume.m(), volume.n(), volume.steps()];
        let dims = vd.map(|d| d.div_ceil(BRICK));
        let range = |b: usize, d: usize| {
            let lo = (b * BRICK).saturating_sub(APRON);
            let hi = (b * BRICK + BRICK + APRON).min(d - 1);
            lo..=hi
        };
        let data = volume.data();
        let mut max = vec![f32::NEG_INFINITY; dims[0] * dims[1] * dims[2]];
        for bt in 0..dims[2] {
            for by in 0..dims[1] {
                for bx in 0..dims[0] {
                    let mut mx = f32::NEG_INFINITY;
                    for t in range(bt, vd[2]) {
                        for y in range(by, vd[1]) {
                            let row = (t * vd[1] + y) * vd[0];
                            for x in range(bx, vd[0]) {
                                mx = mx.max(data[row + x]);
                            }
                        }
                    }
                    max[(bt * dims[1] + by) * dims[0] + bx] = mx;
                }
            }
        }
        Self {
            dims,
            voxel_dims: vd,
            max,
        }
    }

    #[cfg(test)]
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    /// Brick containing continuous index coordinates `g` (after clamping to the hull).
    #[inline]
    pub fn brick_of(&self, g: [f64; 3]) -> [usize; 3] {
        let mut b = [0; 3];
        for a in 0..3 {
            let hi = (self.voxel_dims[a] - 1) as f64;
            let c = g[a].clamp(0.0, hi);
            b[a] = ((c / BRICK as f64).floor() as usize).min(self.dims[a] - 1);
        }
        b
    }

    #[inline]
    pub fn max(&self, b: [usize; 3]) -> f32 {
        self.max[(b[2] * self.dims[1] + b[1]) * self.dims[0] + b[0]]
    }

    /// Index-coordinate extent `[lo, hi)` of a brick along one axis; the outermost bricks
    /// extend to infinity because clamping maps everything beyond the hull onto them.
    pub fn brick_extent(&self, axis: usize, b: usize) -> (f64, f64) {
        let lo = if b == 0 { f64::NEG_INFINITY } else { (b * BRICK) as f64 };
        let hi = if b + 1 >= self.dims[axis] {
            f64::INFINITY
        } else {
            ((b + 1) * BRICK) as f64
        };
        (lo, hi)
    }

    /// Inclusive step range whose voxels feed samples in brick layer `bt`.
    pub fn step_span(&self, bt: usize) -> (usize, usize) {
        let lo = (bt * BRICK).saturating_sub(APRON);
        let hi = (bt * BRICK + BRICK + APRON).min(self.voxel_dims[2] - 1);
        (lo, hi)
    }
}
