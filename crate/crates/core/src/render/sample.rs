//! Trilinear reconstruction of the volume in render space.
//!
//! Voxel `(x, y, t)` is centered at `(x + 0.5, y + 0.5, (t + 0.5) * z_scale)`. Within half a
//! voxel of the box faces the nearest voxel layer is extended outward.

use crate::geom::{Aabb, Vec3};
use crate::model::{volume_to_render_space, SelectionState, SpaceTimeVolume};

/// Voxel-level clipping: voxels outside the selection read as `fill`.
#[derive(Debug, Clone)]
struct Clip {
    t_lo: usize,
    t_hi: usize,
    columns: Option<Vec<bool>>,
    fill: f32,
}

#[derive(Debug, Clone)]
pub struct Sampler<'a> {
    data: &'a [f32],
    m: usize,
    n: usize,
    steps: usize,
    z_scale: f64,
    inv_z: f64,
    bounds: Aabb,
    clip: Option<Clip>,
}

impl<'a> Sampler<'a> {
    pub fn new(volume: &'a SpaceTimeVolume, z_scale: f64) -> Self {
        let bounds = volume_to_render_space(volume, z_scale).expect("z_scale validated by caller");
        Self {
            data: volume.data(),
            m: volume.m(),
            n: volume.n(),
            steps: volume.steps(),
            z_scale,
            inv_z: 1.0 / z_scale,
            bounds,
            clip: None,
        }
    }

    /// Sampler whose excluded voxels read as `fill`. A full selection adds no clipping.
    pub fn with_selection(
        volume: &'a SpaceTimeVolume,
        z_scale: f64,
        selection: &SelectionState,
        fill: f32,
    ) -> Self {
        let mut s = Self::new(volume, z_scale);
        if !selection.is_full(volume.steps()) {
            let columns = selection.spotlight.map(|_| {
                let mut mask = Vec::with_capacity(s.m * s.n);
                for y in 0..s.n {
                    for x in 0..s.m {
                        mask.push(selection.includes_voxel(x, y, selection.time_range.0));
                    }
                }
                mask
            });
            s.clip = Some(Clip {
                t_lo: selection.time_range.0,
                t_hi: selection.time_range.1,
                columns,
                fill,
            });
        }
        s
    }

    pub fn bounds(&self) -> &Aabb {
        &self.bounds
    }

    pub fn z_scale(&self) -> f64 {
        self.z_scale
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.m, self.n, self.steps]
    }

    /// Whether voxel column / step survives clipping.
    #[inline]
    pub fn voxel_visible(&self, x: usize, y: usize, t: usize) -> bool {
        match &self.clip {
            None => true,
            Some(c) => {
                t >= c.t_lo
                    && t <= c.t_hi
                    && c.columns.as_ref().is_none_or(|cols| cols[y * self.m + x])
            }
        }
    }

    /// Whether any step in `[t0, t1]` survives time slicing.
    pub fn time_span_visible(&self, t0: usize, t1: usize) -> bool {
        match &self.clip {
            None => true,
            Some(c) => t1 >= c.t_lo && t0 <= c.t_hi,
        }
    }

    #[inline]
    fn fetch(&self, x: usize, y: usize, t: usize) -> f64 {
        let v = self.data[(t * self.n + y) * self.m + x];
        match &self.clip {
            Some(c) if !self.voxel_visible(x, y, t) => c.fill as f64,
            _ => v as f64,
        }
    }

    /// Continuous voxel-index coordinates of a render-space point.
    #[inline]
    pub fn index_coords(&self, p: Vec3) -> [f64; 3] {
        [p.x - 0.5, p.y - 0.5, p.z * self.inv_z - 0.5]
    }

    /// Trilinear value at continuous index coordinates, clamped to the voxel-center hull.
    #[inline]
    pub fn value_at_index(&self, g: [f64; 3]) -> f64 {
        #[inline]
        fn axis(g: f64, dim: usize) -> (usize, usize, f64) {
            let hi = (dim - 1) as f64;
            let g = g.clamp(0.0, hi);
            let i0 = (g.floor() as usize).min(dim - 1);
            let i1 = (i0 + 1).min(dim - 1);
            (i0, i1, g - i0 as f64)
        }
        let (x0, x1, fx) = axis(g[0], self.m);
        let (y0, y1, fy) = axis(g[1], self.n);
        let (t0, t1, ft) = axis(g[2], self.steps);
        let lerp = |a: f64, b: f64, f: f64| a + (b - a) * f;
        let c00 = lerp(self.fetch(x0, y0, t0), self.fetch(x1, y0, t0), fx);
        let c10 = lerp(self.fetch(x0, y1, t0), self.fetch(x1, y1, t0), fx);
        let c01 = lerp(self.fetch(x0, y0, t1), self.fetch(x1, y0, t1), fx);
        let c11 = lerp(self.fetch(x0, y1, t1), self.fetch(x1, y1, t1), fx);
        lerp(lerp(c00, c10, fy), lerp(c01, c11, fy), ft)
    }

    /// Value at a render-space point, `None` outside the volume box.
    #[inline]
    pub fn sample(&self, p: Vec3) -> Option<f64> {
        if !self.bounds.contains(p) {
            return None;
        }
        Some(self.value_at_index(self.index_coords(p)))
    }

    /// Central differences with one-voxel spacing, per voxel-index unit. Axes closer than
    /// one voxel to the hull fall back to one-sided differences.
    pub fn gradient(&self, p: Vec3) -> Vec3 {
        let g = self.index_coords(p);
        let dims = self.dims();
        let mut out = [0.0; 3];
        for axis in 0..3 {
            let hi = (dims[axis] - 1) as f64;
            if hi <= 0.0 {
                continue;
            }
            let c = g[axis].clamp(0.0, hi);
            let at = |d: f64| {
                let mut q = g;
                q[axis] = c + d;
                self.value_at_index(q)
            };
            out[axis] = if c - 1.0 >= 0.0 && c + 1.0 <= hi {
                (at(1.0) - at(-1.0)) * 0.5
            } else if c + 1.0 <= hi {
                at(1.0) - at(0.0)
            } else if c - 1.0 >= 0.0 {
                at(0.0) - at(-1.0)
            } else {
                (at(hi - c) - at(-c)) / hi
            };
        }
        Vec3::new(out[0], out[1], out[2])
    }

    /// Converts an index-space gradient to render space.
    pub fn gradient_to_render(&self, g: Vec3) -> Vec3 {
        Vec3::new(g.x, g.y, g.z * self.inv_z)
    }

    /// Voxel whose center is nearest to `p`.
    pub fn nearest_voxel(&self, p: Vec3) -> Option<(usize, usize, usize)> {
        if !self.bounds.contains(p) {
            return None;
        }
        let clampi = |v: f64, dim: usize| (v.floor().max(0.0) as usize).min(dim - 1);
        Some((
            clampi(p.x, self.m),
            clampi(p.y, self.n),
            clampi(p.z * self.inv_z, self.steps),
        ))
    }
}

/// Trilinear sample at a render-space point, `None` outside the volume box.
pub fn sample_volume(volume: &SpaceTimeVolume, p: Vec3, z_scale: f64) -> Option<f64> {
    Sampler::new(volume, z_scale).sample(p)
}

/// Central-difference gradient in voxel-index units.
pub fn gradient(volume: &SpaceTimeVolume, p: Vec3, z_scale: f64) -> Vec3 {
    Sampler::new(volume, z_scale).gradient(p)
}
