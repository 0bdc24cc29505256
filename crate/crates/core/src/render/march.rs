//! Front-to-back raymarching with threshold skipping, selection clipping and isosurfaces.

use super::accel::MaxGrid;
use super::composite::Accumulator;
use super::sample::Sampler;
use super::shade::shade_phong;
use super::transfer::Rgb;
use super::RenderSettings;
use crate::geom::{Ray, Vec3};
use crate::model::{SelectionState, SpaceTimeVolume};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarchResult {
    pub acc: Accumulator,
    /// Position of the first composited sample or isosurface hit.
    pub first_hit: Option<Vec3>,
    /// Ray parameter of `first_hit`.
    pub first_hit_t: Option<f64>,
    pub samples: usize,
}

impl MarchResult {
    fn empty() -> Self {
        Self {
            acc: Accumulator::default(),
            first_hit: None,
            first_hit_t: None,
            samples: 0,
        }
    }
}

/// Final color of a ray over the background.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayOutcome {
    pub rgb: Rgb,
    pub alpha: f64,
    pub first_hit: Option<Vec3>,
}

/// Value that clipped voxels read as. It lies below every active threshold so a fully
/// clipped neighborhood is always skipped.
pub fn clip_fill(volume: &SpaceTimeVolume, settings: &RenderSettings) -> f32 {
    let range = volume.value_range();
    let threshold = settings.skip_threshold();
    if threshold > range.min {
        range.min as f32
    } else {
        (threshold - range.span()) as f32
    }
}

pub(crate) struct Marcher<'a> {
    pub sampler: Sampler<'a>,
    settings: &'a RenderSettings,
    bricks: &'a MaxGrid,
    skip_below: f64,
}

impl<'a> Marcher<'a> {
    pub fn new(volume: &'a SpaceTimeVolume, settings: &'a RenderSettings, selection: &SelectionState) -> Self {
        let fill = clip_fill(volume, settings);
        Self {
            sampler: Sampler::with_selection(volume, settings.z_scale, selection, fill),
            settings,
            bricks: volume.max_grid(),
            skip_below: settings.skip_threshold(),
        }
    }

    /// Ray parameter at which the ray leaves the brick containing `g`.
    fn brick_exit(&self, ray: &Ray, brick: [usize; 3]) -> f64 {
        let zs = self.sampler.z_scale();
        let mut exit = f64::INFINITY;
        for axis in 0..3 {
            let (lo, hi) = self.bricks.brick_extent(axis, brick[axis]);
            // index coordinate -> render coordinate
            let to_render = |g: f64| if axis == 2 { (g + 0.5) * zs } else { g + 0.5 };
            let d = ray.dir[axis];
            let o = ray.origin[axis];
            let face = if d > 0.0 {
                to_render(hi)
            } else if d < 0.0 {
                to_render(lo)
            } else {
                continue;
            };
            if face.is_finite() {
                exit = exit.min((face - o) / d);
            }
        }
        exit
    }

    /// Whether every sample inside this brick is certainly below the skip threshold.
    #[inline]
    fn brick_is_empty(&self, brick: [usize; 3]) -> bool {
        if (self.bricks.max(brick) as f64) < self.skip_below {
            return true;
        }
        let (t0, t1) = self.bricks.step_span(brick[2]);
        !self.sampler.time_span_visible(t0, t1)
    }

    fn shade_sample(&self, base: Rgb, p: Vec3, view: Vec3, force: bool) -> Rgb {
        let g = self.sampler.gradient(p);
        if !force && g.length() <= self.settings.gradient_min {
            return base;
        }
        let mut n = -self.sampler.gradient_to_render(g);
        if n.dot(view) < 0.0 {
            n = -n;
        }
        shade_phong(base, n.normalize(), view, &self.settings.lighting)
    }

    /// Marches `ray` through the volume box, stopping at ray parameter `t_limit`.
    pub fn march(&self, ray: &Ray, t_limit: f64) -> MarchResult {
        let mut out = MarchResult::empty();
        let Some((t_enter, t_exit)) = self.sampler.bounds().intersect(ray) else {
            return out;
        };
        let t_exit = t_exit.min(t_limit);
        let step = self.settings.step;
        let eps = step * 1e-9;
        if t_exit - t_enter <= eps {
            return out;
        }
        let s = self.settings;
        let view = -ray.dir;
        let lambda_i = s.lambda_i;
        let mut prev: Option<(f64, Vec3)> = None;
        let mut need_prev = false;
        let mut k: usize = 0;
        let seg_start = |k: usize| t_enter + k as f64 * step;

        loop {
            let t0 = seg_start(k);
            if t0 >= t_exit - eps {
                break;
            }
            let len = step.min(t_exit - t0);
            let tm = t0 + 0.5 * len;
            let p = ray.at(tm);
            let g = self.sampler.index_coords(p);

            let brick = self.bricks.brick_of(g);
            if self.brick_is_empty(brick) {
                let exit = self.brick_exit(ray, brick);
                let next = ((exit - t_enter - 0.5 * step) / step).ceil();
                let next = if next.is_finite() && next > k as f64 { next as usize } else { k + 1 };
                need_prev = s.surface_enabled;
                prev = None;
                k = next;
                continue;
            }
            if need_prev && k > 0 {
                let pt0 = seg_start(k - 1);
                let plen = step.min(t_exit - pt0);
                let pp = ray.at(pt0 + 0.5 * plen);
                if let Some(pv) = self.sampler.sample(pp) {
                    prev = Some((pv, pp));
                }
            }
            need_prev = false;

            let Some(v) = self.sampler.sample(p) else {
                k += 1;
                continue;
            };
            out.samples += 1;

            if s.surface_enabled {
                if let Some((pv, pp)) = prev {
                    let crosses = (pv < lambda_i && lambda_i <= v) || (v < lambda_i && lambda_i <= pv);
                    if crosses {
                        let f = ((lambda_i - pv) / (v - pv)).clamp(0.0, 1.0);
                        let hit = pp + (p - pp) * f;
                        let base = s.tf.color(s.tf.normalize(lambda_i));
                        let c = self.shade_sample(base, hit, view, true);
                        out.acc = out.acc.composite(c, 1.0);
                        if out.first_hit.is_none() {
                            out.first_hit = Some(hit);
                            out.first_hit_t = Some((hit - ray.origin).dot(ray.dir));
                        }
                        break;
                    }
                }
                prev = Some((v, p));
            }

            if v >= s.lambda_v {
                let (base, alpha) = s.tf.transfer(v, len);
                if alpha > 0.0 {
                    let c = self.shade_sample(base, p, view, false);
                    out.acc = out.acc.composite([c[0] * alpha, c[1] * alpha, c[2] * alpha], alpha);
                }
                if out.first_hit.is_none() {
                    out.first_hit = Some(p);
                    out.first_hit_t = Some(tm);
                }
                if out.acc.alpha >= s.early_termination_alpha {
                    break;
                }
            }
            k += 1;
        }
        out
    }
}

/// Marches one ray and composites the result over the background.
pub fn march_ray(
    volume: &SpaceTimeVolume,
    ray: &Ray,
    settings: &RenderSettings,
    selection: &SelectionState,
) -> RayOutcome {
    let marcher = Marcher::new(volume, settings, selection);
    let r = marcher.march(ray, f64::INFINITY);
    RayOutcome {
        rgb: r.acc.over(settings.background),
        alpha: r.acc.alpha,
        first_hit: r.first_hit,
    }
}
