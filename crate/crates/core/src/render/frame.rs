//! Whole-frame rendering: one march per pixel, the basemap plane, and the cube wireframe.

use std::path::Path;
use std::sync::Arc;

use image::codecs::png::PngEncoder;
use image::{ExtendedColorType, ImageEncoder};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::march::Marcher;
use super::transfer::Rgb;
use super::RenderSettings;
use crate::error::{Error, Result};
use crate::geom::{Ray, Vec3};
use crate::model::{volume_to_render_space, Camera, SelectionState, SpaceTimeVolume};

pub const DEFAULT_AXIS_BOXES: usize = 6;
const TILE_ROWS: usize = 8;

/// Row-major 8-bit RGBA image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbaImage {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

impl RgbaImage {
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 4] {
        let i = (y as usize * self.width as usize + x as usize) * 4;
        self.pixels[i..i + 4].try_into().unwrap()
    }
}

pub fn encode_png(img: &RgbaImage) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    PngEncoder::new(&mut out).write_image(&img.pixels, img.width, img.height, ExtendedColorType::Rgba8)?;
    Ok(out)
}

/// Map texture laid on the x-y plane, north up.
#[derive(Debug, Clone, PartialEq)]
pub struct Basemap {
    width: u32,
    height: u32,
    rgba: Vec<u8>,
}

impl Basemap {
    pub fn from_rgba(width: u32, height: u32, rgba: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || rgba.len() != width as usize * height as usize * 4 {
            return Err(Error::InvalidArgument("basemap buffer does not match its size".into()));
        }
        Ok(Self { width, height, rgba })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let img = image::open(path)?.to_rgba8();
        let (w, h) = img.dimensions();
        Self::from_rgba(w, h, img.into_raw())
    }

    /// Nearest texel at normalized map coordinates; `v = 0` is the southern edge.
    pub fn sample(&self, u: f64, v: f64) -> Rgb {
        let x = ((u * self.width as f64) as i64).clamp(0, self.width as i64 - 1) as usize;
        let y = (((1.0 - v) * self.height as f64) as i64).clamp(0, self.height as i64 - 1) as usize;
        let i = (y * self.width as usize + x) * 4;
        [
            self.rgba[i] as f64 / 255.0,
            self.rgba[i + 1] as f64 / 255.0,
            self.rgba[i + 2] as f64 / 255.0,
        ]
    }
}

#[derive(Debug, Clone)]
pub struct ContextOptions {
    pub basemap: Option<Arc<Basemap>>,
    /// Draw the bounding box and the axis-box rings.
    pub draw_box: bool,
    pub axis_boxes: usize,
    pub line_rgb: Rgb,
}

impl Default for ContextOptions {
    fn default() -> Self {
        Self {
            basemap: None,
            draw_box: true,
            axis_boxes: DEFAULT_AXIS_BOXES,
            line_rgb: [0.25, 0.25, 0.25],
        }
    }
}

impl ContextOptions {
    /// No map and no wireframe: only the volume over the background.
    pub fn bare() -> Self {
        Self {
            draw_box: false,
            ..Self::default()
        }
    }
}

/// One segment of the boxed time axis. Steps `[t_start, t_end)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub t_start: usize,
    pub t_end: usize,
    /// Epoch seconds at the bottom of the box.
    pub timestamp: i64,
    /// Pixel position for the box's label, absent when behind the camera.
    pub label_anchor_px: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMeta {
    pub width: u32,
    pub height: u32,
    /// Session state revision the frame reflects; zero outside a session.
    pub revision: u64,
    pub map_plane_t: usize,
    pub axis_boxes: Vec<AxisBox>,
}

/// Splits `[0, steps)` into at most `count` contiguous, non-overlapping boxes.
pub fn axis_box_spans(steps: usize, count: usize) -> Vec<(usize, usize)> {
    let count = count.clamp(1, steps.max(1));
    (0..count)
        .map(|k| (k * steps / count, (k + 1) * steps / count))
        .collect()
}

fn map_hit(ray: &Ray, z: f64, m: f64, n: f64) -> Option<(f64, f64, f64)> {
    if ray.dir.z.abs() < 1e-12 {
        return None;
    }
    let t = (z - ray.origin.z) / ray.dir.z;
    if t <= 0.0 {
        return None;
    }
    let p = ray.at(t);
    (p.x >= 0.0 && p.x <= m && p.y >= 0.0 && p.y <= n).then_some((t, p.x, p.y))
}

/// Where the pixel's ray meets the map plane (at the lower slicing plane), in continuous
/// cell coordinates.
pub fn map_plane_point(
    volume: &SpaceTimeVolume,
    camera: &Camera,
    settings: &RenderSettings,
    selection: &SelectionState,
    px: f64,
    py: f64,
) -> Option<(f64, f64)> {
    let ray = camera.ray(px, py);
    let z = selection.time_range.0 as f64 * settings.z_scale;
    map_hit(&ray, z, volume.m() as f64, volume.n() as f64).map(|(_, x, y)| (x, y))
}

#[inline]
fn to_u8(c: f64) -> u8 {
    (c.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn render_frame(
    volume: &SpaceTimeVolume,
    camera: &Camera,
    settings: &RenderSettings,
    selection: &SelectionState,
    ctx: &ContextOptions,
) -> Result<(RgbaImage, FrameMeta)> {
    if camera.width == 0 || camera.height == 0 {
        return Err(Error::EmptyViewport);
    }
    camera.validate()?;
    settings.validate()?;
    selection.validate(volume.steps())?;

    let (w, h) = (camera.width as usize, camera.height as usize);
    let marcher = Marcher::new(volume, settings, selection);
    let map_z = selection.time_range.0 as f64 * settings.z_scale;
    let (mf, nf) = (volume.m() as f64, volume.n() as f64);

    let mut pixels = vec![0u8; w * h * 4];
    pixels
        .par_chunks_mut(w * 4 * TILE_ROWS)
        .enumerate()
        .for_each(|(tile, chunk)| {
            for (i, px) in chunk.chunks_exact_mut(4).enumerate() {
                let x = i % w;
                let y = tile * TILE_ROWS + i / w;
                let ray = camera.pixel_ray(x as u32, y as u32);
                let map = match &ctx.basemap {
                    Some(bm) => map_hit(&ray, map_z, mf, nf).map(|hit| (bm, hit)),
                    None => None,
                };
                let limit = map.map_or(f64::INFINITY, |(_, (t, _, _))| t);
                let mut acc = marcher.march(&ray, limit).acc;
                if let Some((bm, (_, mx, my))) = map {
                    if acc.alpha < 1.0 {
                        acc = acc.composite(bm.sample(mx / mf, my / nf), 1.0);
                    }
                }
                let rgb = acc.over(settings.background);
                px.copy_from_slice(&[to_u8(rgb[0]), to_u8(rgb[1]), to_u8(rgb[2]), 255]);
            }
        });

    let mut image = RgbaImage {
        width: camera.width,
        height: camera.height,
        pixels,
    };
    let bounds = volume_to_render_space(volume, settings.z_scale)?;
    let spans = axis_box_spans(volume.steps(), ctx.axis_boxes);

    if ctx.draw_box {
        let (lo, hi) = (bounds.min, bounds.max);
        let ring = |z: f64| {
            [
                Vec3::new(lo.x, lo.y, z),
                Vec3::new(hi.x, lo.y, z),
                Vec3::new(hi.x, hi.y, z),
                Vec3::new(lo.x, hi.y, z),
            ]
        };
        let mut segments = Vec::new();
        let bottom = ring(lo.z);
        let top = ring(hi.z);
        for i in 0..4 {
            segments.push((bottom[i], bottom[(i + 1) % 4]));
            segments.push((top[i], top[(i + 1) % 4]));
            segments.push((bottom[i], top[i]));
        }
        for &(t_start, _) in spans.iter().skip(1) {
            let r = ring(t_start as f64 * settings.z_scale);
            for i in 0..4 {
                segments.push((r[i], r[(i + 1) % 4]));
            }
        }
        for (a, b) in segments {
            draw_segment(&mut image, camera, a, b, ctx.line_rgb);
        }
    }

    let axis_boxes = spans
        .iter()
        .map(|&(t_start, t_end)| {
            let z = t_start as f64 * settings.z_scale;
            let corners = [
                Vec3::new(bounds.min.x, bounds.min.y, z),
                Vec3::new(bounds.max.x, bounds.min.y, z),
                Vec3::new(bounds.max.x, bounds.max.y, z),
                Vec3::new(bounds.min.x, bounds.max.y, z),
            ];
            let anchor = corners
                .iter()
                .filter_map(|c| camera.project(*c))
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .map(|(x, y)| [x, y]);
            AxisBox {
                t_start,
                t_end,
                timestamp: volume.timestamp(t_start),
                label_anchor_px: anchor,
            }
        })
        .collect();

    let meta = FrameMeta {
        width: camera.width,
        height: camera.height,
        revision: 0,
        map_plane_t: selection.time_range.0,
        axis_boxes,
    };
    Ok((image, meta))
}

/// Blends a 1-px line between two render-space points, clipped at the near plane.
fn draw_segment(img: &mut RgbaImage, camera: &Camera, a: Vec3, b: Vec3, rgb: Rgb) {
    const NEAR: f64 = 1e-3;
    let (_, _, forward) = camera.basis();
    let depth = |p: Vec3| (p - camera.eye).dot(forward);
    let (da, db) = (depth(a), depth(b));
    if da < NEAR && db < NEAR {
        return;
    }
    let clip = |p: Vec3, dp: f64, q: Vec3, dq: f64| {
        if dp >= NEAR {
            p
        } else {
            let f = (NEAR * 1.001 - dp) / (dq - dp);
            p + (q - p) * f
        }
    };
    let (a, b) = (clip(a, da, b, db), clip(b, db, a, da));
    let (Some(pa), Some(pb)) = (camera.project(a), camera.project(b)) else {
        return;
    };
    let (w, h) = (img.width as f64, img.height as f64);
    // Reject segments far outside the viewport before stepping.
    if (pa.0 < 0.0 && pb.0 < 0.0) || (pa.0 >= w && pb.0 >= w) || (pa.1 < 0.0 && pb.1 < 0.0) || (pa.1 >= h && pb.1 >= h) {
        return;
    }
    let steps = (pb.0 - pa.0).abs().max((pb.1 - pa.1).abs()).ceil().min(1e5) as usize;
    let line = rgb.map(to_u8);
    for i in 0..=steps {
        let f = if steps == 0 { 0.0 } else { i as f64 / steps as f64 };
        let x = pa.0 + (pb.0 - pa.0) * f;
        let y = pa.1 + (pb.1 - pa.1) * f;
        if x < 0.0 || y < 0.0 || x >= w || y >= h {
            continue;
        }
        let idx = (y as usize * img.width as usize + x as usize) * 4;
        for c in 0..3 {
            let old = img.pixels[idx + c] as u16;
            img.pixels[idx + c] = ((old * 3 + line[c] as u16 * 7 + 5) / 10) as u8;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_boxes_tile_the_time_axis() {
        for (steps, count) in [(100, 6), (5, 6), (4236, 6), (7, 1)] {
            let spans = axis_box_spans(steps, count);
            assert_eq!(spans.len(), count.min(steps));
            assert_eq!(spans[0].0, 0);
            assert_eq!(spans.last().unwrap().1, steps);
            for w in spans.windows(2) {
                assert_eq!(w[0].1, w[1].0);
                assert!(w[0].0 < w[0].1);
            }
        }
    }

    #[test]
    fn basemap_orientation() {
        // 1x2 image: top row red, bottom row blue
        let bm = Basemap::from_rgba(1, 2, vec![255, 0, 0, 255, 0, 0, 255, 255]).unwrap();
        assert_eq!(bm.sample(0.5, 0.9), [1.0, 0.0, 0.0]);
        assert_eq!(bm.sample(0.5, 0.1), [0.0, 0.0, 1.0]);
        assert!(Basemap::from_rgba(2, 2, vec![0; 4]).is_err());
    }
}
