//! Shared domain types and georeferencing.

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geom::{Aabb, Ray, Vec3};
use crate::render::accel::MaxGrid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub id: String,
    pub lon: f64,
    pub lat: f64,
}

impl Station {
    pub fn validate(&self) -> Result<()> {
        if !(-180.0..=180.0).contains(&self.lon) || !(-90.0..=90.0).contains(&self.lat) {
            return Err(invalid(format!(
                "station `{}` at ({}, {}) is outside lon/lat bounds",
                self.id, self.lon, self.lat
            )));
        }
        Ok(())
    }
}

/// Readings of one station, one slot per time step. `None` marks a missing reading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StSeries {
    pub station_id: String,
    pub values: Vec<Option<f32>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueRange {
    pub min: f64,
    pub max: f64,
}

impl ValueRange {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && min < max) {
            return Err(invalid(format!("value range ({min}, {max}) must satisfy min < max")));
        }
        Ok(Self { min, max })
    }

    pub fn span(&self) -> f64 {
        self.max - self.min
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.min, self.max)
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }
}

/// Aligned station time series: the discrete input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StDataset {
    stations: Vec<Station>,
    series: Vec<StSeries>,
    t0: i64,
    dt: u32,
    steps: usize,
    value_range: ValueRange,
}

impl StDataset {
    pub fn new(
        stations: Vec<Station>,
        series: Vec<StSeries>,
        t0: i64,
        dt: u32,
        steps: usize,
        value_range: ValueRange,
    ) -> Result<Self> {
        if stations.is_empty() {
            return Err(invalid("dataset needs at least one station"));
        }
        if steps < 2 {
            return Err(invalid(format!("dataset needs T >= 2 steps, got {steps}")));
        }
        if dt == 0 {
            return Err(invalid("dt must be positive"));
        }
        if series.len() != stations.len() {
            return Err(invalid(format!(
                "{} stations but {} series",
                stations.len(),
                series.len()
            )));
        }
        let mut seen = std::collections::HashSet::with_capacity(stations.len());
        for (st, s) in stations.iter().zip(&series) {
            st.validate()?;
            if !seen.insert(st.id.as_str()) {
                return Err(crate::Error::DuplicateStation(st.id.clone()));
            }
            if s.station_id != st.id {
                return Err(invalid(format!(
                    "series `{}` is not aligned with station `{}`",
                    s.station_id, st.id
                )));
            }
            if s.values.len() != steps {
                return Err(invalid(format!(
                    "series `{}` has {} values, expected {steps}",
                    s.station_id,
                    s.values.len()
                )));
            }
            if s.values.iter().flatten().any(|v| !v.is_finite()) {
                return Err(invalid(format!("series `{}` has a non-finite value", s.station_id)));
            }
        }
        Ok(Self {
            stations,
            series,
            t0,
            dt,
            steps,
            value_range,
        })
    }

    pub fn stations(&self) -> &[Station] {
        &self.stations
    }

    pub fn series(&self) -> &[StSeries] {
        &self.series
    }

    pub fn station_count(&self) -> usize {
        self.stations.len()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn t0(&self) -> i64 {
        self.t0
    }

    pub fn dt(&self) -> u32 {
        self.dt
    }

    pub fn value_range(&self) -> ValueRange {
        self.value_range
    }

    pub fn value(&self, station: usize, t: usize) -> Option<f32> {
        self.series[station].values[t]
    }
}

/// Regular m x n grid over a lon/lat extent, mapped equirectangularly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lon0: f64,
    pub lat0: f64,
    pub lon1: f64,
    pub lat1: f64,
    pub m: usize,
    pub n: usize,
}

impl GridSpec {
    pub fn new(extent: (f64, f64, f64, f64), m: usize, n: usize) -> Result<Self> {
        let g = Self {
            lon0: extent.0,
            lat0: extent.1,
            lon1: extent.2,
            lat1: extent.3,
            m,
            n,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 || self.n < 2 {
            return Err(invalid(format!("grid must be at least 2x2, got {}x{}", self.m, self.n)));
        }
        let finite = [self.lon0, self.lat0, self.lon1, self.lat1]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.lon0 >= self.lon1 || self.lat0 >= self.lat1 {
            return Err(invalid(format!(
                "grid extent ({}, {}, {}, {}) must satisfy lon0 < lon1, lat0 < lat1",
                self.lon0, self.lat0, self.lon1, self.lat1
            )));
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.m * self.n
    }

    /// Continuous cell coordinates: cell (x, y) covers [x, x+1) x [y, y+1).
    pub fn to_cell_coords(&self, lon: f64, lat: f64) -> (f64, f64) {
        let cx = (lon - self.lon0) / (self.lon1 - self.lon0) * self.m as f64;
        let cy = (lat - self.lat0) / (self.lat1 - self.lat0) * self.n as f64;
        (cx, cy)
    }

    pub fn to_lon_lat(&self, cx: f64, cy: f64) -> (f64, f64) {
        let lon = self.lon0 + cx / self.m as f64 * (self.lon1 - self.lon0);
        let lat = self.lat0 + cy / self.n as f64 * (self.lat1 - self.lat0);
        (lon, lat)
    }

    /// Cell whose footprint contains the point. The upper extent edge belongs to the last cell.
    pub fn cell_of(&self, lon: f64, lat: f64) -> Option<(usize, usize)> {
        if !(lon >= self.lon0 && lon <= self.lon1 && lat >= self.lat0 && lat <= self.lat1) {
            return None;
        }
        let (cx, cy) = self.to_cell_coords(lon, lat);
        let x = (cx.floor() as usize).min(self.m - 1);
        let y = (cy.floor() as usize).min(self.n - 1);
        Some((x, y))
    }

    /// Geographic position of a cell center.
    pub fn cell_center(&self, x: usize, y: usize) -> (f64, f64) {
        self.to_lon_lat(x as f64 + 0.5, y as f64 + 0.5)
    }
}

/// Lazily built acceleration data attached to a volume.
#[derive(Debug, Default)]
struct VolumeCache {
    max_grid: OnceLock<Arc<MaxGrid>>,
}

/// The m x n x T scalar field, stored as f32 in `((t * n + y) * m + x)` order.
#[derive(Debug)]
pub struct SpaceTimeVolume {
    grid: GridSpec,
    steps: usize,
    t0: i64,
    dt: u32,
    value_range: ValueRange,
    data: Vec<f32>,
    cache: VolumeCache,
}

impl PartialEq for SpaceTimeVolume {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid
            && self.steps == other.steps
            && self.t0 == other.t0
            && self.dt == other.dt
            && self.value_range == other.value_range
            && self.data == other.data
    }
}

impl Clone for SpaceTimeVolume {
    fn clone(&self) -> Self {
        Self {
            grid: self.grid,
            steps: self.steps,
            t0: self.t0,
            dt: self.dt,
            value_range: self.value_range,
            data: self.data.clone(),
            cache: VolumeCache::default(),
        }
    }
}

impl SpaceTimeVolume {
    /// Builds a volume, clamping every sample into `value_range`.
    ///
    /// The range is rounded to f32 precision so that it survives the binary cache format.
    pub fn new(
        grid: GridSpec,
        steps: usize,
        t0: i64,
        dt: u32,
        value_range: ValueRange,
        mut data: Vec<f32>,
    ) -> Result<Self> {
        grid.validate()?;
        if steps < 1 {
            return Err(invalid("volume needs at least one time step"));
        }
        let expected = grid.m * grid.n * steps;
        if data.len() != expected {
            return Err(invalid(format!(
                "volume data has {} values, expected {expected}",
                data.len()
            )));
        }
        let range = ValueRange::new(value_range.min as f32 as f64, value_range.max as f32 as f64)?;
        let (lo, hi) = (range.min as f32, range.max as f32);
        for v in &mut data {
            if !v.is_finite() {
                return Err(invalid("volume contains a non-finite value"));
            }
            *v = v.clamp(lo, hi);
        }
        Ok(Self {
            grid,
            steps,
            t0,
            dt,
            value_range: range,
            data,
            cache: VolumeCache::default(),
        })
    }

    /// Volume whose every voxel is `f(x, y, t)`.
    pub fn from_fn(
        grid: GridSpec,
        steps: usize,
        value_range: ValueRange,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(grid.m * grid.n * steps);
        for t in 0..steps {
            for y in 0..grid.n {
                for x in 0..grid.m {
                    data.push(f(x, y, t));
                }
            }
        }
        Self::new(grid, steps, 0, 3600, value_range, data)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn m(&self) -> usize {
        self.grid.m
    }

    pub fn n(&self) -> usize {
        self.grid.n
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn t0(&self) -> i64 {
        self.t0
    }

    pub fn dt(&self) -> u32 {
        self.dt
    }

    pub fn value_range(&self) -> ValueRange {
        self.value_range
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn index(&self, x: usize, y: usize, t: usize) -> usize {
        (t * self.grid.n + y) * self.grid.m + x
    }

    pub fn decode(&self, idx: usize) -> (usize, usize, usize) {
        let m = self.grid.m;
        let n = self.grid.n;
        (idx % m, (idx / m) % n, idx / (m * n))
    }

    pub fn get(&self, x: usize, y: usize, t: usize) -> f32 {
        self.data[self.index(x, y, t)]
    }

    /// Epoch seconds of step `t`.
    pub fn timestamp(&self, t: usize) -> i64 {
        self.t0 + t as i64 * self.dt as i64
    }

    pub(crate) fn max_grid(&self) -> &MaxGrid {
        self.cache.max_grid.get_or_init(|| Arc::new(MaxGrid::build(self)))
    }

    /// Default vertical scale: one step is `max(m, n) / T` render units tall.
    pub fn default_z_scale(&self) -> f64 {
        self.grid.m.max(self.grid.n) as f64 / self.steps as f64
    }
}

/// Render-space bounds `[0, m] x [0, n] x [0, T * z_scale]`.
pub fn volume_to_render_space(volume: &SpaceTimeVolume, z_scale: f64) -> Result<Aabb> {
    if !(z_scale > 0.0 && z_scale.is_finite()) {
        return Err(invalid(format!("z_scale must be positive, got {z_scale}")));
    }
    Ok(Aabb::new(
        Vec3::ZERO,
        Vec3::new(
            volume.m() as f64,
            volume.n() as f64,
            volume.steps() as f64 * z_scale,
        ),
    ))
}

/// Circular spatial filter in continuous cell coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spotlight {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionState {
    /// Inclusive step range.
    pub time_range: (usize, usize),
    pub spotlight: Option<Spotlight>,
    pub selected_cluster: Option<usize>,
}

impl SelectionState {
    pub fn full(steps: usize) -> Self {
        Self {
            time_range: (0, steps.saturating_sub(1)),
            spotlight: None,
            selected_cluster: None,
        }
    }

    pub fn validate(&self, steps: usize) -> Result<()> {
        let (lo, hi) = self.time_range;
        if lo > hi || hi >= steps {
            return Err(invalid(format!(
                "time range ({lo}, {hi}) must satisfy 0 <= lo <= hi < {steps}"
            )));
        }
        if let Some(s) = self.spotlight {
            if !(s.r > 0.0 && s.r.is_finite() && s.cx.is_finite() && s.cy.is_finite()) {
                return Err(invalid(format!("spotlight radius must be positive, got {}", s.r)));
            }
        }
        Ok(())
    }

    /// Whether voxel column (x, y) at step t survives slicing and spotlight.
    #[inline]
    pub fn includes_voxel(&self, x: usize, y: usize, t: usize) -> bool {
        if t < self.time_range.0 || t > self.time_range.1 {
            return false;
        }
        match self.spotlight {
            Some(s) => {
                let dx = x as f64 + 0.5 - s.cx;
                let dy = y as f64 + 0.5 - s.cy;
                dx * dx + dy * dy <= s.r * s.r
            }
            None => true,
        }
    }

    pub fn is_full(&self, steps: usize) -> bool {
        self.spotlight.is_none() && self.time_range == (0, steps - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub eye: Vec3,
    pub target: Vec3,
    pub up: Vec3,
    /// Vertical field of view in degrees.
    pub vfov: f64,
    pub width: u32,
    pub height: u32,
}

impl Camera {
    pub fn validate(&self) -> Result<()> {
        if !(self.eye.is_finite() && self.target.is_finite() && self.up.is_finite()) {
            return Err(invalid("camera vectors must be finite"));
        }
        let forward = self.target - self.eye;
        if forward.length() < 1e-12 {
            return Err(invalid("camera eye and target coincide"));
        }
        if forward.normalize().cross(self.up).length() < 1e-9 {
            return Err(invalid("camera up vector is parallel to the view direction"));
        }
        if !(self.vfov > 1.0 && self.vfov < 170.0) {
            return Err(invalid(format!("vfov must be in (1, 170) degrees, got {}", self.vfov)));
        }
        if self.width == 0 || self.height == 0 {
            return Err(crate::Error::EmptyViewport);
        }
        Ok(())
    }

    /// Camera looking at the center of `bounds` from azimuth/elevation (degrees), far enough
    /// that the bounding sphere fits the vertical field of view.
    pub fn framing(bounds: &Aabb, azimuth: f64, elevation: f64, width: u32, height: u32) -> Self {
        let vfov: f64 = 40.0;
        let center = bounds.center();
        let radius = bounds.size().length() * 0.5;
        let half = (vfov.to_radians() * 0.5).sin();
        let aspect_fix = if width < height {
            height as f64 / width as f64
        } else {
            1.0
        };
        let dist = radius / half * 1.05 * aspect_fix;
        let (az, el) = (azimuth.to_radians(), elevation.to_radians());
        let dir = Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin());
        Self {
            eye: center + dir * dist,
            target: center,
            up: Vec3::new(0.0, 0.0, 1.0),
            vfov,
            width,
            height,
        }
    }

    /// Camera basis (right, true up, forward).
    pub fn basis(&self) -> (Vec3, Vec3, Vec3) {
        let forward = (self.target - self.eye).normalize();
        let right = forward.cross(self.up).normalize();
        let up = right.cross(forward);
        (right, up, forward)
    }

    /// Primary ray through image position (px, py); pixel centers sit at half-integers and
    /// row 0 is the top of the image.
    pub fn ray(&self, px: f64, py: f64) -> Ray {
        let (right, up, forward) = self.basis();
        let h = (self.vfov.to_radians() * 0.5).tan();
        let aspect = self.width as f64 / self.height as f64;
        let sx = (2.0 * px / self.width as f64 - 1.0) * h * aspect;
        let sy = (1.0 - 2.0 * py / self.height as f64) * h;
        Ray::new(self.eye, forward + right * sx + up * sy)
    }

    pub fn pixel_ray(&self, px: u32, py: u32) -> Ray {
        self.ray(px as f64 + 0.5, py as f64 + 0.5)
    }

    /// Image position of a render-space point, or `None` behind the eye.
    pub fn project(&self, p: Vec3) -> Option<(f64, f64)> {
        let (right, up, forward) = self.basis();
        let d = p - self.eye;
        let depth = d.dot(forward);
        if depth <= 1e-9 {
            return None;
        }
        let h = (self.vfov.to_radians() * 0.5).tan();
        let aspect = self.width as f64 / self.height as f64;
        let sx = d.dot(right) / depth / (h * aspect);
        let sy = d.dot(up) / depth / h;
        Some((
            (sx + 1.0) * 0.5 * self.width as f64,
            (1.0 - sy) * 0.5 * self.height as f64,
        ))
    }
}
