//! Station series to space-time volume: per-slice spatial interpolation, gap filling across
//! invalid slices, then per-cell temporal smoothing.

mod idw;
mod kriging;
mod optimize;
mod smooth;
mod variogram;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ingest::DEFAULT_MIN_SAMPLES;
use crate::model::{GridSpec, SpaceTimeVolume, StDataset, ValueRange};

pub use idw::{idw_at, idw_slice};
pub use kriging::{krige_slice, LuFactor, OrdinaryKriging};
pub use smooth::{smooth_series, window_bounds, DEFAULT_WINDOW};
pub use variogram::{
    compute_semivariogram, fit_variogram, LagBin, VariogramModel, CONSTANT_FIELD_SILL,
    DEFAULT_N_LAGS,
};

/// One present reading placed in continuous cell coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Index of the source station in its dataset.
    pub station: usize,
}

impl SamplePoint {
    #[inline]
    pub fn distance(&self, o: &SamplePoint) -> f64 {
        ((self.x - o.x).powi(2) + (self.y - o.y).powi(2)).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceSamples {
    pub t: usize,
    pub points: Vec<SamplePoint>,
}

/// Present readings of step `t`, projected onto `grid`.
pub fn slice_samples(ds: &StDataset, grid: &GridSpec, t: usize) -> SliceSamples {
    let points = ds
        .stations()
        .iter()
        .zip(ds.series())
        .enumerate()
        .filter_map(|(i, (st, s))| {
            s.values[t].map(|z| {
                let (x, y) = grid.to_cell_coords(st.lon, st.lat);
                SamplePoint {
                    x,
                    y,
                    z: z as f64,
                    station: i,
                }
            })
        })
        .collect();
    SliceSamples { t, points }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Kriging,
    Idw,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Kriging => "kriging",
            Method::Idw => "idw",
        })
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kriging" => Ok(Method::Kriging),
            "idw" => Ok(Method::Idw),
            other => Err(invalid(format!("unknown interpolation method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuildOptions {
    pub method: Method,
    pub window: usize,
    pub min_samples: usize,
    pub n_lags: usize,
    pub idw_power: f64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            method: Method::Kriging,
            window: DEFAULT_WINDOW,
            min_samples: DEFAULT_MIN_SAMPLES,
            n_lags: DEFAULT_N_LAGS,
            idw_power: 2.0,
        }
    }
}

impl BuildOptions {
    pub fn new(method: Method, window: usize) -> Self {
        Self {
            method,
            window,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(invalid("smoothing window must be >= 1"));
        }
        if self.min_samples == 0 {
            return Err(invalid("min_samples must be >= 1"));
        }
        if self.n_lags == 0 {
            return Err(invalid("n_lags must be >= 1"));
        }
        if !(self.idw_power > 0.0) {
            return Err(invalid("IDW power must be positive"));
        }
        Ok(())
    }
}

/// Variogram for one slice: the weighted fit when at least three lag bins are populated,
/// otherwise a model with sill = sample variance and range = half the largest separation.
pub fn slice_variogram(points: &[SamplePoint], n_lags: usize) -> Result<VariogramModel> {
    let bins = compute_semivariogram(points, n_lags)?;
    if let Ok(model) = fit_variogram(&bins) {
        return Ok(model);
    }
    let mean = points.iter().map(|p| p.z).sum::<f64>() / points.len() as f64;
    let var = points.iter().map(|p| (p.z - mean).powi(2)).sum::<f64>() / points.len() as f64;
    let mut max_d = 0.0f64;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            max_d = max_d.max(a.distance(b));
        }
    }
    VariogramModel::new(0.0, var.max(CONSTANT_FIELD_SILL), (max_d * 0.5).max(1e-6))
}

/// Ordinary kriging that escalates the nugget when a fitted model is numerically singular.
fn krige_regularized(
    points: &[SamplePoint],
    grid: &GridSpec,
    mut model: VariogramModel,
    range: ValueRange,
) -> Result<(Vec<f64>, VariogramModel)> {
    let mut bump = 1e-9 * model.sill;
    for _ in 0..8 {
        match krige_slice(points, grid, &model, range) {
            Ok(field) => return Ok((field, model)),
            Err(Error::IllConditioned) => {
                model.nugget = model.nugget.max(bump);
                bump *= 100.0;
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::IllConditioned)
}

fn kriging_predictor(points: &[SamplePoint], n_lags: usize) -> Result<Option<OrdinaryKriging>> {
    if points.iter().all(|p| p.z == points[0].z) {
        return Ok(None);
    }
    let mut model = slice_variogram(points, n_lags)?;
    let mut bump = 1e-9 * model.sill;
    for _ in 0..8 {
        match OrdinaryKriging::new(points, model) {
            Ok(k) => return Ok(Some(k)),
            Err(Error::IllConditioned) => {
                model.nugget = model.nugget.max(bump);
                bump *= 100.0;
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::IllConditioned)
}

/// Interpolates one slice onto the grid, clamped to `range`.
pub fn interpolate_slice(
    points: &[SamplePoint],
    grid: &GridSpec,
    opts: &BuildOptions,
    range: ValueRange,
) -> Result<(Vec<f64>, Option<VariogramModel>)> {
    match opts.method {
        Method::Idw => {
            let mut f = idw_slice(points, grid, opts.idw_power)?;
            f.iter_mut().for_each(|v| *v = range.clamp(*v));
            Ok((f, None))
        }
        Method::Kriging => {
            if points.len() == 1 || points.iter().all(|p| p.z == points[0].z) {
                let f = krige_slice(points, grid, &VariogramModel::new(0.0, 1.0, 1.0)?, range)?;
                return Ok((f, None));
            }
            let model = slice_variogram(points, opts.n_lags)?;
            let (f, model) = krige_regularized(points, grid, model, range)?;
            Ok((f, Some(model)))
        }
    }
}

#[derive(Debug)]
pub struct BuildReport {
    pub volume: SpaceTimeVolume,
    /// Steps with fewer than `min_samples` readings, filled from neighboring slices.
    pub invalid_slices: Vec<usize>,
    /// Fitted variogram per slice (kriging only, `None` for constant or invalid slices).
    pub models: Vec<Option<VariogramModel>>,
}

pub fn build_volume(ds: &StDataset, grid: &GridSpec, opts: &BuildOptions) -> Result<SpaceTimeVolume> {
    Ok(build_volume_detailed(ds, grid, opts)?.volume)
}

pub fn build_volume_detailed(
    ds: &StDataset,
    grid: &GridSpec,
    opts: &BuildOptions,
) -> Result<BuildReport> {
    grid.validate()?;
    opts.validate()?;
    let range = ds.value_range();
    let steps = ds.steps();
    let cells = grid.cell_count();

    let mut data = vec![0f32; cells * steps];
    let results: Vec<Result<(bool, Option<VariogramModel>)>> = data
        .par_chunks_mut(cells)
        .enumerate()
        .map(|(t, out)| {
            let samples = slice_samples(ds, grid, t);
            if samples.points.len() < opts.min_samples {
                return Ok((false, None));
            }
            let (field, model) = interpolate_slice(&samples.points, grid, opts, range)?;
            for (o, v) in out.iter_mut().zip(field) {
                *o = v as f32;
            }
            Ok((true, model))
        })
        .collect();
    let mut valid = Vec::with_capacity(steps);
    let mut models = Vec::with_capacity(steps);
    for r in results {
        let (ok, model) = r?;
        valid.push(ok);
        models.push(model);
    }
    let valid_steps: Vec<usize> = (0..steps).filter(|&t| valid[t]).collect();
    if valid_steps.is_empty() {
        return Err(Error::NoValidSlices(opts.min_samples));
    }
    let invalid_slices: Vec<usize> = (0..steps).filter(|&t| !valid[t]).collect();

    // Gap fill: linear in t between the nearest valid slices, nearest copy at the ends.
    let fills: Vec<(usize, Vec<f32>)> = invalid_slices
        .par_iter()
        .map(|&t| {
            let next = valid_steps.partition_point(|&v| v < t);
            let after = valid_steps.get(next).copied();
            let before = next.checked_sub(1).map(|i| valid_steps[i]);
            let slice = |s: usize| &data[s * cells..(s + 1) * cells];
            let filled = match (before, after) {
                (Some(a), Some(b)) => {
                    let f = (t - a) as f64 / (b - a) as f64;
                    slice(a)
                        .iter()
                        .zip(slice(b))
                        .map(|(&va, &vb)| (va as f64 + (vb as f64 - va as f64) * f) as f32)
                        .collect()
                }
                (Some(a), None) => slice(a).to_vec(),
                (None, Some(b)) => slice(b).to_vec(),
                (None, None) => unreachable!("at least one valid slice"),
            };
            (t, filled)
        })
        .collect();
    for (t, f) in fills {
        data[t * cells..(t + 1) * cells].copy_from_slice(&f);
    }

    let smoothed = smooth_volume(&data, cells, steps, opts.window);
    let (lo, hi) = (range.min as f32, range.max as f32);
    let smoothed: Vec<f32> = smoothed.into_iter().map(|v| v.clamp(lo, hi)).collect();
    let volume = SpaceTimeVolume::new(*grid, steps, ds.t0(), ds.dt(), range, smoothed)?;
    Ok(BuildReport {
        volume,
        invalid_slices,
        models,
    })
}

/// Applies [`smooth_series`] to every cell's time series. Summation order matches the
/// per-series routine, so each cell is bit-identical to smoothing its series alone.
pub fn smooth_volume(data: &[f32], cells: usize, steps: usize, window: usize) -> Vec<f32> {
    if window <= 1 {
        return data.to_vec();
    }
    let mut out = vec![0f32; data.len()];
    out.par_chunks_mut(cells).enumerate().for_each(|(t, out)| {
        let (lo, hi) = window_bounds(t, window, steps);
        let count = (hi - lo + 1) as f64;
        let anchor = &data[lo * cells..(lo + 1) * cells];
        let mut acc = vec![0f64; cells];
        for s in lo..=hi {
            for ((a, &v), &v0) in acc.iter_mut().zip(&data[s * cells..(s + 1) * cells]).zip(anchor) {
                *a += v as f64 - v0 as f64;
            }
        }
        for ((o, a), &v0) in out.iter_mut().zip(acc).zip(anchor) {
            *o = (v0 as f64 + a / count) as f32;
        }
    });
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    /// Number of evenly spaced slices to evaluate.
    pub max_slices: usize,
    pub min_samples: usize,
    pub n_lags: usize,
    pub idw_power: f64,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self {
            max_slices: 24,
            min_samples: DEFAULT_MIN_SAMPLES,
            n_lags: DEFAULT_N_LAGS,
            idw_power: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationCvError {
    pub station_id: String,
    pub count: usize,
    pub mae: f64,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub mae: f64,
    pub rmse: f64,
    pub predictions: usize,
    pub per_station_errors: Vec<StationCvError>,
}

/// Evenly spaced subset of `0..steps`.
pub fn cv_slices(steps: usize, max_slices: usize) -> Vec<usize> {
    let k = max_slices.clamp(1, steps);
    let mut out: Vec<usize> = (0..k).map(|i| i * steps / k).collect();
    out.dedup();
    out
}

/// Predicts a held-out station from the rest of its slice.
pub fn predict_held_out(
    rest: &[SamplePoint],
    x: f64,
    y: f64,
    method: Method,
    opts: &CvOptions,
    range: ValueRange,
) -> Result<f64> {
    let v = match method {
        Method::Idw => idw_at(rest, x, y, opts.idw_power),
        Method::Kriging => match kriging_predictor(rest, opts.n_lags)? {
            Some(k) => k.predict(x, y),
            None => rest[0].z,
        },
    };
    Ok(range.clamp(v))
}

/// Leave-one-station-out cross-validation over a subsample of slices.
pub fn cross_validate(
    ds: &StDataset,
    grid: &GridSpec,
    method: Method,
    opts: &CvOptions,
) -> Result<CvReport> {
    if ds.station_count() < 4 {
        return Err(Error::TooFewSamples {
            needed: 4,
            got: ds.station_count(),
        });
    }
    let range = ds.value_range();
    let per_slice: Vec<Result<Vec<(usize, f64)>>> = cv_slices(ds.steps(), opts.max_slices)
        .into_par_iter()
        .map(|t| {
            let samples = slice_samples(ds, grid, t).points;
            if samples.len() < opts.min_samples + 1 {
                return Ok(Vec::new());
            }
            let mut errs = Vec::with_capacity(samples.len());
            for (i, held) in samples.iter().enumerate() {
                let rest: Vec<SamplePoint> = samples
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, p)| *p)
                    .collect();
                let pred = predict_held_out(&rest, held.x, held.y, method, opts, range)?;
                errs.push((held.station, pred - held.z));
            }
            Ok(errs)
        })
        .collect();

    let mut sum_abs = vec![0.0f64; ds.station_count()];
    let mut sum_sq = vec![0.0f64; ds.station_count()];
    let mut counts = vec![0usize; ds.station_count()];
    for r in per_slice {
        for (station, e) in r? {
            sum_abs[station] += e.abs();
            sum_sq[station] += e * e;
            counts[station] += 1;
        }
    }
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::NoValidSlices(opts.min_samples + 1));
    }
    let per_station_errors = ds
        .stations()
        .iter()
        .enumerate()
        .filter(|&(i, _)| counts[i] > 0)
        .map(|(i, st)| StationCvError {
            station_id: st.id.clone(),
            count: counts[i],
            mae: sum_abs[i] / counts[i] as f64,
            rmse: (sum_sq[i] / counts[i] as f64).sqrt(),
        })
        .collect();
    Ok(CvReport {
        mae: sum_abs.iter().sum::<f64>() / total as f64,
        rmse: (sum_sq.iter().sum::<f64>() / total as f64).sqrt(),
        predictions: total,
        per_station_errors,
    })
}
