//! Empirical semivariogram and Gaussian model fitting.

use serde::{Deserialize, Serialize};

use super::optimize::NelderMead;
use super::SamplePoint;
use crate::error::{Error, Result};

pub const DEFAULT_N_LAGS: usize = 6;
/// Sill assigned to the constant-field fallback model.
pub const CONSTANT_FIELD_SILL: f64 = 1e-12;

/// Gaussian semivariogram `nugget + sill * (1 - exp(-3 h^2 / range^2))`.
///
/// Distances are in continuous cell-coordinate units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariogramModel {
    pub nugget: f64,
    pub sill: f64,
    pub range: f64,
    /// Set when the fit saw no variation at all.
    #[serde(default)]
    pub constant_field: bool,
}

impl VariogramModel {
    pub fn new(nugget: f64, sill: f64, range: f64) -> Result<Self> {
        let m = Self {
            nugget,
            sill,
            range,
            constant_field: false,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.nugget >= 0.0
            && self.sill > 0.0
            && self.range > 0.0
            && self.nugget.is_finite()
            && self.sill.is_finite()
            && self.range.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "variogram needs nugget >= 0, sill > 0, range > 0 (got {}, {}, {})",
                self.nugget, self.sill, self.range
            )))
        }
    }

    #[inline]
    pub fn gamma(&self, h: f64) -> f64 {
        let r = h / self.range;
        self.nugget + self.sill * (1.0 - (-3.0 * r * r).exp())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagBin {
    pub lag: f64,
    pub gamma: f64,
    pub pairs: usize,
}

/// Bins all pairwise distances into `n_lags` equal-width bins over `(0, max_distance]` and
/// averages the half squared differences. Empty bins are omitted; coincident pairs
/// (distance 0) fall in no bin.
pub fn compute_semivariogram(points: &[SamplePoint], n_lags: usize) -> Result<Vec<LagBin>> {
    if points.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: points.len(),
        });
    }
    if n_lags == 0 {
        return Err(Error::InvalidArgument("n_lags must be >= 1".into()));
    }
    let mut max_d = 0.0f64;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            max_d = max_d.max(a.distance(b));
        }
    }
    if max_d <= 0.0 {
        return Ok(Vec::new());
    }
    let width = max_d / n_lags as f64;
    let mut sums = vec![0.0f64; n_lags];
    let mut counts = vec![0usize; n_lags];
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            let d = a.distance(b);
            if d <= 0.0 {
                continue;
            }
            let bin = ((d / width).ceil() as usize).clamp(1, n_lags) - 1;
            let diff = a.z - b.z;
            sums[bin] += 0.5 * diff * diff;
            counts[bin] += 1;
        }
    }
    Ok((0..n_lags)
        .filter(|&i| counts[i] > 0)
        .map(|i| LagBin {
            lag: (i as f64 + 0.5) * width,
            gamma: sums[i] / counts[i] as f64,
            pairs: counts[i],
        })
        .collect())
}

/// Pair-count-weighted least squares for (nugget, sill) at a fixed range, nugget >= 0.
/// Returns `(nugget, sill, weighted SSE)`.
fn solve_linear_part(bins: &[LagBin], range: f64) -> (f64, f64, f64) {
    let basis = |h: f64| 1.0 - (-3.0 * (h / range).powi(2)).exp();
    let (mut sw, mut sg, mut sgg, mut sy, mut sgy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for b in bins {
        let w = b.pairs as f64;
        let g = basis(b.lag);
        sw += w;
        sg += w * g;
        sgg += w * g * g;
        sy += w * b.gamma;
        sgy += w * g * b.gamma;
    }
    let det = sw * sgg - sg * sg;
    let (mut nugget, mut sill) = if det.abs() > 1e-300 {
        ((sgg * sy - sg * sgy) / det, (sw * sgy - sg * sy) / det)
    } else {
        (0.0, if sgg > 0.0 { sgy / sgg } else { 0.0 })
    };
    if nugget < 0.0 {
        nugget = 0.0;
        sill = if sgg > 0.0 { sgy / sgg } else { 0.0 };
    }
    if sill <= 0.0 {
        sill = CONSTANT_FIELD_SILL;
        nugget = (sy / sw).max(0.0);
    }
    let sse = bins
        .iter()
        .map(|b| {
            let r = b.gamma - nugget - sill * basis(b.lag);
            b.pairs as f64 * r * r
        })
        .sum();
    (nugget, sill, sse)
}

/// Fits the Gaussian model by pair-count-weighted least squares.
///
/// The range is searched by a multi-start simplex over `ln(range)`; for each candidate
/// range the nugget and sill are the exact constrained linear least-squares solution.
pub fn fit_variogram(bins: &[LagBin]) -> Result<VariogramModel> {
    let bins: Vec<LagBin> = bins
        .iter()
        .copied()
        .filter(|b| b.pairs > 0 && b.lag > 0.0 && b.gamma.is_finite())
        .collect();
    if bins.len() < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            got: bins.len(),
        });
    }
    let max_lag = bins.iter().map(|b| b.lag).fold(0.0, f64::max);
    let min_lag = bins.iter().map(|b| b.lag).fold(f64::INFINITY, f64::min);
    let max_gamma = bins.iter().map(|b| b.gamma).fold(0.0, f64::max);
    if max_gamma <= 0.0 {
        return Ok(VariogramModel {
            nugget: 0.0,
            sill: CONSTANT_FIELD_SILL,
            range: max_lag,
            constant_field: true,
        });
    }

    // Keep the search inside a window where the basis is not numerically flat.
    let lo = (min_lag * 0.05).ln();
    let hi = (max_lag * 50.0).ln();
    let objective = |p: &[f64]| -> f64 {
        let lr = p[0].clamp(lo, hi);
        let penalty = (p[0] - lr).powi(2);
        solve_linear_part(&bins, lr.exp()).2 * (1.0 + penalty) + penalty
    };

    let nm = NelderMead::default();
    let mut best: Option<(f64, f64)> = None;
    for frac in [0.1, 0.25, 0.5, 1.0, 2.0, 5.0] {
        let start = (max_lag * frac).ln().clamp(lo, hi);
        let (x, fx) = nm.minimize(objective, &[start], 0.3);
        if best.is_none_or(|(_, bf)| fx < bf) {
            best = Some((x[0].clamp(lo, hi), fx));
        }
    }
    let range = best.unwrap().0.exp();
    let (nugget, sill, _) = solve_linear_part(&bins, range);
    Ok(VariogramModel {
        nugget,
        sill,
        range,
        constant_field: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64, z: f64) -> SamplePoint {
        SamplePoint { x, y, z, station: 0 }
    }

    #[test]
    fn three_point_bins() {
        let pts = [p(0.0, 0.0, 0.0), p(1.0, 0.0, 2.0), p(2.0, 0.0, 0.0)];
        let bins = compute_semivariogram(&pts, 2).unwrap();
        assert_eq!(bins.len(), 2);
        assert_eq!((bins[0].gamma, bins[0].pairs), (2.0, 2));
        assert_eq!((bins[1].gamma, bins[1].pairs), (0.0, 1));
        assert!((bins[0].lag - 0.5).abs() < 1e-12 && (bins[1].lag - 1.5).abs() < 1e-12);
    }

    #[test]
    fn equal_values_give_zero_gamma() {
        let pts: Vec<_> = (0..10).map(|i| p(i as f64, (i * i) as f64 * 0.1, 4.0)).collect();
        let bins = compute_semivariogram(&pts, 4).unwrap();
        assert!(bins.iter().all(|b| b.gamma == 0.0));
    }

    #[test]
    fn needs_two_points() {
        assert!(compute_semivariogram(&[p(0.0, 0.0, 1.0)], 3).is_err());
    }

    fn synthetic(model: VariogramModel) -> Vec<LagBin> {
        (1..=20)
            .map(|i| {
                let lag = i as f64 * 0.75;
                LagBin { lag, gamma: model.gamma(lag), pairs: 10 + i }
            })
            .collect()
    }

    fn assert_rel(got: f64, want: f64, tol: f64) {
        assert!(((got - want) / want).abs() <= tol, "got {got}, want {want}");
    }

    #[test]
    fn recovers_zero_nugget_model() {
        let truth = VariogramModel::new(0.0, 1.0, 5.0).unwrap();
        let fit = fit_variogram(&synthetic(truth)).unwrap();
        assert!(fit.nugget.abs() <= 0.01 * truth.sill, "{fit:?}");
        assert_rel(fit.sill, 1.0, 0.01);
        assert_rel(fit.range, 5.0, 0.01);
    }

    #[test]
    fn recovers_nugget_model() {
        let truth = VariogramModel::new(0.2, 2.0, 10.0).unwrap();
        let fit = fit_variogram(&synthetic(truth)).unwrap();
        assert_rel(fit.nugget, 0.2, 0.01);
        assert_rel(fit.sill, 2.0, 0.01);
        assert_rel(fit.range, 10.0, 0.01);
        assert_eq!(fit, fit_variogram(&synthetic(truth)).unwrap());
    }

    #[test]
    fn constant_field_fallback() {
        let bins: Vec<_> = (1..5).map(|i| LagBin { lag: i as f64, gamma: 0.0, pairs: 3 }).collect();
        let fit = fit_variogram(&bins).unwrap();
        assert!(fit.constant_field);
        assert_eq!((fit.nugget, fit.sill, fit.range), (0.0, CONSTANT_FIELD_SILL, 4.0));
    }

    #[test]
    fn model_shape() {
        let m = VariogramModel::new(0.3, 2.0, 4.0).unwrap();
        assert_eq!(m.gamma(0.0), 0.3);
        assert!((m.gamma(1e6) - 2.3).abs() < 1e-12);
        let mut prev = m.gamma(0.0);
        for i in 1..200 {
            let g = m.gamma(i as f64 * 0.05);
            assert!(g >= prev);
            prev = g;
        }
        assert!(VariogramModel::new(-0.1, 1.0, 1.0).is_err());
    }
}
