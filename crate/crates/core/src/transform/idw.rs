use super::SamplePoint;
use crate::error::{invalid, Error, Result};
use crate::model::GridSpec;

/// Inverse-distance-weighted estimate at (x, y). Within `1e-9` of a sample the nearest
/// sample's value is returned exactly.
pub fn idw_at(points: &[SamplePoint], x: f64, y: f64, power: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut nearest = (f64::INFINITY, 0.0);
    for p in points {
        let d = ((p.x - x).powi(2) + (p.y - y).powi(2)).sqrt();
        if d < nearest.0 {
            nearest = (d, p.z);
        }
        let w = d.powf(-power);
        num += w * p.z;
        den += w;
    }
    if nearest.0 < 1e-9 {
        return nearest.1;
    }
    let est = num / den;
    // Guard the maximum principle against rounding.
    let (lo, hi) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.z), hi.max(p.z)));
    est.clamp(lo, hi)
}

/// IDW onto the grid's cell centers, row-major `y * m + x`.
pub fn idw_slice(points: &[SamplePoint], grid: &GridSpec, power: f64) -> Result<Vec<f64>> {
    if points.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    if !(power > 0.0 && power.is_finite()) {
        return Err(invalid(format!("IDW power must be positive, got {power}")));
    }
    let mut out = Vec::with_capacity(grid.cell_count());
    for y in 0..grid.n {
        for x in 0..grid.m {
            out.push(idw_at(points, x as f64 + 0.5, y as f64 + 0.5, power));
        }
    }
    Ok(out)
}
