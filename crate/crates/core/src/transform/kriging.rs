//! Ordinary kriging over one time slice.
//!
//! The bordered semivariance system is LU-factored once per slice (sample positions are
//! fixed within a slice), then solved once per grid cell.

use super::variogram::VariogramModel;
use super::SamplePoint;
use crate::error::{Error, Result};
use crate::model::{GridSpec, ValueRange};

/// Dense LU factorization with partial pivoting, row-major.
#[derive(Debug, Clone)]
pub struct LuFactor {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl LuFactor {
    /// Factors an `n x n` row-major matrix. Fails if a pivot falls below
    /// `1e-13 * max|a_ij|`.
    pub fn new(n: usize, mut a: Vec<f64>) -> Result<Self> {
        assert_eq!(a.len(), n * n, "matrix size mismatch");
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tiny = scale * 1e-13;
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (pivot_row, pivot_abs) = (k..n)
                .map(|r| (r, a[r * n + k].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pivot_abs > tiny) {
                return Err(Error::IllConditioned);
            }
            if pivot_row != k {
                for c in 0..n {
                    a.swap(k * n + c, pivot_row * n + c);
                }
                perm.swap(k, pivot_row);
            }
            let pivot = a[k * n + k];
            for r in k + 1..n {
                let f = a[r * n + k] / pivot;
                a[r * n + k] = f;
                if f != 0.0 {
                    for c in k + 1..n {
                        a[r * n + c] -= f * a[k * n + c];
                    }
                }
            }
        }
        Ok(Self { n, lu: a, perm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b`, writing `x` into `out`.
    pub fn solve_into(&self, b: &[f64], out: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let mut s = b[self.perm[i]];
            let row = &self.lu[i * n..i * n + i];
            for (j, l) in row.iter().enumerate() {
                s -= l * out[j];
            }
            out[i] = s;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n..(i + 1) * n];
            let mut s = out[i];
            for j in i + 1..n {
                s -= row[j] * out[j];
            }
            out[i] = s / row[i];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.solve_into(b, &mut out);
        out
    }
}

/// Semivariance used inside the kriging system: zero for coincident locations.
#[inline]
fn system_gamma(model: &VariogramModel, h: f64) -> f64 {
    if h <= 0.0 {
        0.0
    } else {
        model.gamma(h)
    }
}

/// Coincident sample positions make the kriging matrix singular.
pub(crate) fn check_distinct_positions(points: &[SamplePoint]) -> Result<()> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .x
            .total_cmp(&points[b].x)
            .then(points[a].y.total_cmp(&points[b].y))
    });
    for w in order.windows(2) {
        let (a, b) = (&points[w[0]], &points[w[1]]);
        if a.distance(b) < 1e-9 {
            let (i, j) = (a.station.min(b.station), a.station.max(b.station));
            return Err(Error::SingularKriging(format!("#{i}"), format!("#{j}")));
        }
    }
    Ok(())
}

/// A factored ordinary-kriging system for a fixed set of samples.
#[derive(Debug, Clone)]
pub struct OrdinaryKriging {
    points: Vec<SamplePoint>,
    model: VariogramModel,
    lu: LuFactor,
}

impl OrdinaryKriging {
    pub fn new(points: &[SamplePoint], model: VariogramModel) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        model.validate()?;
        check_distinct_positions(points)?;
        let k = points.len();
        let n = k + 1;
        let mut a = vec![0.0; n * n];
        for i in 0..k {
            for j in 0..k {
                a[i * n + j] = system_gamma(&model, points[i].distance(&points[j]));
            }
            a[i * n + k] = 1.0;
            a[k * n + i] = 1.0;
        }
        let lu = LuFactor::new(n, a)?;
        Ok(Self {
            points: points.to_vec(),
            model,
            lu,
        })
    }

    pub fn points(&self) -> &[SamplePoint] {
        &self.points
    }

    fn rhs_into(&self, x: f64, y: f64, rhs: &mut [f64]) {
        let k = self.points.len();
        for (r, p) in rhs.iter_mut().zip(&self.points) {
            *r = system_gamma(&self.model, ((p.x - x).powi(2) + (p.y - y).powi(2)).sqrt());
        }
        rhs[k] = 1.0;
    }

    /// Kriging weights for location (x, y); the last entry is the Lagrange multiplier.
    pub fn weights(&self, x: f64, y: f64) -> Vec<f64> {
        let mut rhs = vec![0.0; self.points.len() + 1];
        self.rhs_into(x, y, &mut rhs);
        self.lu.solve(&rhs)
    }

    pub fn predict(&self, x: f64, y: f64) -> f64 {
        let mut rhs = vec![0.0; self.points.len() + 1];
        let mut w = vec![0.0; self.points.len() + 1];
        self.predict_with(x, y, &mut rhs, &mut w)
    }

    fn predict_with(&self, x: f64, y: f64, rhs: &mut [f64], w: &mut [f64]) -> f64 {
        self.rhs_into(x, y, rhs);
        self.lu.solve_into(rhs, w);
        self.points.iter().zip(w.iter()).map(|(p, wi)| p.z * wi).sum()
    }

    /// Predictions at every cell center, row-major `y * m + x`.
    pub fn predict_grid(&self, grid: &GridSpec) -> Vec<f64> {
        let k = self.points.len();
        let mut rhs = vec![0.0; k + 1];
        let mut w = vec![0.0; k + 1];
        let mut out = Vec::with_capacity(grid.cell_count());
        for y in 0..grid.n {
            for x in 0..grid.m {
                out.push(self.predict_with(x as f64 + 0.5, y as f64 + 0.5, &mut rhs, &mut w));
            }
        }
        out
    }
}

/// Ordinary kriging of one slice onto the grid's cell centers, clamped to `range`.
///
/// A single sample, or samples that all share one value, produce that value everywhere.
pub fn krige_slice(
    points: &[SamplePoint],
    grid: &GridSpec,
    model: &VariogramModel,
    range: ValueRange,
) -> Result<Vec<f64>> {
    if points.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let first = points[0].z;
    if points.iter().all(|p| p.z == first) {
        if points.len() > 1 {
            check_distinct_positions(points)?;
        }
        return Ok(vec![range.clamp(first); grid.cell_count()]);
    }
    let ok = OrdinaryKriging::new(points, *model)?;
    let mut field = ok.predict_grid(grid);
    for v in &mut field {
        *v = range.clamp(*v);
    }
    Ok(field)
}
