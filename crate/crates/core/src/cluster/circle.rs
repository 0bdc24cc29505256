//! Minimal enclosing circle by the randomized incremental method.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
}

const REL_EPS: f64 = 1e-14;

impl Circle {
    pub fn contains(&self, p: (f64, f64)) -> bool {
        let d = ((p.0 - self.cx).powi(2) + (p.1 - self.cy).powi(2)).sqrt();
        d <= self.r * (1.0 + REL_EPS) + REL_EPS
    }

    fn diameter(a: (f64, f64), b: (f64, f64)) -> Circle {
        let cx = (a.0 + b.0) * 0.5;
        let cy = (a.1 + b.1) * 0.5;
        let r = ((a.0 - cx).powi(2) + (a.1 - cy).powi(2))
            .sqrt()
            .max(((b.0 - cx).powi(2) + (b.1 - cy).powi(2)).sqrt());
        Circle { cx, cy, r }
    }

    /// Circle through three points, `None` when they are collinear.
    pub fn circumscribed(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> Option<Circle> {
        // Translate to the bounding-box center for precision.
        let ox = (a.0.min(b.0).min(c.0) + a.0.max(b.0).max(c.0)) * 0.5;
        let oy = (a.1.min(b.1).min(c.1) + a.1.max(b.1).max(c.1)) * 0.5;
        let (ax, ay) = (a.0 - ox, a.1 - oy);
        let (bx, by) = (b.0 - ox, b.1 - oy);
        let (cx, cy) = (c.0 - ox, c.1 - oy);
        let d = (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by)) * 2.0;
        if d == 0.0 {
            return None;
        }
        let a2 = ax * ax + ay * ay;
        let b2 = bx * bx + by * by;
        let c2 = cx * cx + cy * cy;
        let x = ox + (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d;
        let y = oy + (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d;
        let r = [a, b, c]
            .iter()
            .map(|p| ((p.0 - x).powi(2) + (p.1 - y).powi(2)).sqrt())
            .fold(0.0, f64::max);
        Some(Circle { cx: x, cy: y, r })
    }
}

fn cross(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

fn with_two(points: &[(f64, f64)], p: (f64, f64), q: (f64, f64)) -> Circle {
    let circ = Circle::diameter(p, q);
    let mut left: Option<Circle> = None;
    let mut right: Option<Circle> = None;
    for &r in points {
        if circ.contains(r) {
            continue;
        }
        let side = cross(p, q, r);
        let Some(c) = Circle::circumscribed(p, q, r) else {
            continue;
        };
        let score = cross(p, q, (c.cx, c.cy));
        if side > 0.0 && left.is_none_or(|l| score > cross(p, q, (l.cx, l.cy))) {
            left = Some(c);
        } else if side < 0.0 && right.is_none_or(|rc| score < cross(p, q, (rc.cx, rc.cy))) {
            right = Some(c);
        }
    }
    match (left, right) {
        (None, None) => circ,
        (Some(l), None) => l,
        (None, Some(r)) => r,
        (Some(l), Some(r)) => {
            if l.r <= r.r {
                l
            } else {
                r
            }
        }
    }
}

fn with_one(points: &[(f64, f64)], p: (f64, f64)) -> Circle {
    let mut c = Circle { cx: p.0, cy: p.1, r: 0.0 };
    for (i, &q) in points.iter().enumerate() {
        if !c.contains(q) {
            c = if c.r == 0.0 {
                Circle::diameter(p, q)
            } else {
                with_two(&points[..=i], p, q)
            };
        }
    }
    c
}

/// Smallest circle containing every point. The point order is shuffled with a fixed seed,
/// so results are deterministic. Returns `None` for an empty set.
pub fn minimal_enclosing_circle(points: &[(f64, f64)], seed: u64) -> Option<Circle> {
    let mut pts = points.to_vec();
    pts.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut c: Option<Circle> = None;
    for i in 0..pts.len() {
        let p = pts[i];
        if c.is_none_or(|c| !c.contains(p)) {
            c = Some(with_one(&pts[..=i], p));
        }
    }
    c
}

/// Circle through the corners of the bounding box.
pub fn bounding_circle(points: &[(f64, f64)]) -> Option<Circle> {
    let first = *points.first()?;
    let (mut lo, mut hi) = (first, first);
    for &(x, y) in points {
        lo = (lo.0.min(x), lo.1.min(y));
        hi = (hi.0.max(x), hi.1.max(y));
    }
    let cx = (lo.0 + hi.0) * 0.5;
    let cy = (lo.1 + hi.1) * 0.5;
    Some(Circle {
        cx,
        cy,
        r: ((hi.0 - lo.0).powi(2) + (hi.1 - lo.1).powi(2)).sqrt() * 0.5,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_sets() {
        assert!(minimal_enclosing_circle(&[], 1).is_none());
        let c = minimal_enclosing_circle(&[(3.0, 4.0)], 1).unwrap();
        assert_eq!((c.cx, c.cy, c.r), (3.0, 4.0, 0.0));
        let c = minimal_enclosing_circle(&[(0.0, 0.0), (4.0, 0.0)], 1).unwrap();
        assert_eq!((c.cx, c.cy, c.r), (2.0, 0.0, 2.0));
    }

    #[test]
    fn triangle_and_square() {
        // obtuse triangle: the long side's diameter circle
        let c = minimal_enclosing_circle(&[(0.0, 0.0), (10.0, 0.0), (5.0, 1.0)], 3).unwrap();
        assert!((c.cx - 5.0).abs() < 1e-12 && c.cy.abs() < 1e-12 && (c.r - 5.0).abs() < 1e-12);
        let sq = [(0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0), (1.0, 1.0)];
        let c = minimal_enclosing_circle(&sq, 9).unwrap();
        assert!((c.r - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn collinear_and_duplicates() {
        let pts = [(0.0, 0.0), (1.0, 1.0), (2.0, 2.0), (2.0, 2.0), (0.0, 0.0)];
        let c = minimal_enclosing_circle(&pts, 5).unwrap();
        assert!((c.r - 2f64.sqrt()).abs() < 1e-12);
        assert!(Circle::circumscribed((0.0, 0.0), (1.0, 1.0), (2.0, 2.0)).is_none());
    }

    #[test]
    fn bounding_circle_encloses() {
        let pts = [(0.0, 0.0), (4.0, 0.0), (0.0, 3.0)];
        let c = bounding_circle(&pts).unwrap();
        assert_eq!(c.r, 2.5);
        assert!(pts.iter().all(|&p| c.contains(p)));
    }
}
