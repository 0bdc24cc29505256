//! Derivative-free minimization (Nelder–Mead).

pub(crate) struct NelderMead {
    pub max_iter: usize,
    pub x_tol: f64,
    pub f_tol: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            x_tol: 1e-12,
            f_tol: 1e-15,
        }
    }
}

impl NelderMead {
    /// Minimizes `f` from `start`, with the initial simplex offset by `scale` along each axis.
    pub fn minimize(&self, f: impl Fn(&[f64]) -> f64, start: &[f64], scale: f64) -> (Vec<f64>, f64) {
        let dim = start.len();
        let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
        simplex.push(start.to_vec());
        for i in 0..dim {
            let mut p = start.to_vec();
            p[i] += scale;
            simplex.push(p);
        }
        let mut values: Vec<f64> = simplex.iter().map(|p| f(p)).collect();

        for _ in 0..self.max_iter {
            let mut order: Vec<usize> = (0..=dim).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            values = order.iter().map(|&i| values[i]).collect();

            let spread_x = simplex[1..]
                .iter()
                .flat_map(|p| p.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            let spread_f = (values[dim] - values[0]).abs();
            if spread_x < self.x_tol || spread_f < self.f_tol * (1.0 + values[0].abs()) && spread_x < 1e-6 {
                break;
            }

            let centroid: Vec<f64> = (0..dim)
                .map(|j| simplex[..dim].iter().map(|p| p[j]).sum::<f64>() / dim as f64)
                .collect();
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[dim])
                    .map(|(c, w)| c + t * (w - c))
                    .collect()
            };

            let reflected = along(-1.0);
            let fr = f(&reflected);
            if fr < values[0] {
                let expanded = along(-2.0);
                let fe = f(&expanded);
                if fe < fr {
                    simplex[dim] = expanded;
                    values[dim] = fe;
                } else {
                    simplex[dim] = reflected;
                    values[dim] = fr;
                }
            } else if fr < values[dim - 1] {
                simplex[dim] = reflected;
                values[dim] = fr;
            } else {
                let contracted = if fr < values[dim] { along(-0.5) } else { along(0.5) };
                let fc = f(&contracted);
                if fc < values[dim].min(fr) {
                    simplex[dim] = contracted;
                    values[dim] = fc;
                } else {
                    let best = simplex[0].clone();
                    for i in 1..=dim {
                        simplex[i] = best
                            .iter()
                            .zip(&simplex[i])
                            .map(|(b, p)| b + 0.5 * (p - b))
                            .collect();
                        values[i] = f(&simplex[i]);
                    }
                }
            }
        }
        let best = (0..=dim)
            .min_by(|&a, &b| values[a].total_cmp(&values[b]))
            .unwrap();
        (simplex[best].clone(), values[best])
    }
}
