use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use volstc_core::transform::{
    build_volume, compute_semivariogram, cross_validate, cv_slices, krige_slice, slice_samples,
    slice_variogram, smooth_series, BuildOptions, CvOptions, Method, OrdinaryKriging, SamplePoint,
    VariogramModel,
};
use volstc_core::{GridSpec, StDataset, StSeries, Station, ValueRange};

fn gamma(model: &VariogramModel, h: f64) -> f64 {
    if h == 0.0 {
        0.0
    } else {
        model.nugget + model.sill * (1.0 - (-3.0 * (h / model.range).powi(2)).exp())
    }
}

/// Dense solve of the bordered system for one location.
fn oracle_predict(points: &[SamplePoint], model: &VariogramModel, x: f64, y: f64) -> f64 {
    let k = points.len();
    let mut a = DMatrix::<f64>::zeros(k + 1, k + 1);
    let mut b = DVector::<f64>::zeros(k + 1);
    for i in 0..k {
        for j in 0..k {
            let h = ((points[i].x - points[j].x).powi(2) + (points[i].y - points[j].y).powi(2)).sqrt();
            a[(i, j)] = gamma(model, h);
        }
        a[(i, k)] = 1.0;
        a[(k, i)] = 1.0;
        b[i] = gamma(model, ((points[i].x - x).powi(2) + (points[i].y - y).powi(2)).sqrt());
    }
    b[k] = 1.0;
    let w = a.lu().solve(&b).expect("oracle system solvable");
    (0..k).map(|i| w[i] * points[i].z).sum()
}

fn pt(x: f64, y: f64, z: f64, station: usize) -> SamplePoint {
    SamplePoint { x, y, z, station }
}

#[test]
fn kriging_matches_dense_oracle_on_small_grid() {
    let grid = GridSpec::new((0.0, 0.0, 1.0, 1.0), 4, 4).unwrap();
    let points = vec![
        pt(0.3, 0.7, 3.0, 0),
        pt(3.6, 0.2, 8.5, 1),
        pt(1.9, 2.1, 5.0, 2),
        pt(0.5, 3.4, 1.0, 3),
        pt(3.1, 3.8, 9.0, 4),
    ];
    let model = VariogramModel::new(0.1, 6.0, 3.5).unwrap();
    let range = ValueRange::new(-100.0, 100.0).unwrap();
    let field = krige_slice(&points, &grid, &model, range).unwrap();
    for y in 0..4 {
        for x in 0..4 {
            let want = oracle_predict(&points, &model, x as f64 + 0.5, y as f64 + 0.5);
            let got = field[y * 4 + x];
            assert!((got - want).abs() <= 1e-9, "cell ({x},{y}): {got} vs {want}");
        }
    }
}

#[test]
fn kriging_exact_at_station_cells() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let grid = GridSpec::new((0.0, 0.0, 1.0, 1.0), 40, 40).unwrap();
    let mut used = std::collections::HashSet::new();
    let mut points = Vec::new();
    while points.len() < 20 {
        let (cx, cy) = (rng.random_range(0..40usize), rng.random_range(0..40usize));
        if used.insert((cx, cy)) {
            let z = 10.0 + 5.0 * ((cx as f64) * 0.2).sin() + rng.random_range(-1.0..1.0);
            points.push(pt(cx as f64 + 0.5, cy as f64 + 0.5, z, points.len()));
        }
    }
    let model = VariogramModel::new(0.0, 4.0, 12.0).unwrap();
    let field = krige_slice(&points, &grid, &model, ValueRange::new(-50.0, 50.0).unwrap()).unwrap();
    for p in &points {
        let cell = (p.y as usize) * 40 + p.x as usize;
        assert!((field[cell] - p.z).abs() < 1e-6, "{} vs {}", field[cell], p.z);
    }
}

#[test]
fn semivariogram_matches_brute_force_binning() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let points: Vec<SamplePoint> = (0..100)
        .map(|i| {
            let (x, y) = (rng.random_range(0.0..30.0), rng.random_range(0.0..30.0));
            pt(x, y, (x * 0.3).sin() * 4.0 + y * 0.1, i)
        })
        .collect();
    let n_lags = 8;
    let bins = compute_semivariogram(&points, n_lags).unwrap();

    let mut max_d = 0.0f64;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            max_d = max_d.max(a.distance(b));
        }
    }
    let width = max_d / n_lags as f64;
    let mut sums = vec![0.0; n_lags];
    let mut counts = vec![0usize; n_lags];
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            let d = a.distance(b);
            // bin k covers (k*w, (k+1)*w]
            let mut k = n_lags - 1;
            for cand in 0..n_lags {
                if d <= (cand + 1) as f64 * width {
                    k = cand;
                    break;
                }
            }
            sums[k] += 0.5 * (a.z - b.z).powi(2);
            counts[k] += 1;
        }
    }
    let expected: Vec<(f64, f64, usize)> = (0..n_lags)
        .filter(|&k| counts[k] > 0)
        .map(|k| ((k as f64 + 0.5) * width, sums[k] / counts[k] as f64, counts[k]))
        .collect();
    assert_eq!(bins.len(), expected.len());
    for (b, e) in bins.iter().zip(&expected) {
        assert!((b.lag - e.0).abs() < 1e-9);
        assert!((b.gamma - e.1).abs() < 1e-9 * (1.0 + e.1));
        assert_eq!(b.pairs, e.2);
    }
}

fn field(x: f64, y: f64, t: usize) -> f64 {
    20.0 + 6.0 * (x * 0.15 + t as f64 * 0.05).sin() + 4.0 * (y * 0.11).cos()
}

fn synthetic_dataset(stations: usize, steps: usize, seed: u64, grid: &GridSpec) -> StDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut st = Vec::new();
    let mut series = Vec::new();
    for i in 0..stations {
        let lon = rng.random_range(grid.lon0..grid.lon1);
        let lat = rng.random_range(grid.lat0..grid.lat1);
        let (cx, cy) = grid.to_cell_coords(lon, lat);
        st.push(Station { id: format!("s{i}"), lon, lat });
        series.push(StSeries {
            station_id: format!("s{i}"),
            values: (0..steps).map(|t| Some(field(cx, cy, t) as f32)).collect(),
        });
    }
    StDataset::new(st, series, 0, 3600, steps, ValueRange::new(0.0, 50.0).unwrap()).unwrap()
}

#[test]
fn cross_validation_matches_brute_force_leave_one_out() {
    let grid = GridSpec::new((10.0, 40.0, 12.0, 42.0), 30, 30).unwrap();
    let ds = synthetic_dataset(20, 12, 21, &grid);
    let opts = CvOptions { max_slices: 6, ..CvOptions::default() };
    let report = cross_validate(&ds, &grid, Method::Kriging, &opts).unwrap();

    let range = ds.value_range();
    let mut abs = 0.0;
    let mut sq = 0.0;
    let mut count = 0usize;
    for t in cv_slices(ds.steps(), opts.max_slices) {
        let samples = slice_samples(&ds, &grid, t).points;
        for (i, held) in samples.iter().enumerate() {
            let rest: Vec<SamplePoint> = samples.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, p)| *p).collect();
            let model = slice_variogram(&rest, opts.n_lags).unwrap();
            let pred = range.clamp(oracle_predict(&rest, &model, held.x, held.y));
            let e = pred - held.z;
            abs += e.abs();
            sq += e * e;
            count += 1;
        }
    }
    let (mae, rmse) = (abs / count as f64, (sq / count as f64).sqrt());
    assert_eq!(report.predictions, count);
    assert!((report.mae - mae).abs() < 1e-9 * (1.0 + mae), "{} vs {mae}", report.mae);
    assert!((report.rmse - rmse).abs() < 1e-9 * (1.0 + rmse));
    assert!(report.mae <= report.rmse);
}

#[test]
fn cross_validation_of_identical_readings_is_exact() {
    let grid = GridSpec::new((0.0, 0.0, 1.0, 1.0), 10, 10).unwrap();
    let mut ds = synthetic_dataset(6, 5, 2, &grid);
    let stations = ds.stations().to_vec();
    let series = stations
        .iter()
        .map(|s| StSeries { station_id: s.id.clone(), values: vec![Some(12.5); 5] })
        .collect();
    ds = StDataset::new(stations, series, 0, 3600, 5, ds.value_range()).unwrap();
    for method in [Method::Kriging, Method::Idw] {
        let r = cross_validate(&ds, &grid, method, &CvOptions::default()).unwrap();
        assert_eq!((r.mae, r.rmse), (0.0, 0.0));
    }
}

#[test]
fn predictor_weights_are_affine() {
    let points = vec![pt(1.0, 1.0, 0.0, 0), pt(5.0, 2.0, 1.0, 1), pt(3.0, 6.0, 4.0, 2), pt(7.0, 7.0, 2.0, 3)];
    let k = OrdinaryKriging::new(&points, VariogramModel::new(0.0, 1.0, 4.0).unwrap()).unwrap();
    for (x, y) in [(0.0, 0.0), (4.0, 4.0), (20.0, -3.0)] {
        let w = k.weights(x, y);
        let s: f64 = w[..points.len()].iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }
}

#[test]
fn build_is_deterministic_across_pool_sizes() {
    let grid = GridSpec::new((0.0, 0.0, 1.0, 1.0), 16, 16).unwrap();
    let ds = synthetic_dataset(12, 30, 8, &grid);
    let opts = BuildOptions::new(Method::Kriging, 5);
    let a = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| build_volume(&ds, &grid, &opts).unwrap());
    let b = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap().install(|| build_volume(&ds, &grid, &opts).unwrap());
    assert_eq!(a.data(), b.data());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn smoothing_keeps_constants(c in -1e6f64..1e6, len in 1usize..80, window in 1usize..40) {
        let out = smooth_series(&vec![c; len], window);
        prop_assert!(out.iter().all(|&v| v == c));
    }

    #[test]
    fn kriging_weights_sum_to_one(
        raw in prop::collection::vec((0.0f64..20.0, 0.0f64..20.0, -5.0f64..5.0), 3..12),
        qx in -5.0f64..25.0, qy in -5.0f64..25.0,
    ) {
        let mut points: Vec<SamplePoint> = Vec::new();
        for (i, (x, y, z)) in raw.into_iter().enumerate() {
            if points.iter().all(|p| (p.x - x).hypot(p.y - y) > 0.5) {
                points.push(pt(x, y, z, i));
            }
        }
        prop_assume!(points.len() >= 2);
        let k = OrdinaryKriging::new(&points, VariogramModel::new(0.05, 1.0, 6.0).unwrap()).unwrap();
        let w = k.weights(qx, qy);
        let s: f64 = w[..points.len()].iter().sum();
        prop_assert!((s - 1.0).abs() < 1e-9);
    }
}
