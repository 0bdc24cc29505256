use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use volstc_core::render::{
    composite, gradient, march_ray, render_frame, sample_volume, shade_phong, Accumulator,
    ContextOptions, RenderSettings,
};
use volstc_core::{Camera, GridSpec, Ray, SelectionState, SpaceTimeVolume, Spotlight, ValueRange, Vec3};

fn volume(m: usize, n: usize, t: usize, f: impl Fn(f64, f64, f64) -> f64) -> SpaceTimeVolume {
    let grid = GridSpec::new((0.0, 0.0, 1.0, 1.0), m, n).unwrap();
    SpaceTimeVolume::from_fn(grid, t, ValueRange::new(0.0, 100.0).unwrap(), |x, y, t| {
        f(x as f64 + 0.5, y as f64 + 0.5, t as f64 + 0.5) as f32
    })
    .unwrap()
}

fn blobs(m: usize, n: usize, t: usize) -> SpaceTimeVolume {
    volume(m, n, t, |x, y, t| {
        let a = (-((x - 10.0).powi(2) + (y - 12.0).powi(2) + (t - 8.0).powi(2)) / 30.0).exp();
        let b = (-((x - 30.0).powi(2) + (y - 25.0).powi(2) + (t - 30.0).powi(2)) / 60.0).exp();
        95.0 * a + 80.0 * b + 2.0
    })
}

/// Straightforward march without empty-space skipping.
fn reference_march(vol: &SpaceTimeVolume, ray: &Ray, s: &RenderSettings) -> (Accumulator, Option<Vec3>) {
    let zs = s.z_scale;
    let bounds = volstc_core::volume_to_render_space(vol, zs).unwrap();
    let mut acc = Accumulator::default();
    let Some((t_enter, t_exit)) = bounds.intersect(ray) else {
        return (acc, None);
    };
    let eps = s.step * 1e-9;
    let view = -ray.dir;
    let lit = |base: [f64; 3], p: Vec3, force: bool| {
        let g = gradient(vol, p, zs);
        if !force && g.length() <= s.gradient_min {
            return base;
        }
        let mut nrm = -Vec3::new(g.x, g.y, g.z / zs);
        if nrm.dot(view) < 0.0 {
            nrm = -nrm;
        }
        shade_phong(base, nrm.normalize(), view, &s.lighting)
    };
    let mut first = None;
    let mut prev: Option<(f64, Vec3)> = None;
    let mut k = 0usize;
    loop {
        let t0 = t_enter + k as f64 * s.step;
        if t0 >= t_exit - eps {
            break;
        }
        k += 1;
        let len = s.step.min(t_exit - t0);
        let p = ray.at(t0 + 0.5 * len);
        let Some(v) = sample_volume(vol, p, zs) else { continue };
        if s.surface_enabled {
            if let Some((pv, pp)) = prev {
                let li = s.lambda_i;
                if (pv < li && li <= v) || (v < li && li <= pv) {
                    let f = ((li - pv) / (v - pv)).clamp(0.0, 1.0);
                    let hit = pp + (p - pp) * f;
                    let c = lit(s.tf.color(s.tf.normalize(li)), hit, true);
                    acc = composite(acc, c, 1.0);
                    first = first.or(Some(hit));
                    break;
                }
            }
            prev = Some((v, p));
        }
        if v >= s.lambda_v {
            let (base, a) = s.tf.transfer(v, len);
            if a > 0.0 {
                let c = lit(base, p, false);
                acc = composite(acc, [c[0] * a, c[1] * a, c[2] * a], a);
            }
            first = first.or(Some(p));
            if acc.alpha >= s.early_termination_alpha {
                break;
            }
        }
    }
    (acc, first)
}

fn random_ray(rng: &mut ChaCha8Rng, center: Vec3, radius: f64) -> Ray {
    let dir = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)).normalize();
    let target = center
        + Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * (radius * 0.6);
    Ray::new(target - dir * (radius * 3.0), dir)
}

#[test]
fn skipping_matches_reference_march() {
    let vol = blobs(40, 36, 44);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let full = SelectionState::full(vol.steps());
    for (surface, lambda_v, lambda_i, zs) in [
        (false, 0.0, 0.0, 1.0),
        (false, 30.0, 30.0, 1.0),
        (false, 60.0, 60.0, 0.7),
        (true, 101.0, 45.0, 1.0),
        (true, 50.0, 20.0, 1.3),
    ] {
        let mut s = RenderSettings::for_volume(&vol).with_lambda_v(lambda_v);
        s.surface_enabled = surface;
        s.lambda_i = lambda_i;
        s.z_scale = zs;
        s.step = 0.5 * zs.min(1.0);
        let b = volstc_core::volume_to_render_space(&vol, zs).unwrap();
        for _ in 0..300 {
            let ray = random_ray(&mut rng, b.center(), b.size().length() * 0.5);
            let got = march_ray(&vol, &ray, &s, &full);
            let (acc, first) = reference_march(&vol, &ray, &s);
            assert!((got.alpha - acc.alpha).abs() <= 1e-12, "{} vs {}", got.alpha, acc.alpha);
            let want = acc.over(s.background);
            for c in 0..3 {
                assert!((got.rgb[c] - want[c]).abs() <= 1e-12);
            }
            match (got.first_hit, first) {
                (None, None) => {}
                (Some(a), Some(b)) => assert!((a - b).length() < 1e-9),
                other => panic!("first hit mismatch {other:?}"),
            }
        }
    }
}

#[test]
fn front_to_back_matches_over_fold() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let samples: Vec<([f64; 3], f64)> = (0..64)
            .map(|_| {
                let a: f64 = rng.random_range(0.0..0.3);
                ([rng.random::<f64>() * a, rng.random::<f64>() * a, rng.random::<f64>() * a], a)
            })
            .collect();
        let acc = samples.iter().fold(Accumulator::default(), |acc, &(c, a)| composite(acc, c, a));
        // back-to-front over operator
        let mut color = [0.0; 3];
        let mut alpha = 0.0;
        for &(c, a) in samples.iter().rev() {
            for i in 0..3 {
                color[i] = c[i] + (1.0 - a) * color[i];
            }
            alpha = a + (1.0 - a) * alpha;
        }
        assert!((acc.alpha - alpha).abs() < 1e-6);
        for i in 0..3 {
            assert!((acc.color[i] - color[i]).abs() < 1e-6);
        }
    }
}

fn homogeneous(value: f64) -> SpaceTimeVolume {
    volume(10, 4, 4, |_, _, _| value)
}

fn homogeneous_settings(vol: &SpaceTimeVolume, opacity: f64, step: f64) -> RenderSettings {
    let mut s = RenderSettings::for_volume(vol);
    s.tf.opacity_max = opacity;
    s.step = step;
    s.z_scale = 1.0;
    s.early_termination_alpha = 1.0;
    s
}

#[test]
fn homogeneous_ten_samples() {
    let vol = homogeneous(100.0);
    let s = homogeneous_settings(&vol, 0.1, 1.0);
    let ray = Ray::new(Vec3::new(-5.0, 2.0, 2.0), Vec3::new(1.0, 0.0, 0.0));
    let out = march_ray(&vol, &ray, &s, &SelectionState::full(4));
    assert!((out.alpha - (1.0 - 0.9f64.powi(10))).abs() < 1e-6, "{}", out.alpha);
    assert!((out.alpha - 0.6513).abs() < 1e-4);
}

#[test]
fn step_halving_keeps_alpha() {
    let vol = homogeneous(100.0);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let b = volstc_core::volume_to_render_space(&vol, 1.0).unwrap();
    for _ in 0..200 {
        let ray = random_ray(&mut rng, b.center(), 3.0);
        let a = march_ray(&vol, &ray, &homogeneous_settings(&vol, 0.2, 0.5), &SelectionState::full(4)).alpha;
        let h = march_ray(&vol, &ray, &homogeneous_settings(&vol, 0.2, 0.25), &SelectionState::full(4)).alpha;
        assert!((a - h).abs() < 1e-3, "{a} vs {h}");
    }
}

#[test]
fn early_termination_error_is_bounded() {
    let vol = blobs(40, 36, 44);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let b = volstc_core::volume_to_render_space(&vol, 1.0).unwrap();
    let mut s = RenderSettings::for_volume(&vol);
    s.z_scale = 1.0;
    s.tf.opacity_max = 1.0;
    s.tf.opacity_gamma = 0.5;
    let mut exact = s.clone();
    exact.early_termination_alpha = 1.0;
    let full = SelectionState::full(vol.steps());
    for _ in 0..300 {
        let ray = random_ray(&mut rng, b.center(), 20.0);
        let a = march_ray(&vol, &ray, &s, &full);
        let e = march_ray(&vol, &ray, &exact, &full);
        for c in 0..3 {
            assert!((a.rgb[c] - e.rgb[c]).abs() <= 1.0 - s.early_termination_alpha + 1e-12);
        }
    }
}

#[test]
fn all_below_threshold_is_background() {
    let vol = homogeneous(10.0);
    let s = RenderSettings::for_volume(&vol).with_lambda_v(50.0);
    let ray = Ray::new(Vec3::new(-5.0, 2.0, 2.0), Vec3::new(1.0, 0.1, 0.05));
    let out = march_ray(&vol, &ray, &s, &SelectionState::full(4));
    assert_eq!((out.rgb, out.alpha, out.first_hit), (s.background, 0.0, None));
    let miss = Ray::new(Vec3::new(-5.0, 2.0, 2.0), Vec3::new(-1.0, 0.0, 0.0));
    assert_eq!(march_ray(&vol, &miss, &s, &SelectionState::full(4)).alpha, 0.0);
}

/// Distance of the first intersection of `ray` with a sphere, if any.
fn ray_sphere(ray: &Ray, c: Vec3, r: f64) -> Option<f64> {
    let oc = ray.origin - c;
    let b = oc.dot(ray.dir);
    let disc = b * b - (oc.dot(oc) - r * r);
    (disc >= 0.0).then(|| -b - disc.sqrt())
}

#[test]
fn isosurface_depth_within_one_step() {
    let c = Vec3::splat(24.0);
    let radius = 14.0;
    let vol = volume(48, 48, 48, |x, y, t| (Vec3::new(x, y, t) - c).length());
    let mut s = RenderSettings::for_volume(&vol).with_lambda_v(101.0);
    s.surface_enabled = true;
    s.lambda_i = radius;
    s.z_scale = 1.0;
    s.step = 0.5;
    let full = SelectionState::full(48);
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut hits = 0;
    while hits < 1000 {
        let ray = random_ray(&mut rng, c, radius);
        let Some(t_true) = ray_sphere(&ray, c, radius) else { continue };
        let out = march_ray(&vol, &ray, &s, &full);
        let hit = out.first_hit.expect("ray crossing the sphere must hit");
        let t_hit = (hit - ray.origin).dot(ray.dir);
        assert!((t_hit - t_true).abs() <= s.step, "{t_hit} vs {t_true}");
        assert_eq!(out.alpha, 1.0);
        hits += 1;
    }
}

fn clipped_copy(vol: &SpaceTimeVolume, sel: &SelectionState, fill: f32) -> SpaceTimeVolume {
    let mut data = vol.data().to_vec();
    for (i, v) in data.iter_mut().enumerate() {
        let (x, y, t) = vol.decode(i);
        if !sel.includes_voxel(x, y, t) {
            *v = fill;
        }
    }
    SpaceTimeVolume::new(*vol.grid(), vol.steps(), vol.t0(), vol.dt(), vol.value_range(), data).unwrap()
}

#[test]
fn clipping_equals_lowered_voxels() {
    let vol = blobs(40, 36, 44);
    let sel = SelectionState {
        time_range: (5, 33),
        spotlight: Some(Spotlight { cx: 14.0, cy: 15.0, r: 11.0 }),
        selected_cluster: None,
    };
    let lowered = clipped_copy(&vol, &sel, vol.value_range().min as f32);
    let b = volstc_core::volume_to_render_space(&vol, vol.default_z_scale()).unwrap();
    let cam = Camera::framing(&b, 35.0, 25.0, 96, 80);
    for (surface, lv, li) in [(false, 5.0, 5.0), (true, 40.0, 20.0)] {
        let mut s = RenderSettings::for_volume(&vol).with_lambda_v(lv);
        s.surface_enabled = surface;
        s.lambda_i = li;
        let ctx = ContextOptions::bare();
        let (a, _) = render_frame(&vol, &cam, &s, &sel, &ctx).unwrap();
        let (z, _) = render_frame(&lowered, &cam, &s, &SelectionState::full(44), &ctx).unwrap();
        assert!(a.pixels == z.pixels, "clipped frame differs (surface={surface})");
    }
}

#[test]
fn frames_are_deterministic_and_empty_frames_uniform() {
    let vol = blobs(24, 24, 24);
    let b = volstc_core::volume_to_render_space(&vol, vol.default_z_scale()).unwrap();
    let cam = Camera::framing(&b, 20.0, 30.0, 64, 48);
    let s = RenderSettings::for_volume(&vol).with_lambda_v(10.0);
    let sel = SelectionState::full(24);
    let ctx = ContextOptions::default();
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let (a, ma) = one.install(|| render_frame(&vol, &cam, &s, &sel, &ctx).unwrap());
    let (b2, mb) = many.install(|| render_frame(&vol, &cam, &s, &sel, &ctx).unwrap());
    assert!(a.pixels == b2.pixels);
    assert_eq!(ma, mb);

    let empty = RenderSettings::for_volume(&vol).with_lambda_v(100.0);
    let (img, _) = render_frame(&vol, &cam, &empty, &sel, &ContextOptions::bare()).unwrap();
    assert!(img.pixels.chunks(4).all(|p| p == [255, 255, 255, 255]));

    let mut zero = cam;
    zero.width = 0;
    assert!(render_frame(&vol, &zero, &s, &sel, &ctx).is_err());
}

#[test]
fn axis_boxes_tile_the_time_axis() {
    let vol = blobs(24, 24, 50);
    let b = volstc_core::volume_to_render_space(&vol, vol.default_z_scale()).unwrap();
    let cam = Camera::framing(&b, 20.0, 30.0, 64, 48);
    let s = RenderSettings::for_volume(&vol);
    let (_, meta) = render_frame(&vol, &cam, &s, &SelectionState::full(50), &ContextOptions::default()).unwrap();
    assert_eq!(meta.axis_boxes.len(), 6);
    assert_eq!(meta.axis_boxes[0].t_start, 0);
    assert_eq!(meta.axis_boxes.last().unwrap().t_end, 50);
    for w in meta.axis_boxes.windows(2) {
        assert_eq!(w[0].t_end, w[1].t_start);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn accumulator_stays_normalized(samples in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0), 1..80)) {
        let mut acc = Accumulator::default();
        for (r, g, b, a) in samples {
            let next = composite(acc, [r * a, g * a, b * a], a);
            prop_assert!(next.alpha >= acc.alpha);
            prop_assert!(next.alpha <= 1.0 + 1e-12);
            for c in next.color {
                prop_assert!(c <= next.alpha + 1e-6);
            }
            acc = next;
        }
    }
}
