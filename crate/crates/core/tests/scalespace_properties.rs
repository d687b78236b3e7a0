use gssd::ndtensor::Tensor;
use gssd::scalespace::{
    blur, build_scale_space, derivative, derivative_kernel, gaussian_kernel, DerivativeOrder, Padding,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn noise(seed: u64, side: usize) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn([1, 1, side, side], |_| rng.random::<f64>())
}

fn interior_max_diff(a: &Tensor<f64>, b: &Tensor<f64>, border: usize) -> f64 {
    let (h, w) = (a.height(), a.width());
    let mut worst = 0.0f64;
    for y in border..h - border {
        for x in border..w - border {
            worst = worst.max((a.at([0, 0, y, x]) - b.at([0, 0, y, x])).abs());
        }
    }
    worst
}

fn mirror_x(t: &Tensor<f64>) -> Tensor<f64> {
    let w = t.width();
    Tensor::from_fn(t.shape(), |[n, c, y, x]| t.at([n, c, y, w - 1 - x]))
}

#[test]
fn semigroup_on_random_images() {
    for seed in 0..5 {
        let f = noise(seed, 64);
        for (sa, sb) in [(1.0f64, 1.5f64), (0.8, 2.0), (1.5, 1.5)] {
            let total: f64 = (sa * sa + sb * sb).sqrt();
            let twice = blur(&blur(&f, sa, Padding::Replicate).unwrap(), sb, Padding::Replicate).unwrap();
            let once = blur(&f, total, Padding::Replicate).unwrap();
            let border = (3.0 * total).ceil() as usize;
            let scale = once.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let rel = interior_max_diff(&twice, &once, border) / scale;
            assert!(rel <= 1e-3, "seed {seed} ({sa},{sb}): {rel}");
        }
    }
}

#[test]
fn derivative_commutes_with_blur() {
    let (s1, s2) = (1.5f64, 2.0f64);
    let combined = (s1 * s1 + s2 * s2).sqrt();
    for seed in 10..13 {
        let f = noise(seed, 64);
        let blurred = blur(&f, s1, Padding::Replicate).unwrap();
        for o in DerivativeOrder::ALL {
            let chained = derivative(&blurred, s2, o.m, o.n, Padding::Replicate).unwrap();
            let direct = derivative(&f, combined, o.m, o.n, Padding::Replicate).unwrap();
            let border = gaussian_kernel(s1, None).unwrap().radius() + gaussian_kernel(s2, None).unwrap().radius();
            let d = interior_max_diff(&chained, &direct, border);
            assert!(d <= 1e-6, "seed {seed} {o:?}: {d}");
        }
    }
}

#[test]
fn constant_images_give_zero_derivatives() {
    let f = Tensor::<f64>::full([1, 1, 20, 20], 0.3);
    for o in DerivativeOrder::ALL {
        for p in [Padding::Replicate, Padding::Symmetric] {
            let d = derivative(&f, 1.1, o.m, o.n, p).unwrap();
            assert!(d.data().iter().all(|&v| v == 0.0), "{o:?} {p:?}");
        }
    }
}

#[test]
fn mixed_derivative_annihilates_one_dimensional_images() {
    let along_y = Tensor::<f64>::from_fn([1, 1, 24, 24], |[_, _, y, _]| (y as f64 * 0.7).sin());
    let along_x = Tensor::<f64>::from_fn([1, 1, 24, 24], |[_, _, _, x]| (x as f64 * 0.45).cos());
    for f in [along_y, along_x] {
        let d = derivative(&f, 1.0, 1, 1, Padding::Replicate).unwrap();
        let worst = d.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst < 1e-15, "{worst}");
    }
}

#[test]
fn scale_space_levels_preserve_mean() {
    // A compact blob on a flat background: replicate padding only ever
    // copies background, so every level keeps the mean.
    let f = Tensor::<f64>::from_fn([1, 1, 96, 96], |[_, _, y, x]| {
        let (dy, dx) = (y as f64 - 47.5, x as f64 - 47.5);
        0.2 + 0.7 * (-(dx * dx + dy * dy) / 50.0).exp()
    });
    let mean = f.sum() / f.len() as f64;
    let s = build_scale_space(&f, &[0.8, 1.6, 3.2, 4.0], Padding::Replicate).unwrap();
    for level in s.levels() {
        let m = level.image.sum() / level.image.len() as f64;
        assert!((m - mean).abs() < 1e-6, "sigma {}: {m} vs {mean}", level.sigma);
        assert_eq!(level.image.shape(), f.shape());
    }
}

#[test]
fn incremental_levels_match_direct_blur() {
    let f = noise(99, 64);
    let sigmas = [0.7, 1.2, 2.0, 2.6];
    let s = build_scale_space(&f, &sigmas, Padding::Replicate).unwrap();
    for level in s.levels() {
        let direct = blur(&f, level.sigma, Padding::Replicate).unwrap();
        let border = (3.0 * level.sigma).ceil() as usize;
        let rel = interior_max_diff(&level.image, &direct, border);
        assert!(rel <= 1e-3, "sigma {}: {rel}", level.sigma);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gaussian_kernels_have_unit_dc_gain(sigma in 0.3f64..6.0) {
        let k = gaussian_kernel(sigma, None).unwrap();
        let s: f64 = k.weights().iter().sum();
        prop_assert!((s - 1.0).abs() <= 1e-15 * k.weights().len() as f64);
    }

    #[test]
    fn derivative_kernels_have_exact_zero_dc_gain(sigma in 0.5f64..4.0, which in 0usize..5) {
        let o = DerivativeOrder::ALL[which];
        let k = derivative_kernel(sigma, o.m, o.n).unwrap();
        prop_assert_eq!(k.weights().iter().sum::<f64>(), 0.0);
        prop_assert_eq!(k.weights().iter().rev().sum::<f64>(), 0.0);
    }

    #[test]
    fn mirrored_inputs_mirror_responses(seed in any::<u64>(), which in 0usize..5, sigma in 0.7f64..2.0) {
        let o = DerivativeOrder::ALL[which];
        let f = noise(seed, 24);
        let a = mirror_x(&derivative(&f, sigma, o.m, o.n, Padding::Replicate).unwrap());
        let b = derivative(&mirror_x(&f), sigma, o.m, o.n, Padding::Replicate).unwrap();
        let sign = if o.m % 2 == 1 { -1.0 } else { 1.0 };
        prop_assert!(a.max_abs_diff(&b.map(|v| sign * v)) < 1e-12);
    }

    #[test]
    fn blur_is_separable(seed in any::<u64>(), sigma in 0.5f64..2.5) {
        let f = noise(seed, 20);
        let k = gaussian_kernel(sigma, None).unwrap();
        let direct = gssd::scalespace::convolve_2d(&f, k.weights(), k.radius(), Padding::Replicate);
        let sep = blur(&f, sigma, Padding::Replicate).unwrap();
        prop_assert!(direct.max_abs_diff(&sep) < 1e-12);
    }
}
