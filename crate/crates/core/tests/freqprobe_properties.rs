use gssd::freqprobe::synthetic::{sinusoid_dataset, NearestCentroid, SINUSOID_FREQUENCIES, SINUSOID_SIDE};
use gssd::freqprobe::{
    apply_filter, bin_distance, dft2, half_max_radius, max_distance, parse_radii, scale_probe, sensitivity_sweep,
    IdealFilter, LabeledImages, Level, PassType, SweepOptions,
};
use gssd::ndtensor::Tensor;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn noise(seed: u64, shape: [usize; 4]) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(shape, |_| rng.random::<f64>())
}

fn add(a: &Tensor<f64>, b: &Tensor<f64>) -> Tensor<f64> {
    Tensor::new(a.shape(), a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn low_plus_high_reconstructs(seed in any::<u64>(), r in 0.0f64..25.0, h in 5usize..20, w in 5usize..20) {
        let f = noise(seed, [1, 2, h, w]);
        let lo = apply_filter(&f, IdealFilter::low(r)).unwrap();
        let hi = apply_filter(&f, IdealFilter::high(r)).unwrap();
        prop_assert!(add(&lo, &hi).max_abs_diff(&f) < 1e-10);
    }

    #[test]
    fn filters_are_idempotent(seed in any::<u64>(), r in 0.0f64..12.0, high in any::<bool>()) {
        let f = noise(seed, [1, 1, 16, 16]);
        let filt = if high { IdealFilter::high(r) } else { IdealFilter::low(r) };
        let once = apply_filter(&f, filt).unwrap();
        let twice = apply_filter(&once, filt).unwrap();
        prop_assert!(once.max_abs_diff(&twice) < 1e-10);
    }

    #[test]
    fn parseval_energy_split(seed in any::<u64>(), r in 0.0f64..15.0) {
        let f = noise(seed, [1, 1, 20, 20]);
        let total = dft2(&f).energy();
        let lo = dft2(&apply_filter(&f, IdealFilter::low(r)).unwrap()).energy();
        let hi = dft2(&apply_filter(&f, IdealFilter::high(r)).unwrap()).energy();
        prop_assert!(((lo + hi) - total).abs() <= 1e-8 * total);
        // Spatial-domain Parseval, unnormalized convention.
        let spatial: f64 = f.data().iter().map(|v| v * v).sum::<f64>() * 400.0;
        prop_assert!((spatial - total).abs() <= 1e-8 * total);
    }

    #[test]
    fn nested_low_pass_masks(seed in any::<u64>(), r1 in 0.0f64..8.0, extra in 0.1f64..8.0) {
        let (h, w) = (18, 18);
        let f = noise(seed, [1, 1, h, w]);
        let s1 = dft2(&apply_filter(&f, IdealFilter::low(r1)).unwrap());
        let s2 = dft2(&apply_filter(&f, IdealFilter::low(r1 + extra)).unwrap());
        for y in 0..h {
            for x in 0..w {
                if bin_distance(y, x, h, w) <= r1 {
                    let i = y * w + x;
                    prop_assert!((s1.data[i] - s2.data[i]).norm() < 1e-9);
                }
            }
        }
    }
}

#[test]
fn fft_round_trip_on_mnist_sized_images() {
    for seed in 0..5 {
        let f = noise(seed, [1, 1, 28, 28]);
        let back = gssd::freqprobe::idft2(&dft2(&f)).unwrap();
        assert!(back.max_abs_diff(&f) < 1e-10);
    }
}

#[test]
fn high_pass_at_zero_removes_only_the_mean() {
    let f = noise(7, [2, 3, 14, 15]);
    let hi = apply_filter(&f, IdealFilter::high(0.0)).unwrap();
    for n in 0..2 {
        for c in 0..3 {
            let p = f.plane(n, c);
            let mean = p.iter().sum::<f64>() / p.len() as f64;
            for (a, b) in hi.plane(n, c).iter().zip(p) {
                assert!((a - (b - mean)).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn per_class_accuracy_collapses_below_class_frequency() {
    let (train_x, train_y) = sinusoid_dataset(30, SINUSOID_SIDE, &SINUSOID_FREQUENCIES, 1);
    let (test_x, test_y) = sinusoid_dataset(20, SINUSOID_SIDE, &SINUSOID_FREQUENCIES, 2);
    let model = NearestCentroid::fit(&train_x, &train_y, 3);
    let radii = parse_radii("0:16:0.5").unwrap();
    let set = LabeledImages { images: &test_x, labels: &test_y, num_classes: 3 };
    let curves = sensitivity_sweep(&model, set, &radii, PassType::Low, Level::Class, SweepOptions::default()).unwrap();
    assert_eq!(curves.len(), 3);
    for (curve, &k) in curves.iter().zip(&SINUSOID_FREQUENCIES) {
        for p in &curve.points {
            let expected = if p.radius >= k as f64 { 1.0 } else { 0.0 };
            assert_eq!(p.accuracy(), expected, "class k={k} at r={}", p.radius);
        }
    }
}

#[test]
fn zooming_halves_the_half_max_radius() {
    let (train_x, train_y) = sinusoid_dataset(30, SINUSOID_SIDE, &SINUSOID_FREQUENCIES, 11);
    let (test_x, test_y) = sinusoid_dataset(20, SINUSOID_SIDE, &SINUSOID_FREQUENCIES, 12);
    let step = 1.0;
    let radii = parse_radii(&format!("0:{}:{step}", max_distance(SINUSOID_SIDE, SINUSOID_SIDE).ceil())).unwrap();
    let set = LabeledImages { images: &test_x, labels: &test_y, num_classes: 3 };
    let points = scale_probe(
        |factor, _| {
            let zoomed = gssd::freqprobe::rescale_and_crop(&train_x, factor).unwrap();
            NearestCentroid::fit(&zoomed, &train_y, 3)
        },
        set,
        &[1.0, 2.0],
        &radii,
        SweepOptions::default(),
    )
    .unwrap();
    let h1 = points[0].half_max.unwrap();
    let h2 = points[1].half_max.unwrap();
    assert_eq!(points[0].curve.final_accuracy(), Some(1.0));
    assert_eq!(points[1].curve.final_accuracy(), Some(1.0));
    assert!((h2 - h1 / 2.0).abs() <= step, "factor 1: {h1}, factor 2: {h2}");
    assert_eq!(half_max_radius(&points[0].curve).unwrap(), h1);
}

#[test]
fn serial_and_parallel_sweeps_agree() {
    let (x, y) = sinusoid_dataset(25, 16, &[2, 5, 7], 5);
    let noisy = add(&x, &noise(3, x.shape()).map(|v| 0.2 * (v - 0.5)));
    let model = NearestCentroid::fit(&x, &y, 3);
    let set = LabeledImages { images: &noisy, labels: &y, num_classes: 3 };
    let radii = parse_radii("0:12:0.5").unwrap();
    for level in [Level::Overall, Level::Class, Level::Sample] {
        let run = |parallel| {
            sensitivity_sweep(&model, set, &radii, PassType::Low, level, SweepOptions { batch_size: 7, parallel })
                .unwrap()
        };
        assert_eq!(run(false), run(true));
        assert_eq!(run(true), run(true));
    }
}

#[test]
fn full_radius_matches_unfiltered_accuracy() {
    let (x, y) = sinusoid_dataset(10, 16, &[2, 5, 7], 8);
    let noisy = add(&x, &noise(4, x.shape()).map(|v| 0.6 * (v - 0.5)));
    let model = NearestCentroid::fit(&x, &y, 3);
    use gssd::freqprobe::Classifier;
    let direct = model.classify(&noisy).iter().zip(&y).filter(|(a, b)| a == b).count();
    let set = LabeledImages { images: &noisy, labels: &y, num_classes: 3 };
    let curves =
        sensitivity_sweep(&model, set, &[1.0, max_distance(16, 16)], PassType::Low, Level::Overall, SweepOptions::default())
            .unwrap();
    assert_eq!(curves[0].points[1].n_correct, direct);
}
