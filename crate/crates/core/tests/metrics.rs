use num_complex::Complex64;
use proptest::prelude::*;

use mwt_core::dielectrics::TissueTable;
use mwt_core::forward::ScatteringMatrix;
use mwt_core::mesher::generate_inversion_mesh;
use mwt_core::metrics::{
    absolute_error, add_noise, contrast, exact_permittivity, l2_err, to_pgm, NoiseConvention, NoiseSpec, RegionMask,
};
use mwt_core::scene::{build_scene, ChamberSpec, PhantomSpec, Variant};
use mwt_core::Error;

fn test_matrix(n: usize) -> ScatteringMatrix {
    let entries = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| Complex64::new(0.5 + 0.01 * i as f64, -0.25 - 0.01 * j as f64))
                .collect()
        })
        .collect();
    ScatteringMatrix::new(entries, 1e9, "test")
}

fn perturbations(noisy: &ScatteringMatrix, clean: &ScatteringMatrix) -> (Vec<f64>, Vec<f64>) {
    noisy
        .entries
        .iter()
        .flatten()
        .zip(clean.entries.iter().flatten())
        .map(|(a, b)| (a.re / b.re - 1.0, a.im / b.im - 1.0))
        .unzip()
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

#[test]
fn noise_at_23_db_has_the_nominal_spread_and_no_bias() {
    let clean = test_matrix(100);
    let spec = NoiseSpec::new(23.0, 11);
    let sigma = 0.0707946;
    assert!((spec.sigma() - sigma).abs() < 1e-7);
    let (re, im) = perturbations(&add_noise(&clean, &spec).unwrap(), &clean);
    for part in [re, im] {
        let (m, s) = mean_std(&part);
        assert!((s / sigma - 1.0).abs() <= 0.05, "std {s}");
        assert!(m.abs() <= 3.0 * sigma / 100.0, "mean {m}");
    }
}

#[test]
fn noise_is_a_pure_function_of_seed_and_data() {
    let clean = test_matrix(12);
    let a = add_noise(&clean, &NoiseSpec::new(15.0, 5)).unwrap();
    let b = add_noise(&clean, &NoiseSpec::new(15.0, 5)).unwrap();
    assert_eq!(a.to_text(), b.to_text());
    let c = add_noise(&clean, &NoiseSpec::new(15.0, 6)).unwrap();
    assert_ne!(a.entries, c.entries);
    assert_eq!(a.noise, Some(NoiseSpec::new(15.0, 5)));
    // Real and imaginary parts get independent draws.
    let (re, im) = perturbations(&a, &clean);
    assert!(re.iter().zip(&im).any(|(x, y)| (x - y).abs() > 1e-6));
}

#[test]
fn infinite_snr_returns_the_input_unchanged() {
    let clean = test_matrix(7);
    let out = add_noise(&clean, &NoiseSpec::none()).unwrap();
    assert_eq!(out, clean);
    assert!(add_noise(&clean, &NoiseSpec::new(f64::NAN, 0)).is_err());
}

#[test]
fn power_convention_squares_sigma() {
    let mut spec = NoiseSpec::new(20.0, 1);
    assert!((spec.sigma() - 0.1).abs() < 1e-15);
    spec.convention = NoiseConvention::Power;
    assert!((spec.sigma() - 0.01).abs() < 1e-15);
}

#[test]
fn exact_contrast_is_fluid_minus_muscle() {
    let table = TissueTable::shoulder_1ghz();
    let ch = ChamberSpec::reference(16);
    let injured = build_scene(&ch, &PhantomSpec::reference(Variant::Partial)).unwrap();
    let healthy = build_scene(&ch, &PhantomSpec::reference(Variant::Healthy)).unwrap();
    let mesh = generate_inversion_mesh(&injured, 6.0).unwrap();
    let ei = exact_permittivity(&injured, &table, &mesh).unwrap();
    let eh = exact_permittivity(&healthy, &table, &mesh).unwrap();
    let mask = RegionMask::inside(&mesh, injured.tear_shape().unwrap());
    assert!(mask.len() >= 3);
    let c = contrast(&ei, &eh, &mask).unwrap();
    assert!((c.mean - Complex64::new(13.2, -11.57)).norm() < 1e-9, "{}", c.mean);
    let same = contrast(&ei, &ei, &mask).unwrap();
    assert_eq!(same.mean, Complex64::default());
    assert!(same.field.iter().all(|v| *v == Complex64::default()));
    assert!(matches!(contrast(&ei, &eh[1..], &mask), Err(Error::Dimension(_))));
}

#[test]
fn absolute_error_examples() {
    let exact: Vec<Complex64> = (0..10).map(|i| Complex64::new(40.0 + i as f64, -10.0)).collect();
    let (re, im) = absolute_error(&exact, &exact).unwrap();
    assert!(re.iter().chain(&im).all(|&v| v == 0.0));
    let shift = Complex64::new(-2.5, 0.75);
    let moved: Vec<Complex64> = exact.iter().map(|v| v + shift).collect();
    let (re, im) = absolute_error(&moved, &exact).unwrap();
    assert!(re.iter().all(|&v| (v - 2.5).abs() < 1e-12));
    assert!(im.iter().all(|&v| (v - 0.75).abs() < 1e-12));
}

#[test]
fn pgm_has_the_requested_size() {
    let ch = ChamberSpec::reference(8);
    let scene = mwt_core::scene::Scene::empty(&ch).unwrap();
    let mesh = generate_inversion_mesh(&scene, 4.0).unwrap();
    let values: Vec<f64> = mesh.vertices().iter().map(|p| p[0]).collect();
    let img = to_pgm(&mesh, &values, 64).unwrap();
    let header = b"P5\n64 64\n255\n";
    assert_eq!(&img[..header.len()], header);
    assert_eq!(img.len(), header.len() + 64 * 64);
    assert!(to_pgm(&mesh, &values[1..], 64).is_err());
}

proptest! {
    #[test]
    fn l2_err_ignores_node_order_and_is_homogeneous(
        vals in prop::collection::vec((1.0f64..80.0, -30.0f64..-0.1), 4..40),
        noise in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 40),
        scale in 0.1f64..10.0,
        rot in 0usize..40,
    ) {
        let n = vals.len();
        let exact: Vec<Complex64> = vals.iter().map(|&(a, b)| Complex64::new(a, b)).collect();
        let recon: Vec<Complex64> = exact.iter().zip(&noise).map(|(e, &(a, b))| e + Complex64::new(a, b)).collect();
        let mask = RegionMask { nodes: (0..n).collect() };
        let base = l2_err(&recon, &exact, &mask).unwrap();

        let k = rot % n;
        let rotate = |v: &[Complex64]| -> Vec<Complex64> { v[k..].iter().chain(&v[..k]).copied().collect() };
        let rotated = l2_err(&rotate(&recon), &rotate(&exact), &mask).unwrap();
        prop_assert!((rotated.0 - base.0).abs() <= 1e-9 * base.0.max(1.0));
        prop_assert!((rotated.1 - base.1).abs() <= 1e-9 * base.1.max(1.0));

        let s = |v: &[Complex64]| -> Vec<Complex64> { v.iter().map(|z| z * scale).collect() };
        let scaled = l2_err(&s(&recon), &s(&exact), &mask).unwrap();
        prop_assert!((scaled.0 - base.0).abs() <= 1e-9 * base.0.max(1.0));

        let ten: Vec<Complex64> = exact.iter().map(|e| Complex64::new(1.1 * e.re, e.im)).collect();
        let (re, im) = l2_err(&ten, &exact, &mask).unwrap();
        prop_assert!((re - 10.0).abs() < 1e-9);
        prop_assert_eq!(im, 0.0);
    }

    #[test]
    fn noise_draws_do_not_depend_on_evaluation_order(seed in any::<u64>(), n in 2usize..20) {
        let clean = test_matrix(n);
        let spec = NoiseSpec::new(10.0, seed);
        let full = add_noise(&clean, &spec).unwrap();
        for i in 0..n {
            for j in 0..n {
                let (n1, n2) = mwt_core::metrics::entry_draws(seed, n, i, j);
                let s = clean.get(i, j);
                let expect = Complex64::new(s.re * (1.0 + spec.sigma() * n1), s.im * (1.0 + spec.sigma() * n2));
                prop_assert_eq!(full.get(i, j), expect);
            }
        }
    }
}
