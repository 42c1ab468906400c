use num_complex::Complex64;
use proptest::prelude::*;

use mwt_core::dielectrics::{
    self, kraszewski_fraction, permittivity_from_kappa, to_complex, wavelength, wavenumber, wavenumber_squared,
    ComplexPermittivity, TissueTable,
};
use mwt_core::scene::ChamberSpec;

// Conductivities σ = ε″·2πf·ε₀ at 1 GHz, evaluated independently.
const TABLE: [(&str, f64, f64, f64); 5] = [
    ("bone", 12.4, 2.79, 0.155215),
    ("tendon", 45.6, 13.66, 0.759940),
    ("muscle", 54.8, 17.43, 0.969675),
    ("skin", 40.9, 16.17, 0.899578),
    ("sf", 68.0, 29.0, 1.613343),
];

fn four_figures(a: f64, b: f64) -> bool {
    (a - b).abs() <= 5e-4 * b.abs()
}

#[test]
fn tissue_values_from_hand_conductivities() {
    for (name, re, im, sigma) in TABLE {
        let eps = to_complex(re, sigma, 1e9).unwrap();
        assert!(four_figures(eps.re, re), "{name}: {eps}");
        assert!(four_figures(-eps.im, im), "{name}: {eps}");
        let builtin = TissueTable::shoulder_1ghz().get(name).unwrap();
        assert!(four_figures(
            ComplexPermittivity::from_complex(builtin, 1e9).unwrap().sigma,
            sigma
        ));
    }
}

#[test]
fn matching_medium_propagation() {
    let eps = Complex64::new(54.8, -17.43);
    let kappa = wavenumber_squared(eps, 1e9).unwrap();
    assert!((kappa - Complex64::new(24071.26, -7656.24)).norm() < 0.01);
    let k = wavenumber(eps, 1e9).unwrap();
    assert!((k - Complex64::new(157.0522, -24.3748)).norm() < 1e-3);
    assert!((wavelength(eps, 1e9).unwrap() - 0.0400070).abs() < 1e-7);
}

#[test]
fn ceramic_guide_propagation_constant() {
    let beta = ChamberSpec::reference(32).port_beta();
    assert!((beta.re - 59.465).abs() < 1e-3, "{beta}");
    assert_eq!(beta.im, 0.0);
}

#[test]
fn shipped_tissue_table_matches_builtin() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/tissues_1ghz.txt");
    let shipped = TissueTable::load(&path).unwrap();
    shipped.validate_shoulder().unwrap();
    let builtin = TissueTable::shoulder_1ghz();
    for name in dielectrics::SHOULDER_TISSUES {
        let (a, b) = (shipped.get(name).unwrap(), builtin.get(name).unwrap());
        assert!((a - b).norm() < 1e-5 * b.norm(), "{name}: {a} vs {b}");
    }
}

#[test]
fn kraszewski_recovers_mixture_fraction() {
    let a = TissueTable::shoulder_1ghz().get("sf").unwrap();
    let b = TissueTable::shoulder_1ghz().get("muscle").unwrap();
    let v = 0.37;
    let mix = (a.sqrt() * v + b.sqrt() * (1.0 - v)).powi(2);
    let fit = kraszewski_fraction(mix, a, b).unwrap();
    assert!((fit.fraction - v).abs() < 1e-9);
    assert!(fit.residual < 1e-18);
}

proptest! {
    #[test]
    fn complex_permittivity_roundtrip(re in 1.0f64..100.0, sigma in 0.0f64..5.0, f in 1e8f64..1e10) {
        let eps = to_complex(re, sigma, f).unwrap();
        let back = ComplexPermittivity::from_complex(eps, f).unwrap();
        prop_assert!((back.eps_real - re).abs() < 1e-12 * re);
        prop_assert!((back.sigma - sigma).abs() <= 1e-12 * sigma.max(1e-3));
        prop_assert!(eps.im <= 0.0);
    }

    #[test]
    fn kappa_permittivity_roundtrip(re in 1.0f64..100.0, im in -50.0f64..0.0) {
        let eps = Complex64::new(re, im);
        let k = wavenumber_squared(eps, 1e9).unwrap();
        let back = permittivity_from_kappa(k, 1e9).unwrap();
        prop_assert!((back - eps).norm() < 1e-12 * eps.norm());
        let kk = wavenumber(eps, 1e9).unwrap();
        prop_assert!(kk.re > 0.0 && kk.im <= 0.0);
    }

    #[test]
    fn kraszewski_fraction_is_recovered(v in 0.0f64..=1.0, ar in 5.0f64..80.0, br in 5.0f64..80.0, ai in -30.0f64..0.0) {
        prop_assume!((ar - br).abs() > 1.0);
        let a = Complex64::new(ar, ai);
        let b = Complex64::new(br, -0.3 * br);
        let mix = (a.sqrt() * v + b.sqrt() * (1.0 - v)).powi(2);
        let fit = kraszewski_fraction(mix, a, b).unwrap();
        prop_assert!((fit.fraction - v).abs() < 1e-9);
    }
}
