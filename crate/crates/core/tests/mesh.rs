mod common;

use std::f64::consts::PI;

use proptest::prelude::*;

use mwt_core::ddm::partition;
use mwt_core::mesh::Mesh;
use mwt_core::mesher::{generate_inversion_mesh, generate_mesh};
use mwt_core::scene::{build_scene, ChamberSpec, PhantomSpec, Variant};

#[test]
fn synthesis_meshes_conform_and_resolve_the_phantom() {
    let ch = ChamberSpec::reference(32);
    for variant in [Variant::Healthy, Variant::Partial, Variant::Large] {
        let scene = build_scene(&ch, &PhantomSpec::reference(variant)).unwrap();
        let mesh = generate_mesh(&scene, 6.0).unwrap();
        mesh.check_conformity().unwrap();
        assert!(mesh.max_edge_length() <= scene.wavelength / 6.0 + 1e-12);
        let disk = PI * scene.radius().powi(2);
        assert!((mesh.total_area() / disk - 1.0).abs() < 0.01);

        let counts = mesh.label_counts();
        for tissue in ["bone", "tendon", "muscle", "skin", "matching"] {
            assert!(counts.contains_key(tissue), "{variant:?} lacks {tissue}");
        }
        assert_eq!(counts.contains_key("sf"), variant != Variant::Healthy);

        let bone_area: f64 = (0..mesh.n_triangles())
            .filter(|&t| mesh.label(t) == "bone")
            .map(|t| mesh.area(t))
            .sum();
        let exact = PI * 0.022f64.powi(2);
        assert!(
            (bone_area / exact - 1.0).abs() < 0.01,
            "bone area {bone_area} vs {exact}"
        );
    }
}

#[test]
fn inversion_mesh_is_homogeneous_and_distinct() {
    let ch = ChamberSpec::reference(32);
    let scene = build_scene(&ch, &PhantomSpec::reference(Variant::Partial)).unwrap();
    let inv = generate_inversion_mesh(&scene, 6.0).unwrap();
    inv.check_conformity().unwrap();
    assert_eq!(inv.region_names(), ["matching"]);
    let syn = generate_mesh(&scene, 6.0).unwrap();
    assert_ne!(inv.n_vertices(), syn.n_vertices());
    // Same chamber, different phantom: the inversion mesh must not change,
    // otherwise differential images would compare different grids.
    let healthy = build_scene(&ch, &PhantomSpec::reference(Variant::Healthy)).unwrap();
    assert_eq!(generate_inversion_mesh(&healthy, 6.0).unwrap(), inv);
}

#[test]
fn mesh_text_roundtrip() {
    let (_, mesh) = common::small_mesh(8, 2.0, 4.0);
    let back = Mesh::parse(&mesh.to_text()).unwrap();
    assert_eq!(back, mesh);
    assert!(Mesh::parse("mwt-mesh 2\n").is_err());
}

#[test]
fn meshing_is_deterministic() {
    let (scene, a) = common::small_mesh(8, 2.0, 4.0);
    let b = mwt_core::mesher::generate_mesh_with(&scene, &mwt_core::mesher::MeshOptions::inversion(4.0)).unwrap();
    assert_eq!(a.to_text(), b.to_text());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn partition_of_unity(n_sub in 1usize..12, overlap in 1usize..4) {
        let (_, mesh) = common::small_mesh(8, 2.0, 4.0);
        let part = partition(&mesh, n_sub, overlap).unwrap();
        prop_assert_eq!(part.n_sub(), n_sub);
        let ones = vec![1.0; mesh.n_vertices()];
        prop_assert_eq!(part.unity_action(&ones), ones);
        // Every triangle belongs to exactly one core part and to that
        // part's overlapping subdomain.
        for (t, &c) in part.core.iter().enumerate() {
            prop_assert!(part.subdomains[c].elements.binary_search(&t).is_ok());
        }
    }
}
