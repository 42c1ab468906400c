#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;

use mwt_core::dielectrics::{self, TissueTable};
use mwt_core::mesh::Mesh;
use mwt_core::mesher::{generate_mesh_with, MeshOptions};
use mwt_core::scene::{ChamberSpec, Scene};
use mwt_core::sparse::CsrMatrix;

/// Reference chamber shrunk to `wavelengths` across.
pub fn small_chamber(n_antennas: usize, wavelengths: f64) -> ChamberSpec {
    let mut ch = ChamberSpec::reference(n_antennas);
    ch.diameter *= wavelengths / 7.14;
    ch
}

/// Empty chamber meshed with the inversion options.
pub fn small_mesh(n_antennas: usize, wavelengths: f64, n_lambda: f64) -> (Scene, Mesh) {
    let scene = Scene::empty(&small_chamber(n_antennas, wavelengths)).unwrap();
    let mesh = generate_mesh_with(&scene, &MeshOptions::inversion(n_lambda)).unwrap();
    (scene, mesh)
}

pub fn matching_kappa() -> Complex64 {
    TissueTable::shoulder_1ghz().kappa(dielectrics::MATCHING).unwrap()
}

/// `κ_bg (1 + amp·exp(−|x − c|² / 2w²))` at every node.
pub fn bump(mesh: &Mesh, amp: Complex64, center: [f64; 2], width: f64) -> Vec<Complex64> {
    let k0 = matching_kappa();
    mesh.vertices()
        .iter()
        .map(|p| {
            let d2 = (p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2);
            k0 * (1.0 + amp * (-d2 / (2.0 * width * width)).exp())
        })
        .collect()
}

/// Dense LU solve with nalgebra, used as an independent reference.
pub fn dense_solve(a: &CsrMatrix, b: &[Complex64]) -> Vec<Complex64> {
    let n = a.dim();
    let mut m = DMatrix::<Complex64>::zeros(n, n);
    for i in 0..n {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            m[(i, j)] += v;
        }
    }
    let x = m
        .lu()
        .solve(&nalgebra::DVector::from_column_slice(b))
        .expect("dense system is singular");
    x.iter().copied().collect()
}

pub fn rel_diff(x: &[Complex64], y: &[Complex64]) -> f64 {
    let num: f64 = x.iter().zip(y).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    let den: f64 = y.iter().map(|b| b.norm_sqr()).sum::<f64>().sqrt();
    num / den
}

/// Experiment on a 3.8-wavelength chamber with a shrunken phantom,
/// cheap enough for end-to-end tests.
pub fn small_config() -> mwt_core::config::ExperimentConfig {
    use mwt_core::scene::{PhantomSpec, Variant};
    let mut cfg = mwt_core::config::ExperimentConfig {
        chamber: small_chamber(8, 3.8),
        ..Default::default()
    };
    let mut ph = PhantomSpec::reference(Variant::Partial);
    let s = 0.7;
    ph.body_radius *= s;
    ph.skin_thickness *= s;
    ph.bone_center = [ph.bone_center[0] * s, ph.bone_center[1] * s];
    ph.bone_radius *= s;
    ph.tendon_inner *= s;
    ph.tendon_outer *= s;
    ph.tear_center = [ph.tear_center[0] * s, ph.tear_center[1] * s];
    ph.tear_major_wavelengths = 0.6;
    cfg.phantom = ph;
    cfg.mesh.n_lambda = 5.0;
    cfg.inversion.iters = 3;
    cfg
}
