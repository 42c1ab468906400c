//! Linear Lagrange element kernels on triangles and boundary segments.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{dist, Point};
use crate::mesh::Mesh;
use crate::sparse::{CsrMatrix, TripletBuilder};

/// Squared wavenumber `κ`, either constant per triangle or linear per node.
#[derive(Debug, Clone, PartialEq)]
pub enum KappaField {
    PerElement(Vec<Complex64>),
    Nodal(Vec<Complex64>),
}

impl KappaField {
    pub fn check(&self, mesh: &Mesh) -> Result<()> {
        let (values, expect, what) = match self {
            KappaField::PerElement(v) => (v, mesh.n_triangles(), "triangle"),
            KappaField::Nodal(v) => (v, mesh.n_vertices(), "node"),
        };
        if values.len() != expect {
            return Err(Error::Dimension(format!(
                "kappa field has {} values for {expect} {what}s",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Assembly(format!("non-finite kappa at {what} {i}")));
        }
        Ok(())
    }

    /// `∫_T κ φ_i φ_j` on triangle `t`.
    pub fn element_mass(&self, mesh: &Mesh, t: usize) -> [[Complex64; 3]; 3] {
        let area = mesh.area(t);
        let mut m = [[Complex64::new(0.0, 0.0); 3]; 3];
        match self {
            KappaField::PerElement(v) => {
                let k = v[t];
                for (i, row) in m.iter_mut().enumerate() {
                    for (j, e) in row.iter_mut().enumerate() {
                        *e = k * mass_coefficient(i, j) * area;
                    }
                }
            }
            KappaField::Nodal(v) => {
                let tri = mesh.triangles()[t];
                for (i, row) in m.iter_mut().enumerate() {
                    for (j, e) in row.iter_mut().enumerate() {
                        *e = (0..3).map(|c| v[tri[c]] * (triple_coefficient(c, i, j) * area)).sum();
                    }
                }
            }
        }
        m
    }

    /// Element-averaged values.
    pub fn element_values(&self, mesh: &Mesh) -> Vec<Complex64> {
        match self {
            KappaField::PerElement(v) => v.clone(),
            KappaField::Nodal(v) => mesh
                .triangles()
                .iter()
                .map(|t| (v[t[0]] + v[t[1]] + v[t[2]]) / 3.0)
                .collect(),
        }
    }
}

/// `∫_T φ_i φ_j / |T|`.
#[inline]
pub fn mass_coefficient(i: usize, j: usize) -> f64 {
    if i == j {
        1.0 / 6.0
    } else {
        1.0 / 12.0
    }
}

/// `∫_T φ_c φ_i φ_j / |T|`.
#[inline]
pub fn triple_coefficient(c: usize, i: usize, j: usize) -> f64 {
    match (c == i, i == j, c == j) {
        (true, true, _) => 1.0 / 10.0,
        (false, false, false) => 1.0 / 60.0,
        _ => 1.0 / 30.0,
    }
}

/// Gradients of the three barycentric coordinates and the triangle area.
pub fn shape_gradients(p: [Point; 3]) -> ([[f64; 2]; 3], f64) {
    let area2 = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[1][1] - p[0][1]) * (p[2][0] - p[0][0]);
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        g[i] = [(p[j][1] - p[k][1]) / area2, (p[k][0] - p[j][0]) / area2];
    }
    (g, 0.5 * area2)
}

/// `∫_T ∇φ_i · ∇φ_j`.
pub fn element_stiffness(p: [Point; 3]) -> [[f64; 3]; 3] {
    let (g, area) = shape_gradients(p);
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
        }
    }
    k
}

/// `∫_e φ_i φ_j` on a straight boundary segment.
pub fn edge_mass(a: Point, b: Point) -> [[f64; 2]; 2] {
    let l = dist(a, b);
    [[l / 3.0, l / 6.0], [l / 6.0, l / 3.0]]
}

/// Global stiffness matrix (no boundary conditions), stored complex.
pub fn stiffness_matrix(mesh: &Mesh) -> CsrMatrix {
    let mut b = TripletBuilder::with_capacity(mesh.n_vertices(), 9 * mesh.n_triangles());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let k = element_stiffness(mesh.corners(t));
        for i in 0..3 {
            for j in 0..3 {
                b.add(tri[i], tri[j], Complex64::new(k[i][j], 0.0));
            }
        }
    }
    b.build()
}

/// `out[c] += ∫ φ_c u v` for P1 fields `u`, `v`.
pub fn accumulate_triple_product(mesh: &Mesh, u: &[Complex64], v: &[Complex64], out: &mut [Complex64]) {
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let area = mesh.area(t);
        let (ul, vl) = ([u[tri[0]], u[tri[1]], u[tri[2]]], [v[tri[0]], v[tri[1]], v[tri[2]]]);
        for c in 0..3 {
            let mut s = Complex64::new(0.0, 0.0);
            for i in 0..3 {
                for j in 0..3 {
                    s += ul[i] * vl[j] * triple_coefficient(c, i, j);
                }
            }
            out[tri[c]] += s * area;
        }
    }
}
