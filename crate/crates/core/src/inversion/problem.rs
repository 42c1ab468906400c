use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{accumulate_triple_product, stiffness_matrix, KappaField};
use crate::forward::{scattering_matrix, solve_all, BoundaryParams, ForwardSystem, ScatteringMatrix};
use crate::mesh::Mesh;
use crate::scene::PortSet;
use crate::solver::{build_solver, SolverConfig};
use crate::sparse::CsrMatrix;

/// Value of the cost functional split into its two terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cost {
    pub total: f64,
    pub fit: f64,
    pub reg: f64,
}

/// Normalization weights `1 / |S_empty_ij|²`.
pub fn misfit_weights(empty: &ScatteringMatrix) -> Result<Vec<Vec<f64>>> {
    empty
        .entries
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, v)| {
                    let m = v.norm_sqr();
                    if m > 0.0 && m.is_finite() {
                        Ok(1.0 / m)
                    } else {
                        Err(Error::Normalization(i, j))
                    }
                })
                .collect()
        })
        .collect()
}

/// `½ Σ |S_ij − S_syn_ij|² / |S_empty_ij|²`.
pub fn misfit(s: &ScatteringMatrix, syn: &ScatteringMatrix, empty: &ScatteringMatrix) -> Result<f64> {
    let w = misfit_weights(empty)?;
    if s.n() != syn.n() || s.n() != empty.n() {
        return Err(Error::Dimension("S-matrices of different sizes".into()));
    }
    let mut fit = 0.0;
    for i in 0..s.n() {
        for j in 0..s.n() {
            fit += w[i][j] * (s.get(i, j) - syn.get(i, j)).norm_sqr();
        }
    }
    Ok(0.5 * fit)
}

/// Data, discretization and weights of one reconstruction.
///
/// The regularizer is `R = ½ ∫ |∇(κ/k₀²)|²`, with `k₀` the free-space
/// wavenumber: in two dimensions this makes `R`, and therefore `α`,
/// dimensionless. `κ/k₀²` is the relative permittivity.
pub struct InverseProblem {
    mesh: Mesh,
    ports: PortSet,
    params: BoundaryParams,
    syn: ScatteringMatrix,
    empty: ScatteringMatrix,
    weights: Vec<Vec<f64>>,
    alpha: f64,
    frequency: f64,
    solver: SolverConfig,
    stiffness: CsrMatrix,
    reg_scale: f64,
}

impl InverseProblem {
    pub fn new(
        mesh: Mesh,
        ports: PortSet,
        params: BoundaryParams,
        syn: ScatteringMatrix,
        empty: ScatteringMatrix,
        alpha: f64,
        solver: SolverConfig,
    ) -> Result<Self> {
        let n = ports.len();
        if syn.n() != n || empty.n() != n {
            return Err(Error::Dimension(format!(
                "data has {} and {} ports, scene has {n}",
                syn.n(),
                empty.n()
            )));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("alpha must be ≥ 0, got {alpha}")));
        }
        if (syn.frequency - empty.frequency).abs() > 1e-9 * syn.frequency {
            return Err(Error::InvalidArgument(
                "data and normalization frequencies differ".into(),
            ));
        }
        solver.validate()?;
        let weights = misfit_weights(&empty)?;
        let frequency = syn.frequency;
        let k0_sq = crate::dielectrics::wavenumber_squared(Complex64::new(1.0, 0.0), frequency)?.re;
        let stiffness = stiffness_matrix(&mesh);
        Ok(Self {
            mesh,
            ports,
            params,
            syn,
            empty,
            weights,
            alpha,
            frequency,
            solver,
            stiffness,
            reg_scale: 1.0 / (k0_sq * k0_sq),
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn frequency(&self) -> f64 {
        self.frequency
    }

    pub fn data(&self) -> &ScatteringMatrix {
        &self.syn
    }

    pub fn normalization(&self) -> &ScatteringMatrix {
        &self.empty
    }

    pub fn n_unknowns(&self) -> usize {
        2 * self.mesh.n_vertices()
    }

    fn check(&self, kappa: &[Complex64]) -> Result<()> {
        KappaField::Nodal(kappa.to_vec()).check(&self.mesh)
    }

    /// `R(κ)` and `∂R/∂κ` (real and imaginary parts stored as a complex number).
    pub fn regularization(&self, kappa: &[Complex64]) -> (f64, Vec<Complex64>) {
        let kk = self.stiffness.mul(kappa);
        let r: f64 = kappa.iter().zip(&kk).map(|(a, b)| (a.conj() * b).re).sum();
        let grad = kk.iter().map(|v| v * self.reg_scale).collect();
        (0.5 * r * self.reg_scale, grad)
    }

    fn system(&self, kappa: &[Complex64]) -> Result<ForwardSystem> {
        ForwardSystem::assemble(&self.mesh, &KappaField::Nodal(kappa.to_vec()), &self.ports, self.params)
    }

    /// Scattering matrix predicted by `κ` on the inversion mesh.
    pub fn simulate(&self, kappa: &[Complex64]) -> Result<ScatteringMatrix> {
        self.check(kappa)?;
        let system = self.system(kappa)?;
        let solver = build_solver(&self.mesh, &system, &self.solver)?;
        let fields = solve_all(&system, solver.as_ref())?;
        Ok(ScatteringMatrix::new(
            scattering_matrix(&system, &fields)?,
            self.frequency,
            "model",
        ))
    }

    fn fit_of(&self, s: &[Vec<Complex64>]) -> f64 {
        let n = s.len();
        let mut fit = 0.0;
        for i in 0..n {
            for j in 0..n {
                fit += self.weights[i][j] * (s[i][j] - self.syn.get(i, j)).norm_sqr();
            }
        }
        0.5 * fit
    }

    pub fn cost(&self, kappa: &[Complex64]) -> Result<Cost> {
        let s = self.simulate(kappa)?;
        let fit = self.fit_of(&s.entries);
        let (reg, _) = self.regularization(kappa);
        Ok(Cost {
            total: fit + self.alpha * reg,
            fit,
            reg,
        })
    }

    /// Cost and its gradient `(∂J/∂Re κ_c, ∂J/∂Im κ_c)` per node, from `N`
    /// forward and `N` adjoint solves sharing one factorization.
    pub fn cost_and_gradient(&self, kappa: &[Complex64]) -> Result<(Cost, Vec<[f64; 2]>)> {
        self.check(kappa)?;
        let system = self.system(kappa)?;
        let solver = build_solver(&self.mesh, &system, &self.solver)?;
        let fields = solve_all(&system, solver.as_ref())?;
        let s = scattering_matrix(&system, &fields)?;
        let fit = self.fit_of(&s);
        let (reg, reg_grad) = self.regularization(kappa);
        let n = s.len();

        // The operator is complex symmetric, so the adjoint system is the
        // forward one and the same solver handle serves both.
        let partials: Vec<Vec<Complex64>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let w: Vec<Complex64> = (0..n)
                    .map(|i| self.weights[i][j] * (s[i][j] - self.syn.get(i, j)).conj())
                    .collect();
                let rhs = system.receiver_source(&w);
                let lambda = solver.solve(&rhs).map_err(|e| Error::Transmitter {
                    transmitter: j,
                    source: Box::new(e),
                })?;
                let mut g = vec![Complex64::new(0.0, 0.0); kappa.len()];
                accumulate_triple_product(&self.mesh, &lambda, &fields[j], &mut g);
                Ok(g)
            })
            .collect::<Result<_>>()?;
        let mut g = vec![Complex64::new(0.0, 0.0); kappa.len()];
        for p in &partials {
            for (a, b) in g.iter_mut().zip(p) {
                *a += b;
            }
        }
        let grad = g
            .iter()
            .zip(&reg_grad)
            .map(|(gc, rc)| [gc.re + self.alpha * rc.re, -gc.im + self.alpha * rc.im])
            .collect();
        Ok((
            Cost {
                total: fit + self.alpha * reg,
                fit,
                reg,
            },
            grad,
        ))
    }
}
