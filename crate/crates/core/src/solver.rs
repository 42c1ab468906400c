//! Linear solver handles shared by all transmitters.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ddm::{build_oras, gmres, partition, GmresOptions, OrasPreconditioner};
use crate::direct::SparseLu;
use crate::error::{Error, Result};
use crate::forward::ForwardSystem;
use crate::mesh::Mesh;
use crate::sparse::CsrMatrix;

/// Convergence record of one solve. Direct solves report zero iterations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// Relative residual after each iteration, starting with the initial one.
    pub residuals: Vec<f64>,
}

/// A factorized or preconditioned operator. Implementations are immutable
/// after construction, so one handle serves concurrent solves.
pub trait LinearSolver: Send + Sync {
    fn dim(&self) -> usize;

    fn solve_with_stats(&self, rhs: &[Complex64]) -> Result<(Vec<Complex64>, SolveStats)>;

    fn solve(&self, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
        self.solve_with_stats(rhs).map(|(x, _)| x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OrasConfig {
    pub n_sub: usize,
    /// Overlap in element layers.
    pub overlap: usize,
    pub tol: f64,
    pub restart: usize,
    pub maxiter: usize,
}

impl Default for OrasConfig {
    fn default() -> Self {
        Self {
            n_sub: 8,
            overlap: 2,
            tol: 1e-10,
            restart: 200,
            maxiter: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SolverConfig {
    /// Sparse LU of the whole system.
    #[default]
    Direct,
    /// GMRES preconditioned by overlapping Schwarz with Robin interfaces.
    Oras(OrasConfig),
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if let SolverConfig::Oras(c) = self {
            if c.n_sub == 0 || c.overlap == 0 || c.restart == 0 || c.maxiter == 0 {
                return Err(Error::Config(
                    "n_sub, overlap, restart and maxiter must be positive".into(),
                ));
            }
            if !(c.tol > 0.0 && c.tol < 1.0) {
                return Err(Error::Config(format!("tolerance {} outside (0, 1)", c.tol)));
            }
        }
        Ok(())
    }
}

pub struct DirectSolver {
    lu: SparseLu,
}

impl DirectSolver {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        Ok(Self {
            lu: SparseLu::factor(a)?,
        })
    }
}

impl LinearSolver for DirectSolver {
    fn dim(&self) -> usize {
        self.lu.dim()
    }

    fn solve_with_stats(&self, rhs: &[Complex64]) -> Result<(Vec<Complex64>, SolveStats)> {
        if rhs.len() != self.dim() {
            return Err(Error::Dimension(format!("rhs {} vs system {}", rhs.len(), self.dim())));
        }
        Ok((self.lu.solve(rhs), SolveStats::default()))
    }
}

pub struct OrasSolver {
    matrix: CsrMatrix,
    precond: OrasPreconditioner,
    options: GmresOptions,
}

impl OrasSolver {
    pub fn new(mesh: &Mesh, system: &ForwardSystem, config: &OrasConfig) -> Result<Self> {
        let part = partition(mesh, config.n_sub, config.overlap)?;
        let precond = build_oras(mesh, system, &part)?;
        Ok(Self {
            matrix: system.matrix().clone(),
            precond,
            options: GmresOptions {
                tol: config.tol,
                restart: config.restart,
                maxiter: config.maxiter,
            },
        })
    }

    pub fn preconditioner(&self) -> &OrasPreconditioner {
        &self.precond
    }
}

impl LinearSolver for OrasSolver {
    fn dim(&self) -> usize {
        self.matrix.dim()
    }

    fn solve_with_stats(&self, rhs: &[Complex64]) -> Result<(Vec<Complex64>, SolveStats)> {
        let out = gmres(&self.matrix, rhs, |r| self.precond.apply(r), &self.options)?;
        Ok((
            out.x,
            SolveStats {
                iterations: out.iterations,
                residuals: out.residuals,
            },
        ))
    }
}

/// Builds the configured solver for `system`.
pub fn build_solver(mesh: &Mesh, system: &ForwardSystem, config: &SolverConfig) -> Result<Box<dyn LinearSolver>> {
    config.validate()?;
    Ok(match config {
        SolverConfig::Direct => Box::new(DirectSolver::new(system.matrix())?),
        SolverConfig::Oras(c) => Box::new(OrasSolver::new(mesh, system, c)?),
    })
}
