use num_complex::Complex64;
use rayon::prelude::*;

use super::partition::Partition;
use crate::direct::SparseLu;
use crate::error::{Error, Result};
use crate::forward::{assemble_operator, AssemblyScope, ForwardSystem};
use crate::mesh::Mesh;

struct LocalProblem {
    nodes: Vec<usize>,
    weights: Vec<f64>,
    lu: SparseLu,
}

/// Restricted additive Schwarz with impedance transmission conditions:
/// `M⁻¹ r = Σ_s R_sᵀ D_s A_s⁻¹ R_s r`, where `A_s` is the operator assembled
/// on subdomain `s` with `jk ∫ u v` added on its artificial interface.
pub struct OrasPreconditioner {
    n: usize,
    locals: Vec<LocalProblem>,
}

/// Factorizes every subdomain problem. The Robin coefficient is the
/// matching-medium wavenumber of the open boundary.
pub fn build_oras(mesh: &Mesh, system: &ForwardSystem, part: &Partition) -> Result<OrasPreconditioner> {
    let n = mesh.n_vertices();
    if system.dim() != n || part.core.len() != mesh.n_triangles() {
        return Err(Error::Dimension("partition, mesh and system disagree".into()));
    }
    let locals = part
        .subdomains
        .par_iter()
        .enumerate()
        .map(|(s, sub)| {
            let mut local_of = vec![usize::MAX; n];
            for (l, &g) in sub.nodes.iter().enumerate() {
                local_of[g] = l;
            }
            let scope = AssemblyScope {
                elements: &sub.elements,
                local_of: &local_of,
                n_local: sub.nodes.len(),
                boundary: &sub.boundary,
                robin_edges: &sub.interface,
                k_robin: system.params().k_open,
            };
            let a = assemble_operator(mesh, system.kappa(), system.params(), system.dirichlet(), &scope);
            let lu = SparseLu::factor(&a).map_err(|e| Error::Preconditioner {
                subdomain: s,
                reason: e.to_string(),
            })?;
            Ok(LocalProblem {
                nodes: sub.nodes.clone(),
                weights: sub.weights.clone(),
                lu,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OrasPreconditioner { n, locals })
}

impl OrasPreconditioner {
    pub fn n_sub(&self) -> usize {
        self.locals.len()
    }

    pub fn apply(&self, r: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(r.len(), self.n);
        let parts: Vec<Vec<Complex64>> = self
            .locals
            .par_iter()
            .map(|loc| {
                let rl: Vec<Complex64> = loc.nodes.iter().map(|&g| r[g]).collect();
                loc.lu.solve(&rl)
            })
            .collect();
        let mut z = vec![Complex64::new(0.0, 0.0); self.n];
        for (loc, x) in self.locals.iter().zip(parts) {
            for ((&g, &w), v) in loc.nodes.iter().zip(&loc.weights).zip(x) {
                z[g] += v * w;
            }
        }
        z
    }
}
