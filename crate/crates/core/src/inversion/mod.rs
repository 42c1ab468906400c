//! Reconstruction of the nodal `κ` field from scattering data.
//!
//! The cost is `J(κ) = ½ Σ_ij |S_ij(κ) − S_syn_ij|² / |S_empty_ij|² + α R(κ)`
//! and is minimized by L-BFGS over the real and imaginary parts of `κ` at
//! every node of the inversion mesh. Gradients come from the adjoint-state
//! method.

mod lbfgs;
mod problem;

use std::fmt::Write as _;

use num_complex::Complex64;

pub use lbfgs::{lbfgs, Evaluated, LbfgsOptions, LbfgsResult, Objective, StopReason, TraceRow};
pub use problem::{misfit, misfit_weights, Cost, InverseProblem};

use crate::dielectrics::permittivity_from_kappa;
use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// Interleaved `[Re κ₀, Im κ₀, Re κ₁, …]`.
pub fn to_real(kappa: &[Complex64]) -> Vec<f64> {
    kappa.iter().flat_map(|v| [v.re, v.im]).collect()
}

pub fn from_real(x: &[f64]) -> Vec<Complex64> {
    x.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub kappa: Vec<Complex64>,
    /// Relative permittivity `κ / (ω² ε₀ μ₀)`.
    pub permittivity: Vec<Complex64>,
    pub initial: TraceRow,
    pub trace: Vec<TraceRow>,
    pub stop: StopReason,
    pub evaluations: usize,
}

impl Reconstruction {
    pub fn final_row(&self) -> &TraceRow {
        self.trace.last().unwrap_or(&self.initial)
    }

    /// Initial fit divided by final fit.
    pub fn fit_reduction(&self) -> f64 {
        self.initial.fit / self.final_row().fit
    }
}

/// Relative size of the first L-BFGS step with respect to the background `κ`.
pub const FIRST_STEP_FRACTION: f64 = 0.03;

/// Runs L-BFGS from `initial` (normally the homogeneous matching medium).
pub fn reconstruct(problem: &InverseProblem, initial: &[Complex64], opts: &LbfgsOptions) -> Result<Reconstruction> {
    if initial.len() != problem.mesh().n_vertices() {
        return Err(Error::Dimension(format!(
            "initial guess has {} values for {} nodes",
            initial.len(),
            problem.mesh().n_vertices()
        )));
    }
    let mut opts = *opts;
    if opts.initial_step.is_none() {
        let scale = initial.iter().map(|v| v.norm()).fold(0.0, f64::max);
        opts.initial_step = Some(FIRST_STEP_FRACTION * scale);
    }
    let mut objective = |x: &[f64]| -> Result<Evaluated> {
        let (cost, grad) = problem.cost_and_gradient(&from_real(x))?;
        Ok(Evaluated {
            value: cost.total,
            gradient: grad.into_iter().flatten().collect(),
            fit: cost.fit,
            reg: cost.reg,
        })
    };
    let res = lbfgs(&mut objective, &to_real(initial), &opts, &|_| {})?;
    let kappa = from_real(&res.x);
    let permittivity = kappa
        .iter()
        .map(|&k| permittivity_from_kappa(k, problem.frequency()))
        .collect::<Result<_>>()?;
    Ok(Reconstruction {
        kappa,
        permittivity,
        initial: res.initial,
        trace: res.trace,
        stop: res.stop,
        evaluations: res.evaluations,
    })
}

const TRACE_HEADER: &str = "mwt-trace 1";
const RECON_HEADER: &str = "mwt-reconstruction 1";

/// `iteration J fit R grad_norm step`, iteration 0 being the start point.
pub fn trace_to_text(rec: &Reconstruction) -> String {
    let mut s = String::new();
    writeln!(s, "{TRACE_HEADER}").unwrap();
    writeln!(s, "stop {}", rec.stop.name()).unwrap();
    writeln!(s, "# iteration J fit R grad_norm step").unwrap();
    for r in std::iter::once(&rec.initial).chain(&rec.trace) {
        writeln!(
            s,
            "{} {} {} {} {} {}",
            r.iteration, r.value, r.fit, r.reg, r.grad_norm, r.step
        )
        .unwrap();
    }
    s
}

/// Parses a trace file back into rows (including iteration 0).
pub fn parse_trace(text: &str) -> Result<Vec<TraceRow>> {
    let bad = |m: String| Error::Format(format!("trace: {m}"));
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(TRACE_HEADER) {
        return Err(bad("missing version line".into()));
    }
    let mut rows = Vec::new();
    for line in lines {
        if line.starts_with('#') || line.starts_with("stop ") || line.trim().is_empty() {
            continue;
        }
        let v: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad(format!("bad number `{t}`"))))
            .collect::<Result<_>>()?;
        if v.len() != 6 {
            return Err(bad(format!("expected 6 columns, got {}", v.len())));
        }
        rows.push(TraceRow {
            iteration: v[0] as usize,
            value: v[1],
            fit: v[2],
            reg: v[3],
            grad_norm: v[4],
            step: v[5],
        });
    }
    Ok(rows)
}

/// Per-node `x y Re ε Im ε`.
pub fn permittivity_to_text(mesh: &Mesh, eps: &[Complex64]) -> Result<String> {
    if eps.len() != mesh.n_vertices() {
        return Err(Error::Dimension(format!(
            "{} values for {} nodes",
            eps.len(),
            mesh.n_vertices()
        )));
    }
    let mut s = String::new();
    writeln!(s, "{RECON_HEADER}").unwrap();
    writeln!(s, "nodes {}", eps.len()).unwrap();
    for (p, v) in mesh.vertices().iter().zip(eps) {
        writeln!(s, "{} {} {} {}", p[0], p[1], v.re, v.im).unwrap();
    }
    Ok(s)
}

/// Parses a permittivity dump into nodal values.
pub fn parse_permittivity(text: &str) -> Result<Vec<Complex64>> {
    let bad = |m: String| Error::Format(format!("reconstruction: {m}"));
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(RECON_HEADER) {
        return Err(bad("missing version line".into()));
    }
    let n: usize = lines
        .next()
        .and_then(|l| l.strip_prefix("nodes "))
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| bad("bad node count".into()))?;
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let line = lines.next().ok_or_else(|| bad(format!("missing node {k}")))?;
        let v: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad(format!("bad number `{t}`"))))
            .collect::<Result<_>>()?;
        if v.len() != 4 {
            return Err(bad(format!("node {k} has {} columns", v.len())));
        }
        out.push(Complex64::new(v[2], v[3]));
    }
    Ok(out)
}
