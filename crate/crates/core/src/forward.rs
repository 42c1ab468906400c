//! Finite element model of the chamber: system assembly, port excitation and
//! scattering-matrix extraction.
//!
//! The out-of-plane field `u` satisfies `−Δu − κu = 0` with time dependence
//! `e^{+jωt}`. Metal walls impose `u = 0`; the open wall gaps carry the
//! first-order absorbing condition `∂u/∂n + jk u = 0`; every port carries
//! `∂u/∂n + jβ u = g` where `g = 2jβ m` on the transmitting port and `0` on
//! the receivers. The weak form is
//!
//! ```text
//! ∫ ∇u·∇v − κ u v  +  jβ ∫_ports u v  +  jk ∫_open u v  =  ∫_Γt g v
//! ```
//!
//! which yields a complex symmetric matrix. Metal nodes are removed by
//! replacing their rows and columns with identity, preserving symmetry.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{edge_mass, element_stiffness, KappaField};
use crate::mesh::Mesh;
use crate::metrics::NoiseSpec;
use crate::scene::{BoundaryTag, ChamberSpec, PortSet};
use crate::solver::LinearSolver;
use crate::sparse::{CsrMatrix, TripletBuilder};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const J: Complex64 = Complex64::new(0.0, 1.0);

/// Boundary constants: waveguide propagation constant and the wavenumber of
/// the absorbing condition on the open gaps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryParams {
    pub beta: Complex64,
    pub k_open: Complex64,
}

impl BoundaryParams {
    pub fn from_chamber(chamber: &ChamberSpec) -> Result<Self> {
        Ok(Self {
            beta: chamber.port_beta(),
            k_open: chamber.medium_wavenumber()?,
        })
    }
}

/// Discrete half-sine profile of one port.
#[derive(Debug, Clone, PartialEq)]
pub struct PortMode {
    /// Nodes on the port arc.
    pub nodes: Vec<usize>,
    /// Nodal values of the profile on `nodes`.
    pub profile: Vec<f64>,
    /// `B m` restricted to `nodes`, where `B` is the port boundary mass.
    /// Zero on metal nodes.
    pub coupling: Vec<f64>,
    /// `mᵀ B m`.
    pub norm: f64,
}

impl PortMode {
    /// `∫_port u m / ∫_port m²`.
    pub fn project(&self, u: &[Complex64]) -> Complex64 {
        let s: Complex64 = self.nodes.iter().zip(&self.coupling).map(|(&n, &c)| u[n] * c).sum();
        s / self.norm
    }

    /// Dense nodal profile.
    pub fn dense_profile(&self, n: usize) -> Vec<Complex64> {
        let mut v = vec![ZERO; n];
        for (&i, &m) in self.nodes.iter().zip(&self.profile) {
            v[i] = Complex64::new(m, 0.0);
        }
        v
    }
}

/// Which part of a mesh an operator is assembled on. The whole-mesh operator
/// and the subdomain operators of the Schwarz preconditioner share one code
/// path.
pub struct AssemblyScope<'a> {
    /// Triangles to include.
    pub elements: &'a [usize],
    /// Global node → local index, `usize::MAX` when absent.
    pub local_of: &'a [usize],
    pub n_local: usize,
    /// Indices into `mesh.boundary()` of the chamber-rim edges to include.
    pub boundary: &'a [usize],
    /// Artificial interface edges (global node pairs) carrying `jk_robin`.
    pub robin_edges: &'a [[usize; 2]],
    pub k_robin: Complex64,
}

#[derive(Debug, Clone)]
pub struct ForwardSystem {
    matrix: CsrMatrix,
    dirichlet: Vec<bool>,
    modes: Vec<PortMode>,
    kappa: KappaField,
    params: BoundaryParams,
}

fn angle_diff(a: f64, b: f64) -> f64 {
    use std::f64::consts::PI;
    let d = (a - b).rem_euclid(2.0 * PI);
    if d > PI {
        d - 2.0 * PI
    } else {
        d
    }
}

/// Half-sine mode vectors of every port.
pub fn port_modes(mesh: &Mesh, ports: &PortSet, dirichlet: &[bool]) -> Result<Vec<PortMode>> {
    let verts = mesh.vertices();
    let mut modes = Vec::with_capacity(ports.len());
    for port in &ports.ports {
        let mut nodes: Vec<usize> = mesh.port_edges(port.index).flat_map(|e| e.nodes).collect();
        nodes.sort_unstable();
        nodes.dedup();
        if nodes.len() < 2 {
            return Err(Error::Assembly(format!("port {} has no mesh edges", port.index)));
        }
        let len = port.arc_length;
        let profile: Vec<f64> = nodes
            .iter()
            .map(|&n| {
                let p = verts[n];
                let theta = p[1].atan2(p[0]);
                let s = angle_diff(theta, port.center_angle) * ports.radius + 0.5 * len;
                (std::f64::consts::PI * (s / len).clamp(0.0, 1.0)).sin()
            })
            .collect();
        let pos = |g: usize| nodes.binary_search(&g).unwrap();
        let mut coupling = vec![0.0; nodes.len()];
        for e in mesh.port_edges(port.index) {
            let [a, b] = e.nodes;
            let m = edge_mass(verts[a], verts[b]);
            let (ia, ib) = (pos(a), pos(b));
            coupling[ia] += m[0][0] * profile[ia] + m[0][1] * profile[ib];
            coupling[ib] += m[1][0] * profile[ia] + m[1][1] * profile[ib];
        }
        let norm: f64 = coupling.iter().zip(&profile).map(|(c, m)| c * m).sum();
        for (k, &n) in nodes.iter().enumerate() {
            if dirichlet[n] {
                coupling[k] = 0.0;
            }
        }
        if !(norm > 0.0) {
            return Err(Error::Assembly(format!("port {} mode has zero norm", port.index)));
        }
        modes.push(PortMode {
            nodes,
            profile,
            coupling,
            norm,
        });
    }
    Ok(modes)
}

/// Assembles `K − M(κ) + jβ B_ports + jk B_open` (plus optional Robin edges)
/// over `scope`, then replaces rows and columns of `dirichlet` nodes by identity.
pub fn assemble_operator(
    mesh: &Mesh,
    kappa: &KappaField,
    params: &BoundaryParams,
    dirichlet: &[bool],
    scope: &AssemblyScope<'_>,
) -> CsrMatrix {
    let tris = mesh.triangles();
    let verts = mesh.vertices();
    let mut b = TripletBuilder::with_capacity(
        scope.n_local,
        9 * scope.elements.len() + 4 * (scope.boundary.len() + scope.robin_edges.len()),
    );
    for &t in scope.elements {
        let tri = tris[t];
        let k = element_stiffness(mesh.corners(t));
        let m = kappa.element_mass(mesh, t);
        let loc = tri.map(|g| scope.local_of[g]);
        for i in 0..3 {
            for j in 0..3 {
                b.add(loc[i], loc[j], Complex64::new(k[i][j], 0.0) - m[i][j]);
            }
        }
    }
    let mut add_edge = |a: usize, c: usize, coef: Complex64| {
        let m = edge_mass(verts[a], verts[c]);
        let (la, lc) = (scope.local_of[a], scope.local_of[c]);
        b.add(la, la, coef * m[0][0]);
        b.add(la, lc, coef * m[0][1]);
        b.add(lc, la, coef * m[1][0]);
        b.add(lc, lc, coef * m[1][1]);
    };
    for &e in scope.boundary {
        let edge = &mesh.boundary()[e];
        let coef = match edge.tag {
            BoundaryTag::Metal => continue,
            BoundaryTag::Port(_) => J * params.beta,
            BoundaryTag::Open => J * params.k_open,
        };
        add_edge(edge.nodes[0], edge.nodes[1], coef);
    }
    for &[a, c] in scope.robin_edges {
        add_edge(a, c, J * scope.k_robin);
    }
    let mut a = b.build();
    let mut mask = vec![false; scope.n_local];
    for (g, &l) in scope.local_of.iter().enumerate() {
        if l != usize::MAX && dirichlet[g] {
            mask[l] = true;
        }
    }
    a.eliminate(&mask);
    a
}

impl ForwardSystem {
    pub fn assemble(mesh: &Mesh, kappa: &KappaField, ports: &PortSet, params: BoundaryParams) -> Result<Self> {
        kappa.check(mesh)?;
        if !(params.beta.re.is_finite() && params.k_open.re.is_finite()) {
            return Err(Error::Assembly("non-finite boundary constants".into()));
        }
        let dirichlet = mesh.dirichlet_nodes();
        let modes = port_modes(mesh, ports, &dirichlet)?;
        let elements: Vec<usize> = (0..mesh.n_triangles()).collect();
        let local_of: Vec<usize> = (0..mesh.n_vertices()).collect();
        let boundary: Vec<usize> = (0..mesh.boundary().len()).collect();
        let scope = AssemblyScope {
            elements: &elements,
            local_of: &local_of,
            n_local: mesh.n_vertices(),
            boundary: &boundary,
            robin_edges: &[],
            k_robin: ZERO,
        };
        let matrix = assemble_operator(mesh, kappa, &params, &dirichlet, &scope);
        Ok(Self {
            matrix,
            dirichlet,
            modes,
            kappa: kappa.clone(),
            params,
        })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn dirichlet(&self) -> &[bool] {
        &self.dirichlet
    }

    pub fn modes(&self) -> &[PortMode] {
        &self.modes
    }

    pub fn n_ports(&self) -> usize {
        self.modes.len()
    }

    pub fn kappa(&self) -> &KappaField {
        &self.kappa
    }

    pub fn params(&self) -> &BoundaryParams {
        &self.params
    }

    /// Right-hand side `∫_Γt g φ` with `g = 2jβ m` on port `j`.
    pub fn excitation(&self, j: usize) -> Result<Vec<Complex64>> {
        let mode = self
            .modes
            .get(j)
            .ok_or_else(|| Error::InvalidArgument(format!("transmitter {j} out of range 0..{}", self.n_ports())))?;
        let mut b = vec![ZERO; self.dim()];
        let g = 2.0 * J * self.params.beta;
        for (&n, &c) in mode.nodes.iter().zip(&mode.coupling) {
            b[n] = g * c;
        }
        Ok(b)
    }

    /// Adjoint-style source `Σ_i w_i B_i m_i / (m_iᵀ B_i m_i)`.
    pub fn receiver_source(&self, weights: &[Complex64]) -> Vec<Complex64> {
        let mut b = vec![ZERO; self.dim()];
        for (mode, &w) in self.modes.iter().zip(weights) {
            for (&n, &c) in mode.nodes.iter().zip(&mode.coupling) {
                b[n] += w * (c / mode.norm);
            }
        }
        b
    }
}

/// Field radiated by transmitter `j`.
pub fn solve_forward(system: &ForwardSystem, transmitter: usize, solver: &dyn LinearSolver) -> Result<Vec<Complex64>> {
    let b = system.excitation(transmitter)?;
    solver.solve(&b).map_err(|e| Error::Transmitter {
        transmitter,
        source: Box::new(e),
    })
}

/// All transmitter fields, solved concurrently.
pub fn solve_all(system: &ForwardSystem, solver: &dyn LinearSolver) -> Result<Vec<Vec<Complex64>>> {
    (0..system.n_ports())
        .into_par_iter()
        .map(|j| solve_forward(system, j, solver))
        .collect()
}

/// Complex `N × N` matrix of port coefficients, `S[i][j]` = receiver `i`,
/// transmitter `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringMatrix {
    pub entries: Vec<Vec<Complex64>>,
    pub frequency: f64,
    pub variant: String,
    pub noise: Option<NoiseSpec>,
}

/// Projects every field onto every port mode.
pub fn scattering_matrix(system: &ForwardSystem, fields: &[Vec<Complex64>]) -> Result<Vec<Vec<Complex64>>> {
    let n = system.n_ports();
    if fields.len() != n {
        return Err(Error::Dimension(format!("{} fields for {n} ports", fields.len())));
    }
    let mut s = vec![vec![ZERO; n]; n];
    for (j, u) in fields.iter().enumerate() {
        if u.len() != system.dim() {
            return Err(Error::Dimension(format!("field {j} has {} values", u.len())));
        }
        for (i, mode) in system.modes().iter().enumerate() {
            s[i][j] = mode.project(u);
        }
    }
    Ok(s)
}

const SMATRIX_HEADER: &str = "mwt-smatrix 1";
const FIELD_HEADER: &str = "mwt-field 1";

impl ScatteringMatrix {
    pub fn new(entries: Vec<Vec<Complex64>>, frequency: f64, variant: impl Into<String>) -> Self {
        Self {
            entries,
            frequency,
            variant: variant.into(),
            noise: None,
        }
    }

    pub fn n(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i][j]
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `max |S_ij − S_ji| / max |S|`.
    pub fn reciprocity_defect(&self) -> f64 {
        let n = self.n();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..i {
                worst = worst.max((self.entries[i][j] - self.entries[j][i]).norm());
            }
        }
        worst / self.max_abs().max(f64::MIN_POSITIVE)
    }

    /// `‖self − other‖_F / ‖other‖_F`.
    pub fn relative_frobenius(&self, other: &ScatteringMatrix) -> Result<f64> {
        if self.n() != other.n() {
            return Err(Error::Dimension(format!("{} vs {} ports", self.n(), other.n())));
        }
        let (mut d, mut r) = (0.0, 0.0);
        for (a, b) in self.entries.iter().flatten().zip(other.entries.iter().flatten()) {
            d += (a - b).norm_sqr();
            r += b.norm_sqr();
        }
        Ok((d / r).sqrt())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let noise = match &self.noise {
            None => "none".to_string(),
            Some(n) => n.descriptor(),
        };
        writeln!(s, "{SMATRIX_HEADER}").unwrap();
        writeln!(s, "n {}", self.n()).unwrap();
        writeln!(s, "frequency {}", self.frequency).unwrap();
        writeln!(s, "variant {}", self.variant).unwrap();
        writeln!(s, "noise {noise}").unwrap();
        for row in &self.entries {
            let line: Vec<String> = row.iter().map(|v| format!("{} {}", v.re, v.im)).collect();
            writeln!(s, "{}", line.join(" ")).unwrap();
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let bad = |m: &str| Error::Format(format!("S-matrix: {m}"));
        if lines.next().map(str::trim) != Some(SMATRIX_HEADER) {
            return Err(bad("missing version line"));
        }
        let mut field = |key: &str| -> Result<String> {
            let line = lines.next().ok_or_else(|| bad("truncated header"))?;
            line.strip_prefix(key)
                .and_then(|r| r.strip_prefix(' '))
                .map(|r| r.trim().to_string())
                .ok_or_else(|| bad(&format!("expected `{key}`")))
        };
        let n: usize = field("n")?.parse().map_err(|_| bad("bad n"))?;
        let frequency: f64 = field("frequency")?.parse().map_err(|_| bad("bad frequency"))?;
        let variant = field("variant")?;
        let noise_text = field("noise")?;
        let noise = if noise_text == "none" {
            None
        } else {
            Some(NoiseSpec::parse_descriptor(&noise_text)?)
        };
        let mut entries = Vec::with_capacity(n);
        for i in 0..n {
            let line = lines.next().ok_or_else(|| bad(&format!("missing row {i}")))?;
            let nums: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| bad(&format!("bad number `{t}`"))))
                .collect::<Result<_>>()?;
            if nums.len() != 2 * n {
                return Err(bad(&format!("row {i} has {} numbers, expected {}", nums.len(), 2 * n)));
            }
            entries.push(nums.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect());
        }
        Ok(Self {
            entries,
            frequency,
            variant,
            noise,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_text())?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

/// Per-node dump `x y re im` of a complex field.
pub fn field_to_text(mesh: &Mesh, values: &[Complex64]) -> Result<String> {
    if values.len() != mesh.n_vertices() {
        return Err(Error::Dimension(format!(
            "field has {} values for {} nodes",
            values.len(),
            mesh.n_vertices()
        )));
    }
    let mut s = String::new();
    writeln!(s, "{FIELD_HEADER}").unwrap();
    writeln!(s, "nodes {}", values.len()).unwrap();
    for (p, v) in mesh.vertices().iter().zip(values) {
        writeln!(s, "{} {} {} {}", p[0], p[1], v.re, v.im).unwrap();
    }
    Ok(s)
}

/// Parses a field dump into `(positions, values)`.
pub fn parse_field(text: &str) -> Result<(Vec<[f64; 2]>, Vec<Complex64>)> {
    let bad = |m: String| Error::Format(format!("field: {m}"));
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(FIELD_HEADER) {
        return Err(bad("missing version line".into()));
    }
    let n: usize = lines
        .next()
        .and_then(|l| l.strip_prefix("nodes "))
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| bad("bad node count".into()))?;
    let mut pos = Vec::with_capacity(n);
    let mut vals = Vec::with_capacity(n);
    for k in 0..n {
        let line = lines.next().ok_or_else(|| bad(format!("missing node {k}")))?;
        let v: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad(format!("bad number `{t}`"))))
            .collect::<Result<_>>()?;
        if v.len() != 4 {
            return Err(bad(format!("node {k} has {} columns", v.len())));
        }
        pos.push([v[0], v[1]]);
        vals.push(Complex64::new(v[2], v[3]));
    }
    Ok((pos, vals))
}
