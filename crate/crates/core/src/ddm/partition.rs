use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// One overlapping subdomain.
#[derive(Debug, Clone, PartialEq)]
pub struct Subdomain {
    /// Triangles, sorted.
    pub elements: Vec<usize>,
    /// Global node indices, sorted. Position in this list is the local index.
    pub nodes: Vec<usize>,
    /// Partition-of-unity weight of each local node (0 or 1).
    pub weights: Vec<f64>,
    /// Rim edges (indices into `mesh.boundary()`) belonging to the subdomain.
    pub boundary: Vec<usize>,
    /// Edges shared with triangles outside the subdomain.
    pub interface: Vec<[usize; 2]>,
}

impl Subdomain {
    /// `R_s x`.
    pub fn restrict<T: Copy>(&self, x: &[T]) -> Vec<T> {
        self.nodes.iter().map(|&g| x[g]).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub overlap: usize,
    pub subdomains: Vec<Subdomain>,
    /// Non-overlapping core part of each triangle.
    pub core: Vec<usize>,
}

impl Partition {
    pub fn n_sub(&self) -> usize {
        self.subdomains.len()
    }

    /// `Σ_s R_sᵀ D_s R_s x`, which must reproduce `x`.
    pub fn unity_action(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        for s in &self.subdomains {
            for (&g, &w) in s.nodes.iter().zip(&s.weights) {
                y[g] += w * x[g];
            }
        }
        y
    }
}

fn bisect(ids: &mut [usize], centroids: &[[f64; 2]], parts: usize, first: usize, out: &mut [usize]) {
    if parts == 1 {
        for &t in ids.iter() {
            out[t] = first;
        }
        return;
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for &t in ids.iter() {
        for d in 0..2 {
            lo[d] = lo[d].min(centroids[t][d]);
            hi[d] = hi[d].max(centroids[t][d]);
        }
    }
    let axis = if hi[0] - lo[0] >= hi[1] - lo[1] { 0 } else { 1 };
    ids.sort_by(|&a, &b| centroids[a][axis].total_cmp(&centroids[b][axis]).then(a.cmp(&b)));
    let left = parts / 2;
    let cut = (ids.len() * left + parts / 2) / parts;
    let (a, b) = ids.split_at_mut(cut);
    bisect(a, centroids, left, first, out);
    bisect(b, centroids, parts - left, first + left, out);
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// Recursive coordinate bisection of element centroids into `n_sub` parts,
/// each grown by `overlap` layers of neighbouring elements. Every node is
/// owned by the lowest-numbered core part touching it.
pub fn partition(mesh: &Mesh, n_sub: usize, overlap: usize) -> Result<Partition> {
    let nt = mesh.n_triangles();
    if n_sub == 0 || overlap == 0 {
        return Err(Error::Partition("need n_sub ≥ 1 and overlap ≥ 1".into()));
    }
    if n_sub > mesh.n_vertices() || n_sub > nt {
        return Err(Error::Partition(format!(
            "{n_sub} subdomains requested for a mesh of {} nodes",
            mesh.n_vertices()
        )));
    }
    let centroids: Vec<[f64; 2]> = (0..nt).map(|t| mesh.centroid(t)).collect();
    let mut core = vec![0; nt];
    let mut ids: Vec<usize> = (0..nt).collect();
    bisect(&mut ids, &centroids, n_sub, 0, &mut core);

    let tris = mesh.triangles();
    let mut owner = vec![usize::MAX; mesh.n_vertices()];
    for (t, tri) in tris.iter().enumerate() {
        for &v in tri {
            owner[v] = owner[v].min(core[t]);
        }
    }
    let node_tris = mesh.node_triangles();
    let mut edge_tris: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (t, tri) in tris.iter().enumerate() {
        for k in 0..3 {
            edge_tris.entry(edge_key(tri[k], tri[(k + 1) % 3])).or_default().push(t);
        }
    }
    let boundary_tri: Vec<usize> = mesh
        .boundary()
        .iter()
        .map(|e| edge_tris[&edge_key(e.nodes[0], e.nodes[1])][0])
        .collect();

    let mut subdomains = Vec::with_capacity(n_sub);
    for s in 0..n_sub {
        let mut inside: Vec<bool> = core.iter().map(|&c| c == s).collect();
        if !inside.iter().any(|&b| b) {
            return Err(Error::Partition(format!("subdomain {s} is empty")));
        }
        for _ in 0..overlap {
            let mut grown = inside.clone();
            for (t, tri) in tris.iter().enumerate() {
                if inside[t] {
                    for &v in tri {
                        for &u in &node_tris[v] {
                            grown[u] = true;
                        }
                    }
                }
            }
            inside = grown;
        }
        let elements: Vec<usize> = (0..nt).filter(|&t| inside[t]).collect();
        let mut nodes: Vec<usize> = elements.iter().flat_map(|&t| tris[t]).collect();
        nodes.sort_unstable();
        nodes.dedup();
        let weights = nodes.iter().map(|&g| if owner[g] == s { 1.0 } else { 0.0 }).collect();
        let boundary = (0..boundary_tri.len()).filter(|&e| inside[boundary_tri[e]]).collect();
        let mut interface = Vec::new();
        for &t in &elements {
            let tri = tris[t];
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                if edge_tris[&edge_key(a, b)].iter().any(|&u| !inside[u]) {
                    interface.push([a, b]);
                }
            }
        }
        subdomains.push(Subdomain {
            elements,
            nodes,
            weights,
            boundary,
            interface,
        });
    }
    Ok(Partition {
        overlap,
        subdomains,
        core,
    })
}
