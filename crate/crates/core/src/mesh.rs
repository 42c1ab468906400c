//! Labelled triangular meshes and their plain-text file format.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{dist, orient, Point};
use crate::scene::BoundaryTag;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: BoundaryTag,
}

/// Conforming triangulation with a region label per triangle and a tag per
/// boundary edge. Triangles are stored counterclockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    triangle_regions: Vec<usize>,
    region_names: Vec<String>,
    boundary: Vec<BoundaryEdge>,
}

const MESH_MAGIC: &str = "mwt-mesh 1";

impl Mesh {
    /// Builds a mesh from raw parts, reorienting clockwise triangles.
    pub fn new(
        vertices: Vec<Point>,
        mut triangles: Vec<[usize; 3]>,
        labels: Vec<String>,
        boundary: Vec<BoundaryEdge>,
    ) -> Result<Self> {
        if labels.len() != triangles.len() {
            return Err(Error::Mesh("one label per triangle required".into()));
        }
        let nv = vertices.len();
        for t in triangles.iter_mut() {
            if t.iter().any(|&v| v >= nv) {
                return Err(Error::Mesh("triangle references missing vertex".into()));
            }
            let a = orient(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
            if a == 0.0 {
                return Err(Error::Mesh(format!("degenerate triangle {t:?}")));
            }
            if a < 0.0 {
                t.swap(1, 2);
            }
        }
        if boundary.iter().any(|e| e.nodes.iter().any(|&v| v >= nv)) {
            return Err(Error::Mesh("boundary edge references missing vertex".into()));
        }
        let mut region_names: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let triangle_regions = labels
            .into_iter()
            .map(|l| {
                *index.entry(l.clone()).or_insert_with(|| {
                    region_names.push(l);
                    region_names.len() - 1
                })
            })
            .collect();
        Ok(Self {
            vertices,
            triangles,
            triangle_regions,
            region_names,
            boundary,
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    pub fn region_names(&self) -> &[String] {
        &self.region_names
    }

    pub fn triangle_regions(&self) -> &[usize] {
        &self.triangle_regions
    }

    pub fn label(&self, t: usize) -> &str {
        &self.region_names[self.triangle_regions[t]]
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn corners(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        0.5 * orient(a, b, c)
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.corners(t);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.area(t)).sum()
    }

    pub fn max_edge_length(&self) -> f64 {
        (0..self.n_triangles())
            .flat_map(|t| {
                let [a, b, c] = self.corners(t);
                [dist(a, b), dist(b, c), dist(c, a)]
            })
            .fold(0.0, f64::max)
    }

    /// Number of triangles carrying each region label.
    pub fn label_counts(&self) -> HashMap<&str, usize> {
        let mut counts = HashMap::new();
        for &r in &self.triangle_regions {
            *counts.entry(self.region_names[r].as_str()).or_insert(0) += 1;
        }
        counts
    }

    /// Undirected edge to number of incident triangles.
    pub fn edge_incidence(&self) -> HashMap<(usize, usize), usize> {
        let mut m = HashMap::with_capacity(3 * self.triangles.len());
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *m.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        m
    }

    /// Nodes lying on metal boundary edges (homogeneous Dirichlet nodes).
    pub fn dirichlet_nodes(&self) -> Vec<bool> {
        let mut d = vec![false; self.n_vertices()];
        for e in &self.boundary {
            if e.tag == BoundaryTag::Metal {
                d[e.nodes[0]] = true;
                d[e.nodes[1]] = true;
            }
        }
        d
    }

    /// Boundary edges of port `i`.
    pub fn port_edges(&self, i: usize) -> impl Iterator<Item = &BoundaryEdge> {
        self.boundary.iter().filter(move |e| e.tag == BoundaryTag::Port(i))
    }

    pub fn boundary_length(&self, pred: impl Fn(BoundaryTag) -> bool) -> f64 {
        self.boundary
            .iter()
            .filter(|e| pred(e.tag))
            .map(|e| dist(self.vertices[e.nodes[0]], self.vertices[e.nodes[1]]))
            .sum()
    }

    /// Node-to-node adjacency lists (sorted, without self).
    pub fn node_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_vertices()];
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        for list in adj.iter_mut() {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    /// Triangles incident to each node.
    pub fn node_triangles(&self) -> Vec<Vec<usize>> {
        let mut nt = vec![Vec::new(); self.n_vertices()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                nt[v].push(t);
            }
        }
        nt
    }

    /// Conformity: interior edges shared by exactly two triangles, hull edges
    /// by one, every hull edge tagged exactly once, all triangles
    /// counterclockwise with positive area, every vertex used.
    pub fn check_conformity(&self) -> Result<()> {
        for t in 0..self.n_triangles() {
            if !(self.area(t) > 0.0) {
                return Err(Error::Mesh(format!("triangle {t} is not counterclockwise")));
            }
        }
        let inc = self.edge_incidence();
        let mut tagged: HashMap<(usize, usize), usize> = HashMap::new();
        for e in &self.boundary {
            let [a, b] = e.nodes;
            *tagged.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
        for (edge, &n) in &inc {
            match n {
                1 => match tagged.get(edge) {
                    Some(1) => {}
                    Some(k) => return Err(Error::Mesh(format!("hull edge {edge:?} tagged {k} times"))),
                    None => return Err(Error::Mesh(format!("hull edge {edge:?} is untagged"))),
                },
                2 => {
                    if tagged.contains_key(edge) {
                        return Err(Error::Mesh(format!("interior edge {edge:?} is tagged")));
                    }
                }
                _ => return Err(Error::Mesh(format!("edge {edge:?} shared by {n} triangles"))),
            }
        }
        if tagged.keys().any(|e| inc.get(e) != Some(&1)) {
            return Err(Error::Mesh("tagged boundary edge is not on the hull".into()));
        }
        let mut used = vec![false; self.n_vertices()];
        self.triangles.iter().flatten().for_each(|&v| used[v] = true);
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(Error::Mesh(format!("vertex {v} is not used by any triangle")));
        }
        Ok(())
    }

    /// Smallest triangle containing `p` (barycentric test), if any.
    pub fn locate(&self, p: Point) -> Option<(usize, [f64; 3])> {
        for t in 0..self.n_triangles() {
            let [a, b, c] = self.corners(t);
            let area = orient(a, b, c);
            let l0 = orient(p, b, c) / area;
            let l1 = orient(a, p, c) / area;
            let l2 = 1.0 - l0 - l1;
            let tol = -1e-12;
            if l0 >= tol && l1 >= tol && l2 >= tol {
                return Some((t, [l0, l1, l2]));
            }
        }
        None
    }

    /// Same mesh with vertices renumbered so that old vertex `i` becomes
    /// `perm[i]`.
    pub fn renumbered(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n_vertices() {
            return Err(Error::Dimension("permutation length".into()));
        }
        let mut vertices = vec![[0.0; 2]; self.n_vertices()];
        for (i, &p) in perm.iter().enumerate() {
            vertices[p] = self.vertices[i];
        }
        let triangles = self
            .triangles
            .iter()
            .map(|t| [perm[t[0]], perm[t[1]], perm[t[2]]])
            .collect();
        let labels = (0..self.n_triangles()).map(|t| self.label(t).to_string()).collect();
        let boundary = self
            .boundary
            .iter()
            .map(|e| BoundaryEdge {
                nodes: [perm[e.nodes[0]], perm[e.nodes[1]]],
                tag: e.tag,
            })
            .collect();
        Mesh::new(vertices, triangles, labels, boundary)
    }

    /// Serialises to the plain-text mesh format:
    ///
    /// ```text
    /// mwt-mesh 1
    /// vertices N / triangles M / boundary K
    /// x y                 (N lines)
    /// a b c region        (M lines)
    /// a b tag             (K lines; tag = metal | open | port:i)
    /// ```
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(64 * (self.n_vertices() + self.n_triangles()));
        let _ = writeln!(s, "{MESH_MAGIC}");
        let _ = writeln!(
            s,
            "vertices {} / triangles {} / boundary {}",
            self.n_vertices(),
            self.n_triangles(),
            self.boundary.len()
        );
        for v in &self.vertices {
            let _ = writeln!(s, "{:e} {:e}", v[0], v[1]);
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            let _ = writeln!(s, "{} {} {} {}", tri[0], tri[1], tri[2], self.label(t));
        }
        for e in &self.boundary {
            let _ = writeln!(s, "{} {} {}", e.nodes[0], e.nodes[1], e.tag);
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let bad = |what: &str| Error::Format(format!("mesh file: {what}"));
        if lines.next().map(str::trim) != Some(MESH_MAGIC) {
            return Err(bad("missing `mwt-mesh 1` header"));
        }
        let header = lines.next().ok_or_else(|| bad("missing counts"))?;
        let counts: Vec<usize> = header
            .split('/')
            .map(|part| {
                part.split_whitespace()
                    .nth(1)
                    .and_then(|n| n.parse().ok())
                    .ok_or_else(|| bad("malformed counts line"))
            })
            .collect::<Result<_>>()?;
        let [nv, nt, nb] = counts[..] else {
            return Err(bad("expected three counts"));
        };
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let l = lines.next().ok_or_else(|| bad("truncated vertices"))?;
            let xy: Vec<f64> = l
                .split_whitespace()
                .map(|x| x.parse().map_err(|_| bad("bad coordinate")))
                .collect::<Result<_>>()?;
            if xy.len() != 2 {
                return Err(bad("vertex line needs two numbers"));
            }
            vertices.push([xy[0], xy[1]]);
        }
        let mut triangles = Vec::with_capacity(nt);
        let mut labels = Vec::with_capacity(nt);
        for _ in 0..nt {
            let l = lines.next().ok_or_else(|| bad("truncated triangles"))?;
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 4 {
                return Err(bad("triangle line needs three indices and a label"));
            }
            let idx = |s: &str| s.parse::<usize>().map_err(|_| bad("bad index"));
            triangles.push([idx(f[0])?, idx(f[1])?, idx(f[2])?]);
            labels.push(f[3].to_string());
        }
        let mut boundary = Vec::with_capacity(nb);
        for _ in 0..nb {
            let l = lines.next().ok_or_else(|| bad("truncated boundary"))?;
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 3 {
                return Err(bad("boundary line needs two indices and a tag"));
            }
            let idx = |s: &str| s.parse::<usize>().map_err(|_| bad("bad index"));
            boundary.push(BoundaryEdge {
                nodes: [idx(f[0])?, idx(f[1])?],
                tag: f[2].parse()?,
            });
        }
        Mesh::new(vertices, triangles, labels, boundary)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_text())?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Mesh {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let t = vec![[0, 1, 2], [0, 3, 2]];
        let b = [
            (0, 1, BoundaryTag::Metal),
            (1, 2, BoundaryTag::Port(0)),
            (2, 3, BoundaryTag::Open),
            (3, 0, BoundaryTag::Metal),
        ]
        .iter()
        .map(|&(a, b, tag)| BoundaryEdge { nodes: [a, b], tag })
        .collect();
        Mesh::new(v, t, vec!["a".into(), "b".into()], b).unwrap()
    }

    #[test]
    fn reorients_and_checks() {
        let m = square();
        assert!(m.area(1) > 0.0);
        m.check_conformity().unwrap();
        assert!((m.total_area() - 1.0).abs() < 1e-15);
        assert_eq!(m.dirichlet_nodes(), vec![true, true, false, true]);
    }

    #[test]
    fn detects_untagged_hull_edge() {
        let mut m = square();
        m.boundary.pop();
        assert!(matches!(m.check_conformity(), Err(Error::Mesh(_))));
    }

    #[test]
    fn text_roundtrip() {
        let m = square();
        let back = Mesh::parse(&m.to_text()).unwrap();
        assert_eq!(back, m);
        assert!(m
            .to_text()
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("vertices 4 / triangles 2 / boundary 4"));
    }

    #[test]
    fn locate_finds_containing_triangle() {
        let m = square();
        let (t, l) = m.locate([0.75, 0.25]).unwrap();
        assert_eq!(t, 0);
        assert!((l.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(m.locate([2.0, 2.0]).is_none());
    }
}
