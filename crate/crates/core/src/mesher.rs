//! Conforming triangulation of a scene.
//!
//! Every tissue interface and the chamber rim are discretised into polylines
//! that become constraint edges of a constrained Delaunay triangulation
//! (backed by `spade`). The interior is seeded on concentric staggered rings,
//! spaced more tightly near the rim and kept clear of the constraints, and
//! triangles whose longest edge exceeds the target length are split by
//! centroid insertion until none remain. Each port arc is cut into the same
//! number of equal chords, so all ports share one discrete mode profile.

use std::f64::consts::PI;

use spade::{ConstrainedDelaunayTriangulation, Point2, Triangulation};

use crate::dielectrics;
use crate::error::{Error, Result};
use crate::geometry::{dist, point_segment_distance, polygon_contains, Point, Shape};
use crate::mesh::{BoundaryEdge, Mesh};
use crate::scene::{BoundaryTag, Scene};

/// Ratio between inversion-mesh and synthesis-mesh lattice spacing.
pub const INVERSION_SPACING_FACTOR: f64 = 1.15;

#[derive(Debug, Clone, PartialEq)]
pub struct MeshOptions {
    /// Points per wavelength; the longest edge is at most `λ / n_lambda`.
    pub n_lambda: f64,
    /// Lattice spacing as a fraction of the maximum edge length.
    pub lattice_ratio: f64,
    /// Ignore the phantom and label everything as matching medium.
    pub homogeneous: bool,
    /// Seed spacing next to the rim as a fraction of the maximum edge length.
    /// The field near the sub-wavelength ports varies on the port scale, so
    /// the band along the rim is seeded more densely than the core.
    pub rim_ratio: f64,
    /// Width of the dense rim band in wavelengths; the spacing then blends
    /// linearly into the core spacing over one more band width.
    pub rim_band: f64,
}

impl MeshOptions {
    pub fn synthesis(n_lambda: f64) -> Self {
        Self {
            n_lambda,
            lattice_ratio: 0.75,
            homogeneous: false,
            rim_ratio: 0.25,
            rim_band: 0.5,
        }
    }

    /// Homogeneous mesh of the bare chamber with a coarser lattice, so that it
    /// never coincides with a synthesis mesh of the same `n_lambda`.
    pub fn inversion(n_lambda: f64) -> Self {
        Self {
            n_lambda,
            lattice_ratio: 0.75 * INVERSION_SPACING_FACTOR,
            homogeneous: true,
            rim_ratio: 0.25 * INVERSION_SPACING_FACTOR,
            rim_band: 0.5,
        }
    }
}

/// Synthesis mesh: resolves every phantom interface.
pub fn generate_mesh(scene: &Scene, n_lambda: f64) -> Result<Mesh> {
    generate_mesh_with(scene, &MeshOptions::synthesis(n_lambda))
}

/// Inversion mesh: chamber only, homogeneous labels, different spacing.
pub fn generate_inversion_mesh(scene: &Scene, n_lambda: f64) -> Result<Mesh> {
    generate_mesh_with(scene, &MeshOptions::inversion(n_lambda))
}

struct Constraint {
    polygon: Vec<Point>,
}

fn region_polyline_spacing(shape: &Shape, s: f64, thin: f64) -> f64 {
    match *shape {
        Shape::Ellipse { semi_minor, .. } => s.min(0.6 * semi_minor),
        _ => s.min(thin),
    }
}

pub fn generate_mesh_with(scene: &Scene, opts: &MeshOptions) -> Result<Mesh> {
    if !(opts.n_lambda >= 4.0) {
        return Err(Error::InvalidArgument(format!(
            "n_lambda must be at least 4, got {}",
            opts.n_lambda
        )));
    }
    if !(opts.lattice_ratio > 0.0 && opts.lattice_ratio < 1.0) {
        return Err(Error::InvalidArgument("lattice ratio must lie in (0, 1)".into()));
    }
    let h_max = scene.wavelength / opts.n_lambda;
    let s = opts.lattice_ratio * h_max;
    let s_rim = opts.rim_ratio.min(opts.lattice_ratio) * h_max;
    let radius = scene.radius();
    let ports = &scene.ports;
    let band = opts.rim_band * scene.wavelength;
    // Radial size function: `s_rim` inside the rim band, `s` in the core and
    // a linear blend over one further band width.
    let size = |r: f64| -> f64 {
        let depth = radius - r;
        if depth <= band {
            s_rim
        } else if depth >= 2.0 * band {
            s
        } else {
            s_rim + (s - s_rim) * (depth - band) / band.max(f64::MIN_POSITIVE)
        }
    };

    // Rim polyline.
    let mut points: Vec<Point> = Vec::new();
    let mut rim_tags: Vec<BoundaryTag> = Vec::new();
    let breaks = ports.breakpoints();
    let port_arc = ports.ports.first().map(|p| p.arc_length).unwrap_or(0.0);
    let port_segments = ((port_arc / (0.5 * s_rim)).ceil() as usize).max(4);
    for (k, &a0) in breaks.iter().enumerate() {
        let a1 = if k + 1 < breaks.len() {
            breaks[k + 1]
        } else {
            breaks[0] + 2.0 * PI
        };
        let tag = ports.classify(0.5 * (a0 + a1));
        let n = match tag {
            BoundaryTag::Port(_) => port_segments,
            _ => (((a1 - a0) * radius / s_rim).ceil() as usize).max(1),
        };
        for i in 0..n {
            let t = a0 + (a1 - a0) * i as f64 / n as f64;
            points.push([radius * t.cos(), radius * t.sin()]);
            rim_tags.push(tag);
        }
    }
    let n_rim = points.len();
    let mut edges: Vec<[usize; 2]> = (0..n_rim).map(|i| [i, (i + 1) % n_rim]).collect();

    // Interface polylines.
    let mut constraints: Vec<Constraint> = Vec::new();
    if !opts.homogeneous {
        let thin = scene.phantom.as_ref().map(|p| 2.5 * p.skin_thickness).unwrap_or(s);
        for region in &scene.regions {
            let poly = region.shape.polygon(region_polyline_spacing(&region.shape, s, thin));
            let base = points.len();
            let n = poly.len();
            points.extend_from_slice(&poly);
            edges.extend((0..n).map(|i| [base + i, base + (i + 1) % n]));
            constraints.push(Constraint { polygon: poly });
        }
    }
    let n_fixed = points.len();

    // Interior seeds on concentric rings, each ring staggered by half a step,
    // kept half a local spacing away from the rim and every interface.
    let interfaces: Vec<(Point, Point)> = edges[n_rim..].iter().map(|e| (points[e[0]], points[e[1]])).collect();
    let mut r = radius - size(radius) * 3f64.sqrt() / 2.0;
    let mut ring = 0usize;
    while r > 0.5 * size(0.0) {
        let h = size(r);
        let m = ((2.0 * PI * r / h).round() as usize).max(3);
        let phase = if ring % 2 == 1 { 0.5 } else { 0.0 };
        for i in 0..m {
            let t = 2.0 * PI * (i as f64 + phase) / m as f64;
            let p = [r * t.cos(), r * t.sin()];
            if interfaces
                .iter()
                .all(|&(a, b)| point_segment_distance(p, a, b) >= 0.5 * h)
            {
                points.push(p);
            }
        }
        r -= h * 3f64.sqrt() / 2.0;
        ring += 1;
    }
    let center = [0.0, 0.0];
    if interfaces
        .iter()
        .all(|&(a, b)| point_segment_distance(center, a, b) >= 0.5 * s)
    {
        points.push(center);
    }

    // Long-edge refinement by centroid insertion.
    let mut triangles;
    let mut pass = 0;
    loop {
        triangles = triangulate(&points, &edges)?;
        let mut extra = Vec::new();
        for t in &triangles {
            let [a, b, c] = [points[t[0]], points[t[1]], points[t[2]]];
            if dist(a, b).max(dist(b, c)).max(dist(c, a)) > h_max {
                extra.push([(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]);
            }
        }
        if extra.is_empty() {
            break;
        }
        pass += 1;
        if pass > 30 {
            return Err(Error::Mesh("edge-length refinement did not terminate".into()));
        }
        points.extend(extra);
    }
    debug_assert!(n_fixed <= points.len());

    // Labels by centroid lookup against the discretised interfaces.
    let mut region_hits = vec![0usize; constraints.len()];
    let labels: Vec<String> = triangles
        .iter()
        .map(|t| {
            let c = [
                (points[t[0]][0] + points[t[1]][0] + points[t[2]][0]) / 3.0,
                (points[t[0]][1] + points[t[1]][1] + points[t[2]][1]) / 3.0,
            ];
            match constraints.iter().position(|con| polygon_contains(&con.polygon, c)) {
                Some(r) => {
                    region_hits[r] += 1;
                    scene.regions[r].tissue.clone()
                }
                None => dielectrics::MATCHING.to_string(),
            }
        })
        .collect();
    if let Some(r) = region_hits.iter().position(|&n| n == 0) {
        return Err(Error::Mesh(format!(
            "region `{}` has no triangles after discretisation",
            scene.regions[r].name
        )));
    }

    let boundary = (0..n_rim)
        .map(|i| BoundaryEdge {
            nodes: [i, (i + 1) % n_rim],
            tag: rim_tags[i],
        })
        .collect();
    let mesh = Mesh::new(points, triangles, labels, boundary)?;
    mesh.check_conformity()?;
    Ok(mesh)
}

fn triangulate(points: &[Point], edges: &[[usize; 2]]) -> Result<Vec<[usize; 3]>> {
    let verts: Vec<Point2<f64>> = points.iter().map(|p| Point2::new(p[0], p[1])).collect();
    let cdt = ConstrainedDelaunayTriangulation::<Point2<f64>>::bulk_load_cdt(verts, edges.to_vec())
        .map_err(|e| Error::Mesh(format!("triangulation failed: {e:?}")))?;
    if cdt.num_vertices() != points.len() {
        return Err(Error::Mesh("duplicate vertices in mesh input".into()));
    }
    if cdt.num_constraints() != edges.len() {
        return Err(Error::Mesh("constraint edges were dropped".into()));
    }
    Ok(cdt
        .inner_faces()
        .map(|f| {
            let v = f.vertices();
            [v[0].fix().index(), v[1].fix().index(), v[2].fix().index()]
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{build_scene, ChamberSpec, PhantomSpec, Variant};

    #[test]
    fn rejects_coarse_resolution() {
        let scene = Scene::empty(&ChamberSpec::reference(16)).unwrap();
        assert!(matches!(generate_mesh(&scene, 3.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn ports_share_one_discretisation() {
        let scene = Scene::empty(&ChamberSpec::reference(16)).unwrap();
        let mesh = generate_inversion_mesh(&scene, 6.0).unwrap();
        let lengths: Vec<Vec<f64>> = (0..16)
            .map(|i| {
                mesh.port_edges(i)
                    .map(|e| dist(mesh.vertices()[e.nodes[0]], mesh.vertices()[e.nodes[1]]))
                    .collect()
            })
            .collect();
        for l in &lengths[1..] {
            assert_eq!(l.len(), lengths[0].len());
            for (a, b) in l.iter().zip(&lengths[0]) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tiny_tear_cannot_vanish() {
        let ch = ChamberSpec::reference(16);
        let mut ph = PhantomSpec::reference(Variant::Partial);
        ph.tear_major_wavelengths = 0.05;
        let scene = build_scene(&ch, &ph).unwrap();
        // A tiny ellipse is still resolved because its polyline is a constraint.
        let mesh = generate_mesh(&scene, 4.0).unwrap();
        assert!(mesh.label_counts().contains_key(dielectrics::SYNOVIAL_FLUID));
    }
}
