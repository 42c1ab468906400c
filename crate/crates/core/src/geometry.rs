//! Planar shapes used to describe the phantom and their polygonal
//! discretisations.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

pub type Point = [f64; 2];

pub fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Signed doubled area of the triangle `abc` (positive when counterclockwise).
pub fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// Distance from `p` to the segment `ab`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return dist(p, a);
    }
    let t = (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0);
    dist(p, [a[0] + t * dx, a[1] + t * dy])
}

/// Proper or touching intersection of two closed segments.
pub fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |p: Point, q: Point, r: Point| {
        r[0] >= p[0].min(q[0]) && r[0] <= p[0].max(q[0]) && r[1] >= p[1].min(q[1]) && r[1] <= p[1].max(q[1])
    };
    (d1 == 0.0 && on(c, d, a)) || (d2 == 0.0 && on(c, d, b)) || (d3 == 0.0 && on(a, b, c)) || (d4 == 0.0 && on(a, b, d))
}

/// Even-odd point-in-polygon test on a closed polygon (first vertex not repeated).
pub fn polygon_contains(poly: &[Point], p: Point) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

pub fn polygon_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    let mut a = 0.0;
    for i in 0..n {
        let (p, q) = (poly[i], poly[(i + 1) % n]);
        a += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * a
}

/// Whether any edge of closed polygon `a` touches any edge of closed polygon `b`.
pub fn polygons_intersect(a: &[Point], b: &[Point]) -> bool {
    let (na, nb) = (a.len(), b.len());
    for i in 0..na {
        let (p, q) = (a[i], a[(i + 1) % na]);
        for j in 0..nb {
            if segments_intersect(p, q, b[j], b[(j + 1) % nb]) {
                return true;
            }
        }
    }
    false
}

fn wrap_angle(theta: f64) -> f64 {
    theta.rem_euclid(2.0 * PI)
}

/// A closed planar region with an analytic membership test and a polygonal
/// boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Disk {
        center: Point,
        radius: f64,
    },
    /// Ring sector between two radii, spanning counterclockwise from
    /// `theta_start` to `theta_end` (radians).
    AnnularSector {
        center: Point,
        inner_radius: f64,
        outer_radius: f64,
        theta_start: f64,
        theta_end: f64,
    },
    Ellipse {
        center: Point,
        semi_major: f64,
        semi_minor: f64,
        /// Rotation of the major axis from +x, radians.
        orientation: f64,
    },
}

impl Shape {
    pub fn contains(&self, p: Point) -> bool {
        match *self {
            Shape::Disk { center, radius } => dist(p, center) <= radius,
            Shape::AnnularSector {
                center,
                inner_radius,
                outer_radius,
                theta_start,
                theta_end,
            } => {
                let r = dist(p, center);
                if r < inner_radius || r > outer_radius {
                    return false;
                }
                let span = wrap_angle(theta_end - theta_start);
                let rel = wrap_angle((p[1] - center[1]).atan2(p[0] - center[0]) - theta_start);
                rel <= span
            }
            Shape::Ellipse {
                center,
                semi_major,
                semi_minor,
                orientation,
            } => {
                let (s, c) = orientation.sin_cos();
                let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
                let u = c * dx + s * dy;
                let v = -s * dx + c * dy;
                (u / semi_major).powi(2) + (v / semi_minor).powi(2) <= 1.0
            }
        }
    }

    pub fn area(&self) -> f64 {
        match *self {
            Shape::Disk { radius, .. } => PI * radius * radius,
            Shape::AnnularSector {
                inner_radius,
                outer_radius,
                theta_start,
                theta_end,
                ..
            } => {
                0.5 * wrap_angle(theta_end - theta_start) * (outer_radius * outer_radius - inner_radius * inner_radius)
            }
            Shape::Ellipse {
                semi_major, semi_minor, ..
            } => PI * semi_major * semi_minor,
        }
    }

    /// Counterclockwise boundary polygon with edges no longer than `max_seg`.
    /// Vertices lie exactly on the analytic boundary.
    pub fn polygon(&self, max_seg: f64) -> Vec<Point> {
        match *self {
            Shape::Disk { center, radius } => {
                let n = ((2.0 * PI * radius / max_seg).ceil() as usize).max(8);
                (0..n)
                    .map(|i| {
                        let t = 2.0 * PI * i as f64 / n as f64;
                        [center[0] + radius * t.cos(), center[1] + radius * t.sin()]
                    })
                    .collect()
            }
            Shape::AnnularSector {
                center,
                inner_radius,
                outer_radius,
                theta_start,
                theta_end,
            } => {
                let span = wrap_angle(theta_end - theta_start);
                let arc = |r: f64, reverse: bool| -> Vec<Point> {
                    let n = ((span * r / max_seg).ceil() as usize).max(2);
                    let mut pts: Vec<Point> = (0..=n)
                        .map(|i| {
                            let t = theta_start + span * i as f64 / n as f64;
                            [center[0] + r * t.cos(), center[1] + r * t.sin()]
                        })
                        .collect();
                    if reverse {
                        pts.reverse();
                    }
                    pts
                };
                let outer = arc(outer_radius, false);
                let inner = arc(inner_radius, true);
                let mut poly = Vec::new();
                let radial = |from: Point, to: Point, poly: &mut Vec<Point>| {
                    let n = ((dist(from, to) / max_seg).ceil() as usize).max(1);
                    for i in 1..n {
                        let t = i as f64 / n as f64;
                        poly.push([from[0] + t * (to[0] - from[0]), from[1] + t * (to[1] - from[1])]);
                    }
                };
                poly.extend_from_slice(&outer);
                radial(*outer.last().unwrap(), inner[0], &mut poly);
                poly.extend_from_slice(&inner);
                radial(*inner.last().unwrap(), outer[0], &mut poly);
                poly
            }
            Shape::Ellipse {
                center,
                semi_major,
                semi_minor,
                orientation,
            } => {
                // Ramanujan's perimeter approximation is enough to pick a count.
                let (a, b) = (semi_major, semi_minor);
                let h = ((a - b) / (a + b)).powi(2);
                let perim = PI * (a + b) * (1.0 + 3.0 * h / (10.0 + (4.0 - 3.0 * h).sqrt()));
                // Parametric spacing is uneven; oversample by the axis ratio.
                let n = ((perim / max_seg * (a / b).sqrt()).ceil() as usize).max(12);
                let (s, c) = orientation.sin_cos();
                (0..n)
                    .map(|i| {
                        let t = 2.0 * PI * i as f64 / n as f64;
                        let (u, v) = (a * t.cos(), b * t.sin());
                        [center[0] + c * u - s * v, center[1] + s * u + c * v]
                    })
                    .collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polygons_are_ccw_and_close_in_area() {
        let shapes = [
            Shape::Disk {
                center: [0.01, -0.02],
                radius: 0.05,
            },
            Shape::AnnularSector {
                center: [0.0, 0.0],
                inner_radius: 0.02,
                outer_radius: 0.04,
                theta_start: 0.4,
                theta_end: 2.7,
            },
            Shape::Ellipse {
                center: [0.0, 0.02],
                semi_major: 0.014,
                semi_minor: 0.007,
                orientation: 0.3,
            },
        ];
        for s in &shapes {
            let poly = s.polygon(0.001);
            let a = polygon_area(&poly);
            assert!(a > 0.0);
            assert!((a - s.area()).abs() < 0.01 * s.area(), "{s:?}: {a}");
            for w in poly.windows(2) {
                assert!(dist(w[0], w[1]) <= 0.001 + 1e-12);
            }
        }
    }

    #[test]
    fn sector_membership_handles_wraparound() {
        let s = Shape::AnnularSector {
            center: [0.0, 0.0],
            inner_radius: 1.0,
            outer_radius: 2.0,
            theta_start: 5.5,
            theta_end: 0.5,
        };
        assert!(s.contains([1.5, 0.0]));
        assert!(!s.contains([-1.5, 0.0]));
        assert!(!s.contains([0.5, 0.0]));
    }

    #[test]
    fn segment_predicates() {
        assert!(segments_intersect([0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]));
        assert!(!segments_intersect([0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]));
        assert!((point_segment_distance([0.5, 1.0], [0.0, 0.0], [1.0, 0.0]) - 1.0).abs() < 1e-15);
        let square = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        assert!(polygon_contains(&square, [0.5, 0.5]));
        assert!(!polygon_contains(&square, [1.5, 0.5]));
    }
}
