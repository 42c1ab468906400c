//! Chamber geometry, antenna ports and phantom layout.
//!
//! The imaging chamber is a disk. Its rim carries `N` waveguide ports spaced
//! uniformly in angle; the wall between two ports is metal, except for two
//! gaps that stay open to model the open sides of the chamber.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dielectrics::TissueTable;
use crate::dielectrics::{self, EPS0, MU0};
use crate::error::{Error, Result};
use crate::fem::KappaField;
use crate::geometry::{dist, polygons_intersect, Point, Shape};
use crate::mesh::Mesh;

/// Antenna counts used by the ablation study.
pub const STUDY_ANTENNA_COUNTS: [usize; 4] = [96, 64, 32, 16];

fn wrap(theta: f64) -> f64 {
    theta.rem_euclid(2.0 * PI)
}

/// Signed angular difference folded into `(-π, π]`.
fn angle_diff(a: f64, b: f64) -> f64 {
    let d = wrap(a - b);
    if d > PI {
        d - 2.0 * PI
    } else {
        d
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChamberSpec {
    /// Chamber diameter in meters.
    pub diameter: f64,
    /// Broad-wall width of the feeding waveguides in meters; sets the
    /// propagation constant of the port mode.
    pub waveguide_width: f64,
    /// Relative permittivity of the ceramic filling the waveguides.
    pub waveguide_eps: f64,
    /// Upper bound on the port arc as a fraction of the angular pitch; the arc
    /// is the waveguide width unless the ring is too crowded for it.
    pub port_fill: f64,
    pub n_antennas: usize,
    /// Rotation of the whole port ring, radians.
    pub shift_angle: f64,
    pub frequency: f64,
    /// Relative permittivity of the matching medium filling the chamber.
    pub medium: Complex64,
    /// Directions (radians) whose wall gaps are open instead of metal.
    pub open_directions: Vec<f64>,
}

impl ChamberSpec {
    /// 7.14 wavelengths across, 2.1 cm ceramic-loaded (ε = 59) guides, 1 GHz,
    /// muscle-equivalent matching medium.
    pub fn reference(n_antennas: usize) -> Self {
        let table = TissueTable::shoulder_1ghz();
        let medium = table.get(dielectrics::MATCHING).expect("matching medium");
        let lambda = dielectrics::wavelength(medium, table.frequency()).expect("valid");
        Self {
            diameter: 7.14 * lambda,
            waveguide_width: 0.021,
            waveguide_eps: 59.0,
            port_fill: 0.5,
            n_antennas,
            shift_angle: 0.0,
            frequency: table.frequency(),
            medium,
            open_directions: vec![0.5 * PI, 1.5 * PI],
        }
    }

    pub fn radius(&self) -> f64 {
        0.5 * self.diameter
    }

    /// Wavelength in the matching medium.
    pub fn wavelength(&self) -> Result<f64> {
        dielectrics::wavelength(self.medium, self.frequency)
    }

    /// Complex wavenumber of the matching medium (used on open boundaries and
    /// as the Schwarz interface impedance).
    pub fn medium_wavenumber(&self) -> Result<Complex64> {
        dielectrics::wavenumber(self.medium, self.frequency)
    }

    /// Arc length of each port on the chamber rim.
    pub fn port_arc(&self) -> f64 {
        let pitch = PI * self.diameter / self.n_antennas.max(1) as f64;
        self.waveguide_width.min(self.port_fill * pitch)
    }

    /// Propagation constant of the dominant guide mode,
    /// `β = √(ω²μ₀ε₀ε_wg − (π/a)²)`; below cutoff this is the principal root of
    /// a negative number, i.e. an evanescent mode.
    pub fn port_beta(&self) -> Complex64 {
        let omega = 2.0 * PI * self.frequency;
        let cut = PI / self.waveguide_width;
        Complex64::new(omega * omega * MU0 * EPS0 * self.waveguide_eps - cut * cut, 0.0).sqrt()
    }

    pub fn is_study_configuration(&self) -> bool {
        STUDY_ANTENNA_COUNTS.contains(&self.n_antennas)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.diameter,
            self.waveguide_width,
            self.waveguide_eps,
            self.port_fill,
            self.shift_angle,
            self.frequency,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite || !(self.diameter > 0.0) || !(self.frequency > 0.0) {
            return Err(Error::Geometry("chamber dimensions must be positive".into()));
        }
        if self.n_antennas == 0 {
            return Err(Error::Geometry("at least one antenna is required".into()));
        }
        if !(self.waveguide_width > 0.0) || !(self.port_fill > 0.0) {
            return Err(Error::Geometry("port width must be positive".into()));
        }
        if self.n_antennas as f64 * self.port_arc() >= PI * self.diameter {
            return Err(Error::Geometry(format!(
                "{} ports of {:.4} m overlap on a rim of {:.4} m",
                self.n_antennas,
                self.port_arc(),
                PI * self.diameter
            )));
        }
        if self.medium.re < 1.0 || self.medium.im > 0.0 {
            return Err(Error::Geometry("matching medium must be passive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Port {
    pub index: usize,
    pub center_angle: f64,
    pub arc_length: f64,
}

impl Port {
    pub fn half_angle(&self, radius: f64) -> f64 {
        0.5 * self.arc_length / radius
    }

    pub fn start_angle(&self, radius: f64) -> f64 {
        wrap(self.center_angle - self.half_angle(radius))
    }

    pub fn end_angle(&self, radius: f64) -> f64 {
        wrap(self.center_angle + self.half_angle(radius))
    }
}

/// Classification of a point on the chamber rim.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Metal,
    Port(usize),
    Open,
}

impl std::fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BoundaryTag::Metal => f.write_str("metal"),
            BoundaryTag::Open => f.write_str("open"),
            BoundaryTag::Port(i) => write!(f, "port:{i}"),
        }
    }
}

impl std::str::FromStr for BoundaryTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "metal" => Ok(BoundaryTag::Metal),
            "open" => Ok(BoundaryTag::Open),
            _ => s
                .strip_prefix("port:")
                .and_then(|i| i.parse().ok())
                .map(BoundaryTag::Port)
                .ok_or_else(|| Error::Format(format!("bad boundary tag `{s}`"))),
        }
    }
}

/// Ordered antenna ports plus the open wall gaps.
#[derive(Debug, Clone, PartialEq)]
pub struct PortSet {
    pub radius: f64,
    pub ports: Vec<Port>,
    /// Open arcs as `(start, end)` angles, counterclockwise.
    pub open_arcs: Vec<(f64, f64)>,
}

impl PortSet {
    pub fn new(chamber: &ChamberSpec) -> Result<Self> {
        chamber.validate()?;
        let n = chamber.n_antennas;
        let radius = chamber.radius();
        let arc = chamber.port_arc();
        let ports: Vec<Port> = (0..n)
            .map(|i| Port {
                index: i,
                center_angle: wrap(chamber.shift_angle + 2.0 * PI * i as f64 / n as f64),
                arc_length: arc,
            })
            .collect();

        let mut open_arcs = Vec::new();
        for &dir in &chamber.open_directions {
            // The gap containing `dir`, or the gap after the port that does.
            let rel = wrap(dir - chamber.shift_angle) / (2.0 * PI / n as f64);
            let mut k = rel.floor() as usize % n;
            let next = (k + 1) % n;
            let inside_next = angle_diff(dir, ports[next].center_angle).abs() <= ports[next].half_angle(radius);
            if inside_next {
                k = next;
            }
            let gap = (ports[k].end_angle(radius), ports[(k + 1) % n].start_angle(radius));
            if !open_arcs.contains(&gap) {
                open_arcs.push(gap);
            }
        }
        Ok(Self {
            radius,
            ports,
            open_arcs,
        })
    }

    pub fn len(&self) -> usize {
        self.ports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ports.is_empty()
    }

    /// Tag of the rim point at angle `theta`. Points exactly on a port end are
    /// reported as metal.
    pub fn classify(&self, theta: f64) -> BoundaryTag {
        for p in &self.ports {
            if angle_diff(theta, p.center_angle).abs() < p.half_angle(self.radius) {
                return BoundaryTag::Port(p.index);
            }
        }
        for &(s, e) in &self.open_arcs {
            let span = wrap(e - s);
            let rel = wrap(theta - s);
            if rel > 0.0 && rel < span {
                return BoundaryTag::Open;
            }
        }
        BoundaryTag::Metal
    }

    /// Angles at which the rim tag changes, sorted.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self
            .ports
            .iter()
            .flat_map(|p| [p.start_angle(self.radius), p.end_angle(self.radius)])
            .collect();
        b.sort_by(|a, c| a.partial_cmp(c).unwrap());
        b.dedup_by(|a, c| (*a - *c).abs() < 1e-14);
        b
    }

    /// Total rim length per tag kind: `(ports, metal, open)`.
    pub fn arc_budget(&self) -> (f64, f64, f64) {
        let ports: f64 = self.ports.iter().map(|p| p.arc_length).sum();
        let open: f64 = self.open_arcs.iter().map(|&(s, e)| wrap(e - s) * self.radius).sum();
        let metal = 2.0 * PI * self.radius - ports - open;
        (ports, metal, open)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Healthy,
    Partial,
    Large,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Healthy => "healthy",
            Variant::Partial => "partial",
            Variant::Large => "large",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "healthy" => Ok(Variant::Healthy),
            "partial" => Ok(Variant::Partial),
            "large" => Ok(Variant::Large),
            _ => Err(Error::Config(format!("unknown phantom variant `{s}`"))),
        }
    }
}

/// Simplified 2D shoulder cross-section: a skin-covered muscle disk holding a
/// humerus-like bone, a tendon band arching over the bone, and a tear ellipse
/// inside the tendon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomSpec {
    pub variant: Variant,
    pub body_center: Point,
    pub body_radius: f64,
    pub skin_thickness: f64,
    pub bone_center: Point,
    pub bone_radius: f64,
    /// Tendon band radii, measured from the bone center.
    pub tendon_inner: f64,
    pub tendon_outer: f64,
    pub tendon_theta_start: f64,
    pub tendon_theta_end: f64,
    pub tear_center: Point,
    /// Major axis of the tear in wavelengths of the matching medium.
    pub tear_major_wavelengths: f64,
    /// Minor-to-major axis ratio.
    pub tear_aspect: f64,
    pub tear_orientation: f64,
}

impl PhantomSpec {
    pub fn reference(variant: Variant) -> Self {
        Self {
            variant,
            body_center: [0.0, 0.0],
            body_radius: 0.07,
            skin_thickness: 0.002,
            bone_center: [0.0, -0.015],
            bone_radius: 0.022,
            tendon_inner: 0.025,
            tendon_outer: 0.045,
            tendon_theta_start: 25f64.to_radians(),
            tendon_theta_end: 155f64.to_radians(),
            tear_center: [0.0, 0.020],
            tear_major_wavelengths: match variant {
                Variant::Large => 0.69,
                Variant::Healthy | Variant::Partial => 0.397,
            },
            tear_aspect: 0.5,
            tear_orientation: 0.0,
        }
    }

    pub fn tear_ellipse(&self, wavelength: f64) -> Shape {
        let major = self.tear_major_wavelengths * wavelength;
        Shape::Ellipse {
            center: self.tear_center,
            semi_major: 0.5 * major,
            semi_minor: 0.5 * major * self.tear_aspect,
            orientation: self.tear_orientation,
        }
    }

    /// Tissue regions in lookup precedence order (first match wins).
    pub fn regions(&self, wavelength: f64) -> Vec<Region> {
        let tear_tissue = match self.variant {
            Variant::Healthy => dielectrics::MUSCLE,
            Variant::Partial | Variant::Large => dielectrics::SYNOVIAL_FLUID,
        };
        vec![
            Region {
                name: "tear".into(),
                shape: self.tear_ellipse(wavelength),
                tissue: tear_tissue.into(),
            },
            Region {
                name: "bone".into(),
                shape: Shape::Disk {
                    center: self.bone_center,
                    radius: self.bone_radius,
                },
                tissue: dielectrics::BONE.into(),
            },
            Region {
                name: "tendon".into(),
                shape: Shape::AnnularSector {
                    center: self.bone_center,
                    inner_radius: self.tendon_inner,
                    outer_radius: self.tendon_outer,
                    theta_start: self.tendon_theta_start,
                    theta_end: self.tendon_theta_end,
                },
                tissue: dielectrics::TENDON.into(),
            },
            Region {
                name: "muscle".into(),
                shape: Shape::Disk {
                    center: self.body_center,
                    radius: self.body_radius - self.skin_thickness,
                },
                tissue: dielectrics::MUSCLE.into(),
            },
            Region {
                name: "skin".into(),
                shape: Shape::Disk {
                    center: self.body_center,
                    radius: self.body_radius,
                },
                tissue: dielectrics::SKIN.into(),
            },
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub name: String,
    pub shape: Shape,
    pub tissue: String,
}

/// Chamber, ports and (optionally) a phantom, with a resolved tissue map.
#[derive(Debug, Clone)]
pub struct Scene {
    pub chamber: ChamberSpec,
    pub phantom: Option<PhantomSpec>,
    pub ports: PortSet,
    pub wavelength: f64,
    pub regions: Vec<Region>,
}

/// Builds and validates a scene holding a phantom.
pub fn build_scene(chamber: &ChamberSpec, phantom: &PhantomSpec) -> Result<Scene> {
    let mut scene = Scene::empty(chamber)?;
    let lambda = scene.wavelength;
    let regions = phantom.regions(lambda);
    let probe = 0.25e-3;
    let polys: Vec<Vec<Point>> = regions.iter().map(|r| r.shape.polygon(probe)).collect();

    let radius = chamber.radius();
    let body = &polys[4];
    if body.iter().any(|p| dist(*p, [0.0, 0.0]) >= radius) {
        return Err(Error::Geometry("body outline leaves the chamber".into()));
    }
    if !(phantom.skin_thickness > 0.0 && phantom.skin_thickness < phantom.body_radius) {
        return Err(Error::Geometry("skin thickness out of range".into()));
    }
    let inner = &regions[3].shape;
    if !polys[0].iter().all(|p| inner.contains(*p)) {
        return Err(Error::Geometry("tear ellipse not inside body outline".into()));
    }
    for i in 0..polys.len() {
        for j in i + 1..polys.len() {
            if polygons_intersect(&polys[i], &polys[j]) {
                return Err(Error::Geometry(format!(
                    "{} and {} boundaries intersect",
                    regions[i].name, regions[j].name
                )));
            }
        }
    }
    // The tear must sit wholly in one enclosing tissue so that its boundary is
    // a single interface.
    let tendon = &regions[2].shape;
    let in_tendon = polys[0].iter().all(|p| tendon.contains(*p));
    let outside_tendon = polys[0].iter().all(|p| !tendon.contains(*p));
    if !in_tendon && !outside_tendon {
        return Err(Error::Geometry("tear ellipse straddles the tendon band".into()));
    }
    if polys[0].iter().any(|p| regions[1].shape.contains(*p)) {
        return Err(Error::Geometry("tear ellipse overlaps the bone".into()));
    }
    scene.phantom = Some(phantom.clone());
    scene.regions = regions;
    Ok(scene)
}

impl Scene {
    /// Chamber filled with matching medium only.
    pub fn empty(chamber: &ChamberSpec) -> Result<Self> {
        let ports = PortSet::new(chamber)?;
        Ok(Self {
            chamber: chamber.clone(),
            phantom: None,
            ports,
            wavelength: chamber.wavelength()?,
            regions: Vec::new(),
        })
    }

    pub fn radius(&self) -> f64 {
        self.chamber.radius()
    }

    pub fn frequency(&self) -> f64 {
        self.chamber.frequency
    }

    pub fn variant(&self) -> Option<Variant> {
        self.phantom.as_ref().map(|p| p.variant)
    }

    pub fn tissue_at(&self, p: Point) -> &str {
        self.regions
            .iter()
            .find(|r| r.shape.contains(p))
            .map(|r| r.tissue.as_str())
            .unwrap_or(dielectrics::MATCHING)
    }

    pub fn tear_shape(&self) -> Option<&Shape> {
        self.regions.iter().find(|r| r.name == "tear").map(|r| &r.shape)
    }

    pub fn bone_shape(&self) -> Option<&Shape> {
        self.regions.iter().find(|r| r.name == "bone").map(|r| &r.shape)
    }
}

/// Per-element `κ` from the region labels of `mesh`.
pub fn permittivity_field(mesh: &Mesh, table: &TissueTable) -> Result<KappaField> {
    let kappa_by_region: Vec<Complex64> = mesh
        .region_names()
        .iter()
        .map(|name| table.kappa(name))
        .collect::<Result<_>>()?;
    Ok(KappaField::PerElement(
        mesh.triangle_regions().iter().map(|&r| kappa_by_region[r]).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_ports_are_disjoint() {
        let ch = ChamberSpec::reference(32);
        let ports = PortSet::new(&ch).unwrap();
        assert_eq!(ports.len(), 32);
        let r = ch.radius();
        for (i, p) in ports.ports.iter().enumerate() {
            assert_eq!(p.index, i);
            let q = &ports.ports[(i + 1) % 32];
            let gap = angle_diff(q.start_angle(r), p.end_angle(r));
            assert!(gap > 0.0);
        }
        let (p, m, o) = ports.arc_budget();
        assert!(((p + m + o) - PI * ch.diameter).abs() < 1e-9 * PI * ch.diameter);
        assert_eq!(ports.open_arcs.len(), 2);
        assert!(o > 0.0 && m > 0.0);
    }

    #[test]
    fn crowded_ring_shrinks_ports() {
        let ch = ChamberSpec::reference(96);
        assert!(ch.port_arc() < ch.waveguide_width);
        PortSet::new(&ch).unwrap();
        let mut bad = ChamberSpec::reference(96);
        bad.port_fill = 1.5;
        assert!(matches!(PortSet::new(&bad), Err(Error::Geometry(_))));
    }

    #[test]
    fn beta_from_cutoff_formula() {
        let ch = ChamberSpec::reference(32);
        let beta = ch.port_beta();
        assert!(beta.im.abs() < 1e-12);
        assert!((beta.re - 59.465).abs() < 1e-2, "{beta}");
    }

    #[test]
    fn classification_matches_budget() {
        let ch = ChamberSpec::reference(16);
        let ports = PortSet::new(&ch).unwrap();
        let n = 200_000;
        let mut counts = [0usize; 3];
        for k in 0..n {
            let t = 2.0 * PI * (k as f64 + 0.5) / n as f64;
            match ports.classify(t) {
                BoundaryTag::Port(_) => counts[0] += 1,
                BoundaryTag::Metal => counts[1] += 1,
                BoundaryTag::Open => counts[2] += 1,
            }
        }
        let circ = PI * ch.diameter;
        let (p, m, o) = ports.arc_budget();
        for (c, expect) in counts.iter().zip([p, m, o]) {
            let got = *c as f64 / n as f64 * circ;
            assert!((got - expect).abs() < 1e-4, "{got} vs {expect}");
        }
        assert_eq!(ports.classify(ports.ports[3].center_angle), BoundaryTag::Port(3));
    }

    #[test]
    fn tear_sizes_follow_wavelength() {
        let ch = ChamberSpec::reference(32);
        let lam = ch.wavelength().unwrap();
        for (variant, major) in [(Variant::Partial, 0.397), (Variant::Large, 0.69)] {
            let scene = build_scene(&ch, &PhantomSpec::reference(variant)).unwrap();
            match scene.tear_shape().unwrap() {
                Shape::Ellipse { semi_major, center, .. } => {
                    assert!((2.0 * semi_major - major * lam).abs() < 1e-12);
                    assert_eq!(*center, [0.0, 0.020]);
                }
                _ => unreachable!(),
            }
            assert_eq!(scene.tissue_at([0.0, 0.020]), dielectrics::SYNOVIAL_FLUID);
        }
        let healthy = build_scene(&ch, &PhantomSpec::reference(Variant::Healthy)).unwrap();
        assert_eq!(healthy.tissue_at([0.0, 0.020]), dielectrics::MUSCLE);
        assert_eq!(healthy.tissue_at([0.0, -0.015]), dielectrics::BONE);
        assert_eq!(healthy.tissue_at([0.0, 0.069]), dielectrics::SKIN);
        assert_eq!(healthy.tissue_at([0.0, 0.1]), dielectrics::MATCHING);
    }

    #[test]
    fn tear_outside_body_is_rejected() {
        let ch = ChamberSpec::reference(32);
        let mut ph = PhantomSpec::reference(Variant::Large);
        ph.tear_center = [0.0, 0.067];
        assert!(matches!(build_scene(&ch, &ph), Err(Error::Geometry(_))));
        let mut ph = PhantomSpec::reference(Variant::Large);
        ph.tear_center = [0.0, 0.035];
        assert!(matches!(build_scene(&ch, &ph), Err(Error::Geometry(_))));
    }
}
