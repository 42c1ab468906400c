//! Synthetic-data noise, reconstruction error measures and differential
//! imaging.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dielectrics::TissueTable;
use crate::error::{Error, Result};
use crate::forward::ScatteringMatrix;
use crate::geometry::Shape;
use crate::mesh::Mesh;
use crate::scene::Scene;

/// How a decibel figure maps to the relative standard deviation `σ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseConvention {
    /// `σ = 10^(−snr/20)`.
    #[default]
    Amplitude,
    /// `σ = 10^(−snr/10)`.
    Power,
}

/// Multiplicative Gaussian noise on the real and imaginary part of every
/// coefficient. An infinite SNR means no noise at all.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub snr_db: f64,
    pub seed: u64,
    #[serde(default)]
    pub convention: NoiseConvention,
}

impl NoiseSpec {
    pub fn new(snr_db: f64, seed: u64) -> Self {
        Self {
            snr_db,
            seed,
            convention: NoiseConvention::Amplitude,
        }
    }

    pub fn none() -> Self {
        Self::new(f64::INFINITY, 0)
    }

    pub fn is_none(&self) -> bool {
        self.snr_db == f64::INFINITY
    }

    pub fn sigma(&self) -> f64 {
        match self.convention {
            NoiseConvention::Amplitude => 10f64.powf(-self.snr_db / 20.0),
            NoiseConvention::Power => 10f64.powf(-self.snr_db / 10.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(Error::InvalidArgument(format!("bad SNR {}", self.snr_db)));
        }
        Ok(())
    }

    pub fn descriptor(&self) -> String {
        if self.is_none() {
            return "none".into();
        }
        let conv = match self.convention {
            NoiseConvention::Amplitude => "amplitude",
            NoiseConvention::Power => "power",
        };
        format!("snr_db={} seed={} convention={conv}", self.snr_db, self.seed)
    }

    pub fn parse_descriptor(text: &str) -> Result<Self> {
        let bad = || Error::Format(format!("bad noise descriptor `{text}`"));
        if text.trim() == "none" {
            return Ok(Self::none());
        }
        let mut spec = Self::new(f64::NAN, 0);
        for kv in text.split_whitespace() {
            let (k, v) = kv.split_once('=').ok_or_else(bad)?;
            match k {
                "snr_db" => spec.snr_db = v.parse().map_err(|_| bad())?,
                "seed" => spec.seed = v.parse().map_err(|_| bad())?,
                "convention" => {
                    spec.convention = match v {
                        "amplitude" => NoiseConvention::Amplitude,
                        "power" => NoiseConvention::Power,
                        _ => return Err(bad()),
                    }
                }
                _ => return Err(bad()),
            }
        }
        if spec.snr_db.is_nan() {
            return Err(bad());
        }
        Ok(spec)
    }
}

/// The two standard normal draws for entry `(i, j)` of an `n × n` matrix.
/// Each entry has its own ChaCha8 stream, so draws do not depend on the
/// order in which entries are visited.
pub fn entry_draws(seed: u64, n: usize, i: usize, j: usize) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((i * n + j) as u64);
    (rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// `Re S' = Re S (1 + σ n₁)`, `Im S' = Im S (1 + σ n₂)`.
pub fn add_noise(s: &ScatteringMatrix, spec: &NoiseSpec) -> Result<ScatteringMatrix> {
    spec.validate()?;
    if spec.is_none() {
        return Ok(s.clone());
    }
    let sigma = spec.sigma();
    let n = s.n();
    let mut out = s.clone();
    for (i, row) in out.entries.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (n1, n2) = entry_draws(spec.seed, n, i, j);
            *v = Complex64::new(v.re * (1.0 + sigma * n1), v.im * (1.0 + sigma * n2));
        }
    }
    out.noise = Some(*spec);
    Ok(out)
}

/// A set of mesh nodes over which a metric is evaluated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMask {
    pub nodes: Vec<usize>,
}

impl RegionMask {
    pub fn all(mesh: &Mesh) -> Self {
        Self {
            nodes: (0..mesh.n_vertices()).collect(),
        }
    }

    pub fn inside(mesh: &Mesh, shape: &Shape) -> Self {
        Self {
            nodes: (0..mesh.n_vertices())
                .filter(|&v| shape.contains(mesh.vertices()[v]))
                .collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    fn check(&self, n: usize) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::InvalidArgument("empty region mask".into()));
        }
        if let Some(&bad) = self.nodes.iter().find(|&&v| v >= n) {
            return Err(Error::Dimension(format!("mask node {bad} outside field of {n}")));
        }
        Ok(())
    }
}

/// Exact relative permittivity at every node of `mesh`, by tissue lookup in
/// the analytic scene.
pub fn exact_permittivity(scene: &Scene, table: &TissueTable, mesh: &Mesh) -> Result<Vec<Complex64>> {
    mesh.vertices().iter().map(|&p| table.get(scene.tissue_at(p))).collect()
}

fn same_len(a: &[Complex64], b: &[Complex64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "fields of {} and {} values",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// `|Re Δε|` and `|Im Δε|` per node.
pub fn absolute_error(recon: &[Complex64], exact: &[Complex64]) -> Result<(Vec<f64>, Vec<f64>)> {
    same_len(recon, exact)?;
    Ok(recon
        .iter()
        .zip(exact)
        .map(|(r, e)| ((r.re - e.re).abs(), (r.im - e.im).abs()))
        .unzip())
}

/// Relative discrete L² error over `mask`, in percent, for the real and the
/// imaginary part.
pub fn l2_err(recon: &[Complex64], exact: &[Complex64], mask: &RegionMask) -> Result<(f64, f64)> {
    same_len(recon, exact)?;
    mask.check(recon.len())?;
    let (mut dr, mut di, mut nr, mut ni) = (0.0, 0.0, 0.0, 0.0);
    for &v in &mask.nodes {
        let d = recon[v] - exact[v];
        dr += d.re * d.re;
        di += d.im * d.im;
        nr += exact[v].re * exact[v].re;
        ni += exact[v].im * exact[v].im;
    }
    let pct = |d: f64, n: f64| {
        if n == 0.0 {
            if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            100.0 * (d / n).sqrt()
        }
    };
    Ok((pct(dr, nr), pct(di, ni)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Contrast {
    /// Mean of the differential image over the mask.
    pub mean: Complex64,
    /// `injured − healthy` at every node.
    pub field: Vec<Complex64>,
}

pub fn contrast(injured: &[Complex64], healthy: &[Complex64], mask: &RegionMask) -> Result<Contrast> {
    same_len(injured, healthy)?;
    mask.check(injured.len())?;
    let field: Vec<Complex64> = injured.iter().zip(healthy).map(|(a, b)| a - b).collect();
    let mean = mask.nodes.iter().map(|&v| field[v]).sum::<Complex64>() / mask.len() as f64;
    Ok(Contrast { mean, field })
}

/// Binary portable graymap of a nodal field, linearly interpolated inside
/// each triangle. Black is the minimum, white the maximum; pixels outside the
/// mesh are black.
pub fn to_pgm(mesh: &Mesh, values: &[f64], width: usize) -> Result<Vec<u8>> {
    if values.len() != mesh.n_vertices() {
        return Err(Error::Dimension(format!(
            "{} values for {} nodes",
            values.len(),
            mesh.n_vertices()
        )));
    }
    if width < 2 {
        return Err(Error::InvalidArgument("image width must be at least 2".into()));
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in mesh.vertices() {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    let px = (hi[0] - lo[0]) / (width - 1) as f64;
    let height = (((hi[1] - lo[1]) / px).round() as usize + 1).max(2);
    let (vmin, vmax) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = if vmax > vmin { vmax - vmin } else { 1.0 };
    let mut img = vec![0u8; width * height];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let p = mesh.corners(t);
        let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let (bx0, bx1) = (
            p.iter().map(|q| q[0]).fold(f64::INFINITY, f64::min),
            p.iter().map(|q| q[0]).fold(f64::NEG_INFINITY, f64::max),
        );
        let (by0, by1) = (
            p.iter().map(|q| q[1]).fold(f64::INFINITY, f64::min),
            p.iter().map(|q| q[1]).fold(f64::NEG_INFINITY, f64::max),
        );
        let c0 = ((bx0 - lo[0]) / px).floor().max(0.0) as usize;
        let c1 = (((bx1 - lo[0]) / px).ceil() as usize).min(width - 1);
        let r0 = ((hi[1] - by1) / px).floor().max(0.0) as usize;
        let r1 = (((hi[1] - by0) / px).ceil() as usize).min(height - 1);
        for r in r0..=r1 {
            let y = hi[1] - r as f64 * px;
            for c in c0..=c1 {
                let x = lo[0] + c as f64 * px;
                let l1 = ((x - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (y - p[0][1])) / det;
                let l2 = ((p[1][0] - p[0][0]) * (y - p[0][1]) - (x - p[0][0]) * (p[1][1] - p[0][1])) / det;
                let l0 = 1.0 - l1 - l2;
                if l0 < -1e-12 || l1 < -1e-12 || l2 < -1e-12 {
                    continue;
                }
                let v = l0 * values[tri[0]] + l1 * values[tri[1]] + l2 * values[tri[2]];
                img[r * width + c] = (255.0 * ((v - vmin) / span).clamp(0.0, 1.0)).round() as u8;
            }
        }
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(&img);
    Ok(out)
}

/// One row of the ablation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub n_antennas: usize,
    pub snr_db: f64,
    pub variant: String,
    pub err_total: (f64, f64),
    pub err_injury: (f64, f64),
    pub ctr: (f64, f64),
    pub seconds: f64,
    pub iterations: usize,
}

/// Plain-text table: one line per cell, err in percent, ctr as real/imag.
pub fn format_report(rows: &[StudyRow]) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "{:>4} {:>6} {:>8} {:>10} {:>10} {:>10} {:>10} {:>9} {:>9} {:>6} {:>9}",
        "N",
        "snr_db",
        "variant",
        "err_tot_re",
        "err_tot_im",
        "err_inj_re",
        "err_inj_im",
        "ctr_re",
        "ctr_im",
        "iters",
        "seconds"
    )
    .unwrap();
    for r in rows {
        writeln!(
            s,
            "{:>4} {:>6} {:>8} {:>10.2} {:>10.2} {:>10.2} {:>10.2} {:>9.4} {:>9.4} {:>6} {:>9.2}",
            r.n_antennas,
            r.snr_db,
            r.variant,
            r.err_total.0,
            r.err_total.1,
            r.err_injury.0,
            r.err_injury.1,
            r.ctr.0,
            r.ctr.1,
            r.iterations,
            r.seconds
        )
        .unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn descriptor_roundtrip() {
        let mut s = NoiseSpec::new(23.0, 7);
        s.convention = NoiseConvention::Power;
        assert_eq!(NoiseSpec::parse_descriptor(&s.descriptor()).unwrap(), s);
        assert!(NoiseSpec::parse_descriptor("none").unwrap().is_none());
        assert!(NoiseSpec::parse_descriptor("snr_db=x").is_err());
    }

    #[test]
    fn l2_err_of_scaled_field() {
        let exact: Vec<Complex64> = (1..6).map(|i| Complex64::new(i as f64, -0.5 * i as f64)).collect();
        let recon: Vec<Complex64> = exact.iter().map(|v| Complex64::new(1.1 * v.re, v.im)).collect();
        let mask = RegionMask { nodes: vec![0, 2, 4] };
        let (re, im) = l2_err(&recon, &exact, &mask).unwrap();
        assert!((re - 10.0).abs() < 1e-12);
        assert_eq!(im, 0.0);
        assert!(l2_err(&recon, &exact, &RegionMask { nodes: vec![] }).is_err());
    }
}
