//! Complex permittivity arithmetic and the tissue property database.
//!
//! Time dependence is `exp(+jωt)` throughout the crate, so a lossy medium has
//! a relative permittivity with a *negative* imaginary part,
//! `ε_r = ε′ − jσ/(ωε₀)`, and the squared wavenumber `κ = ω²ε₀μ₀ε_r` lies in
//! the fourth quadrant.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Vacuum permittivity in F/m.
pub const EPS0: f64 = 8.854_187_812_8e-12;
/// Vacuum permeability in H/m.
pub const MU0: f64 = 1.256_637_062_12e-6;

/// Speed of light derived from [`EPS0`] and [`MU0`].
pub fn speed_of_light() -> f64 {
    1.0 / (EPS0 * MU0).sqrt()
}

fn angular(freq: f64) -> Result<f64> {
    if !(freq > 0.0) || !freq.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "frequency must be positive and finite, got {freq}"
        )));
    }
    Ok(2.0 * PI * freq)
}

/// A medium described by its real relative permittivity and conductivity at
/// one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexPermittivity {
    pub eps_real: f64,
    /// Conductivity in S/m.
    pub sigma: f64,
    /// Frequency in Hz.
    pub frequency: f64,
}

impl ComplexPermittivity {
    pub fn new(eps_real: f64, sigma: f64, frequency: f64) -> Result<Self> {
        // Validates through the conversion.
        to_complex(eps_real, sigma, frequency)?;
        Ok(Self {
            eps_real,
            sigma,
            frequency,
        })
    }

    /// Build from a complex relative permittivity `ε′ − jε″`.
    pub fn from_complex(eps: Complex64, frequency: f64) -> Result<Self> {
        let omega = angular(frequency)?;
        Self::new(eps.re, -eps.im * omega * EPS0, frequency)
    }

    /// `ε″ = σ/(ωε₀)`.
    pub fn eps_imag(&self) -> f64 {
        self.sigma / (2.0 * PI * self.frequency * EPS0)
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.eps_real, -self.eps_imag())
    }
}

/// `ε′ − jσ/(2πf ε₀)`.
pub fn to_complex(eps_real: f64, sigma: f64, freq: f64) -> Result<Complex64> {
    let omega = angular(freq)?;
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "conductivity must be non-negative, got {sigma}"
        )));
    }
    if !eps_real.is_finite() {
        return Err(Error::InvalidArgument("eps_real must be finite".into()));
    }
    Ok(Complex64::new(eps_real, -sigma / (omega * EPS0)))
}

/// One relaxation term of a Cole-Cole model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColeColePole {
    pub delta_eps: f64,
    /// Relaxation time in seconds.
    pub tau: f64,
    /// Broadening exponent in `[0, 1)`; zero gives a Debye pole.
    pub alpha: f64,
}

/// Multi-pole Cole-Cole dispersion with a static conductivity term.
#[derive(Debug, Clone, PartialEq)]
pub struct ColeColeParams {
    pub eps_inf: f64,
    pub poles: Vec<ColeColePole>,
    pub sigma_static: f64,
}

impl ColeColeParams {
    pub fn validate(&self) -> Result<()> {
        if !self.eps_inf.is_finite() {
            return Err(Error::InvalidArgument("eps_inf must be finite".into()));
        }
        if !(self.sigma_static >= 0.0) {
            return Err(Error::InvalidArgument(
                "static conductivity must be non-negative".into(),
            ));
        }
        for (n, p) in self.poles.iter().enumerate() {
            if !(p.delta_eps >= 0.0) {
                return Err(Error::InvalidArgument(format!("pole {n}: delta_eps < 0")));
            }
            if !(p.tau > 0.0) {
                return Err(Error::InvalidArgument(format!("pole {n}: tau must be > 0")));
            }
            if !(0.0..1.0).contains(&p.alpha) {
                return Err(Error::InvalidArgument(format!("pole {n}: alpha must lie in [0, 1)")));
            }
        }
        Ok(())
    }
}

/// `ε(ω) = ε∞ + Σ Δεₙ / (1 + (jωτₙ)^(1−αₙ)) + σ_s/(jωε₀)`.
pub fn cole_cole_eval(params: &ColeColeParams, freq: f64) -> Result<Complex64> {
    params.validate()?;
    let omega = angular(freq)?;
    let j = Complex64::i();
    let mut eps = Complex64::new(params.eps_inf, 0.0);
    for p in &params.poles {
        let jwt = j * (omega * p.tau);
        eps += p.delta_eps / (1.0 + jwt.powf(1.0 - p.alpha));
    }
    eps += params.sigma_static / (j * omega * EPS0);
    Ok(eps)
}

/// Result of fitting a binary mixture to a target permittivity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureFit {
    /// Volume fraction of component A.
    pub fraction: f64,
    /// `|v√ε_a + (1−v)√ε_b − √ε_target|²` at the returned fraction.
    pub residual: f64,
}

/// Kraszewski binary law `√ε_mix = v√ε_a + (1−v)√ε_b`, solved for `v` in
/// closed form: the objective is a quadratic in `v`, so the minimiser is the
/// projection of `√ε_t − √ε_b` onto `√ε_a − √ε_b`, clamped to `[0, 1]`.
pub fn kraszewski_fraction(target: Complex64, comp_a: Complex64, comp_b: Complex64) -> Result<MixtureFit> {
    let (sa, sb, st) = (comp_a.sqrt(), comp_b.sqrt(), target.sqrt());
    let d = sa - sb;
    let denom = d.norm_sqr();
    if denom == 0.0 {
        return Err(Error::InvalidArgument("mixture components must differ".into()));
    }
    let v = ((d.conj() * (st - sb)).re / denom).clamp(0.0, 1.0);
    let residual = (d * v - (st - sb)).norm_sqr();
    Ok(MixtureFit { fraction: v, residual })
}

/// `κ = k² = ω²ε₀μ₀ε_r`, in 1/m².
pub fn wavenumber_squared(eps: Complex64, freq: f64) -> Result<Complex64> {
    let omega = angular(freq)?;
    Ok(eps * (omega * omega * EPS0 * MU0))
}

/// Principal complex wavenumber `ω√ε_r / c` (Re ≥ 0, Im ≤ 0 for lossy media).
pub fn wavenumber(eps: Complex64, freq: f64) -> Result<Complex64> {
    Ok(wavenumber_squared(eps, freq)?.sqrt())
}

/// Wavelength `2π / Re k` inside a medium.
pub fn wavelength(eps: Complex64, freq: f64) -> Result<f64> {
    Ok(2.0 * PI / wavenumber(eps, freq)?.re)
}

/// Inverse of [`wavenumber_squared`].
pub fn permittivity_from_kappa(kappa: Complex64, freq: f64) -> Result<Complex64> {
    let omega = angular(freq)?;
    Ok(kappa / (omega * omega * EPS0 * MU0))
}

pub const BONE: &str = "bone";
pub const TENDON: &str = "tendon";
pub const MUSCLE: &str = "muscle";
pub const SKIN: &str = "skin";
pub const SYNOVIAL_FLUID: &str = "sf";
pub const MATCHING: &str = "matching";

/// The tissue names a shoulder table must contain.
pub const SHOULDER_TISSUES: [&str; 6] = [BONE, TENDON, MUSCLE, SKIN, SYNOVIAL_FLUID, MATCHING];

/// Tissue name to complex relative permittivity, at a single frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct TissueTable {
    frequency: f64,
    entries: BTreeMap<String, Complex64>,
}

impl TissueTable {
    pub fn new(frequency: f64) -> Result<Self> {
        angular(frequency)?;
        Ok(Self {
            frequency,
            entries: BTreeMap::new(),
        })
    }

    /// Shoulder tissues at 1 GHz. The matching medium copies muscle.
    pub fn shoulder_1ghz() -> Self {
        let mut t = Self::new(1.0e9).expect("valid frequency");
        for (name, re, im) in [
            (BONE, 12.4, 2.79),
            (TENDON, 45.6, 13.66),
            (MUSCLE, 54.8, 17.43),
            (SKIN, 40.9, 16.17),
            (SYNOVIAL_FLUID, 68.0, 29.0),
            (MATCHING, 54.8, 17.43),
        ] {
            t.insert(name, Complex64::new(re, -im));
        }
        t
    }

    pub fn frequency(&self) -> f64 {
        self.frequency
    }

    pub fn insert(&mut self, name: &str, eps: Complex64) {
        self.entries.insert(name.to_string(), eps);
    }

    pub fn get(&self, name: &str) -> Result<Complex64> {
        self.entries
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownTissue(name.to_string()))
    }

    pub fn kappa(&self, name: &str) -> Result<Complex64> {
        wavenumber_squared(self.get(name)?, self.frequency)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Checks the shoulder-table invariant: exactly the five tissues plus the
    /// matching medium, all lossy, matching medium equal to muscle.
    pub fn validate_shoulder(&self) -> Result<()> {
        if self.entries.len() != SHOULDER_TISSUES.len() {
            return Err(Error::InvalidArgument(format!(
                "tissue table must hold exactly {:?}",
                SHOULDER_TISSUES
            )));
        }
        for name in SHOULDER_TISSUES {
            let eps = self.get(name)?;
            if eps.re < 1.0 || eps.im > 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "tissue `{name}` is not a passive medium: {eps}"
                )));
            }
        }
        if self.get(MATCHING)? != self.get(MUSCLE)? {
            return Err(Error::InvalidArgument("matching medium must equal muscle".into()));
        }
        Ok(())
    }

    /// Parses the plain-text table format:
    ///
    /// ```text
    /// # comment
    /// frequency 1e9
    /// muscle 54.8 0.96967
    /// ```
    ///
    /// Each tissue row is `name eps_real sigma[S/m]`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut frequency = None;
        let mut rows = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::Format(format!("tissue table line {}: `{raw}`", lineno + 1));
            match fields.as_slice() {
                ["frequency", f] => frequency = Some(f.parse::<f64>().map_err(|_| bad())?),
                [name, eps, sigma] => {
                    let eps: f64 = eps.parse().map_err(|_| bad())?;
                    let sigma: f64 = sigma.parse().map_err(|_| bad())?;
                    rows.push((name.to_string(), eps, sigma));
                }
                _ => return Err(bad()),
            }
        }
        let frequency = frequency.ok_or_else(|| Error::Format("tissue table lacks a frequency line".into()))?;
        let mut table = Self::new(frequency)?;
        for (name, eps, sigma) in rows {
            let value = to_complex(eps, sigma, frequency)?;
            table.entries.insert(name, value);
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let omega = 2.0 * PI * self.frequency;
        let mut out = String::from("# name eps_real sigma[S/m]\n");
        let _ = writeln!(out, "frequency {:e}", self.frequency);
        for (name, eps) in &self.entries {
            let _ = writeln!(out, "{name} {} {}", eps.re, -eps.im * omega * EPS0);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol * b.norm().max(1.0)
    }

    #[test]
    fn zero_conductivity_is_real() {
        assert_eq!(to_complex(54.8, 0.0, 1e9).unwrap(), Complex64::new(54.8, 0.0));
    }

    #[test]
    fn muscle_and_sf_from_hand_conductivities() {
        let m = to_complex(54.8, 0.96967, 1e9).unwrap();
        assert!((m.im + 17.43).abs() < 5e-3, "{m}");
        let sf = to_complex(68.0, 1.6133, 1e9).unwrap();
        assert!((sf.im + 29.0).abs() < 5e-3, "{sf}");
    }

    #[test]
    fn rejects_bad_frequency() {
        assert!(matches!(to_complex(1.0, 0.0, 0.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(to_complex(1.0, 0.0, -5.0), Err(Error::InvalidArgument(_))));
        assert!(wavenumber_squared(Complex64::new(1.0, 0.0), f64::NAN).is_err());
    }

    #[test]
    fn cole_cole_examples() {
        let flat = ColeColeParams {
            eps_inf: 10.0,
            poles: vec![],
            sigma_static: 0.0,
        };
        assert_eq!(cole_cole_eval(&flat, 3.3e9).unwrap(), Complex64::new(10.0, 0.0));

        let debye = ColeColeParams {
            eps_inf: 4.0,
            poles: vec![ColeColePole {
                delta_eps: 50.0,
                tau: 1.0 / (2.0 * PI * 1e9),
                alpha: 0.0,
            }],
            sigma_static: 0.0,
        };
        assert!(close(
            cole_cole_eval(&debye, 1e9).unwrap(),
            Complex64::new(29.0, -25.0),
            1e-12
        ));

        let cond = ColeColeParams {
            eps_inf: 4.0,
            poles: vec![],
            sigma_static: 0.9697,
        };
        let v = cole_cole_eval(&cond, 1e9).unwrap();
        assert!((v.re - 4.0).abs() < 1e-12 && (v.im + 17.43).abs() < 5e-3);
    }

    #[test]
    fn cole_cole_rejects_bad_alpha() {
        let p = ColeColeParams {
            eps_inf: 4.0,
            poles: vec![ColeColePole {
                delta_eps: 1.0,
                tau: 1e-11,
                alpha: 1.0,
            }],
            sigma_static: 0.0,
        };
        assert!(cole_cole_eval(&p, 1e9).is_err());
    }

    #[test]
    fn kraszewski_endpoints_and_midpoint() {
        let a = Complex64::new(68.0, -29.0);
        let b = Complex64::new(12.4, -2.79);
        let fa = kraszewski_fraction(a, a, b).unwrap();
        assert!((fa.fraction - 1.0).abs() < 1e-12 && fa.residual < 1e-20);
        let fb = kraszewski_fraction(b, a, b).unwrap();
        assert!(fb.fraction.abs() < 1e-12 && fb.residual < 1e-20);
        let mid = (0.5 * a.sqrt() + 0.5 * b.sqrt()).powi(2);
        let fm = kraszewski_fraction(mid, a, b).unwrap();
        assert!((fm.fraction - 0.5).abs() < 1e-12);
        assert!(kraszewski_fraction(a, b, b).is_err());
    }

    #[test]
    fn free_space_kappa() {
        let f = 2.5e9;
        let c = speed_of_light();
        let expect = (2.0 * PI * f / c).powi(2);
        let k = wavenumber_squared(Complex64::new(1.0, 0.0), f).unwrap();
        assert!((k.re - expect).abs() < 1e-9 * expect && k.im == 0.0);
    }

    #[test]
    fn matching_medium_wavelength_is_four_cm() {
        let lam = wavelength(Complex64::new(54.8, -17.43), 1e9).unwrap();
        assert!((lam - 0.040007).abs() < 1e-5, "{lam}");
        let k = wavenumber(Complex64::new(54.8, -17.43), 1e9).unwrap();
        assert!(k.re > 0.0 && k.im < 0.0);
    }

    #[test]
    fn table_roundtrip_and_invariants() {
        let t = TissueTable::shoulder_1ghz();
        t.validate_shoulder().unwrap();
        let back = TissueTable::parse(&t.to_text()).unwrap();
        for name in SHOULDER_TISSUES {
            assert!(close(back.get(name).unwrap(), t.get(name).unwrap(), 1e-12));
        }
        assert!(matches!(t.get("cartilage"), Err(Error::UnknownTissue(_))));

        let mut bad = t.clone();
        bad.insert(MATCHING, Complex64::new(50.0, -10.0));
        assert!(bad.validate_shoulder().is_err());
    }
}
