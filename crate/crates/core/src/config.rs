//! Experiment configuration, stored as TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dielectrics::TissueTable;
use crate::error::{Error, Result};
use crate::inversion::LbfgsOptions;
use crate::metrics::NoiseSpec;
use crate::scene::{build_scene, ChamberSpec, PhantomSpec, Scene, Variant};
use crate::solver::SolverConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshConfig {
    /// Points per wavelength of the matching medium.
    pub n_lambda: f64,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self { n_lambda: 6.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InversionConfig {
    pub alpha: f64,
    pub iters: usize,
    pub memory: usize,
    /// Early stop once the fit term falls below this fraction of its start.
    pub fit_reduction: f64,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self {
            alpha: 1e-6,
            iters: 60,
            memory: 10,
            fit_reduction: 1e-2,
        }
    }
}

impl InversionConfig {
    pub fn lbfgs_options(&self) -> LbfgsOptions {
        LbfgsOptions {
            max_iters: self.iters,
            memory: self.memory,
            fit_reduction: (self.fit_reduction > 0.0).then_some(self.fit_reduction),
            ..LbfgsOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub chamber: ChamberSpec,
    pub phantom: PhantomSpec,
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub inversion: InversionConfig,
    /// `snr_db = inf` disables noise.
    pub noise: NoiseSpec,
    /// Tissue table file; the built-in 1 GHz shoulder table when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tissue_table: Option<PathBuf>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("runs")
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            chamber: ChamberSpec::reference(32),
            phantom: PhantomSpec::reference(Variant::Partial),
            mesh: MeshConfig::default(),
            solver: SolverConfig::default(),
            inversion: InversionConfig::default(),
            noise: NoiseSpec::new(23.0, 1),
            tissue_table: None,
            output_dir: default_output(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file; a relative tissue table path is taken relative
    /// to the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml(&std::fs::read_to_string(path)?)?;
        if let (Some(table), Some(dir)) = (&cfg.tissue_table, path.parent()) {
            if table.is_relative() {
                cfg.tissue_table = Some(dir.join(table));
            }
        }
        Ok(cfg)
    }

    /// Same experiment with a different phantom variant.
    pub fn with_variant(&self, variant: Variant) -> Self {
        let mut c = self.clone();
        c.phantom = PhantomSpec {
            variant,
            tear_major_wavelengths: match variant {
                Variant::Large => PhantomSpec::reference(Variant::Large).tear_major_wavelengths,
                _ if self.phantom.variant == Variant::Large => PhantomSpec::reference(variant).tear_major_wavelengths,
                _ => self.phantom.tear_major_wavelengths,
            },
            ..self.phantom.clone()
        };
        c
    }

    pub fn tissue_table(&self) -> Result<TissueTable> {
        let table = match &self.tissue_table {
            Some(p) => TissueTable::load(p)?,
            None => TissueTable::shoulder_1ghz(),
        };
        if (table.frequency() - self.chamber.frequency).abs() > 1e-6 * self.chamber.frequency {
            return Err(Error::Config(format!(
                "tissue table is for {} Hz but the chamber runs at {} Hz",
                table.frequency(),
                self.chamber.frequency
            )));
        }
        Ok(table)
    }

    pub fn scene(&self) -> Result<Scene> {
        build_scene(&self.chamber, &self.phantom)
    }

    /// Checks every module precondition before anything is computed.
    pub fn validate(&self) -> Result<()> {
        self.chamber.validate()?;
        let table = self.tissue_table()?;
        table.validate_shoulder()?;
        self.scene()?;
        if !(self.mesh.n_lambda >= 4.0) {
            return Err(Error::Config(format!(
                "n_lambda must be ≥ 4, got {}",
                self.mesh.n_lambda
            )));
        }
        self.solver.validate()?;
        let inv = &self.inversion;
        if !(inv.alpha >= 0.0 && inv.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be ≥ 0, got {}", inv.alpha)));
        }
        if inv.memory == 0 {
            return Err(Error::Config("L-BFGS memory must be positive".into()));
        }
        if !(inv.fit_reduction >= 0.0 && inv.fit_reduction < 1.0) {
            return Err(Error::Config("fit_reduction must lie in [0, 1)".into()));
        }
        self.noise.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_roundtrip_including_no_noise() {
        let mut c = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap(), c);
        c.noise = NoiseSpec::none();
        c.solver = SolverConfig::Oras(Default::default());
        c.tissue_table = Some("tissues.txt".into());
        let text = c.to_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = ExperimentConfig::default().to_toml().unwrap() + "\nbogus = 1\n";
        assert!(matches!(ExperimentConfig::from_toml(&text), Err(Error::Config(_))));
    }

    #[test]
    fn variant_switch_keeps_tear_sizes() {
        let c = ExperimentConfig::default();
        let large = c.with_variant(Variant::Large);
        assert_eq!(large.phantom.tear_major_wavelengths, 0.69);
        let back = large.with_variant(Variant::Partial);
        assert_eq!(back.phantom.tear_major_wavelengths, 0.397);
        assert_eq!(c.with_variant(Variant::Healthy).phantom.tear_major_wavelengths, 0.397);
    }
}
