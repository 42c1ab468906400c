//! End-to-end runs: synthetic data, reconstructions, the antenna study and
//! the self checks, each writing into a self-describing run directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::dielectrics::{self, TissueTable};
use crate::error::{Error, Result};
use crate::fem::KappaField;
use crate::forward::{field_to_text, scattering_matrix, solve_all, BoundaryParams, ForwardSystem, ScatteringMatrix};
use crate::inversion::{permittivity_to_text, reconstruct, trace_to_text, InverseProblem, Reconstruction};
use crate::mesh::Mesh;
use crate::mesher::{generate_inversion_mesh, generate_mesh, generate_mesh_with, MeshOptions};
use crate::metrics::{
    absolute_error, add_noise, contrast, exact_permittivity, format_report, l2_err, to_pgm, NoiseSpec, RegionMask,
    StudyRow,
};
use crate::scene::{ChamberSpec, PortSet, Scene, Variant};
use crate::solver::{build_solver, SolverConfig};

/// Width in pixels of every graymap written by the pipeline.
pub const IMAGE_WIDTH: usize = 256;

/// Output directory of one invocation. Every file written through it is
/// listed with its format version in `manifest.txt` by [`RunDir::finish`].
pub struct RunDir {
    root: PathBuf,
    files: Vec<(String, String)>,
}

impl RunDir {
    /// Creates `root` and stores a self-contained copy of the config
    /// (tissue table included) in it.
    pub fn create(root: &Path, cfg: &ExperimentConfig) -> Result<Self> {
        std::fs::create_dir_all(root)?;
        let mut run = Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        };
        let mut copy = cfg.clone();
        copy.output_dir = PathBuf::from(".");
        if cfg.tissue_table.is_some() {
            run.write_text("tissues.txt", "mwt-tissues 1", &cfg.tissue_table()?.to_text())?;
            copy.tissue_table = Some(PathBuf::from("tissues.txt"));
        }
        run.write_text("config.toml", "toml", &copy.to_toml()?)?;
        Ok(run)
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn join(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&mut self, name: &str, format: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(name);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(&path, bytes)?;
        self.files.retain(|(f, _)| f != name);
        self.files.push((name.to_string(), format.to_string()));
        Ok(())
    }

    pub fn write_text(&mut self, name: &str, format: &str, text: &str) -> Result<()> {
        self.write(name, format, text.as_bytes())
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        let mut s = String::from("mwt-run 1\n");
        for (f, fmt) in &self.files {
            writeln!(s, "{f} {fmt}").unwrap();
        }
        self.files.clear();
        std::fs::write(self.root.join("manifest.txt"), s)?;
        Ok(self.root)
    }
}

/// Noiseless and noisy data of one phantom plus the empty-chamber reference.
pub struct SyntheticData {
    pub scene: Scene,
    pub mesh: Mesh,
    pub s_empty: ScatteringMatrix,
    pub s_clean: ScatteringMatrix,
    pub s_syn: ScatteringMatrix,
    /// Total field for every transmitter on the synthesis mesh.
    pub fields: Vec<Vec<Complex64>>,
}

type Matrix = Vec<Vec<Complex64>>;

/// S-matrix entries and the total field of every transmitter.
fn forward_data(
    mesh: &Mesh,
    kappa: &KappaField,
    ports: &PortSet,
    chamber: &ChamberSpec,
    solver: &SolverConfig,
) -> Result<(Matrix, Vec<Vec<Complex64>>)> {
    let system = ForwardSystem::assemble(mesh, kappa, ports, BoundaryParams::from_chamber(chamber)?)?;
    let solver = build_solver(mesh, &system, solver)?;
    let fields = solve_all(&system, solver.as_ref())?;
    let s = scattering_matrix(&system, &fields)?;
    Ok((s, fields))
}

/// Solves the phantom and the empty chamber on the same synthesis mesh and
/// corrupts the phantom data with the configured noise.
pub fn synthesize(cfg: &ExperimentConfig) -> Result<SyntheticData> {
    cfg.validate()?;
    let table = cfg.tissue_table()?;
    let scene = cfg.scene()?;
    let mesh = generate_mesh(&scene, cfg.mesh.n_lambda)?;
    let freq = cfg.chamber.frequency;
    let kappa = crate::scene::permittivity_field(&mesh, &table)?;
    let (s, fields) = forward_data(&mesh, &kappa, &scene.ports, &cfg.chamber, &cfg.solver)?;
    let background = KappaField::PerElement(vec![table.kappa(dielectrics::MATCHING)?; mesh.n_triangles()]);
    let (e, _) = forward_data(&mesh, &background, &scene.ports, &cfg.chamber, &cfg.solver)?;
    let s_clean = ScatteringMatrix::new(s, freq, cfg.phantom.variant.name());
    let s_empty = ScatteringMatrix::new(e, freq, "empty");
    let s_syn = add_noise(&s_clean, &cfg.noise)?;
    log::info!(
        "synthesized N={} {} on {} nodes",
        cfg.chamber.n_antennas,
        cfg.phantom.variant.name(),
        mesh.n_vertices()
    );
    Ok(SyntheticData {
        scene,
        mesh,
        s_empty,
        s_clean,
        s_syn,
        fields,
    })
}

/// Writes `s_empty.txt`, `s_clean.txt`, `s_syn.txt`, the synthesis mesh and
/// the field radiated by transmitter 0.
pub fn cmd_forward(cfg: &ExperimentConfig, out: &Path) -> Result<SyntheticData> {
    let data = synthesize(cfg)?;
    let mut run = RunDir::create(out, cfg)?;
    run.write_text("s_empty.txt", "mwt-smatrix 1", &data.s_empty.to_text())?;
    run.write_text("s_clean.txt", "mwt-smatrix 1", &data.s_clean.to_text())?;
    run.write_text("s_syn.txt", "mwt-smatrix 1", &data.s_syn.to_text())?;
    run.write_text("mesh_synthesis.txt", "mwt-mesh 1", &data.mesh.to_text())?;
    run.write_text(
        "field_tx0.txt",
        "mwt-field 1",
        &field_to_text(&data.mesh, &data.fields[0])?,
    )?;
    let amplitude: Vec<f64> = data.fields[0].iter().map(|v| v.norm()).collect();
    run.write(
        "field_tx0_abs.pgm",
        "pgm",
        &to_pgm(&data.mesh, &amplitude, IMAGE_WIDTH)?,
    )?;
    run.finish()?;
    Ok(data)
}

/// A reconstruction scored against the analytic phantom.
pub struct InversionRun {
    pub mesh: Mesh,
    pub reconstruction: Reconstruction,
    /// Exact permittivity at the inversion-mesh nodes.
    pub exact: Vec<Complex64>,
    /// Nodes inside the tear ellipse.
    pub injury: RegionMask,
    pub err_total: (f64, f64),
    pub err_injury: (f64, f64),
}

fn check_data(cfg: &ExperimentConfig, syn: &ScatteringMatrix, empty: &ScatteringMatrix) -> Result<()> {
    let n = cfg.chamber.n_antennas;
    for (name, s) in [("data", syn), ("normalization", empty)] {
        if s.n() != n {
            return Err(Error::Config(format!(
                "{name} has {} ports but the config has N = {n}",
                s.n()
            )));
        }
        if (s.frequency - cfg.chamber.frequency).abs() > 1e-9 * cfg.chamber.frequency {
            return Err(Error::Config(format!(
                "{name} is at {} Hz but the config runs at {} Hz",
                s.frequency, cfg.chamber.frequency
            )));
        }
    }
    Ok(())
}

/// Reconstructs from `syn`, starting from the homogeneous matching medium on
/// the inversion mesh.
pub fn run_inversion(cfg: &ExperimentConfig, syn: &ScatteringMatrix, empty: &ScatteringMatrix) -> Result<InversionRun> {
    cfg.validate()?;
    check_data(cfg, syn, empty)?;
    let table = cfg.tissue_table()?;
    let scene = cfg.scene()?;
    let mesh = generate_inversion_mesh(&scene, cfg.mesh.n_lambda)?;
    let problem = InverseProblem::new(
        mesh.clone(),
        scene.ports.clone(),
        BoundaryParams::from_chamber(&cfg.chamber)?,
        syn.clone(),
        empty.clone(),
        cfg.inversion.alpha,
        cfg.solver,
    )?;
    let initial = vec![table.kappa(dielectrics::MATCHING)?; mesh.n_vertices()];
    let reconstruction = reconstruct(&problem, &initial, &cfg.inversion.lbfgs_options())?;
    let exact = exact_permittivity(&scene, &table, &mesh)?;
    let tear = scene
        .tear_shape()
        .ok_or_else(|| Error::Config("scene has no tear region".into()))?;
    let injury = RegionMask::inside(&mesh, tear);
    let err_total = l2_err(&reconstruction.permittivity, &exact, &RegionMask::all(&mesh))?;
    let err_injury = l2_err(&reconstruction.permittivity, &exact, &injury)?;
    log::info!(
        "inverted N={} {}: fit {:.3e} -> {:.3e} ({}), err {:.2}%/{:.2}%",
        cfg.chamber.n_antennas,
        cfg.phantom.variant.name(),
        reconstruction.initial.fit,
        reconstruction.final_row().fit,
        reconstruction.stop.name(),
        err_total.0,
        err_total.1
    );
    Ok(InversionRun {
        mesh,
        reconstruction,
        exact,
        injury,
        err_total,
        err_injury,
    })
}

fn metrics_text(run: &InversionRun) -> String {
    let rec = &run.reconstruction;
    let mut s = String::from("mwt-metrics 1\n");
    writeln!(s, "err_total_re {}", run.err_total.0).unwrap();
    writeln!(s, "err_total_im {}", run.err_total.1).unwrap();
    writeln!(s, "err_injury_re {}", run.err_injury.0).unwrap();
    writeln!(s, "err_injury_im {}", run.err_injury.1).unwrap();
    writeln!(s, "fit_initial {}", rec.initial.fit).unwrap();
    writeln!(s, "fit_final {}", rec.final_row().fit).unwrap();
    writeln!(s, "fit_reduction {}", rec.fit_reduction()).unwrap();
    writeln!(s, "iterations {}", rec.trace.len()).unwrap();
    writeln!(s, "evaluations {}", rec.evaluations).unwrap();
    writeln!(s, "stop {}", rec.stop.name()).unwrap();
    s
}

fn write_field_images(run: &mut RunDir, mesh: &Mesh, prefix: &str, values: &[Complex64]) -> Result<()> {
    let re: Vec<f64> = values.iter().map(|v| v.re).collect();
    let im: Vec<f64> = values.iter().map(|v| v.im).collect();
    run.write(&format!("{prefix}_re.pgm"), "pgm", &to_pgm(mesh, &re, IMAGE_WIDTH)?)?;
    run.write(&format!("{prefix}_im.pgm"), "pgm", &to_pgm(mesh, &im, IMAGE_WIDTH)?)
}

/// Reads `s_syn.txt` and `s_empty.txt` from `data_dir`, reconstructs and
/// writes the permittivity map, the trace, metrics and images.
pub fn cmd_invert(cfg: &ExperimentConfig, data_dir: &Path, out: &Path) -> Result<InversionRun> {
    let syn = ScatteringMatrix::load(&data_dir.join("s_syn.txt"))?;
    let empty = ScatteringMatrix::load(&data_dir.join("s_empty.txt"))?;
    let result = run_inversion(cfg, &syn, &empty)?;
    let mut run = RunDir::create(out, cfg)?;
    let rec = &result.reconstruction;
    run.write_text(
        "reconstruction.txt",
        "mwt-reconstruction 1",
        &permittivity_to_text(&result.mesh, &rec.permittivity)?,
    )?;
    run.write_text("trace.txt", "mwt-trace 1", &trace_to_text(rec))?;
    run.write_text("metrics.txt", "mwt-metrics 1", &metrics_text(&result))?;
    run.write_text("mesh_inversion.txt", "mwt-mesh 1", &result.mesh.to_text())?;
    write_field_images(&mut run, &result.mesh, "recon", &rec.permittivity)?;
    write_field_images(&mut run, &result.mesh, "exact", &result.exact)?;
    let (ae_re, ae_im) = absolute_error(&rec.permittivity, &result.exact)?;
    run.write("abs_err_re.pgm", "pgm", &to_pgm(&result.mesh, &ae_re, IMAGE_WIDTH)?)?;
    run.write("abs_err_im.pgm", "pgm", &to_pgm(&result.mesh, &ae_im, IMAGE_WIDTH)?)?;
    run.finish()?;
    Ok(result)
}

pub const STUDY_ANTENNAS: [usize; 4] = [96, 64, 32, 16];
pub const STUDY_SNR_DB: [f64; 3] = [23.0, 15.0, 10.0];
pub const STUDY_INJURIES: [Variant; 2] = [Variant::Partial, Variant::Large];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudyCell {
    pub n_antennas: usize,
    pub snr_db: f64,
    pub variant: Variant,
}

impl StudyCell {
    pub fn label(&self) -> String {
        format!("N{}_snr{}_{}", self.n_antennas, self.snr_db, self.variant.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyOptions {
    pub antennas: Vec<usize>,
    pub snr_db: Vec<f64>,
    pub injuries: Vec<Variant>,
    /// Enumerate the cells without solving anything.
    pub dry_run: bool,
    /// Run the (N, noise) groups concurrently.
    pub parallel_cells: bool,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            antennas: STUDY_ANTENNAS.to_vec(),
            snr_db: STUDY_SNR_DB.to_vec(),
            injuries: STUDY_INJURIES.to_vec(),
            dry_run: false,
            parallel_cells: false,
        }
    }
}

impl StudyOptions {
    /// Healthy baseline first, then each injury, for every (N, noise) pair.
    pub fn cells(&self) -> Vec<StudyCell> {
        let mut cells = Vec::new();
        for &n in &self.antennas {
            for &snr in &self.snr_db {
                for variant in std::iter::once(Variant::Healthy).chain(self.injuries.iter().copied()) {
                    cells.push(StudyCell {
                        n_antennas: n,
                        snr_db: snr,
                        variant,
                    });
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub cell: StudyCell,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyOutcome {
    pub cells: Vec<StudyCell>,
    pub rows: Vec<StudyRow>,
    pub failures: Vec<CellFailure>,
}

impl StudyOutcome {
    pub fn row(&self, n: usize, snr_db: f64, variant: Variant) -> Option<&StudyRow> {
        self.rows
            .iter()
            .find(|r| r.n_antennas == n && r.snr_db == snr_db && r.variant == variant.name())
    }

    pub fn report(&self) -> String {
        let mut s = format_report(&self.rows);
        if !self.failures.is_empty() {
            writeln!(s, "\nfailed cells:").unwrap();
            for f in &self.failures {
                writeln!(s, "  {}: {}", f.cell.label(), f.message).unwrap();
            }
        }
        s
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }
}

struct CellResult {
    run: InversionRun,
    seconds: f64,
}

fn run_cell(template: &ExperimentConfig, cell: StudyCell) -> Result<CellResult> {
    let start = Instant::now();
    let mut cfg = template.with_variant(cell.variant);
    cfg.chamber.n_antennas = cell.n_antennas;
    cfg.noise.snr_db = cell.snr_db;
    let data = synthesize(&cfg)?;
    let run = run_inversion(&cfg, &data.s_syn, &data.s_empty)?;
    Ok(CellResult {
        run,
        seconds: start.elapsed().as_secs_f64(),
    })
}

struct GroupOutput {
    rows: Vec<StudyRow>,
    failures: Vec<CellFailure>,
    images: Vec<(String, Mesh, Vec<Complex64>)>,
}

fn run_group(template: &ExperimentConfig, cells: &[StudyCell]) -> GroupOutput {
    let mut out = GroupOutput {
        rows: Vec::new(),
        failures: Vec::new(),
        images: Vec::new(),
    };
    let mut healthy: Option<CellResult> = None;
    for &cell in cells {
        let result = match run_cell(template, cell) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("cell {} failed: {e}", cell.label());
                out.failures.push(CellFailure {
                    cell,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let run = &result.run;
        let mut ctr = (f64::NAN, f64::NAN);
        if cell.variant != Variant::Healthy {
            match &healthy {
                Some(h) => match contrast(
                    &run.reconstruction.permittivity,
                    &h.run.reconstruction.permittivity,
                    &run.injury,
                ) {
                    Ok(c) => {
                        ctr = (c.mean.re, c.mean.im);
                        out.images
                            .push((format!("diff_{}", cell.label()), run.mesh.clone(), c.field));
                    }
                    Err(e) => out.failures.push(CellFailure {
                        cell,
                        message: format!("contrast: {e}"),
                    }),
                },
                None => out.failures.push(CellFailure {
                    cell,
                    message: "no healthy baseline for the contrast".into(),
                }),
            }
        }
        out.images.push((
            format!("recon_{}", cell.label()),
            run.mesh.clone(),
            run.reconstruction.permittivity.clone(),
        ));
        out.rows.push(StudyRow {
            n_antennas: cell.n_antennas,
            snr_db: cell.snr_db,
            variant: cell.variant.name().into(),
            err_total: run.err_total,
            err_injury: run.err_injury,
            ctr,
            seconds: result.seconds,
            iterations: run.reconstruction.trace.len(),
        });
        if cell.variant == Variant::Healthy {
            healthy = Some(result);
        }
    }
    out
}

/// Healthy and injured reconstructions for every (N, noise) pair, with the
/// contrast of each injury against the healthy baseline of its pair. A cell
/// that fails is recorded and the study carries on.
pub fn cmd_study(template: &ExperimentConfig, out: &Path, opts: &StudyOptions) -> Result<StudyOutcome> {
    template.validate()?;
    let cells = opts.cells();
    if opts.dry_run {
        return Ok(StudyOutcome {
            cells,
            rows: Vec::new(),
            failures: Vec::new(),
        });
    }
    let per_group = 1 + opts.injuries.len();
    let groups: Vec<&[StudyCell]> = cells.chunks(per_group).collect();
    let outputs: Vec<GroupOutput> = if opts.parallel_cells {
        groups.par_iter().map(|g| run_group(template, g)).collect()
    } else {
        groups.iter().map(|g| run_group(template, g)).collect()
    };
    let mut run = RunDir::create(out, template)?;
    let mut outcome = StudyOutcome {
        cells,
        rows: Vec::new(),
        failures: Vec::new(),
    };
    for g in outputs {
        for (name, mesh, field) in &g.images {
            run.write_text(&format!("{name}.txt"), "mwt-field 1", &field_to_text(mesh, field)?)?;
            let re: Vec<f64> = field.iter().map(|v| v.re).collect();
            run.write(&format!("{name}_re.pgm"), "pgm", &to_pgm(mesh, &re, IMAGE_WIDTH)?)?;
        }
        outcome.rows.extend(g.rows);
        outcome.failures.extend(g.failures);
    }
    run.write_text("study.toml", "toml", &outcome.to_toml()?)?;
    run.write_text("report.txt", "text", &outcome.report())?;
    run.finish()?;
    Ok(outcome)
}

/// Re-renders the report of a finished study directory.
pub fn cmd_report(study_dir: &Path) -> Result<String> {
    let outcome = StudyOutcome::from_toml(&std::fs::read_to_string(study_dir.join("study.toml"))?)?;
    Ok(outcome.report())
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseCheck {
    pub sigma: f64,
    pub samples: usize,
    /// Sample standard deviation of `Re S′/Re S − 1` and `Im S′/Im S − 1`.
    pub std: (f64, f64),
    pub mean: (f64, f64),
    /// Two runs with the same seed gave bit-identical matrices.
    pub deterministic: bool,
}

/// Applies the noise model to a `k × k` test matrix (`k² ≥ samples`) and
/// measures the perturbation statistics.
pub fn noise_check(spec: &NoiseSpec, samples: usize) -> Result<NoiseCheck> {
    spec.validate()?;
    let k = ((samples as f64).sqrt().ceil() as usize).max(2);
    let entries: Vec<Vec<Complex64>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| Complex64::new(1.0 + (i + 2 * j) as f64 * 1e-3, -0.5 - (2 * i + j) as f64 * 1e-3))
                .collect()
        })
        .collect();
    let s = ScatteringMatrix::new(entries, 1e9, "noise-check");
    let a = add_noise(&s, spec)?;
    let b = add_noise(&s, spec)?;
    let deterministic = a.to_text() == b.to_text();
    let mut re = Vec::with_capacity(k * k);
    let mut im = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            re.push(a.get(i, j).re / s.get(i, j).re - 1.0);
            im.push(a.get(i, j).im / s.get(i, j).im - 1.0);
        }
    }
    let stats = |v: &[f64]| {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var.sqrt())
    };
    let (mr, sr) = stats(&re);
    let (mi, si) = stats(&im);
    Ok(NoiseCheck {
        sigma: if spec.is_none() { 0.0 } else { spec.sigma() },
        samples: k * k,
        std: (sr, si),
        mean: (mr, mi),
        deterministic,
    })
}

/// Small problem on which the adjoint gradient is compared with finite
/// differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheckSetup {
    pub chamber: ChamberSpec,
    pub n_lambda: f64,
    pub alpha: f64,
    /// Number of random nodes probed.
    pub nodes: usize,
    pub seed: u64,
    /// Central-difference step relative to `|κ|` at the probed node.
    pub relative_step: f64,
}

impl GradientCheckSetup {
    /// Two wavelengths across, eight ports, four points per wavelength.
    pub fn coarse() -> Self {
        let mut chamber = ChamberSpec::reference(8);
        chamber.diameter *= 2.0 / 7.14;
        Self {
            chamber,
            n_lambda: 4.0,
            alpha: 1e-6,
            nodes: 20,
            seed: 7,
            relative_step: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientSample {
    pub node: usize,
    pub adjoint: [f64; 2],
    pub finite_difference: [f64; 2],
    /// `‖adjoint − fd‖ / ‖fd‖` over the two components.
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheck {
    pub n_vertices: usize,
    pub samples: Vec<GradientSample>,
}

impl GradientCheck {
    pub fn max_relative_error(&self) -> f64 {
        self.samples.iter().map(|s| s.relative_error).fold(0.0, f64::max)
    }
}

fn gaussian_bump(mesh: &Mesh, base: Complex64, amp: Complex64, center: [f64; 2], width: f64) -> Vec<Complex64> {
    mesh.vertices()
        .iter()
        .map(|p| {
            let d2 = (p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2);
            base * (1.0 + amp * (-d2 / (2.0 * width * width)).exp())
        })
        .collect()
}

/// Data come from a Gaussian inclusion on the inversion mesh itself; the
/// gradient is probed at a different inclusion so the residual is nonzero.
pub fn gradient_check(setup: &GradientCheckSetup) -> Result<GradientCheck> {
    setup.chamber.validate()?;
    let table = TissueTable::shoulder_1ghz();
    let scene = Scene::empty(&setup.chamber)?;
    let mesh = generate_mesh_with(&scene, &MeshOptions::inversion(setup.n_lambda))?;
    let r = scene.radius();
    let k0 = table.kappa(dielectrics::MATCHING)?;
    let params = BoundaryParams::from_chamber(&setup.chamber)?;
    let simulate = |kappa: Vec<Complex64>| -> Result<ScatteringMatrix> {
        let (s, _) = forward_data(
            &mesh,
            &KappaField::Nodal(kappa),
            &scene.ports,
            &setup.chamber,
            &SolverConfig::Direct,
        )?;
        Ok(ScatteringMatrix::new(s, setup.chamber.frequency, "gradient-check"))
    };
    let truth = gaussian_bump(&mesh, k0, Complex64::new(0.3, -0.2), [0.2 * r, 0.1 * r], 0.25 * r);
    let syn = simulate(truth)?;
    let empty = simulate(vec![k0; mesh.n_vertices()])?;
    let problem = InverseProblem::new(
        mesh.clone(),
        scene.ports.clone(),
        params,
        syn,
        empty,
        setup.alpha,
        SolverConfig::Direct,
    )?;
    let at = gaussian_bump(&mesh, k0, Complex64::new(0.1, 0.05), [-0.1 * r, 0.2 * r], 0.3 * r);
    let (_, grad) = problem.cost_and_gradient(&at)?;

    let dirichlet = mesh.dirichlet_nodes();
    let free: Vec<usize> = (0..mesh.n_vertices()).filter(|&v| !dirichlet[v]).collect();
    if setup.nodes > free.len() {
        return Err(Error::InvalidArgument(format!(
            "{} probe nodes requested but only {} are free",
            setup.nodes,
            free.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(setup.seed);
    let picked: Vec<usize> = sample(&mut rng, free.len(), setup.nodes)
        .into_iter()
        .map(|i| free[i])
        .collect();
    let samples = picked
        .into_par_iter()
        .map(|node| {
            let h = setup.relative_step * at[node].norm();
            let mut fd = [0.0; 2];
            for (c, dir) in [Complex64::new(h, 0.0), Complex64::new(0.0, h)].into_iter().enumerate() {
                let mut plus = at.clone();
                plus[node] += dir;
                let mut minus = at.clone();
                minus[node] -= dir;
                fd[c] = (problem.cost(&plus)?.total - problem.cost(&minus)?.total) / (2.0 * h);
            }
            let adj = grad[node];
            let diff = ((adj[0] - fd[0]).powi(2) + (adj[1] - fd[1]).powi(2)).sqrt();
            let norm = (fd[0] * fd[0] + fd[1] * fd[1]).sqrt();
            Ok(GradientSample {
                node,
                adjoint: adj,
                finite_difference: fd,
                relative_error: diff / norm,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GradientCheck {
        n_vertices: mesh.n_vertices(),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_study_has_twelve_baselines_and_twenty_four_injuries() {
        let cells = StudyOptions::default().cells();
        assert_eq!(cells.len(), 36);
        let healthy = cells.iter().filter(|c| c.variant == Variant::Healthy).count();
        assert_eq!(healthy, 12);
        assert_eq!(cells[0].variant, Variant::Healthy);
        assert_eq!(cells[0].n_antennas, 96);
    }

    #[test]
    fn dry_run_solves_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let opts = StudyOptions {
            dry_run: true,
            ..StudyOptions::default()
        };
        let out = cmd_study(&ExperimentConfig::default(), &dir.path().join("s"), &opts).unwrap();
        assert_eq!(out.cells.len(), 36);
        assert!(out.rows.is_empty());
        assert!(!dir.path().join("s").exists());
    }

    #[test]
    fn outcome_toml_roundtrip_keeps_nan_contrast() {
        let outcome = StudyOutcome {
            cells: StudyOptions::default().cells()[..2].to_vec(),
            rows: vec![StudyRow {
                n_antennas: 16,
                snr_db: 23.0,
                variant: "healthy".into(),
                err_total: (1.0, 2.0),
                err_injury: (3.0, 4.0),
                ctr: (f64::NAN, f64::NAN),
                seconds: 1.5,
                iterations: 60,
            }],
            failures: vec![],
        };
        let back = StudyOutcome::from_toml(&outcome.to_toml().unwrap()).unwrap();
        assert_eq!(back.cells, outcome.cells);
        assert!(back.rows[0].ctr.0.is_nan());
        assert_eq!(back.report(), outcome.report());
    }

    #[test]
    fn noise_statistics_at_23_db() {
        let check = noise_check(&NoiseSpec::new(23.0, 3), 10_000).unwrap();
        assert_eq!(check.samples, 10_000);
        assert!(check.deterministic);
        assert!((check.std.0 / check.sigma - 1.0).abs() < 0.05);
        assert!((check.std.1 / check.sigma - 1.0).abs() < 0.05);
    }
}
