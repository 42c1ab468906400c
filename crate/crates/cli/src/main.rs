use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use mwt_core::config::ExperimentConfig;
use mwt_core::metrics::NoiseSpec;
use mwt_core::pipeline::{self, GradientCheckSetup, StudyOptions};
use mwt_core::scene::Variant;
use mwt_core::solver::{OrasConfig, SolverConfig};

/// Microwave tomography: synthetic data, reconstructions and the antenna study.
#[derive(Parser, Debug)]
#[command(name = "mwt", version)]
struct Cli {
    /// Noise seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run directory for this invocation.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize S_empty, S_syn and field dumps.
    Forward(ForwardArgs),
    /// Reconstruct the permittivity from a forward run.
    Invert(InvertArgs),
    /// Healthy and injured reconstructions over antenna counts and noise levels.
    Study(StudyArgs),
    /// Empirical statistics of the noise model.
    NoiseCheck(NoiseCheckArgs),
    /// Adjoint gradient against central finite differences on a coarse mesh.
    GradientCheck(GradientCheckArgs),
    /// Print the report of a finished study.
    Report { dir: PathBuf },
}

#[derive(Args, Debug, Clone)]
struct Experiment {
    /// TOML experiment config; built-in defaults when absent.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    antennas: Option<usize>,
    /// Signal-to-noise ratio in dB, or `none`.
    #[arg(long)]
    snr: Option<String>,
    #[arg(long)]
    n_lambda: Option<f64>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SolverKind {
    Direct,
    Oras,
}

#[derive(Args, Debug, Clone)]
struct SolverArgs {
    #[arg(long, value_enum)]
    solver: Option<SolverKind>,
    #[arg(long)]
    n_sub: Option<usize>,
    #[arg(long)]
    overlap: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    restart: Option<usize>,
}

#[derive(Args, Debug, Clone)]
struct InversionArgs {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    memory: Option<usize>,
}

#[derive(Args, Debug)]
struct ForwardArgs {
    #[command(flatten)]
    experiment: Experiment,
}

#[derive(Args, Debug)]
struct InvertArgs {
    #[command(flatten)]
    experiment: Experiment,
    #[command(flatten)]
    inversion: InversionArgs,
    /// Directory holding `s_syn.txt` and `s_empty.txt`.
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args, Debug)]
struct StudyArgs {
    #[command(flatten)]
    experiment: Experiment,
    #[command(flatten)]
    inversion: InversionArgs,
    /// List the cells without solving.
    #[arg(long)]
    dry_run: bool,
    #[arg(long)]
    parallel_cells: bool,
    /// Antenna counts (default 96,64,32,16).
    #[arg(long = "study-antennas", value_delimiter = ',')]
    study_antennas: Option<Vec<usize>>,
    /// Noise levels in dB (default 23,15,10).
    #[arg(long = "study-snr", value_delimiter = ',')]
    study_snr: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct NoiseCheckArgs {
    #[arg(long, default_value_t = 23.0)]
    snr: f64,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    /// Use the power convention 10^(-snr/10) instead of amplitude.
    #[arg(long)]
    power: bool,
}

#[derive(Args, Debug)]
struct GradientCheckArgs {
    #[arg(long, default_value_t = 20)]
    nodes: usize,
    #[arg(long, default_value_t = 1e-5)]
    tolerance: f64,
}

fn parse_snr(text: &str) -> anyhow::Result<f64> {
    match text {
        "none" | "inf" => Ok(f64::INFINITY),
        t => t.parse().with_context(|| format!("bad SNR `{t}`")),
    }
}

impl Experiment {
    fn load(&self, seed: Option<u64>) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.variant {
            cfg = cfg.with_variant(v);
        }
        if let Some(n) = self.antennas {
            cfg.chamber.n_antennas = n;
        }
        if let Some(s) = &self.snr {
            cfg.noise.snr_db = parse_snr(s)?;
        }
        if let Some(seed) = seed {
            cfg.noise.seed = seed;
        }
        if let Some(n) = self.n_lambda {
            cfg.mesh.n_lambda = n;
        }
        let s = &self.solver;
        let wants_oras = s.n_sub.is_some() || s.overlap.is_some() || s.tol.is_some() || s.restart.is_some();
        let kind = match (s.solver, cfg.solver) {
            (Some(k), _) => k,
            (None, SolverConfig::Oras(_)) => SolverKind::Oras,
            (None, SolverConfig::Direct) if wants_oras => SolverKind::Oras,
            (None, SolverConfig::Direct) => SolverKind::Direct,
        };
        cfg.solver = match kind {
            SolverKind::Direct => {
                if wants_oras {
                    bail!("--n-sub, --overlap, --tol and --restart need the oras solver");
                }
                SolverConfig::Direct
            }
            SolverKind::Oras => {
                let mut o = match cfg.solver {
                    SolverConfig::Oras(o) => o,
                    SolverConfig::Direct => OrasConfig::default(),
                };
                o.n_sub = s.n_sub.unwrap_or(o.n_sub);
                o.overlap = s.overlap.unwrap_or(o.overlap);
                o.tol = s.tol.unwrap_or(o.tol);
                o.restart = s.restart.unwrap_or(o.restart);
                SolverConfig::Oras(o)
            }
        };
        Ok(cfg)
    }
}

impl InversionArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(a) = self.alpha {
            cfg.inversion.alpha = a;
        }
        if let Some(i) = self.iters {
            cfg.inversion.iters = i;
        }
        if let Some(m) = self.memory {
            cfg.inversion.memory = m;
        }
    }
}

fn run_dir(out: &Option<PathBuf>, cfg: &ExperimentConfig, name: &str) -> PathBuf {
    out.clone().unwrap_or_else(|| cfg.output_dir.join(name))
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Forward(args) => {
            let cfg = args.experiment.load(cli.seed)?;
            let dir = run_dir(&cli.out, &cfg, "forward");
            let data = pipeline::cmd_forward(&cfg, &dir)?;
            println!(
                "wrote {}: N={} nodes={} reciprocity={:.3e}",
                dir.display(),
                data.s_syn.n(),
                data.mesh.n_vertices(),
                data.s_clean.reciprocity_defect()
            );
        }
        Command::Invert(args) => {
            let mut cfg = args.experiment.load(cli.seed)?;
            args.inversion.apply(&mut cfg);
            let dir = run_dir(&cli.out, &cfg, "invert");
            let res = pipeline::cmd_invert(&cfg, &args.data, &dir)?;
            let rec = &res.reconstruction;
            println!(
                "wrote {}: {} iterations, stop {}, fit {:.4e} -> {:.4e}, err total {:.2}%/{:.2}%, injury {:.2}%/{:.2}%",
                dir.display(),
                rec.trace.len(),
                rec.stop.name(),
                rec.initial.fit,
                rec.final_row().fit,
                res.err_total.0,
                res.err_total.1,
                res.err_injury.0,
                res.err_injury.1
            );
        }
        Command::Study(args) => {
            let mut cfg = args.experiment.load(cli.seed)?;
            args.inversion.apply(&mut cfg);
            let mut opts = StudyOptions {
                dry_run: args.dry_run,
                parallel_cells: args.parallel_cells,
                ..StudyOptions::default()
            };
            if let Some(a) = args.study_antennas {
                opts.antennas = a;
            }
            if let Some(s) = args.study_snr {
                opts.snr_db = s;
            }
            let dir = run_dir(&cli.out, &cfg, "study");
            let outcome = pipeline::cmd_study(&cfg, &dir, &opts)?;
            if args.dry_run {
                for c in &outcome.cells {
                    println!("{}", c.label());
                }
                let healthy = outcome.cells.iter().filter(|c| c.variant == Variant::Healthy).count();
                println!(
                    "{} injured cells, {healthy} healthy baselines",
                    outcome.cells.len() - healthy
                );
            } else {
                print!("{}", outcome.report());
                if !outcome.failures.is_empty() {
                    return Ok(ExitCode::from(3));
                }
            }
        }
        Command::NoiseCheck(args) => {
            let mut spec = NoiseSpec::new(args.snr, cli.seed.unwrap_or(1));
            if args.power {
                spec.convention = mwt_core::metrics::NoiseConvention::Power;
            }
            let c = pipeline::noise_check(&spec, args.samples)?;
            println!("sigma {:.6}", c.sigma);
            println!("samples {}", c.samples);
            println!("std {:.6} {:.6}", c.std.0, c.std.1);
            println!("mean {:.3e} {:.3e}", c.mean.0, c.mean.1);
            println!("deterministic {}", c.deterministic);
            let ok = c.deterministic
                && (c.sigma == 0.0 || [c.std.0, c.std.1].iter().all(|s| (s / c.sigma - 1.0).abs() <= 0.05));
            if !ok {
                return Ok(ExitCode::from(3));
            }
        }
        Command::GradientCheck(args) => {
            let mut setup = GradientCheckSetup::coarse();
            setup.nodes = args.nodes;
            if let Some(s) = cli.seed {
                setup.seed = s;
            }
            let check = pipeline::gradient_check(&setup)?;
            println!("nodes {}", check.n_vertices);
            for s in &check.samples {
                println!(
                    "node {:>5} adjoint {:+.6e} {:+.6e} fd {:+.6e} {:+.6e} rel {:.2e}",
                    s.node,
                    s.adjoint[0],
                    s.adjoint[1],
                    s.finite_difference[0],
                    s.finite_difference[1],
                    s.relative_error
                );
            }
            let worst = check.max_relative_error();
            println!("max relative error {worst:.3e}");
            if worst > args.tolerance {
                return Ok(ExitCode::from(3));
            }
        }
        Command::Report { dir } => {
            print!("{}", pipeline::cmd_report(&dir)?);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn init_threads(threads: Option<usize>) -> anyhow::Result<()> {
    if let Some(n) = threads {
        if n == 0 {
            bail!("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn report_error(err: &anyhow::Error) {
    let kind = err
        .chain()
        .find_map(|e| e.downcast_ref::<mwt_core::Error>())
        .map_or("error", |e| e.kind());
    eprintln!("error[{kind}]: {err}");
    for cause in err.chain().skip(1) {
        eprintln!("  caused by: {cause}");
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = init_threads(cli.threads).and_then(|_| run(cli));
    match result {
        Ok(code) => code,
        Err(e) => {
            report_error(&e);
            ExitCode::FAILURE
        }
    }
}
