use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use etrecon::adsir::{adsir, AdsirConfig};
use etrecon::geometry::{ea_angles, es_slopes, es_views, restrict_to_tilt_range, subsample_with_endpoints};
use etrecon::harness::{run_experiment, ExperimentPlan};
use etrecon::metrics::{rmse, ssim, SsimParams};
use etrecon::phantom::{self, NoiseSpec};
use etrecon::sart::{os_sart, Constraints, SartConfig};
use etrecon::sparse::ErrorBound;
use etrecon::{io, Detector, GridSpec, ImageGrid, Projector, Result};

#[derive(Parser)]
#[command(name = "etrecon", version, about = "Limited-tilt tomographic reconstruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render an atom phantom to a raster image.
    Phantom(PhantomArgs),
    /// Generate an equally-sloped or equally-angled angle file.
    Angles(AnglesArgs),
    /// Forward-project a phantom over an angle set.
    Simulate(SimulateArgs),
    /// Reconstruct an image from a sinogram.
    Reconstruct(ReconstructArgs),
    /// Score an image against a reference.
    Evaluate(EvaluateArgs),
    /// Run the views × mode × method comparison matrix.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct PhantomArgs {
    /// Output raster (a `.hdr` header is written alongside).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = phantom::DEFAULT_SIZE)]
    size: usize,
    #[arg(long, default_value_t = phantom::DEFAULT_PIXEL_SIZE)]
    pixel_size: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Render this atom list instead of a seeded random one.
    #[arg(long)]
    atoms: Option<PathBuf>,
    /// Also write the atom list used.
    #[arg(long)]
    atoms_out: Option<PathBuf>,
    /// Also write an 8-bit PGM preview over [0, max].
    #[arg(long)]
    pgm: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Es,
    Ea,
}

#[derive(Args)]
struct AnglesArgs {
    #[arg(long, value_enum)]
    mode: ModeArg,
    /// ES: slope-scheme size N (2N candidate slopes). EA: number of views.
    #[arg(long)]
    n: Option<usize>,
    /// Symmetric tilt limit in degrees.
    #[arg(long, default_value_t = 72.6)]
    range: f64,
    /// ES: subsample to this many views, keeping both tilt limits.
    #[arg(long)]
    views: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    phantom: PathBuf,
    #[arg(long)]
    angles: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Standard deviation of additive Gaussian noise on the line integrals.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum MethodArg {
    Sart,
    Adsir,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Count {
    /// Iteration counts are single subset updates.
    Steps,
    /// Iteration counts are full passes over all subsets.
    Sweeps,
}

#[derive(Args)]
struct ReconstructArgs {
    #[arg(long, value_enum)]
    method: MethodArg,
    #[arg(long)]
    sino: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// OS-SART: iterations. ADSIR: OS-SART warm-start iterations.
    #[arg(long, default_value_t = 200)]
    iters: usize,
    /// Unit of --iters for OS-SART iterations.
    #[arg(long, value_enum, default_value_t = Count::Sweeps)]
    count: Count,
    /// Starting image: `zero` or a raster file.
    #[arg(long, default_value = "zero")]
    init: String,
    /// Ordered subsets; defaults to one view per subset.
    #[arg(long)]
    subsets: Option<usize>,
    #[arg(long, default_value_t = phantom::DEFAULT_SIZE)]
    size: usize,
    #[arg(long, default_value_t = phantom::DEFAULT_PIXEL_SIZE)]
    pixel_size: f64,
    /// Disable nonnegativity and the circular support mask.
    #[arg(long)]
    no_constraints: bool,
    /// Reference image for RMSE/SSIM traces.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Metric trace CSV (requires --reference for metrics).
    #[arg(long)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    adsir: AdsirArgs,
}

#[derive(Args)]
struct AdsirArgs {
    /// ADSIR outer iterations.
    #[arg(long, default_value_t = 100)]
    adsir_iters: usize,
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    #[arg(long, default_value_t = 5.0e-6)]
    epsilon: f64,
    /// Treat --epsilon as an absolute squared-error bound instead of relative to ‖patch‖².
    #[arg(long)]
    absolute_epsilon: bool,
    #[arg(long, default_value_t = 8)]
    sparsity: usize,
    #[arg(long, default_value_t = 8)]
    patch_edge: usize,
    #[arg(long, default_value_t = 256)]
    atoms: usize,
    #[arg(long, default_value_t = 10)]
    retrain_interval: usize,
    #[arg(long)]
    no_retrain: bool,
    #[arg(long, default_value_t = 1)]
    ksvd_sweeps: usize,
    /// Apply the full λ in every subset step rather than λ / subsets.
    #[arg(long)]
    full_prior: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write raster checkpoints here every retraining interval.
    #[arg(long)]
    checkpoints: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    reference: PathBuf,
    /// CSV file with one `rmse,ssim` row.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Flat key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a setting, e.g. `--set views=31,55`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    settings: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Write 0 in the seconds column so reruns are byte-identical.
    #[arg(long)]
    no_timing: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Phantom(a) => cmd_phantom(a),
        Command::Angles(a) => cmd_angles(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Reconstruct(a) => cmd_reconstruct(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Experiment(a) => cmd_experiment(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn cmd_phantom(a: PhantomArgs) -> Result<()> {
    let grid = GridSpec::square(a.size, a.pixel_size)?;
    let atoms = match &a.atoms {
        Some(path) => io::read_atom_spec(path)?,
        None => phantom::seeded_atoms(&grid, a.seed),
    };
    let mut img = phantom::make_atom_phantom(grid, &atoms)?;
    phantom::normalize_max(&mut img, phantom::PHANTOM_MAX)?;
    io::write_image(&a.out, &img)?;
    if let Some(path) = &a.atoms_out {
        io::write_atom_spec(path, &atoms)?;
    }
    if let Some(path) = &a.pgm {
        io::write_pgm(path, &img, 0.0, img.max())?;
    }
    Ok(())
}

fn cmd_angles(a: AnglesArgs) -> Result<()> {
    let lo = -a.range;
    let set = match a.mode {
        ModeArg::Ea => {
            let n = a
                .views
                .or(a.n)
                .ok_or_else(|| etrecon::Error::InvalidArgument("--n or --views is required".into()))?;
            ea_angles(n, lo, a.range)?
        }
        ModeArg::Es => match (a.n, a.views) {
            (Some(n), views) => {
                let base = restrict_to_tilt_range(&es_slopes(n)?, lo, a.range)?;
                match views {
                    Some(v) => subsample_with_endpoints(&base, v)?,
                    None => base,
                }
            }
            (None, Some(v)) => es_views(v, a.range)?,
            (None, None) => {
                return Err(etrecon::Error::InvalidArgument("--n or --views is required".into()));
            }
        },
    };
    match &a.out {
        Some(path) => io::write_angles(path, &set),
        None => {
            print!("{}", io::format_angles(&set));
            Ok(())
        }
    }
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let img = io::read_image(&a.phantom)?;
    let angles = io::read_angles(&a.angles)?;
    let noise = a.noise.map(|sigma| NoiseSpec { sigma });
    let sino = phantom::simulate(&img, &angles, Detector::covering(&img.spec()), noise, a.seed)?;
    io::write_sinogram(&a.out, &sino)
}

fn load_init(init: &str, grid: GridSpec) -> Result<ImageGrid> {
    if init.eq_ignore_ascii_case("zero") {
        return Ok(ImageGrid::zeros(grid));
    }
    let img = io::read_image(Path::new(init))?;
    if img.width() != grid.width || img.height() != grid.height {
        return Err(etrecon::Error::DimensionMismatch {
            what: "initial image pixels",
            expected: grid.len(),
            actual: img.values().len(),
        });
    }
    Ok(img)
}

#[derive(Serialize)]
struct SartTraceCsv {
    iteration: usize,
    rmse: f64,
    ssim: Option<f64>,
}

fn cmd_reconstruct(a: ReconstructArgs) -> Result<()> {
    let sino = io::read_sinogram(&a.sino)?;
    let reference = a.reference.as_deref().map(io::read_image).transpose()?;
    let grid = match (&reference, a.init.eq_ignore_ascii_case("zero")) {
        (Some(r), _) => r.spec(),
        (None, false) => io::read_image(Path::new(&a.init))?.spec(),
        (None, true) => GridSpec::square(a.size, a.pixel_size)?,
    };
    let init = load_init(&a.init, grid)?;
    let projector = Projector::for_sinogram(grid, &sino);
    let subsets = a.subsets.unwrap_or(sino.n_views());
    let steps = match a.count {
        Count::Steps => a.iters,
        Count::Sweeps => a.iters * subsets,
    };
    let constraints = if a.no_constraints {
        Constraints::none()
    } else {
        Constraints::loose(&grid)
    };

    match a.method {
        MethodArg::Sart => {
            let cfg = SartConfig {
                iterations: steps,
                subsets,
                constraints,
                trace_every: subsets,
                ssim: SsimParams::default(),
            };
            let out = os_sart(&projector, &init, &sino, &cfg, reference.as_ref())?;
            io::write_image(&a.out, &out.image)?;
            if let Some(path) = &a.trace {
                let rows: Vec<SartTraceCsv> = out
                    .trace
                    .iter()
                    .map(|r| SartTraceCsv {
                        iteration: r.iteration,
                        rmse: r.rmse,
                        ssim: r.ssim,
                    })
                    .collect();
                io::write_csv(path, &rows)?;
            }
        }
        MethodArg::Adsir => {
            let s = &a.adsir;
            if let Some(dir) = &s.checkpoints {
                std::fs::create_dir_all(dir)?;
            }
            let cfg = AdsirConfig {
                lambda: s.lambda,
                epsilon: if s.absolute_epsilon {
                    ErrorBound::Absolute(s.epsilon)
                } else {
                    ErrorBound::Relative(s.epsilon)
                },
                sparsity: s.sparsity,
                patch_edge: s.patch_edge,
                n_atoms: s.atoms,
                retrain_interval: s.retrain_interval,
                retrain: !s.no_retrain,
                iterations: s.adsir_iters,
                init_sart_iterations: steps,
                subsets,
                ksvd_sweeps: s.ksvd_sweeps,
                split_prior: !s.full_prior,
                seed: s.seed,
                constraints,
                ssim: SsimParams::default(),
                checkpoint_dir: s.checkpoints.clone(),
            };
            let out = adsir(&projector, &init, &sino, &cfg, reference.as_ref())?;
            io::write_image(&a.out, &out.image)?;
            if let Some(path) = &a.trace {
                io::write_csv(path, &out.trace)?;
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct MetricsRow {
    rmse: f64,
    ssim: f64,
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let img = io::read_image(&a.image)?;
    let reference = io::read_image(&a.reference)?;
    let row = MetricsRow {
        rmse: rmse(&img, &reference)?,
        ssim: ssim(&img, &reference, &SsimParams::default())?,
    };
    println!("rmse={} ssim={}", row.rmse, row.ssim);
    if let Some(path) = &a.out {
        io::write_csv(path, &[row])?;
    }
    Ok(())
}

fn cmd_experiment(a: ExperimentArgs) -> Result<()> {
    let mut plan = ExperimentPlan::default();
    if let Some(path) = &a.config {
        plan.apply_config_file(path)?;
    }
    for kv in &a.settings {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| etrecon::Error::InvalidArgument(format!("expected KEY=VALUE, got '{kv}'")))?;
        plan.set(k, v)?;
    }
    if let Some(seed) = a.seed {
        plan.seed = seed;
    }
    if let Some(dir) = a.output {
        plan.output_dir = Some(dir);
    }
    if a.no_timing {
        plan.record_timing = false;
    }
    let results = run_experiment(&plan)?;
    println!("views,mode,method,rmse,ssim,seconds");
    for r in &results.rows {
        println!("{},{},{},{},{},{}", r.views, r.mode, r.method, r.rmse, r.ssim, r.seconds);
    }
    println!();
    print!("{}", etrecon::harness::report(&results.rows)?);
    Ok(())
}
