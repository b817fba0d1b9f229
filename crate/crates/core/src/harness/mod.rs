//! Experiment orchestration: the (views × mode × method) comparison matrix.
//!
//! A plan is built from defaults, an optional flat `key = value` file and
//! command-line overrides, in that order. Every cell simulates noise-free (or
//! optionally Gaussian-noised) data from one phantom, reconstructs it and
//! scores RMSE and SSIM against the phantom.

mod report;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use log::info;
use serde::{Deserialize, Serialize};

use crate::adsir::{adsir, AdsirConfig};
use crate::error::{invalid, Error, Result};
use crate::geometry::{ea_angles, es_views, AcquisitionMode, AngleSet};
use crate::io;
use crate::metrics::{rmse, ssim, SsimParams};
use crate::phantom::{self, NoiseSpec};
use crate::projector::{Detector, GridSpec, ImageGrid, Projector};
use crate::sart::{os_sart, Constraints, SartConfig, TraceRow};
use crate::sparse::ErrorBound;

pub use report::{literature_est_rmse, published_results, report, CellRatio, ModeGap, Ranking, Report};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    OsSart,
    Adsir,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::OsSart => "OS-SART",
            Method::Adsir => "ADSIR",
        }
    }

    fn slug(self) -> &'static str {
        match self {
            Method::OsSart => "sart",
            Method::Adsir => "adsir",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sart" | "os-sart" | "ossart" => Ok(Method::OsSart),
            "adsir" => Ok(Method::Adsir),
            other => Err(invalid(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PhantomSource {
    /// Random atom phantom drawn from the plan seed.
    Seeded { size: usize, pixel_size: f64 },
    /// Atom list in the text format of [`io::read_atom_spec`], rendered on a
    /// square grid and scaled to the standard maximum.
    Atoms { path: PathBuf, size: usize, pixel_size: f64 },
    /// A ready raster image.
    Raster(PathBuf),
}

impl PhantomSource {
    pub fn load(&self, seed: u64) -> Result<ImageGrid> {
        match self {
            PhantomSource::Seeded { size, pixel_size } => phantom::seeded_phantom(*size, *pixel_size, seed),
            PhantomSource::Atoms { path, size, pixel_size } => {
                let atoms = io::read_atom_spec(path)?;
                let mut img = phantom::make_atom_phantom(GridSpec::square(*size, *pixel_size)?, &atoms)?;
                phantom::normalize_max(&mut img, phantom::PHANTOM_MAX)?;
                Ok(img)
            }
            PhantomSource::Raster(path) => io::read_image(path),
        }
    }
}

/// ADSIR settings independent of the view count.
#[derive(Debug, Clone, PartialEq)]
pub struct AdsirSettings {
    pub lambda: f64,
    pub epsilon: ErrorBound,
    pub sparsity: usize,
    pub patch_edge: usize,
    pub n_atoms: usize,
    pub retrain_interval: usize,
    pub iterations: usize,
    /// OS-SART warm start in sweeps over all views.
    pub init_sweeps: usize,
    pub ksvd_sweeps: usize,
    pub split_prior: bool,
}

impl Default for AdsirSettings {
    fn default() -> Self {
        let base = AdsirConfig::standard(1, &GridSpec::square(1, 1.0).expect("unit grid"));
        AdsirSettings {
            lambda: base.lambda,
            epsilon: base.epsilon,
            sparsity: base.sparsity,
            patch_edge: base.patch_edge,
            n_atoms: base.n_atoms,
            retrain_interval: base.retrain_interval,
            iterations: base.iterations,
            init_sweeps: 100,
            ksvd_sweeps: base.ksvd_sweeps,
            split_prior: base.split_prior,
        }
    }
}

impl AdsirSettings {
    /// Solver configuration for one-view-per-subset reconstruction from `n_views`.
    pub fn config(&self, n_views: usize, grid: &GridSpec, seed: u64) -> AdsirConfig {
        AdsirConfig {
            lambda: self.lambda,
            epsilon: self.epsilon,
            sparsity: self.sparsity,
            patch_edge: self.patch_edge,
            n_atoms: self.n_atoms,
            retrain_interval: self.retrain_interval,
            retrain: true,
            iterations: self.iterations,
            init_sart_iterations: self.init_sweeps * n_views,
            subsets: n_views,
            ksvd_sweeps: self.ksvd_sweeps,
            split_prior: self.split_prior,
            seed,
            constraints: Constraints::loose(grid),
            ssim: SsimParams::default(),
            checkpoint_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub view_counts: Vec<usize>,
    pub modes: Vec<AcquisitionMode>,
    pub methods: Vec<Method>,
    /// Symmetric tilt limit in degrees.
    pub tilt_range: f64,
    pub phantom: PhantomSource,
    pub sart_sweeps: usize,
    pub adsir: AdsirSettings,
    pub noise: Option<NoiseSpec>,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    /// Record wall-clock seconds; when off the column is 0 so reruns are byte-identical.
    pub record_timing: bool,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        ExperimentPlan {
            view_counts: vec![69, 55, 31],
            modes: vec![AcquisitionMode::EquallySloped, AcquisitionMode::EquallyAngled],
            methods: vec![Method::OsSart, Method::Adsir],
            tilt_range: 72.6,
            phantom: PhantomSource::Seeded {
                size: phantom::DEFAULT_SIZE,
                pixel_size: phantom::DEFAULT_PIXEL_SIZE,
            },
            sart_sweeps: 200,
            adsir: AdsirSettings::default(),
            noise: None,
            seed: 0,
            output_dir: None,
            record_timing: true,
        }
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| invalid(format!("bad value '{s}' for {key}"))))
        .collect()
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| invalid(format!("bad value '{value}' for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(invalid(format!("bad value '{value}' for {key}"))),
    }
}

/// Keys accepted by [`ExperimentPlan::set`].
pub const PLAN_KEYS: &[&str] = &[
    "views",
    "modes",
    "methods",
    "tilt",
    "size",
    "pixel_size",
    "phantom_atoms",
    "phantom_image",
    "sart_sweeps",
    "lambda",
    "epsilon",
    "epsilon_mode",
    "sparsity",
    "patch_edge",
    "atoms",
    "retrain_interval",
    "adsir_iterations",
    "init_sweeps",
    "ksvd_sweeps",
    "split_prior",
    "noise",
    "seed",
    "output",
    "timing",
];

impl ExperimentPlan {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        let value = value.trim();
        match key {
            "views" => self.view_counts = parse_list(key, value)?,
            "modes" => self.modes = parse_list(key, value)?,
            "methods" => self.methods = parse_list(key, value)?,
            "tilt" => self.tilt_range = parse_value(key, value)?,
            "size" | "pixel_size" => {
                let (mut size, mut px) = match &self.phantom {
                    PhantomSource::Seeded { size, pixel_size } | PhantomSource::Atoms { size, pixel_size, .. } => {
                        (*size, *pixel_size)
                    }
                    PhantomSource::Raster(_) => (phantom::DEFAULT_SIZE, phantom::DEFAULT_PIXEL_SIZE),
                };
                if key == "size" {
                    size = parse_value(key, value)?;
                } else {
                    px = parse_value(key, value)?;
                }
                match &mut self.phantom {
                    PhantomSource::Atoms { size: s, pixel_size: p, .. } => {
                        *s = size;
                        *p = px;
                    }
                    _ => {
                        self.phantom = PhantomSource::Seeded { size, pixel_size: px };
                    }
                }
            }
            "phantom_atoms" => {
                let (size, pixel_size) = match &self.phantom {
                    PhantomSource::Seeded { size, pixel_size } | PhantomSource::Atoms { size, pixel_size, .. } => {
                        (*size, *pixel_size)
                    }
                    PhantomSource::Raster(_) => (phantom::DEFAULT_SIZE, phantom::DEFAULT_PIXEL_SIZE),
                };
                self.phantom = PhantomSource::Atoms {
                    path: PathBuf::from(value),
                    size,
                    pixel_size,
                };
            }
            "phantom_image" => self.phantom = PhantomSource::Raster(PathBuf::from(value)),
            "sart_sweeps" => self.sart_sweeps = parse_value(key, value)?,
            "lambda" => self.adsir.lambda = parse_value(key, value)?,
            "epsilon" => {
                let v = parse_value(key, value)?;
                self.adsir.epsilon = match self.adsir.epsilon {
                    ErrorBound::Absolute(_) => ErrorBound::Absolute(v),
                    ErrorBound::Relative(_) => ErrorBound::Relative(v),
                };
            }
            "epsilon_mode" => {
                let v = self.adsir.epsilon.value();
                self.adsir.epsilon = match value.to_ascii_lowercase().as_str() {
                    "absolute" | "abs" => ErrorBound::Absolute(v),
                    "relative" | "rel" => ErrorBound::Relative(v),
                    _ => return Err(invalid(format!("bad value '{value}' for {key}"))),
                };
            }
            "sparsity" => self.adsir.sparsity = parse_value(key, value)?,
            "patch_edge" => self.adsir.patch_edge = parse_value(key, value)?,
            "atoms" => self.adsir.n_atoms = parse_value(key, value)?,
            "retrain_interval" => self.adsir.retrain_interval = parse_value(key, value)?,
            "adsir_iterations" => self.adsir.iterations = parse_value(key, value)?,
            "init_sweeps" => self.adsir.init_sweeps = parse_value(key, value)?,
            "ksvd_sweeps" => self.adsir.ksvd_sweeps = parse_value(key, value)?,
            "split_prior" => self.adsir.split_prior = parse_bool(key, value)?,
            "noise" => {
                let sigma: f64 = parse_value(key, value)?;
                self.noise = if sigma > 0.0 { Some(NoiseSpec { sigma }) } else { None };
            }
            "seed" => self.seed = parse_value(key, value)?,
            "output" => self.output_dir = Some(PathBuf::from(value)),
            "timing" => self.record_timing = parse_bool(key, value)?,
            _ => {
                return Err(invalid(format!(
                    "unknown setting '{key}' (known: {})",
                    PLAN_KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Applies `key=value` lines; blank lines and `#` comments are skipped.
    pub fn apply_config_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| invalid(format!("line {}: expected key=value", n + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn apply_config_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        self.apply_config_text(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.view_counts.is_empty() || self.modes.is_empty() || self.methods.is_empty() {
            return Err(invalid("experiment plan needs at least one view count, mode and method"));
        }
        if let Some(&v) = self.view_counts.iter().find(|&&v| v < 2) {
            return Err(invalid(format!("view count {v} is below 2")));
        }
        if !(self.tilt_range > 0.0 && self.tilt_range < 90.0) {
            return Err(invalid(format!("tilt range ±{} is not inside (0, 90)", self.tilt_range)));
        }
        if self.sart_sweeps == 0 {
            return Err(invalid("OS-SART needs at least one sweep"));
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.view_counts.len() * self.modes.len() * self.methods.len()
    }

    pub fn angles(&self, views: usize, mode: AcquisitionMode) -> Result<AngleSet> {
        match mode {
            AcquisitionMode::EquallySloped => es_views(views, self.tilt_range),
            AcquisitionMode::EquallyAngled => ea_angles(views, -self.tilt_range, self.tilt_range),
        }
    }
}

/// One cell of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub views: usize,
    pub mode: String,
    pub method: String,
    pub rmse: f64,
    pub ssim: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentResults {
    pub rows: Vec<ResultRow>,
    pub phantom: ImageGrid,
}

#[derive(Serialize)]
struct SartTraceCsv {
    iteration: usize,
    rmse: f64,
    ssim: Option<f64>,
}

impl From<&TraceRow> for SartTraceCsv {
    fn from(r: &TraceRow) -> Self {
        SartTraceCsv {
            iteration: r.iteration,
            rmse: r.rmse,
            ssim: r.ssim,
        }
    }
}

/// Runs every cell of `plan`. With an output directory, writes the phantom,
/// angle files, sinograms, reconstructions (raster and PGM), traces,
/// `results.csv` and `report.txt`.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<ExperimentResults> {
    plan.validate()?;
    let truth = plan.phantom.load(plan.seed)?;
    let grid = truth.spec();
    let detector = Detector::covering(&grid);
    let ssim_params = SsimParams::default();
    let window_hi = truth.max().max(1.0);

    if let Some(dir) = &plan.output_dir {
        std::fs::create_dir_all(dir)?;
        io::write_image(&dir.join("phantom.f32"), &truth)?;
        io::write_pgm(&dir.join("phantom.pgm"), &truth, 0.0, window_hi)?;
    }

    let mut rows = Vec::with_capacity(plan.cell_count());
    for &views in &plan.view_counts {
        for &mode in &plan.modes {
            let angles = plan.angles(views, mode)?;
            let sino = phantom::simulate(&truth, &angles, detector, plan.noise, plan.seed)?;
            let projector = Projector::new(grid, &angles, detector);
            let tag = format!("{}_{views}", mode.short_name().to_ascii_lowercase());
            if let Some(dir) = &plan.output_dir {
                io::write_angles(&dir.join(format!("angles_{tag}.txt")), &angles)?;
                io::write_sinogram(&dir.join(format!("sino_{tag}.f32")), &sino)?;
            }

            for &method in &plan.methods {
                info!("{views} views, {mode}, {method}");
                let zero = ImageGrid::zeros(grid);
                let start = Instant::now();
                let image = match method {
                    Method::OsSart => {
                        let cfg = SartConfig::sweeps(plan.sart_sweeps, views, Constraints::loose(&grid));
                        let out = os_sart(&projector, &zero, &sino, &cfg, Some(&truth))?;
                        if let Some(dir) = &plan.output_dir {
                            let trace: Vec<SartTraceCsv> = out.trace.iter().map(Into::into).collect();
                            io::write_csv(&dir.join(format!("trace_sart_{tag}.csv")), &trace)?;
                        }
                        out.image
                    }
                    Method::Adsir => {
                        let cfg = plan.adsir.config(views, &grid, plan.seed);
                        let out = adsir(&projector, &zero, &sino, &cfg, Some(&truth))?;
                        if let Some(dir) = &plan.output_dir {
                            io::write_csv(&dir.join(format!("trace_adsir_{tag}.csv")), &out.trace)?;
                        }
                        out.image
                    }
                };
                let seconds = if plan.record_timing {
                    start.elapsed().as_secs_f64()
                } else {
                    0.0
                };
                let row = ResultRow {
                    views,
                    mode: mode.short_name().to_string(),
                    method: method.name().to_string(),
                    rmse: rmse(&image, &truth)?,
                    ssim: ssim(&image, &truth, &ssim_params)?,
                    seconds,
                };
                info!("  rmse {:.1}  ssim {:.4}", row.rmse, row.ssim);
                if let Some(dir) = &plan.output_dir {
                    let stem = format!("{}_{tag}", method.slug());
                    io::write_image(&dir.join(format!("{stem}.f32")), &image)?;
                    io::write_pgm(&dir.join(format!("{stem}.pgm")), &image, 0.0, window_hi)?;
                }
                rows.push(row);
            }
        }
    }

    if let Some(dir) = &plan.output_dir {
        io::write_csv(&dir.join("results.csv"), &rows)?;
        std::fs::write(dir.join("report.txt"), report(&rows)?.to_string())?;
    }
    Ok(ExperimentResults { rows, phantom: truth })
}
