//! Synthetic atom phantoms and tilt-series simulation.
//!
//! Atoms are isotropic Gaussian blobs. Centres are given in pixel units with
//! pixel (row, col) centred at (x = col, y = row).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Result};
use crate::geometry::AngleSet;
use crate::projector::{Detector, GridSpec, ImageGrid, Projector, Sinogram};

/// Peak value of the reference phantom.
pub const PHANTOM_MAX: f64 = 1.61e5;
/// Edge length (pixels) of the default phantom.
pub const DEFAULT_SIZE: usize = 121;
/// Pixel size of the default phantom, in angstrom.
pub const DEFAULT_PIXEL_SIZE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomSpec {
    pub x: f64,
    pub y: f64,
    pub amplitude: f64,
    pub sigma: f64,
}

impl AtomSpec {
    pub fn new(x: f64, y: f64, amplitude: f64, sigma: f64) -> Self {
        AtomSpec {
            x,
            y,
            amplitude,
            sigma,
        }
    }

    fn validate(&self, grid: &GridSpec) -> Result<()> {
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return Err(invalid(format!("atom amplitude must be positive, got {}", self.amplitude)));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(invalid(format!("atom sigma must be positive, got {}", self.sigma)));
        }
        let inside = |v: f64, n: usize| v.is_finite() && v >= -0.5 && v <= n as f64 - 0.5;
        if !inside(self.x, grid.width) || !inside(self.y, grid.height) {
            return Err(invalid(format!(
                "atom centre ({}, {}) outside {}x{} grid",
                self.x, self.y, grid.width, grid.height
            )));
        }
        Ok(())
    }
}

/// Renders Σ_atoms A · exp(-‖p - c‖² / 2σ²) on the grid.
pub fn make_atom_phantom(grid: GridSpec, atoms: &[AtomSpec]) -> Result<ImageGrid> {
    if atoms.is_empty() {
        return Err(invalid("phantom needs at least one atom"));
    }
    for a in atoms {
        a.validate(&grid)?;
    }
    let mut img = ImageGrid::zeros(grid);
    let w = grid.width;
    let values = img.values_mut();
    for a in atoms {
        let inv = 1.0 / (2.0 * a.sigma * a.sigma);
        // beyond 9σ the contribution is below 1e-17 of the peak
        let reach = 9.0 * a.sigma;
        let r0 = (a.y - reach).floor().max(0.0) as usize;
        let r1 = ((a.y + reach).ceil().max(0.0) as usize).min(grid.height - 1);
        let c0 = (a.x - reach).floor().max(0.0) as usize;
        let c1 = ((a.x + reach).ceil().max(0.0) as usize).min(w - 1);
        for r in r0..=r1 {
            let dy = r as f64 - a.y;
            for c in c0..=c1 {
                let dx = c as f64 - a.x;
                values[r * w + c] += a.amplitude * (-(dx * dx + dy * dy) * inv).exp();
            }
        }
    }
    Ok(img)
}

/// Rescales `image` so its maximum is exactly `target`.
pub fn normalize_max(image: &mut ImageGrid, target: f64) -> Result<()> {
    let max = image.max();
    if !(max > 0.0) {
        return Err(invalid("cannot normalise an image with no positive values"));
    }
    for v in image.values_mut() {
        *v = *v / max * target;
    }
    Ok(())
}

/// Random atom layout: `count` atoms with widths in `sigma_range`, centres at
/// least 4σ apart and inside a disc that keeps every atom well within the
/// inscribed support circle.
pub fn random_atoms(grid: &GridSpec, count: usize, sigma_range: (f64, f64), rng: &mut impl Rng) -> Vec<AtomSpec> {
    let (smin, smax) = sigma_range;
    let cx = (grid.width as f64 - 1.0) / 2.0;
    let cy = (grid.height as f64 - 1.0) / 2.0;
    let radius = (grid.width.min(grid.height) as f64 / 2.0 - 4.0 * smax - 1.0).max(1.0);
    let mut atoms: Vec<AtomSpec> = Vec::with_capacity(count);
    let mut attempts = 0;
    while atoms.len() < count && attempts < 100_000 {
        attempts += 1;
        let sigma = rng.random_range(smin..=smax);
        let r = radius * rng.random::<f64>().sqrt();
        let phi = rng.random_range(0.0..std::f64::consts::TAU);
        let x = cx + r * phi.cos();
        let y = cy + r * phi.sin();
        let clear = atoms.iter().all(|a| {
            let d = ((a.x - x).powi(2) + (a.y - y).powi(2)).sqrt();
            d >= 4.0 * a.sigma.max(sigma)
        });
        if clear {
            let amplitude = rng.random_range(0.5..=1.0);
            atoms.push(AtomSpec::new(x, y, amplitude, sigma));
        }
    }
    atoms
}

/// The atom layout behind [`seeded_phantom`], before peak normalisation.
pub fn seeded_atoms(grid: &GridSpec, seed: u64) -> Vec<AtomSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = rng.random_range(20..=40);
    random_atoms(grid, count, (1.0, 2.5), &mut rng)
}

/// Seeded phantom on a `size`×`size` grid: 20–40 atoms, σ ∈ [1, 2.5] px,
/// peak normalised to [`PHANTOM_MAX`].
pub fn seeded_phantom(size: usize, pixel_size: f64, seed: u64) -> Result<ImageGrid> {
    let grid = GridSpec::square(size, pixel_size)?;
    let atoms = seeded_atoms(&grid, seed);
    let mut img = make_atom_phantom(grid, &atoms)?;
    normalize_max(&mut img, PHANTOM_MAX)?;
    Ok(img)
}

/// The 121×121, 0.5 Å reference phantom for `seed`.
pub fn default_phantom(seed: u64) -> ImageGrid {
    seeded_phantom(DEFAULT_SIZE, DEFAULT_PIXEL_SIZE, seed).expect("default phantom parameters are valid")
}

/// Additive white Gaussian noise on the line integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub sigma: f64,
}

/// Projects `phantom` and optionally adds seeded Gaussian noise.
pub fn simulate(
    phantom: &ImageGrid,
    angles: &AngleSet,
    detector: Detector,
    noise: Option<NoiseSpec>,
    seed: u64,
) -> Result<Sinogram> {
    if let Some(n) = noise {
        if !(n.sigma.is_finite() && n.sigma >= 0.0) {
            return Err(invalid(format!("noise sigma must be non-negative, got {}", n.sigma)));
        }
    }
    let mut sino = Projector::new(phantom.spec(), angles, detector).forward(phantom)?;
    if let Some(NoiseSpec { sigma }) = noise {
        if sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let normal = Normal::new(0.0, sigma).map_err(|e| invalid(e.to_string()))?;
            for v in sino.values_mut() {
                *v += normal.sample(&mut rng);
            }
        }
    }
    Ok(sino)
}
