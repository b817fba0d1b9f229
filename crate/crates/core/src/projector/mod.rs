//! Discrete parallel-beam model: system matrix rows, forward projection and
//! its exact adjoint.
//!
//! Ray `i = view * n_bins + bin` passes through the centre of detector bin
//! `bin`; bins are laid out perpendicular to the ray, bin 0 at the most
//! negative offset from the grid centre. Weights are chord lengths, so a
//! projection has the units of `value * length`.

mod grid;
mod trace;

pub use grid::{GridSpec, ImageGrid};
pub use trace::{system_row, SparseRow};

use crate::error::{check_len, invalid, Error, Result};
use crate::geometry::AngleSet;

/// Detector sampling: one ray per bin through the bin centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detector {
    pub n_bins: usize,
    pub bin_spacing: f64,
}

impl Detector {
    pub fn new(n_bins: usize, bin_spacing: f64) -> Result<Self> {
        if n_bins == 0 {
            return Err(invalid("detector needs at least one bin"));
        }
        if !(bin_spacing.is_finite() && bin_spacing > 0.0) {
            return Err(invalid(format!("bin spacing must be positive, got {bin_spacing}")));
        }
        Ok(Detector {
            n_bins,
            bin_spacing,
        })
    }

    /// `ceil(√2 · max(H, W))` bins at pixel pitch: covers the grid at every angle.
    pub fn covering(grid: &GridSpec) -> Self {
        let n = (std::f64::consts::SQRT_2 * grid.width.max(grid.height) as f64).ceil() as usize;
        Detector {
            n_bins: n,
            bin_spacing: grid.pixel_size,
        }
    }
}

/// Line integrals for every (view, bin), stored view-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    angles: AngleSet,
    detector: Detector,
    data: Vec<f64>,
}

impl Sinogram {
    pub fn zeros(angles: AngleSet, detector: Detector) -> Self {
        let n = angles.len() * detector.n_bins;
        Sinogram {
            angles,
            detector,
            data: vec![0.0; n],
        }
    }

    pub fn from_vec(angles: AngleSet, detector: Detector, data: Vec<f64>) -> Result<Self> {
        check_len("sinogram sample count", angles.len() * detector.n_bins, data.len())?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sinogram"));
        }
        Ok(Sinogram {
            angles,
            detector,
            data,
        })
    }

    pub fn angles(&self) -> &AngleSet {
        &self.angles
    }

    pub fn detector(&self) -> Detector {
        self.detector
    }

    pub fn n_views(&self) -> usize {
        self.angles.len()
    }

    pub fn n_bins(&self) -> usize {
        self.detector.n_bins
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn view(&self, v: usize) -> &[f64] {
        let n = self.detector.n_bins;
        &self.data[v * n..(v + 1) * n]
    }
}

/// Per-ray and per-subset sums of system-matrix weights, as needed by the
/// SART-type denominators.
#[derive(Debug, Clone)]
pub struct RowSums {
    /// Σ_l w_{i,l} for every ray i.
    pub ray: Vec<f64>,
    /// Σ_{i ∈ T_m} w_{i,j} for every subset m and pixel j.
    pub subset_pixel: Vec<Vec<f64>>,
}

/// Precomputed system matrix for a grid, angle set and detector.
#[derive(Debug, Clone)]
pub struct Projector {
    grid: GridSpec,
    detector: Detector,
    angles: AngleSet,
    rows: Vec<SparseRow>,
    ray_sums: Vec<f64>,
}

impl Projector {
    pub fn new(grid: GridSpec, angles: &AngleSet, detector: Detector) -> Self {
        let mut rows = Vec::with_capacity(angles.len() * detector.n_bins);
        for &angle in angles.angles() {
            for bin in 0..detector.n_bins {
                rows.push(system_row(&grid, angle, bin, &detector));
            }
        }
        let ray_sums = rows.iter().map(SparseRow::total).collect();
        Projector {
            grid,
            detector,
            angles: angles.clone(),
            rows,
            ray_sums,
        }
    }

    /// Projector matching an existing sinogram's geometry.
    pub fn for_sinogram(grid: GridSpec, sino: &Sinogram) -> Self {
        Self::new(grid, sino.angles(), sino.detector())
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn detector(&self) -> Detector {
        self.detector
    }

    pub fn angles(&self) -> &AngleSet {
        &self.angles
    }

    pub fn n_views(&self) -> usize {
        self.angles.len()
    }

    pub fn n_rays(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, ray: usize) -> &SparseRow {
        &self.rows[ray]
    }

    /// Rays belonging to `view`.
    pub fn view_rays(&self, view: usize) -> std::ops::Range<usize> {
        let n = self.detector.n_bins;
        view * n..(view + 1) * n
    }

    /// Σ_l w_{i,l} per ray.
    pub fn ray_sums(&self) -> &[f64] {
        &self.ray_sums
    }

    fn check_image(&self, image: &ImageGrid) -> Result<()> {
        check_len("image width", self.grid.width, image.width())?;
        check_len("image height", self.grid.height, image.height())
    }

    pub fn check_sinogram(&self, sino: &Sinogram) -> Result<()> {
        check_len("sinogram views", self.n_views(), sino.n_views())?;
        check_len("sinogram bins", self.detector.n_bins, sino.n_bins())?;
        for (a, b) in self.angles.angles().iter().zip(sino.angles().angles()) {
            if a != b {
                return Err(invalid("sinogram angles differ from projector angles"));
            }
        }
        Ok(())
    }

    /// p = W f
    pub fn forward(&self, image: &ImageGrid) -> Result<Sinogram> {
        self.check_image(image)?;
        let f = image.values();
        let data = self.rows.iter().map(|r| r.dot(f)).collect();
        Ok(Sinogram {
            angles: self.angles.clone(),
            detector: self.detector,
            data,
        })
    }

    /// Wᵀ p, using the same weights as [`Projector::forward`].
    pub fn back(&self, sino: &Sinogram) -> Result<ImageGrid> {
        self.check_sinogram(sino)?;
        let mut out = vec![0.0; self.grid.len()];
        for (row, &p) in self.rows.iter().zip(sino.values()) {
            if p != 0.0 {
                for (j, w) in row.iter() {
                    out[j] += w * p;
                }
            }
        }
        ImageGrid::from_vec(self.grid, out)
    }

    /// Σ_{i ∈ views} w_{i,j} for every pixel j.
    pub fn pixel_sums(&self, views: &[usize]) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        for &v in views {
            for ray in self.view_rays(v) {
                for (j, w) in self.rows[ray].iter() {
                    out[j] += w;
                }
            }
        }
        out
    }

    /// Σ_{i ∈ views} w_{i,j} · Σ_l w_{i,l} for every pixel j.
    pub fn weighted_pixel_sums(&self, views: &[usize]) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        for &v in views {
            for ray in self.view_rays(v) {
                let rs = self.ray_sums[ray];
                for (j, w) in self.rows[ray].iter() {
                    out[j] += w * rs;
                }
            }
        }
        out
    }

    /// Ray sums plus per-subset pixel sums for a view partition.
    pub fn row_sums(&self, subsets: &[Vec<usize>]) -> RowSums {
        RowSums {
            ray: self.ray_sums.clone(),
            subset_pixel: subsets.iter().map(|s| self.pixel_sums(s)).collect(),
        }
    }
}

/// Projects `image` at every angle of `angles`.
pub fn forward_project(image: &ImageGrid, angles: &AngleSet, detector: Detector) -> Result<Sinogram> {
    Projector::new(image.spec(), angles, detector).forward(image)
}

/// Unweighted backprojection of `sino` onto `grid`.
pub fn back_project(sino: &Sinogram, grid: GridSpec) -> Result<ImageGrid> {
    Projector::for_sinogram(grid, sino).back(sino)
}
