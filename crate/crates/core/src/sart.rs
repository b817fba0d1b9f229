//! Ordered-subset SART.
//!
//! One iteration is one subset step; subsets are visited in order
//! m = k mod L. With one view per subset, a full sweep over the data is
//! L iterations.

use std::time::Instant;

use crate::error::{check_len, invalid, Result};
use crate::metrics::{self, SsimParams};
use crate::projector::{GridSpec, ImageGrid, Projector, RowSums, Sinogram};

/// Disjoint view subsets covering all views.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetPartition {
    subsets: Vec<Vec<usize>>,
}

impl SubsetPartition {
    pub fn subsets(&self) -> &[Vec<usize>] {
        &self.subsets
    }

    pub fn len(&self) -> usize {
        self.subsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }

    pub fn subset(&self, m: usize) -> &[usize] {
        &self.subsets[m]
    }
}

/// Assigns view v to subset v mod L.
pub fn partition_views(n_views: usize, n_subsets: usize) -> Result<SubsetPartition> {
    if n_subsets == 0 || n_subsets > n_views {
        return Err(invalid(format!(
            "subset count {n_subsets} must be in 1..={n_views}"
        )));
    }
    let mut subsets = vec![Vec::new(); n_subsets];
    for v in 0..n_views {
        subsets[v % n_subsets].push(v);
    }
    Ok(SubsetPartition { subsets })
}

/// Binary support: pixels outside are forced to zero after every update.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportMask {
    width: usize,
    height: usize,
    inside: Vec<bool>,
}

impl SupportMask {
    pub fn new(width: usize, height: usize, inside: Vec<bool>) -> Result<Self> {
        check_len("support mask pixels", width * height, inside.len())?;
        Ok(SupportMask {
            width,
            height,
            inside,
        })
    }

    /// Disc inscribed in the grid, tested at pixel centres.
    pub fn inscribed_circle(grid: &GridSpec) -> Self {
        let radius = grid.width.min(grid.height) as f64 * grid.pixel_size / 2.0;
        let mut inside = Vec::with_capacity(grid.len());
        for r in 0..grid.height {
            for c in 0..grid.width {
                let (x, y) = grid.pixel_center(r, c);
                inside.push(x * x + y * y <= radius * radius);
            }
        }
        SupportMask {
            width: grid.width,
            height: grid.height,
            inside,
        }
    }

    pub fn contains(&self, index: usize) -> bool {
        self.inside[index]
    }

    pub fn check(&self, grid: &GridSpec) -> Result<()> {
        check_len("support mask width", grid.width, self.width)?;
        check_len("support mask height", grid.height, self.height)
    }
}

/// Projections applied after each image update.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Constraints {
    pub nonnegativity: bool,
    pub support: Option<SupportMask>,
}

impl Constraints {
    pub fn none() -> Self {
        Constraints::default()
    }

    /// Non-negativity plus the inscribed-disc support.
    pub fn loose(grid: &GridSpec) -> Self {
        Constraints {
            nonnegativity: true,
            support: Some(SupportMask::inscribed_circle(grid)),
        }
    }

    pub fn apply(&self, image: &mut ImageGrid) {
        let values = image.values_mut();
        if self.nonnegativity {
            for v in values.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        if let Some(mask) = &self.support {
            for (j, v) in values.iter_mut().enumerate() {
                if !mask.contains(j) {
                    *v = 0.0;
                }
            }
        }
    }

    pub fn check(&self, grid: &GridSpec) -> Result<()> {
        match &self.support {
            Some(m) => m.check(grid),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SartConfig {
    /// Number of subset steps.
    pub iterations: usize,
    pub subsets: usize,
    pub constraints: Constraints,
    /// Record metrics every this many steps (0 = final step only).
    pub trace_every: usize,
    pub ssim: SsimParams,
}

impl SartConfig {
    /// `sweeps` full passes over the data with one view per subset.
    pub fn sweeps(sweeps: usize, n_views: usize, constraints: Constraints) -> Self {
        SartConfig {
            iterations: sweeps * n_views,
            subsets: n_views,
            constraints,
            trace_every: n_views,
            ssim: SsimParams::default(),
        }
    }
}

/// One row of a solver metric trace.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub rmse: f64,
    /// Absent when the image is smaller than the SSIM window.
    pub ssim: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SartOutput {
    pub image: ImageGrid,
    pub trace: Vec<TraceRow>,
    pub seconds: f64,
}

/// Residuals p_i - ⟨W_i, f⟩ for the rays of `views`, in view order.
pub(crate) fn subset_residuals(projector: &Projector, image: &[f64], sino: &Sinogram, views: &[usize]) -> Vec<f64> {
    let p = sino.values();
    let mut out = Vec::with_capacity(views.len() * sino.n_bins());
    for &v in views {
        for ray in projector.view_rays(v) {
            out.push(p[ray] - projector.row(ray).dot(image));
        }
    }
    out
}

/// One unconstrained OS-SART update over the views in `subset`.
///
/// `pixel_sums` holds Σ_{i∈T_m} w_{i,j}; pixels where it vanishes are left
/// unchanged, as are rays with zero total weight.
pub fn os_sart_step(
    image: &mut ImageGrid,
    sino: &Sinogram,
    projector: &Projector,
    subset: &[usize],
    ray_sums: &[f64],
    pixel_sums: &[f64],
) -> Result<()> {
    check_len("image pixels", projector.grid().len(), image.values().len())?;
    check_len("pixel sums", projector.grid().len(), pixel_sums.len())?;
    check_len("ray sums", projector.n_rays(), ray_sums.len())?;
    projector.check_sinogram(sino)?;

    let residuals = subset_residuals(projector, image.values(), sino, subset);
    let mut correction = vec![0.0; image.values().len()];
    let mut k = 0;
    for &v in subset {
        for ray in projector.view_rays(v) {
            let rs = ray_sums[ray];
            let r = residuals[k];
            k += 1;
            if rs > 0.0 && r != 0.0 {
                let scaled = r / rs;
                for (j, w) in projector.row(ray).iter() {
                    correction[j] += w * scaled;
                }
            }
        }
    }
    for ((f, c), &s) in image.values_mut().iter_mut().zip(&correction).zip(pixel_sums) {
        if s > 0.0 {
            *f += c / s;
        }
    }
    Ok(())
}

pub(crate) fn trace_row(iteration: usize, image: &ImageGrid, reference: Option<&ImageGrid>, ssim: &SsimParams) -> Result<Option<TraceRow>> {
    let Some(reference) = reference else {
        return Ok(None);
    };
    Ok(Some(TraceRow {
        iteration,
        rmse: metrics::rmse(image, reference)?,
        ssim: metrics::ssim_if_fits(image, reference, ssim)?,
    }))
}

/// Runs `config.iterations` subset steps from `initial`.
///
/// With a `reference`, RMSE and SSIM are traced every `trace_every` steps and
/// after the final step.
pub fn os_sart(
    projector: &Projector,
    initial: &ImageGrid,
    sino: &Sinogram,
    config: &SartConfig,
    reference: Option<&ImageGrid>,
) -> Result<SartOutput> {
    let grid = projector.grid();
    check_len("initial image pixels", grid.len(), initial.values().len())?;
    config.constraints.check(&grid)?;
    let partition = partition_views(projector.n_views(), config.subsets)?;
    let sums: RowSums = projector.row_sums(partition.subsets());

    let start = Instant::now();
    let mut image = initial.clone();
    let mut trace = Vec::new();
    for k in 0..config.iterations {
        let m = k % partition.len();
        os_sart_step(&mut image, sino, projector, partition.subset(m), &sums.ray, &sums.subset_pixel[m])?;
        config.constraints.apply(&mut image);
        let done = k + 1;
        let due = config.trace_every > 0 && done % config.trace_every == 0;
        if due || done == config.iterations {
            if let Some(row) = trace_row(done, &image, reference, &config.ssim)? {
                trace.push(row);
            }
        }
    }
    Ok(SartOutput {
        image,
        trace,
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ea_angles, AcquisitionMode, AngleSet};
    use crate::projector::Detector;

    #[test]
    fn partitions() {
        assert_eq!(partition_views(4, 1).unwrap().subsets(), &[vec![0, 1, 2, 3]]);
        assert_eq!(
            partition_views(4, 4).unwrap().subsets(),
            &[vec![0], vec![1], vec![2], vec![3]]
        );
        assert_eq!(partition_views(5, 2).unwrap().subsets(), &[vec![0, 2, 4], vec![1, 3]]);
        assert!(partition_views(3, 0).is_err());
        assert!(partition_views(3, 4).is_err());
    }

    #[test]
    fn scalar_step_is_exact() {
        let g = GridSpec::square(1, 1.0).unwrap();
        let a = AngleSet::new(vec![0.0], AcquisitionMode::EquallyAngled, -1.0, 1.0).unwrap();
        let det = Detector::new(1, 1.0).unwrap();
        let proj = Projector::new(g, &a, det);
        let sino = Sinogram::from_vec(a, det, vec![2.0]).unwrap();
        let sums = proj.row_sums(&[vec![0]]);
        let mut f = ImageGrid::zeros(g);
        os_sart_step(&mut f, &sino, &proj, &[0], &sums.ray, &sums.subset_pixel[0]).unwrap();
        assert_eq!(f.values(), &[2.0]);
    }

    #[test]
    fn consistent_data_is_a_fixed_point() {
        let g = GridSpec::square(6, 1.0).unwrap();
        let a = ea_angles(5, -50.0, 50.0).unwrap();
        let proj = Projector::new(g, &a, Detector::covering(&g));
        let f: Vec<f64> = (0..36).map(|i| (i % 7) as f64).collect();
        let f = ImageGrid::from_vec(g, f).unwrap();
        let sino = proj.forward(&f).unwrap();
        let part = partition_views(5, 2).unwrap();
        let sums = proj.row_sums(part.subsets());
        let mut g1 = f.clone();
        os_sart_step(&mut g1, &sino, &proj, part.subset(1), &sums.ray, &sums.subset_pixel[1]).unwrap();
        for (a, b) in g1.values().iter().zip(f.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_iterations_and_constraints() {
        let g = GridSpec::square(8, 1.0).unwrap();
        let a = ea_angles(6, -60.0, 60.0).unwrap();
        let proj = Projector::new(g, &a, Detector::covering(&g));
        let mut truth = ImageGrid::zeros(g);
        truth.set(3, 4, 5.0);
        truth.set(5, 2, 3.0);
        let sino = proj.forward(&truth).unwrap();
        let init = ImageGrid::filled(g, 0.25);

        let cfg = SartConfig {
            iterations: 0,
            ..SartConfig::sweeps(1, 6, Constraints::none())
        };
        let out = os_sart(&proj, &init, &sino, &cfg, None).unwrap();
        assert_eq!(out.image, init);

        let cfg = SartConfig::sweeps(10, 6, Constraints::loose(&g));
        let out = os_sart(&proj, &init, &sino, &cfg, Some(&truth)).unwrap();
        assert!(out.image.min() >= 0.0);
        let mask = SupportMask::inscribed_circle(&g);
        for (j, v) in out.image.values().iter().enumerate() {
            if !mask.contains(j) {
                assert_eq!(*v, 0.0);
            }
        }
        assert_eq!(out.trace.len(), 10);
        assert_eq!(out.trace.last().unwrap().iteration, 60);
    }

    #[test]
    fn mask_size_checked() {
        let g = GridSpec::square(8, 1.0).unwrap();
        let a = ea_angles(2, -60.0, 60.0).unwrap();
        let proj = Projector::new(g, &a, Detector::covering(&g));
        let sino = proj.forward(&ImageGrid::zeros(g)).unwrap();
        let other = GridSpec::square(9, 1.0).unwrap();
        let cfg = SartConfig::sweeps(1, 2, Constraints::loose(&other));
        assert!(os_sart(&proj, &ImageGrid::zeros(g), &sino, &cfg, None).is_err());
    }
}
