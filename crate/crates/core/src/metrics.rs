//! Image quality indices: RMSE and Gaussian-window SSIM.

use crate::error::{invalid, Result};
use crate::projector::ImageGrid;

/// Root mean square difference between a reconstruction and its reference.
pub fn rmse(image: &ImageGrid, reference: &ImageGrid) -> Result<f64> {
    image.same_shape(reference)?;
    Ok(rmse_values(image.values(), reference.values()))
}

pub(crate) fn rmse_values(a: &[f64], b: &[f64]) -> f64 {
    let sum: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (sum / a.len() as f64).sqrt()
}

/// SSIM parameters. The defaults are the usual 11×11 Gaussian window with
/// σ = 1.5 and K1 = 0.01, K2 = 0.03.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimParams {
    pub window_edge: usize,
    pub gaussian_sigma: f64,
    pub k1: f64,
    pub k2: f64,
    /// Dynamic range L. `None` uses the reference maximum.
    pub dynamic_range: Option<f64>,
}

impl Default for SsimParams {
    fn default() -> Self {
        SsimParams {
            window_edge: 11,
            gaussian_sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: None,
        }
    }
}

impl SsimParams {
    fn validate(&self) -> Result<()> {
        if self.window_edge == 0 || self.window_edge.is_multiple_of(2) {
            return Err(invalid("SSIM window edge must be odd"));
        }
        if !(self.gaussian_sigma > 0.0 && self.k1 > 0.0 && self.k2 > 0.0) {
            return Err(invalid("SSIM sigma and stabiliser constants must be positive"));
        }
        if let Some(l) = self.dynamic_range {
            if !(l.is_finite() && l > 0.0) {
                return Err(invalid("SSIM dynamic range must be positive"));
            }
        }
        Ok(())
    }

    /// L used against `reference`: the explicit value, else the reference
    /// maximum, else 1 for references without positive values.
    pub fn resolve_range(&self, reference: &ImageGrid) -> f64 {
        self.dynamic_range.unwrap_or_else(|| {
            let m = reference.max();
            if m > 0.0 {
                m
            } else {
                1.0
            }
        })
    }
}

fn gaussian_window(edge: usize, sigma: f64) -> Vec<f64> {
    let half = (edge / 2) as f64;
    let w: Vec<f64> = (0..edge)
        .map(|i| {
            let d = i as f64 - half;
            (-(d * d) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Valid-mode separable filtering of a row-major `h`×`w` array.
fn filter_valid(values: &[f64], h: usize, w: usize, kernel: &[f64]) -> Vec<f64> {
    let k = kernel.len();
    let ow = w - k + 1;
    let oh = h - k + 1;
    let mut rows = vec![0.0; h * ow];
    for r in 0..h {
        let src = &values[r * w..(r + 1) * w];
        for c in 0..ow {
            rows[r * ow + c] = kernel.iter().zip(&src[c..c + k]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = kernel
                .iter()
                .enumerate()
                .map(|(t, a)| a * rows[(r + t) * ow + c])
                .sum();
        }
    }
    out
}

/// Mean SSIM over all fully contained windows.
pub fn ssim(image: &ImageGrid, reference: &ImageGrid, params: &SsimParams) -> Result<f64> {
    image.same_shape(reference)?;
    params.validate()?;
    let (h, w) = (image.height(), image.width());
    let k = params.window_edge;
    if k > h || k > w {
        return Err(invalid(format!("SSIM window {k} larger than {h}x{w} image")));
    }
    let l = params.resolve_range(reference);
    let c1 = (params.k1 * l).powi(2);
    let c2 = (params.k2 * l).powi(2);
    let kernel = gaussian_window(k, params.gaussian_sigma);

    let x = image.values();
    let y = reference.values();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();

    let mx = filter_valid(x, h, w, &kernel);
    let my = filter_valid(y, h, w, &kernel);
    let sxx = filter_valid(&xx, h, w, &kernel);
    let syy = filter_valid(&yy, h, w, &kernel);
    let sxy = filter_valid(&xy, h, w, &kernel);

    let mut total = 0.0;
    for i in 0..mx.len() {
        let (ux, uy) = (mx[i], my[i]);
        let vx = sxx[i] - ux * ux;
        let vy = syy[i] - uy * uy;
        let cov = sxy[i] - ux * uy;
        let num = (2.0 * ux * uy + c1) * (2.0 * cov + c2);
        let den = (ux * ux + uy * uy + c1) * (vx + vy + c2);
        total += num / den;
    }
    Ok(total / mx.len() as f64)
}

/// SSIM, or `None` when the window does not fit inside the image.
pub fn ssim_if_fits(image: &ImageGrid, reference: &ImageGrid, params: &SsimParams) -> Result<Option<f64>> {
    if params.window_edge > image.height().min(image.width()) {
        return Ok(None);
    }
    ssim(image, reference, params).map(Some)
}

/// Arithmetic mean of `metric` over paired slices.
pub fn mean_metric_over_stack<F>(images: &[ImageGrid], references: &[ImageGrid], mut metric: F) -> Result<f64>
where
    F: FnMut(&ImageGrid, &ImageGrid) -> Result<f64>,
{
    if images.is_empty() {
        return Err(invalid("empty image stack"));
    }
    if images.len() != references.len() {
        return Err(invalid(format!(
            "stack lengths differ: {} images, {} references",
            images.len(),
            references.len()
        )));
    }
    let mut sum = 0.0;
    for (a, b) in images.iter().zip(references) {
        sum += metric(a, b)?;
    }
    Ok(sum / images.len() as f64)
}
