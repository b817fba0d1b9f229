//! Dense reference implementations shared by the integration tests.
//!
//! The system matrix here is built by clipping each ray against every pixel
//! square independently, not by the traversal used in the library.

#![allow(dead_code)]

use etrecon::geometry::AcquisitionMode;
use etrecon::sparse::{Dictionary, SparseCode};
use etrecon::{AngleSet, Detector, GridSpec};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Angle set from arbitrary increasing angles.
pub fn angle_set(angles: &[f64]) -> AngleSet {
    AngleSet::new(angles.to_vec(), AcquisitionMode::EquallySloped, -89.95, 90.0).unwrap()
}

/// `n` sorted distinct angles drawn from (-89, 89).
pub fn random_angles(n: usize, r: &mut impl Rng) -> AngleSet {
    loop {
        let mut a: Vec<f64> = (0..n).map(|_| r.random_range(-89.0..89.0)).collect();
        a.sort_by(f64::total_cmp);
        if a.windows(2).all(|w| w[1] - w[0] > 1e-3) {
            return angle_set(&a);
        }
    }
}

/// Length of the line `o + s d` inside the box [x0, x1] × [y0, y1].
fn clip_length(o: (f64, f64), d: (f64, f64), x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for (p, dp, a, b) in [(o.0, d.0, x0, x1), (o.1, d.1, y0, y1)] {
        if dp.abs() < 1e-15 {
            if p < a || p > b {
                return 0.0;
            }
        } else {
            let (s0, s1) = ((a - p) / dp, (b - p) / dp);
            lo = lo.max(s0.min(s1));
            hi = hi.min(s0.max(s1));
        }
    }
    (hi - lo).max(0.0)
}

/// Dense I × J system matrix, rays ordered view-major then bin.
pub fn dense_system(grid: &GridSpec, angles: &AngleSet, det: &Detector) -> DMatrix<f64> {
    let px = grid.pixel_size;
    let (w, h) = (grid.width, grid.height);
    let xmin = -(w as f64) * px / 2.0;
    let ymin = -(h as f64) * px / 2.0;
    let mut m = DMatrix::zeros(angles.len() * det.n_bins, w * h);
    for (v, &theta) in angles.angles().iter().enumerate() {
        let t = theta.to_radians();
        let d = (t.sin(), t.cos());
        for b in 0..det.n_bins {
            let off = (b as f64 - (det.n_bins as f64 - 1.0) / 2.0) * det.bin_spacing;
            let o = (off * t.cos(), -off * t.sin());
            for r in 0..h {
                for c in 0..w {
                    let x0 = xmin + c as f64 * px;
                    let y0 = ymin + r as f64 * px;
                    m[(v * det.n_bins + b, r * w + c)] = clip_length(o, d, x0, x0 + px, y0, y0 + px);
                }
            }
        }
    }
    m
}

/// Row indices of the rays belonging to `views`.
pub fn subset_rows(views: &[usize], n_bins: usize) -> Vec<usize> {
    views.iter().flat_map(|&v| v * n_bins..(v + 1) * n_bins).collect()
}

/// One OS-SART update written term by term from its definition.
pub fn dense_sart_step(w: &DMatrix<f64>, f: &DVector<f64>, p: &DVector<f64>, rows: &[usize]) -> DVector<f64> {
    let j_count = w.ncols();
    let mut out = f.clone();
    for j in 0..j_count {
        let col_sum: f64 = rows.iter().map(|&i| w[(i, j)]).sum();
        if col_sum == 0.0 {
            continue;
        }
        let mut acc = 0.0;
        for &i in rows {
            let row_sum: f64 = w.row(i).sum();
            if row_sum == 0.0 {
                continue;
            }
            let wf: f64 = (0..j_count).map(|l| w[(i, l)] * f[l]).sum();
            acc += w[(i, j)] / col_sum * (p[i] - wf) / row_sum;
        }
        out[j] += acc;
    }
    out
}

/// Explicit 0/1 patch extraction matrices E_s (N × J), origins row-major.
pub fn extraction_matrices(grid: &GridSpec, edge: usize) -> Vec<DMatrix<f64>> {
    let (w, h) = (grid.width, grid.height);
    let mut out = Vec::new();
    for r in 0..=h - edge {
        for c in 0..=w - edge {
            let mut e = DMatrix::zeros(edge * edge, w * h);
            for a in 0..edge {
                for b in 0..edge {
                    e[(a * edge + b, (r + a) * w + c + b)] = 1.0;
                }
            }
            out.push(e);
        }
    }
    out
}

pub fn dense_dictionary(d: &Dictionary) -> DMatrix<f64> {
    DMatrix::from_fn(d.dim(), d.n_atoms(), |n, k| d.atom(k)[n])
}

pub fn dense_code(code: &SparseCode, k: usize) -> DVector<f64> {
    let mut a = DVector::zeros(k);
    for (&s, &c) in code.support.iter().zip(&code.coefs) {
        a[s] = c;
    }
    a
}

/// Image update with fixed dictionary and codes, written term by term.
#[allow(clippy::too_many_arguments)]
pub fn dense_adsir_step(
    w: &DMatrix<f64>,
    f: &DVector<f64>,
    p: &DVector<f64>,
    rows: &[usize],
    e: &[DMatrix<f64>],
    dict: &DMatrix<f64>,
    codes: &[DVector<f64>],
    lambda: f64,
) -> DVector<f64> {
    let j_count = w.ncols();
    let approx: Vec<DVector<f64>> = codes.iter().map(|a| dict * a).collect();
    let patches: Vec<DVector<f64>> = e.iter().map(|es| es * f).collect();
    let mut out = f.clone();
    for j in 0..j_count {
        let mut num = 0.0;
        let mut den = 0.0;
        for &i in rows {
            let wf: f64 = (0..j_count).map(|l| w[(i, l)] * f[l]).sum();
            num += w[(i, j)] * (wf - p[i]);
            den += w[(i, j)] * w.row(i).sum();
        }
        let mut pnum = 0.0;
        let mut pden = 0.0;
        for (s, es) in e.iter().enumerate() {
            for n in 0..es.nrows() {
                let enj = es[(n, j)];
                if enj != 0.0 {
                    pnum += enj * (patches[s][n] - approx[s][n]);
                    pden += enj * es.row(n).sum();
                }
            }
        }
        num += 2.0 * lambda * pnum;
        den += 2.0 * lambda * pden;
        if den > 0.0 {
            out[j] -= num / den;
        }
    }
    out
}

/// ½‖Wf − p‖² + λ Σ_s ‖E_s f − D α_s‖².
pub fn dense_objective(
    w: &DMatrix<f64>,
    f: &DVector<f64>,
    p: &DVector<f64>,
    e: &[DMatrix<f64>],
    dict: &DMatrix<f64>,
    codes: &[DVector<f64>],
    lambda: f64,
) -> f64 {
    let r = w * f - p;
    let patch: f64 = e
        .iter()
        .zip(codes)
        .map(|(es, a)| (es * f - dict * a).norm_squared())
        .sum();
    0.5 * r.norm_squared() + lambda * patch
}

pub fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}
