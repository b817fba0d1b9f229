//! Exact ray/pixel intersection lengths by incremental lattice traversal.

use super::{Detector, GridSpec};

/// One row of the system matrix: the pixels a ray crosses and the chord
/// length inside each.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseRow {
    indices: Vec<u32>,
    weights: Vec<f64>,
}

impl SparseRow {
    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices
            .iter()
            .zip(&self.weights)
            .map(|(&j, &w)| (j as usize, w))
    }

    /// Σ_j w_j
    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// ⟨row, values⟩
    pub fn dot(&self, values: &[f64]) -> f64 {
        self.iter().map(|(j, w)| w * values[j]).sum()
    }

    fn push(&mut self, index: u32, weight: f64) {
        if self.indices.last() == Some(&index) {
            *self.weights.last_mut().unwrap() += weight;
        } else {
            self.indices.push(index);
            self.weights.push(weight);
        }
    }
}

/// Unit direction of travel (x, y) for a view angle in degrees.
pub(crate) fn ray_direction(angle_deg: f64) -> (f64, f64) {
    let t = angle_deg.to_radians();
    (t.sin(), t.cos())
}

/// Signed detector offset of `bin`, measured from the grid centre.
pub(crate) fn bin_offset(bin: usize, detector: &Detector) -> f64 {
    (bin as f64 - (detector.n_bins as f64 - 1.0) / 2.0) * detector.bin_spacing
}

/// System-matrix row for the ray through the centre of detector `bin` at
/// `angle` degrees. Rays that miss the grid give an empty row.
pub fn system_row(grid: &GridSpec, angle: f64, bin: usize, detector: &Detector) -> SparseRow {
    let (dx, dy) = ray_direction(angle);
    let offset = bin_offset(bin, detector);
    // detector axis u = (cos θ, -sin θ) is perpendicular to the ray
    let ox = offset * dy;
    let oy = -offset * dx;
    trace_line(grid, (ox, oy), (dx, dy))
}

/// Intersection lengths of the infinite line `origin + s * dir` (unit `dir`)
/// with every pixel of `grid`.
pub(crate) fn trace_line(grid: &GridSpec, origin: (f64, f64), dir: (f64, f64)) -> SparseRow {
    const PARALLEL: f64 = 1e-12;
    let px = grid.pixel_size;
    let xmin = -(grid.width as f64) * px / 2.0;
    let ymin = -(grid.height as f64) * px / 2.0;
    let xmax = -xmin;
    let ymax = -ymin;
    let (ox, oy) = origin;
    let (dx, dy) = dir;

    let mut row = SparseRow::default();

    let (mut s_in, mut s_out) = (f64::NEG_INFINITY, f64::INFINITY);
    for (o, d, lo, hi) in [(ox, dx, xmin, xmax), (oy, dy, ymin, ymax)] {
        if d.abs() < PARALLEL {
            // half-open slab: a ray exactly on the far edge belongs to no pixel
            if o < lo || o >= hi {
                return row;
            }
        } else {
            let a = (lo - o) / d;
            let b = (hi - o) / d;
            s_in = s_in.max(a.min(b));
            s_out = s_out.min(a.max(b));
        }
    }
    let min_len = 1e-12 * px;
    if !(s_out - s_in > min_len) {
        return row;
    }

    // Plane crossing parameter for x-plane k / y-plane k.
    let plane_x = |k: i64| (xmin + k as f64 * px - ox) / dx;
    let plane_y = |k: i64| (ymin + k as f64 * px - oy) / dy;

    let entry_x = ox + s_in * dx;
    let entry_y = oy + s_in * dy;
    let (mut kx, step_x) = next_plane(entry_x, xmin, px, dx, PARALLEL);
    let (mut ky, step_y) = next_plane(entry_y, ymin, px, dy, PARALLEL);

    let mut s = s_in;
    while s_out - s > min_len {
        let sx = if step_x == 0 { f64::INFINITY } else { plane_x(kx) };
        let sy = if step_y == 0 { f64::INFINITY } else { plane_y(ky) };
        let end = sx.min(sy).min(s_out);
        if end - s > min_len {
            let mid = 0.5 * (s + end);
            let col = ((ox + mid * dx - xmin) / px).floor();
            let r = ((oy + mid * dy - ymin) / px).floor();
            let col = (col.max(0.0) as usize).min(grid.width - 1);
            let r = (r.max(0.0) as usize).min(grid.height - 1);
            row.push((r * grid.width + col) as u32, end - s);
        }
        if end >= s_out {
            break;
        }
        if sx <= end {
            kx += step_x;
        }
        if sy <= end {
            ky += step_y;
        }
        s = s.max(end);
    }
    row
}

/// First lattice plane strictly ahead of `pos` when moving with sign of `d`,
/// and the index step.
fn next_plane(pos: f64, min: f64, px: f64, d: f64, parallel: f64) -> (i64, i64) {
    if d.abs() < parallel {
        return (0, 0);
    }
    let u = (pos - min) / px;
    if d > 0.0 {
        (u.floor() as i64 + 1, 1)
    } else {
        (u.ceil() as i64 - 1, -1)
    }
}
