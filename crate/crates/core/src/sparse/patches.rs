use crate::error::{check_len, invalid, Result};
use crate::projector::{GridSpec, ImageGrid};

use super::{Dictionary, SparseCode};

/// All stride-1 `edge`×`edge` patches of an image, origins in row-major order.
/// Patch `s` is stored as a length-`edge²` vector, row-major inside the patch.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSet {
    edge: usize,
    grid: GridSpec,
    data: Vec<f64>,
}

impl PatchSet {
    pub fn edge(&self) -> usize {
        self.edge
    }

    /// Signal length N = edge².
    pub fn dim(&self) -> usize {
        self.edge * self.edge
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn patch(&self, s: usize) -> &[f64] {
        let n = self.dim();
        &self.data[s * n..(s + 1) * n]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.dim())
    }

    /// Number of patch origins along each axis (rows, cols).
    pub fn origin_counts(&self) -> (usize, usize) {
        (self.grid.height - self.edge + 1, self.grid.width - self.edge + 1)
    }

    /// Top-left pixel (row, col) of patch `s`.
    pub fn origin(&self, s: usize) -> (usize, usize) {
        let (_, cols) = self.origin_counts();
        (s / cols, s % cols)
    }

    /// Builds a patch set from raw patch vectors (e.g. a training corpus not
    /// tied to one image); origins are then meaningless.
    pub fn from_vectors(edge: usize, data: Vec<f64>) -> Result<Self> {
        let n = edge * edge;
        if n == 0 || data.is_empty() || !data.len().is_multiple_of(n) {
            return Err(invalid("patch data is not a whole number of patches"));
        }
        let s = data.len() / n;
        Ok(PatchSet {
            edge,
            grid: GridSpec::new(edge + s - 1, edge, 1.0)?,
            data,
        })
    }
}

fn check_edge(grid: &GridSpec, edge: usize) -> Result<()> {
    if edge == 0 || edge > grid.width.min(grid.height) {
        return Err(invalid(format!(
            "patch edge {edge} does not fit a {}x{} image",
            grid.width, grid.height
        )));
    }
    Ok(())
}

/// Extracts every overlapping patch: S = (H − e + 1)(W − e + 1).
pub fn extract_patches(image: &ImageGrid, edge: usize) -> Result<PatchSet> {
    let grid = image.spec();
    check_edge(&grid, edge)?;
    let rows = grid.height - edge + 1;
    let cols = grid.width - edge + 1;
    let f = image.values();
    let mut data = Vec::with_capacity(rows * cols * edge * edge);
    for r in 0..rows {
        for c in 0..cols {
            for a in 0..edge {
                let start = (r + a) * grid.width + c;
                data.extend_from_slice(&f[start..start + edge]);
            }
        }
    }
    Ok(PatchSet { edge, grid, data })
}

/// Number of patches covering each pixel, Σ_s Σ_n e^s_{n,j}.
pub fn patch_counts(grid: &GridSpec, edge: usize) -> Result<Vec<f64>> {
    check_edge(grid, edge)?;
    let cover = |i: usize, n: usize| -> f64 {
        // origins o with o <= i <= o + edge - 1, 0 <= o <= n - edge
        let lo = i.saturating_sub(edge - 1);
        let hi = i.min(n - edge);
        (hi - lo + 1) as f64
    };
    let mut out = Vec::with_capacity(grid.len());
    for r in 0..grid.height {
        let cr = cover(r, grid.height);
        for c in 0..grid.width {
            out.push(cr * cover(c, grid.width));
        }
    }
    Ok(out)
}

/// Σ_s E_sᵀ (D α_s) and the per-pixel patch count image.
pub fn patch_adjoint_accumulate(
    codes: &[SparseCode],
    dictionary: &Dictionary,
    grid: GridSpec,
    edge: usize,
) -> Result<(ImageGrid, ImageGrid)> {
    check_edge(&grid, edge)?;
    check_len("patch dimension", edge * edge, dictionary.dim())?;
    let rows = grid.height - edge + 1;
    let cols = grid.width - edge + 1;
    check_len("code count", rows * cols, codes.len())?;
    let mut num = vec![0.0; grid.len()];
    let mut patch = vec![0.0; edge * edge];
    for (s, code) in codes.iter().enumerate() {
        if code.is_empty() {
            continue;
        }
        dictionary.reconstruct_into(code, &mut patch);
        let (r, c) = (s / cols, s % cols);
        for a in 0..edge {
            let start = (r + a) * grid.width + c;
            for (o, v) in num[start..start + edge].iter_mut().zip(&patch[a * edge..(a + 1) * edge]) {
                *o += v;
            }
        }
    }
    let counts = patch_counts(&grid, edge)?;
    Ok((ImageGrid::from_vec(grid, num)?, ImageGrid::from_vec(grid, counts)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize) -> ImageGrid {
        let v = (0..w * h).map(|i| i as f64 * 0.5 + 1.0).collect();
        ImageGrid::from_vec(GridSpec::new(w, h, 1.0).unwrap(), v).unwrap()
    }

    #[test]
    fn whole_image_patch() {
        let img = ramp(8, 8);
        let p = extract_patches(&img, 8).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.patch(0), img.values());
    }

    #[test]
    fn patch_count_formula() {
        let img = ImageGrid::zeros(GridSpec::square(121, 0.5).unwrap());
        let p = extract_patches(&img, 8).unwrap();
        assert_eq!(p.len(), 114 * 114);
        assert_eq!(p.len(), 12996);
        let img = ramp(7, 5);
        let p = extract_patches(&img, 3).unwrap();
        assert_eq!(p.len(), 5 * 3);
        assert_eq!(p.origin(7), (1, 2));
        assert_eq!(p.patch(7)[4], img.get(2, 3));
        assert!(extract_patches(&img, 6).is_err());
    }

    #[test]
    fn constant_image_patches_identical() {
        let img = ImageGrid::filled(GridSpec::square(10, 1.0).unwrap(), 4.0);
        let p = extract_patches(&img, 4).unwrap();
        assert!(p.iter().all(|q| q == p.patch(0)));
    }

    #[test]
    fn cover_counts() {
        let g = GridSpec::square(30, 1.0).unwrap();
        let c = patch_counts(&g, 8).unwrap();
        assert_eq!(c[15 * 30 + 15], 64.0);
        assert_eq!(c[0], 1.0);
        assert_eq!(c[29 * 30 + 29], 1.0);
        assert_eq!(c[7], 8.0);
        // brute-force check
        let p = extract_patches(&ImageGrid::zeros(g), 8).unwrap();
        let mut brute = vec![0.0; g.len()];
        for s in 0..p.len() {
            let (r, cc) = p.origin(s);
            for a in 0..8 {
                for b in 0..8 {
                    brute[(r + a) * 30 + cc + b] += 1.0;
                }
            }
        }
        assert_eq!(brute, c);
    }
}
