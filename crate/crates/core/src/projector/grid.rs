use crate::error::{check_len, invalid, Error, Result};

/// Pixel lattice descriptor: `height` rows by `width` columns of square
/// pixels with side `pixel_size`, centred on the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    pub pixel_size: f64,
}

impl GridSpec {
    pub fn new(width: usize, height: usize, pixel_size: f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(invalid("grid dimensions must be positive"));
        }
        if !(pixel_size.is_finite() && pixel_size > 0.0) {
            return Err(invalid(format!("pixel size must be positive, got {pixel_size}")));
        }
        Ok(GridSpec {
            width,
            height,
            pixel_size,
        })
    }

    pub fn square(size: usize, pixel_size: f64) -> Result<Self> {
        Self::new(size, size, pixel_size)
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    /// Length of the grid diagonal in physical units.
    pub fn diagonal(&self) -> f64 {
        self.pixel_size * ((self.width * self.width + self.height * self.height) as f64).sqrt()
    }

    /// Physical centre (x, y) of pixel (row, col); x follows columns, y rows.
    pub fn pixel_center(&self, row: usize, col: usize) -> (f64, f64) {
        let x = (col as f64 + 0.5 - self.width as f64 / 2.0) * self.pixel_size;
        let y = (row as f64 + 0.5 - self.height as f64 / 2.0) * self.pixel_size;
        (x, y)
    }
}

/// A 2D image stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    spec: GridSpec,
    data: Vec<f64>,
}

impl ImageGrid {
    pub fn zeros(spec: GridSpec) -> Self {
        ImageGrid {
            spec,
            data: vec![0.0; spec.len()],
        }
    }

    pub fn filled(spec: GridSpec, value: f64) -> Self {
        ImageGrid {
            spec,
            data: vec![value; spec.len()],
        }
    }

    pub fn from_vec(spec: GridSpec, data: Vec<f64>) -> Result<Self> {
        check_len("image pixel count", spec.len(), data.len())?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("image"));
        }
        Ok(ImageGrid { spec, data })
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn width(&self) -> usize {
        self.spec.width
    }

    pub fn height(&self) -> usize {
        self.spec.height
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_values(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[self.spec.index(row, col)]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        let i = self.spec.index(row, col);
        self.data[i] = value;
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn same_shape(&self, other: &ImageGrid) -> Result<()> {
        check_len("image width", self.width(), other.width())?;
        check_len("image height", self.height(), other.height())
    }
}
