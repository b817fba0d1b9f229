use crate::error::{check_len, invalid, Error, Result};

/// Unit-norm tolerance for dictionary columns.
pub const NORM_TOL: f64 = 1e-9;

/// A sparse code over a dictionary: atom indices and their coefficients.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseCode {
    pub support: Vec<usize>,
    pub coefs: Vec<f64>,
}

impl SparseCode {
    pub fn nnz(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }
}

/// N×K matrix of unit-norm atoms, stored column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    dim: usize,
    atoms: Vec<f64>,
}

impl Dictionary {
    /// Wraps column-major data whose columns already have unit norm.
    pub fn from_columns(dim: usize, atoms: Vec<f64>) -> Result<Self> {
        if dim == 0 || atoms.is_empty() || !atoms.len().is_multiple_of(dim) {
            return Err(invalid(format!(
                "dictionary data of length {} does not hold columns of length {dim}",
                atoms.len()
            )));
        }
        if atoms.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dictionary"));
        }
        for (k, col) in atoms.chunks(dim).enumerate() {
            let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > NORM_TOL {
                return Err(invalid(format!("dictionary atom {k} has norm {norm}, expected 1")));
            }
        }
        Ok(Dictionary { dim, atoms })
    }

    /// Normalises every column; zero columns are rejected.
    pub fn normalized(dim: usize, mut atoms: Vec<f64>) -> Result<Self> {
        if dim == 0 || atoms.is_empty() || !atoms.len().is_multiple_of(dim) {
            return Err(invalid("dictionary data is not a whole number of columns"));
        }
        for (k, col) in atoms.chunks_mut(dim).enumerate() {
            let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(invalid(format!("dictionary atom {k} cannot be normalised")));
            }
            col.iter_mut().for_each(|v| *v /= norm);
        }
        Dictionary::from_columns(dim, atoms)
    }

    /// Signal length N.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Atom count K.
    pub fn n_atoms(&self) -> usize {
        self.atoms.len() / self.dim
    }

    pub fn atom(&self, k: usize) -> &[f64] {
        &self.atoms[k * self.dim..(k + 1) * self.dim]
    }

    pub(crate) fn set_atom(&mut self, k: usize, values: &[f64]) {
        let n = self.dim;
        self.atoms[k * n..(k + 1) * n].copy_from_slice(values);
    }

    pub fn columns(&self) -> &[f64] {
        &self.atoms
    }

    /// Dᵀ D, K×K row-major.
    pub fn gram(&self) -> Vec<f64> {
        let k = self.n_atoms();
        let mut g = vec![0.0; k * k];
        for a in 0..k {
            for b in a..k {
                let v = dot(self.atom(a), self.atom(b));
                g[a * k + b] = v;
                g[b * k + a] = v;
            }
        }
        g
    }

    /// Largest |⟨d_a, d_b⟩| over distinct atoms.
    pub fn coherence(&self) -> f64 {
        let k = self.n_atoms();
        let mut mu: f64 = 0.0;
        for a in 0..k {
            for b in a + 1..k {
                mu = mu.max(dot(self.atom(a), self.atom(b)).abs());
            }
        }
        mu
    }

    /// D α written into `out`.
    pub fn reconstruct_into(&self, code: &SparseCode, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (&k, &c) in code.support.iter().zip(&code.coefs) {
            for (o, a) in out.iter_mut().zip(self.atom(k)) {
                *o += c * a;
            }
        }
    }

    pub fn reconstruct(&self, code: &SparseCode) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.reconstruct_into(code, &mut out);
        out
    }

    /// ‖x − D α‖²
    pub fn residual_sq(&self, signal: &[f64], code: &SparseCode) -> Result<f64> {
        check_len("signal length", self.dim, signal.len())?;
        let approx = self.reconstruct(code);
        Ok(signal.iter().zip(&approx).map(|(a, b)| (a - b) * (a - b)).sum())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
