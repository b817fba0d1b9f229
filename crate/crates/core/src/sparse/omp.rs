//! Orthogonal matching pursuit.
//!
//! Correlations with the residual are updated through the Gram matrix and the
//! least-squares coefficients come from an incrementally grown Cholesky
//! factor of the selected atoms' Gram block, so coding a signal costs one
//! Dᵀx product plus O(K·L) work per selected atom.

use crate::error::{check_len, Error, Result};

use super::dictionary::dot;
use super::{Dictionary, SparseCode};

/// Reusable OMP coder holding the dictionary Gram matrix.
#[derive(Debug, Clone)]
pub struct OmpCoder<'a> {
    dict: &'a Dictionary,
    gram: Vec<f64>,
}

impl<'a> OmpCoder<'a> {
    pub fn new(dict: &'a Dictionary) -> Self {
        OmpCoder {
            dict,
            gram: dict.gram(),
        }
    }

    pub fn dictionary(&self) -> &Dictionary {
        self.dict
    }

    /// Greedy sparse code of `signal` with at most `max_atoms` atoms,
    /// stopping as soon as ‖x − Dα‖² ≤ `eps`.
    ///
    /// Returns the code and its squared residual.
    pub fn encode(&self, signal: &[f64], max_atoms: usize, eps: f64) -> Result<(SparseCode, f64)> {
        let n = self.dict.dim();
        let k_total = self.dict.n_atoms();
        check_len("signal length", n, signal.len())?;
        if signal.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("OMP signal"));
        }
        let max_atoms = max_atoms.min(n).min(k_total);

        let proj: Vec<f64> = (0..k_total).map(|k| dot(self.dict.atom(k), signal)).collect();
        let mut corr = proj.clone();
        let signal_sq = dot(signal, signal);
        let floor = 1e-12 * signal_sq.sqrt();

        let mut support: Vec<usize> = Vec::with_capacity(max_atoms);
        let mut selected = vec![false; k_total];
        // lower-triangular Cholesky factor of G_SS, row-major, row i has i+1 entries
        let mut chol: Vec<Vec<f64>> = Vec::with_capacity(max_atoms);
        let mut coefs: Vec<f64> = Vec::new();
        let mut residual = signal.to_vec();
        let mut err = signal_sq;

        while support.len() < max_atoms && err > eps {
            let mut best = usize::MAX;
            let mut best_abs = floor;
            for (k, &c) in corr.iter().enumerate() {
                if !selected[k] && c.abs() > best_abs {
                    best_abs = c.abs();
                    best = k;
                }
            }
            if best == usize::MAX {
                break;
            }

            // extend the factor with the new atom's Gram column
            let g_row = &self.gram[best * k_total..(best + 1) * k_total];
            let mut w = Vec::with_capacity(support.len() + 1);
            for (i, row) in chol.iter().enumerate() {
                let s: f64 = row[..i].iter().zip(&w).map(|(a, b)| a * b).sum();
                w.push((g_row[support[i]] - s) / row[i]);
            }
            let diag = 1.0 - w.iter().map(|v| v * v).sum::<f64>();
            if diag <= 1e-12 {
                // atom (numerically) in the span of the current support
                selected[best] = true;
                continue;
            }
            w.push(diag.sqrt());
            chol.push(w);
            support.push(best);
            selected[best] = true;

            let rhs: Vec<f64> = support.iter().map(|&k| proj[k]).collect();
            coefs = cholesky_solve(&chol, &rhs);

            // corr = Dᵀx − G_{:,S} c
            for (k, c) in corr.iter_mut().enumerate() {
                let g = &self.gram[k * k_total..(k + 1) * k_total];
                *c = proj[k] - support.iter().zip(&coefs).map(|(&s, &a)| g[s] * a).sum::<f64>();
            }

            residual.copy_from_slice(signal);
            for (&k, &a) in support.iter().zip(&coefs) {
                for (r, d) in residual.iter_mut().zip(self.dict.atom(k)) {
                    *r -= a * d;
                }
            }
            err = dot(&residual, &residual);
        }

        Ok((
            SparseCode {
                support,
                coefs,
            },
            err,
        ))
    }
}

/// Solves L Lᵀ x = b for the packed lower factor `l`.
fn cholesky_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let m = b.len();
    let mut y = vec![0.0; m];
    for i in 0..m {
        let s: f64 = (0..i).map(|t| l[i][t] * y[t]).sum();
        y[i] = (b[i] - s) / l[i][i];
    }
    let mut x = vec![0.0; m];
    for i in (0..m).rev() {
        let s: f64 = (i + 1..m).map(|t| l[t][i] * x[t]).sum();
        x[i] = (y[i] - s) / l[i][i];
    }
    x
}

/// One-off OMP code of `signal`; see [`OmpCoder::encode`].
pub fn omp(dict: &Dictionary, signal: &[f64], max_atoms: usize, eps: f64) -> Result<SparseCode> {
    OmpCoder::new(dict).encode(signal, max_atoms, eps).map(|(c, _)| c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_dict(n: usize, k: usize, seed: u64) -> Dictionary {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..n * k).map(|_| rng.random_range(-1.0..1.0)).collect();
        Dictionary::normalized(n, data).unwrap()
    }

    #[test]
    fn single_atom_signal() {
        let d = random_dict(8, 12, 1);
        let x: Vec<f64> = d.atom(5).iter().map(|v| 3.0 * v).collect();
        let (code, err) = OmpCoder::new(&d).encode(&x, 4, 0.0).unwrap();
        assert_eq!(code.support, vec![5]);
        assert!((code.coefs[0] - 3.0).abs() < 1e-12);
        assert!(err < 1e-20);
    }

    #[test]
    fn orthonormal_dictionary_picks_largest_projections() {
        let n = 4;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        let d = Dictionary::from_columns(n, data).unwrap();
        let x = [0.5, -4.0, 1.0, 3.0];
        let code = omp(&d, &x, 2, 0.0).unwrap();
        assert_eq!(code.support, vec![1, 3]);
        assert_eq!(code.coefs, vec![-4.0, 3.0]);
    }

    #[test]
    fn zero_signal_has_empty_code() {
        let d = random_dict(6, 10, 2);
        let code = omp(&d, &[0.0; 6], 3, 0.0).unwrap();
        assert!(code.is_empty());
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let d = Dictionary::from_columns(2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let code = omp(&d, &[2.0, 2.0], 1, 0.0).unwrap();
        assert_eq!(code.support, vec![0]);
    }

    #[test]
    fn stops_at_error_bound() {
        let d = random_dict(16, 40, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm: f64 = dot(&x, &x);
        let (code, err) = OmpCoder::new(&d).encode(&x, 16, 0.3 * norm).unwrap();
        assert!(err <= 0.3 * norm);
        assert!(code.nnz() < 16);
        // one fewer atom would not have met the bound
        let (short, short_err) = OmpCoder::new(&d).encode(&x, code.nnz() - 1, 0.0).unwrap();
        assert_eq!(short.support[..], code.support[..code.nnz() - 1]);
        assert!(short_err > 0.3 * norm);
    }

    #[test]
    fn residual_orthogonal_to_support() {
        let d = random_dict(16, 48, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let x: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
            let code = omp(&d, &x, 6, 0.0).unwrap();
            assert!(code.nnz() <= 6);
            let approx = d.reconstruct(&code);
            let r: Vec<f64> = x.iter().zip(&approx).map(|(a, b)| a - b).collect();
            for &k in &code.support {
                assert!(dot(d.atom(k), &r).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        let d = random_dict(4, 6, 7);
        assert!(omp(&d, &[1.0, f64::NAN, 0.0, 0.0], 2, 0.0).is_err());
        assert!(omp(&d, &[1.0, 0.0], 2, 0.0).is_err());
    }
}
