//! Patch-based sparse representation: patch extraction and scatter, sparse
//! coding by orthogonal matching pursuit, and K-SVD dictionary training.

mod dictionary;
mod ksvd;
mod omp;
mod patches;

pub use dictionary::{Dictionary, SparseCode};
pub use ksvd::{initial_dictionary, train_dictionary, train_dictionary_traced, KsvdOutput};
pub use omp::{omp, OmpCoder};
pub use patches::{extract_patches, patch_adjoint_accumulate, patch_counts, PatchSet};

/// Representation error bound ε for a patch x.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorBound {
    /// ‖x − Dα‖² ≤ ε
    Absolute(f64),
    /// ‖x − Dα‖² ≤ ε · ‖x‖²
    Relative(f64),
}

impl ErrorBound {
    pub fn for_signal(&self, norm_sq: f64) -> f64 {
        match *self {
            ErrorBound::Absolute(e) => e,
            ErrorBound::Relative(e) => e * norm_sq,
        }
    }

    pub fn value(&self) -> f64 {
        match *self {
            ErrorBound::Absolute(e) | ErrorBound::Relative(e) => e,
        }
    }
}
