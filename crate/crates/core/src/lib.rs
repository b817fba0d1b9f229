//! Parallel-beam tomographic reconstruction for limited tilt ranges.
//!
//! The crate covers the whole pipeline used to compare reconstruction methods
//! on missing-wedge data:
//!
//! - [`geometry`]: equally-angled and equally-sloped tilt schemes.
//! - [`projector`]: exact ray/pixel intersection system matrix, forward and
//!   back projection.
//! - [`phantom`]: Gaussian "atom" phantoms and tilt-series simulation.
//! - [`sart`]: ordered-subset SART.
//! - [`sparse`]: patch operators, orthogonal matching pursuit and K-SVD.
//! - [`adsir`]: adaptive dictionary-based statistical iterative reconstruction.
//! - [`metrics`]: RMSE and SSIM.
//! - [`harness`]: experiment orchestration and reporting.
//! - [`io`]: float rasters with text headers, angle files, CSV traces.

pub mod adsir;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod metrics;
pub mod phantom;
pub mod projector;
pub mod sart;
pub mod sparse;

pub use error::{Error, Result};
pub use geometry::{AcquisitionMode, AngleSet};
pub use projector::{Detector, GridSpec, ImageGrid, Projector, Sinogram, SparseRow};
