//! Graph approximations of the unit interval and the Sierpiński gasket, and
//! numerical certificates of quasi-unitary equivalence between levels.
//!
//! The pipeline is:
//!
//! 1. [`fractal`] builds the level-`m` weighted graph `V_m` with exact
//!    rational vertex coordinates, conductances and measure weights.
//! 2. [`forms`] assembles the energy form as a pencil `(L, M)` of stiffness
//!    and diagonal mass matrices, together with harmonic extension, Schur
//!    complements and resistance metrics.
//! 3. [`identification`] builds the maps `J`, `J'`, `J¹`, `J'¹` between a
//!    coarse level and a fine level. The fine level stands in for the
//!    continuum space.
//! 4. [`certify`] computes the tight constant of every inequality as a
//!    weighted operator norm and assembles the certificate.
//! 5. [`spectral`] compares resolvents, heat semigroups, spectral projections,
//!    eigenvalues and eigenvectors against the bounds implied by a certificate.
//! 6. [`obstacle`] is a discrete circle with a removed arc and a Neumann
//!    complement, certified with restriction/extension maps.

pub mod certify;
pub mod error;
pub mod fractal;
pub mod forms;
pub mod identification;
pub mod linalg;
pub mod obstacle;
pub mod spectral;

pub use error::{QueError, Result};
pub use fractal::{FractalModel, LevelGraph, ModelKind, Point, Word};
pub use forms::FormPencil;
pub use identification::IdentificationPair;
pub use certify::{Metric, QueCertificate};
pub use spectral::SpectralDecomposition;
