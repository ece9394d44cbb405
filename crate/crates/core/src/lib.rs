//! Input-output hierarchical equations of motion for a qubit coupled to a
//! one-dimensional waveguide.

pub mod bath;
pub mod error;
pub mod fitting;
pub mod hierarchy;
pub mod io;
pub mod mat2;
pub mod ode;
pub mod polaron;
pub mod quad;
pub mod runner;
pub mod scalar;
pub mod special;

pub use error::{Error, Result};
pub use mat2::Mat2;
pub use scalar::{Cplx, Real};

/// Spectral density family in double precision.
pub type SpectralDensity = bath::SpectralDensityModel<f64>;
/// Multi-exponential kernel fit in double precision.
pub type KernelFit = fitting::ExponentialFit<f64>;
pub type Generator = hierarchy::HeomGenerator<f64>;
pub type OutputField = io::OutputFieldPair<f64>;
pub type Polaron = polaron::PolaronSolution<f64>;
pub type Complex = Cplx<f64>;
pub type Matrix = Mat2<f64>;
