//! Numerical toolkit for periodically driven two-dimensional Dirac operators.
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg`]: dense complex matrices, Hermitian eigensolvers, matrix
//!   exponentials and an adaptive Runge–Kutta propagator.
//! * [`replica`]: the truncated replica (Floquet–Sambe) Bloch Hamiltonians,
//!   the effective two-band model and gap diagnostics.
//! * [`invariants`]: Kubo Berry-curvature integrand and the bulk-difference
//!   invariants obtained from it.
//! * [`ribbon`]: a periodic strip with two mass interfaces, its edge spectrum
//!   and the spectral-flow interface conductivity.
//! * [`evolution`]: exact and truncated propagators and the error-scaling
//!   experiments built on them.
//! * [`averaging`]: the high-frequency averaging construction for a strongly
//!   driven Dirac operator.

pub mod averaging;
pub mod error;
pub mod evolution;
pub mod invariants;
pub mod linalg;
pub mod numeric;
pub mod replica;
pub mod ribbon;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, EigenSystem, C64};
