use thiserror::Error;

/// Failure modes shared by every module.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not Hermitian: max |A_ij - conj(A_ji)| = {defect:.3e} (norm {norm:.3e})")]
    NotHermitian { defect: f64, norm: f64 },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("ODE step size underflow at t = {time}")]
    StepUnderflow { time: f64 },

    #[error("spectral gap closes at xi = ({xi1}, {xi2}): min |E| = {min_abs:.3e}")]
    GapClosure { xi1: f64, xi2: f64, min_abs: f64 },

    #[error("branch tracking ambiguous near xi_x = {xi_x} (best overlap {overlap:.3}); refine the xi_x grid")]
    TrackingAmbiguity { xi_x: f64, overlap: f64 },

    #[error("energy window {e_win} exceeds the bulk gap half-width {bulk_gap}")]
    WindowOutsideGap { e_win: f64, bulk_gap: f64 },

    #[error("topologically degenerate drive: {0}")]
    DegenerateDrive(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// True for failures of the numerics themselves (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        !matches!(self, Error::InvalidInput(_) | Error::WindowOutsideGap { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
