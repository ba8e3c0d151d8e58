//! Fitting and reporting: damped sinusoids, exponential tunability fits,
//! readout fidelity, and strategy comparison tables.

mod exponential;
mod readout;
mod report;
mod sinusoid;
#[cfg(test)]
mod tests;

use thiserror::Error;

pub use exponential::{fit_exponential, ExponentialFit};
pub use readout::{readout_error_from_snr, readout_fidelity_from_snr, readout_fidelity_scaled};
pub use report::{
    lever_arm_comparison, tunability_report, LeverArmComparison, PairCurve, PairTunability, TunabilityReport,
};
pub use sinusoid::{extract_j_from_dcz, fit_damped_sinusoid, DampedSinusoidFit};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("insufficient span: {0}")]
    InsufficientSpan(String),
    #[error("no spectral peak above the noise floor")]
    NoSpectralPeak,
    #[error("fit did not converge after {iterations} iterations (rms residual {rms:.3e})")]
    NonConvergence { iterations: usize, rms: f64 },
    #[error("non-positive value {value} at v = {v}")]
    NonPositive { v: f64, value: f64 },
    #[error("degenerate abscissae: {0}")]
    Degenerate(String),
    #[error("too few points: need {need}, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("pair `{pair}` has no curve for the {strategy} strategy")]
    MissingStrategy { pair: String, strategy: String },
    #[error("lever-arm ratio {index} is zero")]
    ZeroLeverRatio { index: usize },
    #[error("input lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("snr must be positive, got {0}")]
    InvalidSnr(f64),
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
}
