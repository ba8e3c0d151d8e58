use std::f64::consts::SQRT_2;

use libm::erfc;

use super::CalibrationError;

/// Assignment fidelity for two equal-width Gaussians separated by `snr` widths,
/// thresholded at the midpoint: `F = 1 - erfc(snr / (2√2)) / 2`.
pub fn readout_fidelity_from_snr(snr: f64) -> Result<f64, CalibrationError> {
    if !(snr > 0.0) || snr.is_nan() {
        return Err(CalibrationError::InvalidSnr(snr));
    }
    Ok(readout_fidelity_scaled(snr, 1.0))
}

/// `1 - F`, evaluated from the tail directly so it keeps full relative precision.
pub fn readout_error_from_snr(snr: f64) -> Result<f64, CalibrationError> {
    if !(snr > 0.0) || snr.is_nan() {
        return Err(CalibrationError::InvalidSnr(snr));
    }
    Ok(0.5 * erfc(snr / (2.0 * SQRT_2)))
}

/// Fidelity with the separation taken as `scale * snr` widths.
pub fn readout_fidelity_scaled(snr: f64, scale: f64) -> f64 {
    1.0 - 0.5 * erfc(scale * snr / (2.0 * SQRT_2))
}
