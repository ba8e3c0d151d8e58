use serde::{Deserialize, Serialize};

use super::DotsError;

/// Default on-site charging energy, Hz.
pub const DEFAULT_CHARGING_HZ: f64 = 1e9;

/// Two-site Hubbard parameters, all in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HubbardParams {
    pub tunnel_hz: f64,
    pub charging_hz: f64,
    pub detuning_hz: f64,
}

impl HubbardParams {
    pub fn symmetric(tunnel_hz: f64) -> Self {
        Self { tunnel_hz, charging_hz: DEFAULT_CHARGING_HZ, detuning_hz: 0.0 }
    }
}

/// `J = 4 t² U / (U² - Δ²)`, valid for `|Δ| < U`.
pub fn exchange_from_hubbard(p: HubbardParams) -> Result<f64, DotsError> {
    let (t, u, d) = (p.tunnel_hz, p.charging_hz, p.detuning_hz);
    if !(u > 0.0 && u.is_finite()) {
        return Err(DotsError::Domain(format!("charging energy {u} Hz must be positive")));
    }
    if !t.is_finite() || !d.is_finite() {
        return Err(DotsError::Domain("non-finite Hubbard parameter".into()));
    }
    if d.abs() >= u {
        return Err(DotsError::Domain(format!("|detuning| {} Hz must stay below U = {u} Hz", d.abs())));
    }
    Ok(4.0 * t * t * u / (u * u - d * d))
}
