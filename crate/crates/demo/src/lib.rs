//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Each operation has a plain Rust form returning `Result<_, String>` and a
//! thin `#[wasm_bindgen]` wrapper that turns the error into a JS exception.

use wasm_bindgen::prelude::*;

use dotlab::calibration::{extract_j_from_dcz, fit_damped_sinusoid, fit_exponential};
use dotlab::spin::{
    branch_frequencies, find_branches, simulate_dcz, simulate_exchange_spectroscopy, DczOptions, ExchangeModel,
    SpectroscopyOptions, SpinSystem,
};

const MHZ: f64 = 1e6;

/// Exchange law used by the demo pair: 10 kHz at zero amplitude, 30 e-folds per volt.
fn demo_pair(gradient_mhz: f64, rabi_mhz: f64) -> Result<SpinSystem, String> {
    if !(gradient_mhz > 0.0 && rabi_mhz > 0.0) {
        return Err("gradient and Rabi frequency must be positive".into());
    }
    Ok(SpinSystem::pair(gradient_mhz * MHZ, 1e4, 30.0, rabi_mhz * MHZ))
}

#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct DczTrace {
    tau_us: Vec<f64>,
    p_odd: Vec<f64>,
    fitted_j_mhz: f64,
}

#[wasm_bindgen]
impl DczTrace {
    #[wasm_bindgen(getter)]
    pub fn tau_us(&self) -> Vec<f64> {
        self.tau_us.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn p_odd(&self) -> Vec<f64> {
        self.p_odd.clone()
    }

    /// NaN when the fit failed.
    #[wasm_bindgen(getter)]
    pub fn fitted_j_mhz(&self) -> f64 {
        self.fitted_j_mhz
    }
}

pub fn dcz_trace(j_mhz: f64, gradient_mhz: f64, heisenberg: bool, tmax_us: f64, points: usize) -> Result<DczTrace, String> {
    if !(j_mhz > 0.0 && tmax_us > 0.0) || points < 8 {
        return Err("need J > 0, tmax > 0 and at least 8 points".into());
    }
    let system = demo_pair(gradient_mhz, 1.0)?;
    let v = system.exchange[0].amplitude_for(j_mhz * MHZ);
    let tau: Vec<f64> = (0..points).map(|k| k as f64 * tmax_us * 1e-6 / points as f64).collect();
    let exchange = if heisenberg { ExchangeModel::Heisenberg } else { ExchangeModel::Secular };
    let p = simulate_dcz(&system, 0, 1, v, &tau, &DczOptions { exchange, ..Default::default() }).map_err(|e| e.to_string())?;
    let fitted_j_mhz = fit_damped_sinusoid(&tau, &p).map(|f| extract_j_from_dcz(&f) / MHZ).unwrap_or(f64::NAN);
    Ok(DczTrace { tau_us: tau.iter().map(|t| t * 1e6).collect(), p_odd: p, fitted_j_mhz })
}

/// Decoupled-CZ trace for exchange `j_mhz`, sampled at `points` steps up to `tmax_us`.
#[wasm_bindgen(js_name = dczTrace)]
pub fn dcz_trace_js(j_mhz: f64, gradient_mhz: f64, heisenberg: bool, tmax_us: f64, points: usize) -> Result<DczTrace, JsError> {
    dcz_trace(j_mhz, gradient_mhz, heisenberg, tmax_us, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Spectrum {
    offset_mhz: Vec<f64>,
    p_up: Vec<f64>,
    branches_mhz: Vec<f64>,
    peaks_mhz: Vec<f64>,
}

#[wasm_bindgen]
impl Spectrum {
    /// Drive frequency relative to the target's bare Larmor frequency.
    #[wasm_bindgen(getter)]
    pub fn offset_mhz(&self) -> Vec<f64> {
        self.offset_mhz.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn p_up(&self) -> Vec<f64> {
        self.p_up.clone()
    }

    /// Exact resonances for control down and control up.
    #[wasm_bindgen(getter)]
    pub fn branches_mhz(&self) -> Vec<f64> {
        self.branches_mhz.clone()
    }

    /// Peaks found in the simulated line, strongest first.
    #[wasm_bindgen(getter)]
    pub fn peaks_mhz(&self) -> Vec<f64> {
        self.peaks_mhz.clone()
    }
}

pub fn spectrum(j_mhz: f64, gradient_mhz: f64, rabi_mhz: f64, points: usize) -> Result<Spectrum, String> {
    if !(j_mhz >= 0.0) || points < 3 {
        return Err("need J >= 0 and at least 3 points".into());
    }
    let system = demo_pair(gradient_mhz, rabi_mhz)?;
    let v = if j_mhz > 0.0 { system.exchange[0].amplitude_for(j_mhz * MHZ) } else { -1.0 };
    let (down, up) = branch_frequencies(&system, 0, 1, v).map_err(|e| e.to_string())?;
    let pad = 5.0 * rabi_mhz * MHZ;
    let (lo, hi) = (down.min(up) - pad, down.max(up) + pad);
    let f: Vec<f64> = (0..points).map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64).collect();
    let map = simulate_exchange_spectroscopy(&system, 0, 1, &f, &[v], &SpectroscopyOptions::default())
        .map_err(|e| e.to_string())?;
    let bare = system.qubits[1].larmor_hz;
    let rel = |x: &f64| (x - bare) / MHZ;
    Ok(Spectrum {
        offset_mhz: f.iter().map(rel).collect(),
        peaks_mhz: find_branches(&f, &map.p[0]).iter().map(rel).collect(),
        p_up: map.p.into_iter().next().unwrap_or_default(),
        branches_mhz: vec![rel(&down), rel(&up)],
    })
}

/// Target flip probability around both exchange-split resonances.
#[wasm_bindgen(js_name = spectrum)]
pub fn spectrum_js(j_mhz: f64, gradient_mhz: f64, rabi_mhz: f64, points: usize) -> Result<Spectrum, JsError> {
    spectrum(j_mhz, gradient_mhz, rabi_mhz, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tunability {
    pub decades_per_volt: f64,
    pub a_hz: f64,
    pub points: usize,
}

/// Fit `J = A·10^(T·v)` to lines of `v, J` (volts, Hz); `#` starts a comment.
pub fn tunability(text: &str) -> Result<Tunability, String> {
    let mut pts = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut cols = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty());
        let mut num = || -> Result<f64, String> {
            cols.next()
                .ok_or_else(|| format!("line {}: expected two numbers", i + 1))?
                .parse::<f64>()
                .map_err(|e| format!("line {}: {e}", i + 1))
        };
        pts.push((num()?, num()?));
    }
    let fit = fit_exponential(&pts, None).map_err(|e| e.to_string())?;
    Ok(Tunability { decades_per_volt: fit.tunability_dec_per_v, a_hz: fit.a_hz, points: fit.n_points })
}

#[wasm_bindgen(js_name = tunability)]
pub fn tunability_js(text: &str) -> Result<Tunability, JsError> {
    tunability(text).map_err(|e| JsError::new(&e))
}
