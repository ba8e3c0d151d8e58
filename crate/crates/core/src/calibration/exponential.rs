use std::f64::consts::LN_10;

use serde::{Deserialize, Serialize};

use super::CalibrationError;

/// `J = A exp(B v)` fitted in log space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentialFit {
    pub a_hz: f64,
    pub ln_a: f64,
    pub b_per_v: f64,
    /// `B / ln 10`
    pub tunability_dec_per_v: f64,
    /// Covariance of `(ln A, B)`; absent for an exact two-point fit.
    pub covariance: Option<[[f64; 2]; 2]>,
    pub n_points: usize,
}

/// Least-squares line through `(v, ln J)`, optionally restricted to `v_min <= v <= v_max`.
pub fn fit_exponential(points: &[(f64, f64)], window: Option<(f64, f64)>) -> Result<ExponentialFit, CalibrationError> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|(v, _)| window.map_or(true, |(lo, hi)| *v >= lo && *v <= hi))
        .collect();
    for (i, &(v, j)) in pts.iter().enumerate() {
        if !(v.is_finite() && j.is_finite()) {
            return Err(CalibrationError::NonFinite(i));
        }
        if j <= 0.0 {
            return Err(CalibrationError::NonPositive { v, value: j });
        }
    }
    let n = pts.len();
    if n < 2 {
        return Err(CalibrationError::TooFewPoints { need: 2, got: n });
    }
    let nf = n as f64;
    let vm = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let ym = pts.iter().map(|p| p.1.ln()).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - vm).powi(2)).sum();
    if pts.iter().all(|p| p.0 == pts[0].0) || sxx <= 0.0 {
        return Err(CalibrationError::Degenerate("all voltages are equal".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - vm) * (p.1.ln() - ym)).sum();
    let b = sxy / sxx;
    let ln_a = ym - b * vm;
    let covariance = (n > 2).then(|| {
        let ssr: f64 = pts.iter().map(|p| (p.1.ln() - ln_a - b * p.0).powi(2)).sum();
        let s2 = ssr / (nf - 2.0);
        let var_b = s2 / sxx;
        let var_a = s2 * (1.0 / nf + vm * vm / sxx);
        let cov = -vm * s2 / sxx;
        [[var_a, cov], [cov, var_b]]
    });
    Ok(ExponentialFit {
        a_hz: ln_a.exp(),
        ln_a,
        b_per_v: b,
        tunability_dec_per_v: b / LN_10,
        covariance,
        n_points: n,
    })
}
