use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Matrix5, Vector3, Vector5};
use serde::Serialize;

use super::CalibrationError;

const MAX_ITERATIONS: usize = 200;
const STEP_TOLERANCE: f64 = 1e-9;
const ZERO_PAD: usize = 8;
/// Peak power must exceed this multiple of the mean periodogram power.
const PEAK_FACTOR: f64 = 3.0;

/// `offset + amplitude * exp(-t / decay_time) * cos(2π frequency t + phase)`
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DampedSinusoidFit {
    pub amplitude: f64,
    pub frequency: f64,
    /// Infinite when no decay is resolved.
    pub decay_time: f64,
    pub phase: f64,
    pub offset: f64,
    pub residual_rms: f64,
    /// RMS residual of the starting point built from the periodogram peak.
    pub initial_rms: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl DampedSinusoidFit {
    pub fn eval(&self, t: f64) -> f64 {
        let gamma = if self.decay_time.is_finite() { 1.0 / self.decay_time } else { 0.0 };
        self.offset + self.amplitude * (-gamma * t).exp() * (TAU * self.frequency * t + self.phase).cos()
    }
}

/// Exchange strength from a decoupled-CZ fit: the trace oscillates at `J/2`.
pub fn extract_j_from_dcz(fit: &DampedSinusoidFit) -> f64 {
    2.0 * fit.frequency
}

// p = [offset, amplitude, gamma, frequency, phase]
fn model(p: &Vector5<f64>, t: f64) -> f64 {
    p[0] + p[1] * (-p[2] * t).exp() * (TAU * p[3] * t + p[4]).cos()
}

fn sse(p: &Vector5<f64>, t: &[f64], y: &[f64]) -> f64 {
    t.iter().zip(y).map(|(&ti, &yi)| (yi - model(p, ti)).powi(2)).sum()
}

/// Offset, amplitude and phase at fixed frequency and decay by linear least squares.
fn linear_part(t: &[f64], y: &[f64], f: f64, gamma: f64) -> Option<Vector5<f64>> {
    let mut ata = Matrix3::zeros();
    let mut aty = Vector3::zeros();
    for (&ti, &yi) in t.iter().zip(y) {
        let e = (-gamma * ti).exp();
        let row = Vector3::new(1.0, e * (TAU * f * ti).cos(), e * (TAU * f * ti).sin());
        ata += row * row.transpose();
        aty += row * yi;
    }
    let s = ata.cholesky()?.solve(&aty);
    // c cos(x) + d sin(x) = A cos(x + φ) with A cos φ = c, A sin φ = -d
    let amp = s[1].hypot(s[2]);
    let phase = (-s[2]).atan2(s[1]);
    Some(Vector5::new(s[0], amp, gamma, f, phase))
}

fn periodogram_peak(t: &[f64], y: &[f64], span: f64) -> Result<f64, CalibrationError> {
    let n = t.len();
    let mean = y.iter().sum::<f64>() / n as f64;
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if y.iter().all(|v| (v - mean).abs() <= 64.0 * f64::EPSILON * scale) {
        return Err(CalibrationError::NoSpectralPeak);
    }
    let dt_min = t.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let nyquist = 0.5 / dt_min;
    let df = 1.0 / (ZERO_PAD as f64 * span);
    let kmax = ((nyquist / df).floor() as usize).max(2);
    let power: Vec<f64> = (0..=kmax)
        .map(|k| {
            let f = k as f64 * df;
            let (mut re, mut im) = (0.0, 0.0);
            for (&ti, &yi) in t.iter().zip(y) {
                let (s, c) = (TAU * f * ti).sin_cos();
                re += (yi - mean) * c;
                im -= (yi - mean) * s;
            }
            re * re + im * im
        })
        .collect();
    // Skip the zero-frequency lobe left by a slowly varying baseline.
    let start = ZERO_PAD.min(kmax - 1).max(1);
    let (k, &peak) = power[start..kmax]
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, p)| (i + start, p))
        .ok_or(CalibrationError::NoSpectralPeak)?;
    let mean_power = power[1..].iter().sum::<f64>() / (power.len() - 1) as f64;
    if !(peak > 0.0) || peak < PEAK_FACTOR * mean_power {
        return Err(CalibrationError::NoSpectralPeak);
    }
    let (a, b, c) = (power[k - 1], power[k], power[k + 1]);
    let denom = a - 2.0 * b + c;
    let shift = if denom != 0.0 { (0.5 * (a - c) / denom).clamp(-0.5, 0.5) } else { 0.0 };
    Ok((k as f64 + shift) * df)
}

/// Fit a damped sinusoid to `(t, y)` samples (t ascending).
///
/// The frequency starts at the zero-padded periodogram peak; offset, amplitude,
/// phase and decay are then seeded by linear fits and all five parameters are
/// refined by Levenberg-Marquardt.
pub fn fit_damped_sinusoid(t: &[f64], y: &[f64]) -> Result<DampedSinusoidFit, CalibrationError> {
    if t.len() != y.len() {
        return Err(CalibrationError::LengthMismatch(t.len(), y.len()));
    }
    if let Some(i) = t.iter().zip(y).position(|(a, b)| !(a.is_finite() && b.is_finite())) {
        return Err(CalibrationError::NonFinite(i));
    }
    let n = t.len();
    if n < 8 {
        return Err(CalibrationError::InsufficientSpan(format!("{n} samples, need at least 8")));
    }
    if t.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CalibrationError::Degenerate("sample times must be strictly increasing".into()));
    }
    let span = t[n - 1] - t[0];
    let f0 = periodogram_peak(t, y, span)?;
    if f0 * span < 1.5 {
        return Err(CalibrationError::InsufficientSpan(format!(
            "{:.3} periods covered, need at least 1.5",
            f0 * span
        )));
    }

    let mut start: Option<(Vector5<f64>, f64)> = None;
    for g in [0.0, 0.25, 0.5, 1.0, 2.0, 4.0] {
        if let Some(p) = linear_part(t, y, f0, g / span) {
            let e = sse(&p, t, y);
            if start.as_ref().map_or(true, |(_, best)| e < *best) {
                start = Some((p, e));
            }
        }
    }
    let (mut p, mut err) = start.ok_or(CalibrationError::NoSpectralPeak)?;
    let initial_rms = (err / n as f64).sqrt();

    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut jtj = Matrix5::zeros();
        let mut jtr = Vector5::zeros();
        for (&ti, &yi) in t.iter().zip(y) {
            let e = (-p[2] * ti).exp();
            let arg = TAU * p[3] * ti + p[4];
            let (s, c) = arg.sin_cos();
            let g = Vector5::new(1.0, e * c, -ti * p[1] * e * c, -TAU * ti * p[1] * e * s, -p[1] * e * s);
            jtj += g * g.transpose();
            jtr += g * (yi - model(&p, ti));
        }
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj;
            for k in 0..5 {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&jtr);
            let mut trial = p + step;
            trial[2] = trial[2].max(0.0);
            let e = sse(&trial, t, y);
            if e.is_finite() && e <= err {
                let scale = Vector5::new(
                    p[0].abs().max(p[1].abs()),
                    p[1].abs(),
                    p[2].abs().max(1.0 / span),
                    p[3].abs(),
                    1.0,
                );
                let rel = (0..5).map(|k| ((trial[k] - p[k]) / scale[k].max(1e-300)).abs()).fold(0.0, f64::max);
                p = trial;
                err = e;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if rel < STEP_TOLERANCE {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            // No downhill step at any damping: we sit at a minimum.
            converged = true;
        }
        if converged {
            break;
        }
    }

    if !err.is_finite() {
        return Err(CalibrationError::NonConvergence { iterations, rms: f64::NAN });
    }
    let (mut amplitude, mut frequency, mut phase) = (p[1], p[3], p[4]);
    if frequency < 0.0 {
        frequency = -frequency;
        phase = -phase;
    }
    if amplitude < 0.0 {
        amplitude = -amplitude;
        phase += PI;
    }
    phase = (phase + PI).rem_euclid(TAU) - PI;
    Ok(DampedSinusoidFit {
        amplitude,
        frequency,
        decay_time: if p[2] > 0.0 { 1.0 / p[2] } else { f64::INFINITY },
        phase,
        offset: p[0],
        residual_rms: (err / n as f64).sqrt(),
        initial_rms,
        iterations,
        converged,
    })
}
