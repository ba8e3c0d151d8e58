use std::f64::consts::{LN_10, TAU};

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::*;
use crate::device::TuningStrategy;

fn damped(f: f64, tau: f64, phase: f64) -> (Vec<f64>, Vec<f64>) {
    let t: Vec<f64> = (0..=160).map(|k| k as f64 * 25e-9).collect();
    let y = t.iter().map(|&x| 0.5 + 0.4 * (-x / tau).exp() * (TAU * f * x + phase).cos()).collect();
    (t, y)
}

/// Exact samples of `a exp(ln(10) * dec * v)`.
fn decades(a: f64, dec: f64, v: &[f64]) -> Vec<(f64, f64)> {
    v.iter().map(|&x| (x, a * (LN_10 * dec * x).exp())).collect()
}

fn round(x: f64, digits: i32) -> f64 {
    let s = 10f64.powi(digits);
    (x * s).round() / s
}

#[test]
fn noiseless_sinusoid_recovers_frequency() {
    let (t, y) = damped(2e6, 2e-6, 0.3);
    let fit = fit_damped_sinusoid(&t, &y).unwrap();
    assert!((fit.frequency - 2e6).abs() / 2e6 < 1e-4, "{}", fit.frequency);
    assert!((fit.decay_time - 2e-6).abs() / 2e-6 < 1e-4);
    assert!((fit.amplitude - 0.4).abs() < 1e-6 && (fit.offset - 0.5).abs() < 1e-6);
    assert!((fit.phase - 0.3).abs() < 1e-5);
    assert!(fit.converged && fit.residual_rms < 1e-8);
    assert!((extract_j_from_dcz(&fit) - 4e6).abs() / 4e6 < 1e-4);
}

#[test]
fn undamped_sinusoid_reports_infinite_decay() {
    let t: Vec<f64> = (0..=160).map(|k| k as f64 * 25e-9).collect();
    let y: Vec<f64> = t.iter().map(|&x| 0.5 - 0.5 * (TAU * 1.3e6 * x).cos()).collect();
    let fit = fit_damped_sinusoid(&t, &y).unwrap();
    assert!((fit.frequency - 1.3e6).abs() / 1.3e6 < 1e-6);
    assert!(fit.decay_time > 1e-3);
}

#[test]
fn sinusoid_fit_errors() {
    let t: Vec<f64> = (0..100).map(|k| k as f64 * 1e-8).collect();
    assert_eq!(fit_damped_sinusoid(&t, &vec![0.3; 100]).unwrap_err(), CalibrationError::NoSpectralPeak);
    // one period over the window
    let y: Vec<f64> = t.iter().map(|&x| (TAU * 1.0e6 * x).cos()).collect();
    assert!(matches!(fit_damped_sinusoid(&t, &y), Err(CalibrationError::InsufficientSpan(_))));
    assert!(matches!(fit_damped_sinusoid(&t[..7], &y[..7]), Err(CalibrationError::InsufficientSpan(_))));
    assert_eq!(fit_damped_sinusoid(&t, &y[..50]).unwrap_err(), CalibrationError::LengthMismatch(100, 50));
    let mut bad = y.clone();
    bad[4] = f64::NAN;
    assert_eq!(fit_damped_sinusoid(&t, &bad).unwrap_err(), CalibrationError::NonFinite(4));
}

#[test]
fn noisy_sinusoid_fits_mostly_within_one_percent() {
    let (t, clean) = damped(2e6, 2e-6, 0.0);
    let noise = Normal::new(0.0, 0.05).unwrap();
    let hits = (0..100u64)
        .filter(|&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let y: Vec<f64> = clean.iter().map(|c| c + noise.sample(&mut rng)).collect();
            fit_damped_sinusoid(&t, &y).is_ok_and(|f| (f.frequency - 2e6).abs() / 2e6 < 0.01)
        })
        .count();
    assert!(hits >= 95, "{hits}/100");
}

#[test]
fn j_from_zero_frequency_is_zero() {
    let (t, y) = damped(2e6, 2e-6, 0.0);
    let fit = DampedSinusoidFit { frequency: 0.0, ..fit_damped_sinusoid(&t, &y).unwrap() };
    assert_eq!(extract_j_from_dcz(&fit), 0.0);
}

#[test]
fn exponential_fit_examples() {
    let v: Vec<f64> = (0..=12).map(|k| 0.02 * k as f64).collect();
    let fit = fit_exponential(&decades(1e5, 16.6, &v), None).unwrap();
    assert!((fit.tunability_dec_per_v - 16.6).abs() < 1e-9, "{}", fit.tunability_dec_per_v);
    assert!((fit.ln_a - 1e5f64.ln()).abs() < 1e-9);
    assert_eq!(fit.tunability_dec_per_v, fit.b_per_v / LN_10);
    assert_eq!(fit.n_points, 13);

    let flat = fit_exponential(&[(0.0, 3e6), (0.1, 3e6), (0.2, 3e6)], None).unwrap();
    assert!(flat.b_per_v.abs() < 1e-12 && flat.tunability_dec_per_v.abs() < 1e-12);

    let two = fit_exponential(&[(0.0, 1e6), (0.1, 10e6)], None).unwrap();
    assert!((two.tunability_dec_per_v - 10.0).abs() < 1e-12);
    assert!(two.covariance.is_none());
}

#[test]
fn exponential_fit_window_and_errors() {
    let mut pts = decades(1e5, 16.6, &[0.0, 0.05, 0.1, 0.15]);
    pts.push((0.3, 1e9)); // saturated point outside the window
    let fit = fit_exponential(&pts, Some((0.0, 0.2))).unwrap();
    assert_eq!(fit.n_points, 4);
    assert!((fit.tunability_dec_per_v - 16.6).abs() < 1e-9);
    assert!(matches!(fit_exponential(&[(0.0, 1.0), (0.1, 0.0)], None), Err(CalibrationError::NonPositive { .. })));
    assert!(matches!(fit_exponential(&[(0.1, 1.0), (0.1, 2.0), (0.1, 3.0)], None), Err(CalibrationError::Degenerate(_))));
    assert_eq!(fit_exponential(&pts, Some((0.25, 1.0))).unwrap_err(), CalibrationError::TooFewPoints { need: 2, got: 1 });
}

#[test]
fn noisy_exponential_has_positive_variances() {
    let mut pts = decades(1e5, 10.0, &[0.0, 0.05, 0.1, 0.15, 0.2]);
    pts[2].1 *= 1.2;
    let c = fit_exponential(&pts, None).unwrap().covariance.unwrap();
    assert!(c[0][0] > 0.0 && c[1][1] > 0.0 && c[0][1] == c[1][0]);
}

fn report_from_tunabilities(values: &[(&str, f64, f64)]) -> TunabilityReport {
    let v: Vec<f64> = (0..6).map(|k| 0.05 * k as f64).collect();
    let curves: Vec<PairCurve> = values
        .iter()
        .flat_map(|&(pair, inter, conv)| {
            [(TuningStrategy::Interchanged, inter, 1e5), (TuningStrategy::Conventional, conv, 3e5)]
                .map(|(strategy, dec, a)| PairCurve { pair: pair.into(), strategy, points: decades(a, dec, &v) })
        })
        .collect();
    tunability_report(&curves, None).unwrap()
}

const MEASURED: [(&str, f64, f64); 3] = [("Q1-Q2", 16.6, 7.25), ("Q2-Q3", 11.4, 3.87), ("Q3-Q4", 15.4, 4.32)];

#[test]
fn measured_tunabilities_give_reported_ratios() {
    let report = report_from_tunabilities(&MEASURED);
    let ratios: Vec<f64> = report.ratios().iter().map(|r| round(*r, 2)).collect();
    assert_eq!(ratios, vec![2.29, 2.95, 3.56]);
    for (p, (_, inter, conv)) in report.pairs.iter().zip(MEASURED) {
        assert!((p.ratio - inter / conv).abs() < 1e-9);
    }
    assert!(report.flagged().is_empty());
    let table = report.to_table();
    assert!(table.contains("Q2-Q3") && table.lines().count() == 4);
}

#[test]
fn identical_strategies_are_flagged() {
    let report = report_from_tunabilities(&[("A", 5.0, 5.0)]);
    assert!((report.ratios()[0] - 1.0).abs() < 1e-9);
    assert_eq!(report.flagged(), vec!["A"]);
}

#[test]
fn report_requires_both_strategies() {
    let curve = PairCurve { pair: "A".into(), strategy: TuningStrategy::Interchanged, points: decades(1e5, 5.0, &[0.0, 0.1, 0.2]) };
    assert!(matches!(tunability_report(&[curve], None), Err(CalibrationError::MissingStrategy { .. })));
}

#[test]
fn lever_arm_excess_matches_quotients() {
    let cmp = lever_arm_comparison(&[1.75, 3.18, 2.71], &[2.29, 2.95, 3.56]).unwrap();
    let excess: Vec<f64> = cmp.excess.iter().map(|e| round(*e, 3)).collect();
    assert_eq!(excess, vec![1.309, 0.928, 1.314]);
    assert_eq!(cmp.exceeds, vec![true, false, true]);

    let same = lever_arm_comparison(&[1.5, 2.0], &[1.5, 2.0]).unwrap();
    assert!(same.excess.iter().all(|e| *e == 1.0));
    assert_eq!(lever_arm_comparison(&[1.0, 0.0], &[1.0, 1.0]).unwrap_err(), CalibrationError::ZeroLeverRatio { index: 1 });
    assert_eq!(lever_arm_comparison(&[1.0], &[1.0, 1.0]).unwrap_err(), CalibrationError::LengthMismatch(1, 2));
    assert!(cmp.to_table(&["Q1-Q2".into()]).contains("#2"));
}

// Gaussian-tail integrals at 40 digits (mpmath quad of the unit normal density above snr/2).
const TAIL: [(f64, f64); 5] = [
    (10.6, 5.7901340399645884827e-8),
    (13.9, 1.8264310619769633628e-12),
    (6.54, 0.00053773742182969502125),
    (7.48, 0.000092010127474105513828),
    (4.97, 0.0064775717318678491336),
];

#[test]
fn readout_fidelity_matches_tail_integrals() {
    assert!(readout_fidelity_from_snr(10.6).unwrap() > 0.999);
    for (snr, tail) in TAIL {
        let err = readout_error_from_snr(snr).unwrap();
        assert!((err - tail).abs() / tail < 1e-12, "snr {snr}: {err} vs {tail}");
        let f = readout_fidelity_from_snr(snr).unwrap();
        assert!((f - (1.0 - tail)).abs() < 1e-15);
    }
    let mut sorted = TAIL.map(|(s, _)| s);
    sorted.sort_by(f64::total_cmp);
    let f: Vec<f64> = sorted.iter().map(|&s| readout_fidelity_from_snr(s).unwrap()).collect();
    assert!(f.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn readout_fidelity_limits_and_errors() {
    assert!((readout_fidelity_from_snr(1e-9).unwrap() - 0.5).abs() < 1e-9);
    assert_eq!(readout_fidelity_from_snr(40.0).unwrap(), 1.0);
    for bad in [0.0, -1.0, f64::NAN] {
        assert!(readout_fidelity_from_snr(bad).is_err() && readout_error_from_snr(bad).is_err());
    }
    assert_eq!(readout_fidelity_scaled(5.0, 2.0), readout_fidelity_from_snr(10.0).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exponential_fit_is_exact(ln_a in 0.0f64..20.0, b in -60.0f64..60.0, v0 in -0.5f64..0.5, step in 0.01f64..0.1) {
        let pts: Vec<(f64, f64)> = (0..7).map(|k| { let v = v0 + step * k as f64; (v, (ln_a + b * v).exp()) }).collect();
        let fit = fit_exponential(&pts, None).unwrap();
        prop_assert!((fit.b_per_v - b).abs() < 1e-9 * b.abs().max(1.0));
        prop_assert!((fit.ln_a - ln_a).abs() < 1e-9 * ln_a.abs().max(1.0));
    }

    #[test]
    fn report_ratios_ignore_curve_scaling(inter in 1.0f64..20.0, conv in 1.0f64..20.0, k1 in 1e-3f64..1e3, k2 in 1e-3f64..1e3) {
        let v: Vec<f64> = (0..5).map(|k| 0.05 * k as f64).collect();
        let build = |ki: f64, kc: f64| vec![
            PairCurve { pair: "P".into(), strategy: TuningStrategy::Interchanged, points: decades(ki, inter, &v) },
            PairCurve { pair: "P".into(), strategy: TuningStrategy::Conventional, points: decades(kc, conv, &v) },
        ];
        let a = tunability_report(&build(1.0, 1.0), None).unwrap().ratios()[0];
        let b = tunability_report(&build(k1, k2), None).unwrap().ratios()[0];
        prop_assert!((a - b).abs() < 1e-9 * a);
    }

    #[test]
    fn readout_fidelity_increasing_and_complementary(s in 0.01f64..30.0, d in 0.01f64..5.0) {
        let (f, e) = (readout_fidelity_from_snr(s).unwrap(), readout_error_from_snr(s).unwrap());
        prop_assert!((f + e - 1.0).abs() < 1e-15);
        prop_assert!(readout_fidelity_from_snr(s + d).unwrap() >= f);
        prop_assert!(readout_error_from_snr(s + d).unwrap() < e);
    }

    #[test]
    fn refinement_never_worsens(f in 0.8e6f64..3e6, tau in 0.5e-6f64..20e-6, phase in -3.0f64..3.0, seed in 0u64..1000) {
        let (t, clean) = damped(f, tau, phase);
        let noise = Normal::new(0.0, 0.08).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<f64> = clean.iter().map(|c| c + noise.sample(&mut rng)).collect();
        if let Ok(fit) = fit_damped_sinusoid(&t, &y) {
            prop_assert!(fit.residual_rms <= fit.initial_rms);
            prop_assert!(fit.frequency >= 0.0 && fit.decay_time > 0.0 && fit.residual_rms.is_finite());
        }
    }
}
