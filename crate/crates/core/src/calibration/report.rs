use serde::{Deserialize, Serialize};

use super::{fit_exponential, CalibrationError, ExponentialFit};
use crate::device::TuningStrategy;

/// Measured `(v, J)` points for one qubit pair under one strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct PairCurve {
    pub pair: String,
    pub strategy: TuningStrategy,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTunability {
    pub pair: String,
    pub conventional: ExponentialFit,
    pub interchanged: ExponentialFit,
    /// interchanged / conventional tunability
    pub ratio: f64,
    /// Set when the interchanged tunability does not exceed the conventional one.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunabilityReport {
    pub pairs: Vec<PairTunability>,
}

impl TunabilityReport {
    pub fn ratios(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.ratio).collect()
    }

    pub fn flagged(&self) -> Vec<&str> {
        self.pairs.iter().filter(|p| p.flagged).map(|p| p.pair.as_str()).collect()
    }

    pub fn to_table(&self) -> String {
        let mut out = format!("{:<10} {:>14} {:>14} {:>8}  flag\n", "pair", "conv (dec/V)", "inter (dec/V)", "ratio");
        for p in &self.pairs {
            out.push_str(&format!(
                "{:<10} {:>14.4} {:>14.4} {:>8.4}  {}\n",
                p.pair,
                p.conventional.tunability_dec_per_v,
                p.interchanged.tunability_dec_per_v,
                p.ratio,
                if p.flagged { "!" } else { "" }
            ));
        }
        out
    }
}

/// Fit every pair under both strategies; pairs appear in order of first mention.
pub fn tunability_report(curves: &[PairCurve], window: Option<(f64, f64)>) -> Result<TunabilityReport, CalibrationError> {
    let mut names: Vec<&str> = Vec::new();
    for c in curves {
        if !names.contains(&c.pair.as_str()) {
            names.push(&c.pair);
        }
    }
    let mut pairs = Vec::new();
    for name in names {
        let fit = |s: TuningStrategy| -> Result<ExponentialFit, CalibrationError> {
            let c = curves.iter().find(|c| c.pair == name && c.strategy == s).ok_or_else(|| {
                CalibrationError::MissingStrategy { pair: name.to_string(), strategy: s.to_string() }
            })?;
            fit_exponential(&c.points, window)
        };
        let conventional = fit(TuningStrategy::Conventional)?;
        let interchanged = fit(TuningStrategy::Interchanged)?;
        let ratio = interchanged.tunability_dec_per_v / conventional.tunability_dec_per_v;
        let flagged = interchanged.tunability_dec_per_v <= conventional.tunability_dec_per_v;
        pairs.push(PairTunability { pair: name.to_string(), conventional, interchanged, ratio, flagged });
    }
    Ok(TunabilityReport { pairs })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeverArmComparison {
    pub lever_ratios: Vec<f64>,
    pub tunability_ratios: Vec<f64>,
    /// tunability ratio / lever-arm ratio
    pub excess: Vec<f64>,
    /// Set where the excess exceeds 1.
    pub exceeds: Vec<bool>,
}

impl LeverArmComparison {
    pub fn to_table(&self, labels: &[String]) -> String {
        let mut out = format!("{:<10} {:>10} {:>12} {:>8}\n", "pair", "lever", "tunability", "excess");
        for (i, e) in self.excess.iter().enumerate() {
            let label = labels.get(i).cloned().unwrap_or_else(|| format!("#{}", i + 1));
            out.push_str(&format!(
                "{:<10} {:>10.4} {:>12.4} {:>8.4}{}\n",
                label,
                self.lever_ratios[i],
                self.tunability_ratios[i],
                e,
                if self.exceeds[i] { "  >1" } else { "" }
            ));
        }
        out
    }
}

pub fn lever_arm_comparison(lever_ratios: &[f64], tunability_ratios: &[f64]) -> Result<LeverArmComparison, CalibrationError> {
    if lever_ratios.len() != tunability_ratios.len() {
        return Err(CalibrationError::LengthMismatch(lever_ratios.len(), tunability_ratios.len()));
    }
    if let Some(index) = lever_ratios.iter().position(|r| *r == 0.0) {
        return Err(CalibrationError::ZeroLeverRatio { index });
    }
    let excess: Vec<f64> = tunability_ratios.iter().zip(lever_ratios).map(|(t, l)| t / l).collect();
    Ok(LeverArmComparison {
        lever_ratios: lever_ratios.to_vec(),
        tunability_ratios: tunability_ratios.to_vec(),
        exceeds: excess.iter().map(|e| *e > 1.0).collect(),
        excess,
    })
}
