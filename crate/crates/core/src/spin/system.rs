use serde::{Deserialize, Serialize};

use super::SpinError;

pub const MAX_QUBITS: usize = 5;

fn default_rabi() -> f64 {
    2e6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Qubit {
    pub name: String,
    /// Absolute resonance frequency (Hz).
    pub larmor_hz: f64,
    /// Resonance shift per volt of barrier pulse on a pair containing this qubit (Hz/V).
    #[serde(default)]
    pub slope_hz_per_v: f64,
    /// Rabi frequency of the single-qubit drive (Hz).
    #[serde(default = "default_rabi")]
    pub rabi_hz: f64,
}

/// `J(v) = amplitude * exp(rate * v)` for one nearest-neighbour pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExchangeCoupling {
    pub pair: [String; 2],
    /// A (Hz)
    pub amplitude_hz: f64,
    /// B (1/V)
    pub rate_per_v: f64,
    /// Exchange present when no barrier pulse is applied (Hz).
    #[serde(default)]
    pub idle_hz: f64,
}

impl ExchangeCoupling {
    pub fn exchange_hz(&self, amplitude_v: f64) -> f64 {
        self.amplitude_hz * (self.rate_per_v * amplitude_v).exp()
    }

    /// Barrier amplitude at which `J(v)` equals `j_hz`.
    pub fn amplitude_for(&self, j_hz: f64) -> f64 {
        (j_hz / self.amplitude_hz).ln() / self.rate_per_v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinSystem {
    /// Frequency of the common reference frame; defaults to the mean Larmor frequency.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_hz: Option<f64>,
    pub qubits: Vec<Qubit>,
    #[serde(default)]
    pub exchange: Vec<ExchangeCoupling>,
}

impl SpinSystem {
    pub fn n(&self) -> usize {
        self.qubits.len()
    }

    pub fn dim(&self) -> usize {
        1 << self.qubits.len()
    }

    pub fn reference_hz(&self) -> f64 {
        self.reference_hz
            .unwrap_or_else(|| self.qubits.iter().map(|q| q.larmor_hz).sum::<f64>() / self.qubits.len().max(1) as f64)
    }

    pub fn qubit_index(&self, name: &str) -> Result<usize, SpinError> {
        self.qubits
            .iter()
            .position(|q| q.name == name)
            .ok_or_else(|| SpinError::UnknownQubit(name.to_string()))
    }

    /// Resolve a coupling and return it with its qubit indices ordered as (lower, upper).
    pub fn coupling(&self, a: usize, b: usize) -> Option<&ExchangeCoupling> {
        self.exchange.iter().find(|c| {
            let (x, y) = (self.qubit_index(&c.pair[0]).ok(), self.qubit_index(&c.pair[1]).ok());
            (x == Some(a) && y == Some(b)) || (x == Some(b) && y == Some(a))
        })
    }

    pub fn coupling_indices(&self, c: &ExchangeCoupling) -> (usize, usize) {
        let a = self.qubit_index(&c.pair[0]).expect("validated pair");
        let b = self.qubit_index(&c.pair[1]).expect("validated pair");
        (a.min(b), a.max(b))
    }

    pub fn validate(&self) -> Result<(), SpinError> {
        let n = self.qubits.len();
        if !(2..=MAX_QUBITS).contains(&n) {
            return Err(SpinError::Invalid(format!("qubit count {n} outside 2..={MAX_QUBITS}")));
        }
        for (i, q) in self.qubits.iter().enumerate() {
            if self.qubits[..i].iter().any(|o| o.name == q.name) {
                return Err(SpinError::Invalid(format!("duplicate qubit name `{}`", q.name)));
            }
            if !(q.larmor_hz.is_finite() && q.larmor_hz > 0.0) {
                return Err(SpinError::Invalid(format!("qubit `{}` needs a positive Larmor frequency", q.name)));
            }
            if !(q.rabi_hz.is_finite() && q.rabi_hz >= 0.0) {
                return Err(SpinError::Invalid(format!("qubit `{}` needs a non-negative Rabi frequency", q.name)));
            }
            if !q.slope_hz_per_v.is_finite() {
                return Err(SpinError::Invalid(format!("qubit `{}` has a non-finite slope", q.name)));
            }
        }
        let mut diffs = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                diffs.push(((self.qubits[i].larmor_hz - self.qubits[j].larmor_hz).abs(), i, j));
            }
        }
        diffs.sort_by(|a, b| a.0.total_cmp(&b.0));
        if let Some(d) = diffs.first() {
            if d.0 < 1.0 {
                return Err(SpinError::Invalid(format!(
                    "qubits `{}` and `{}` share a resonance frequency",
                    self.qubits[d.1].name, self.qubits[d.2].name
                )));
            }
        }
        for w in diffs.windows(2) {
            if (w[1].0 - w[0].0).abs() < 1.0 {
                return Err(SpinError::Invalid(format!(
                    "frequency differences of ({},{}) and ({},{}) coincide; qubits are not individually addressable",
                    self.qubits[w[0].1].name,
                    self.qubits[w[0].2].name,
                    self.qubits[w[1].1].name,
                    self.qubits[w[1].2].name
                )));
            }
        }
        let mut seen = Vec::new();
        for c in &self.exchange {
            let a = self.qubit_index(&c.pair[0])?;
            let b = self.qubit_index(&c.pair[1])?;
            if a.abs_diff(b) != 1 {
                return Err(SpinError::Invalid(format!("exchange pair {}-{} is not adjacent", c.pair[0], c.pair[1])));
            }
            let key = (a.min(b), a.max(b));
            if seen.contains(&key) {
                return Err(SpinError::Invalid(format!("exchange pair {}-{} listed twice", c.pair[0], c.pair[1])));
            }
            seen.push(key);
            if !(c.amplitude_hz.is_finite() && c.amplitude_hz > 0.0) {
                return Err(SpinError::Invalid(format!("exchange amplitude A for {}-{} must be positive", c.pair[0], c.pair[1])));
            }
            if !c.rate_per_v.is_finite() || !(c.idle_hz.is_finite() && c.idle_hz >= 0.0) {
                return Err(SpinError::Invalid(format!("exchange parameters for {}-{} must be finite", c.pair[0], c.pair[1])));
            }
        }
        Ok(())
    }

    /// Two qubits at `reference ± gradient/2` coupled by `J(v) = a_hz * exp(b_per_v * v)`.
    pub fn pair(gradient_hz: f64, a_hz: f64, b_per_v: f64, rabi_hz: f64) -> Self {
        let f0 = 15.5e9;
        SpinSystem {
            reference_hz: Some(f0),
            qubits: vec![
                Qubit { name: "Q1".into(), larmor_hz: f0 - 0.5 * gradient_hz, slope_hz_per_v: 0.0, rabi_hz },
                Qubit { name: "Q2".into(), larmor_hz: f0 + 0.5 * gradient_hz, slope_hz_per_v: 0.0, rabi_hz },
            ],
            exchange: vec![ExchangeCoupling {
                pair: ["Q1".into(), "Q2".into()],
                amplitude_hz: a_hz,
                rate_per_v: b_per_v,
                idle_hz: 0.0,
            }],
        }
    }
}
