use nalgebra::DVector;
use num_complex::Complex64;

use super::SpinError;

/// Pure state of `n` spins as `2^n` complex amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    n: usize,
    amps: DVector<Complex64>,
}

impl QuantumState {
    /// Computational basis state; bit `k` of `index` is qubit `k` (1 = up).
    pub fn basis(n: usize, index: usize) -> Self {
        let mut amps = DVector::zeros(1 << n);
        amps[index] = Complex64::new(1.0, 0.0);
        Self { n, amps }
    }

    pub fn all_down(n: usize) -> Self {
        Self::basis(n, 0)
    }

    /// Product of single-spin states given as `true` = up.
    pub fn from_spins(spins: &[bool]) -> Self {
        let index = spins.iter().enumerate().fold(0, |acc, (k, &up)| if up { acc | (1 << k) } else { acc });
        Self::basis(spins.len(), index)
    }

    pub fn from_amplitudes(n: usize, amps: DVector<Complex64>) -> Result<Self, SpinError> {
        if amps.len() != 1 << n {
            return Err(SpinError::Dimension { expected: 1 << n, got: amps.len() });
        }
        Ok(Self { n, amps })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amps
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut DVector<Complex64> {
        &mut self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            self.amps /= Complex64::new(n, 0.0);
        }
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn prob_up(&self, k: usize) -> f64 {
        self.amps.iter().enumerate().filter(|(i, _)| i >> k & 1 == 1).map(|(_, a)| a.norm_sqr()).sum()
    }

    /// Probability that spins `a` and `b` are antiparallel.
    pub fn prob_odd(&self, a: usize, b: usize) -> f64 {
        self.amps
            .iter()
            .enumerate()
            .filter(|(i, _)| (i >> a & 1) != (i >> b & 1))
            .map(|(_, amp)| amp.norm_sqr())
            .sum()
    }

    /// `|<self|other>|^2`
    pub fn overlap(&self, other: &QuantumState) -> f64 {
        self.amps.dotc(&other.amps).norm_sqr()
    }
}
