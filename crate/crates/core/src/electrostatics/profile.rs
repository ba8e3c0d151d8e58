use serde::{Deserialize, Serialize};

use super::solve::PotentialField;
use super::ElectrostaticsError;

/// Electron potential energy `U(x) = -e V(x, z_2DEG)` along the channel, in eV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialProfile1D {
    pub x_nm: Vec<f64>,
    pub u_ev: Vec<f64>,
}

pub fn potential_profile(field: &PotentialField) -> PotentialProfile1D {
    PotentialProfile1D {
        x_nm: field.grid().x_nodes(),
        u_ev: field.two_deg_row().into_iter().map(|v| -v).collect(),
    }
}

impl PotentialProfile1D {
    /// Uniformly spaced profile with at least three finite samples.
    pub fn new(x_nm: Vec<f64>, u_ev: Vec<f64>) -> Result<Self, ElectrostaticsError> {
        if x_nm.len() != u_ev.len() {
            return Err(ElectrostaticsError::Profile(format!("{} positions but {} energies", x_nm.len(), u_ev.len())));
        }
        if x_nm.len() < 3 {
            return Err(ElectrostaticsError::Profile("need at least three samples".into()));
        }
        if x_nm.iter().chain(&u_ev).any(|v| !v.is_finite()) {
            return Err(ElectrostaticsError::Profile("non-finite sample".into()));
        }
        let dx = (x_nm[x_nm.len() - 1] - x_nm[0]) / (x_nm.len() - 1) as f64;
        if !(dx > 0.0) || x_nm.windows(2).any(|w| ((w[1] - w[0]) - dx).abs() > 1e-6 * dx) {
            return Err(ElectrostaticsError::Profile("positions must be increasing and uniformly spaced".into()));
        }
        Ok(Self { x_nm, u_ev })
    }

    pub fn len(&self) -> usize {
        self.x_nm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_nm.is_empty()
    }

    pub fn dx(&self) -> f64 {
        (self.x_nm[self.len() - 1] - self.x_nm[0]) / (self.len() - 1) as f64
    }

    /// Linear interpolation; clamps outside the sampled range.
    pub fn value_at(&self, x: f64) -> f64 {
        let n = self.len();
        let s = ((x - self.x_nm[0]) / self.dx()).clamp(0.0, (n - 1) as f64);
        let i = (s.floor() as usize).min(n - 2);
        let f = s - i as f64;
        self.u_ev[i] * (1.0 - f) + self.u_ev[i + 1] * f
    }

    /// Resample `[x0, x1]` onto `n` uniformly spaced points.
    pub fn resample(&self, x0: f64, x1: f64, n: usize) -> Result<Self, ElectrostaticsError> {
        if !(x1 > x0) || n < 3 {
            return Err(ElectrostaticsError::Profile(format!("bad resampling window [{x0}, {x1}] with {n} points")));
        }
        let h = (x1 - x0) / (n - 1) as f64;
        let x: Vec<f64> = (0..n).map(|k| x0 + k as f64 * h).collect();
        let u = x.iter().map(|&xi| self.value_at(xi)).collect();
        Self::new(x, u)
    }

    /// Indices of strict interior local minima.
    pub fn local_minima(&self) -> Vec<usize> {
        (1..self.len() - 1).filter(|&i| self.u_ev[i] < self.u_ev[i - 1] && self.u_ev[i] <= self.u_ev[i + 1]).collect()
    }

    /// Position of the lowest sample within `[x0, x1]`.
    pub fn argmin_in(&self, x0: f64, x1: f64) -> Option<f64> {
        self.x_nm
            .iter()
            .zip(&self.u_ev)
            .filter(|(x, _)| **x >= x0 && **x <= x1)
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(x, _)| *x)
    }

    /// Highest energy within `[x0, x1]`.
    pub fn max_in(&self, x0: f64, x1: f64) -> Option<f64> {
        self.x_nm
            .iter()
            .zip(&self.u_ev)
            .filter(|(x, _)| **x >= x0 && **x <= x1)
            .map(|(_, u)| *u)
            .max_by(f64::total_cmp)
    }
}
