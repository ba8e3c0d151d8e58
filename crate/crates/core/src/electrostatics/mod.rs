//! Two-dimensional electrostatics of a gate stack cross-section.
//!
//! Poisson's equation `∇·(ε ∇V) = -ρ` is discretised by finite volumes on the
//! `(x, z)` plane. Electrodes and the grounded back plane are Dirichlet nodes;
//! the remaining boundaries are Neumann. Carriers live in a sheet on the 2DEG
//! row whose density follows the Thomas-Fermi relation.

mod banded;
mod grid;
mod profile;
mod solve;

#[cfg(test)]
mod tests;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::{ELECTRON_MASS, ELEMENTARY_CHARGE, HBAR};

pub use banded::{BandCholesky, BandMatrix};
pub use grid::{build_grid, GridSpec, SimulationGrid, LATERAL_PADDING_PITCHES, MIN_NX, MIN_NZ};
pub use profile::{potential_profile, PotentialProfile1D};
pub use solve::{
    solve_poisson, solve_selfconsistent, ChargeSheet, MixingScheme, PotentialField, SelfConsistentSolution,
    SolverSettings,
};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ElectrostaticsError {
    #[error("insufficient resolution: {0}")]
    Resolution(String),
    #[error("gate `{gate}` spans [{x0}, {x1}] nm, outside the simulation domain [{lo}, {hi}] nm")]
    GateOutsideDomain { gate: String, x0: f64, x1: f64, lo: f64, hi: f64 },
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("discretised operator is not positive definite")]
    NotPositiveDefinite,
    #[error("invalid solver settings: {0}")]
    Settings(String),
    #[error("self-consistent iteration did not converge after {iterations} iterations (last change {residual:.3e} V)")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("self-consistent iteration is oscillating: update failed to shrink for {steps} steps (last change {residual:.3e} V)")]
    Oscillation { steps: usize, residual: f64 },
    #[error("charge sheet has {got} entries, grid row has {expected}")]
    ChargeLength { expected: usize, got: usize },
    #[error("potential profile: {0}")]
    Profile(String),
}

/// Zero-temperature Thomas-Fermi sheet density of a 2D electron gas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThomasFermi {
    pub valley_degeneracy: f64,
    /// Transverse effective mass in units of the free electron mass.
    pub mass_ratio: f64,
    pub fermi_energy_ev: f64,
}

impl Default for ThomasFermi {
    fn default() -> Self {
        Self { valley_degeneracy: 2.0, mass_ratio: 0.19, fermi_energy_ev: 0.0 }
    }
}

impl ThomasFermi {
    /// `e² g_v m* / (π ħ²)`, F/m².
    pub fn quantum_capacitance(&self) -> f64 {
        ELEMENTARY_CHARGE * ELEMENTARY_CHARGE * self.valley_degeneracy * self.mass_ratio * ELECTRON_MASS
            / (std::f64::consts::PI * HBAR * HBAR)
    }

    /// Sheet charge (C/m², non-positive) at local potential `v` (V).
    pub fn density(&self, v: f64) -> f64 {
        let x = v + self.fermi_energy_ev;
        if x > 0.0 {
            -self.quantum_capacitance() * x
        } else {
            0.0
        }
    }
}

/// Thomas-Fermi sheet charge at potential `v`.
pub fn thomas_fermi_density(v: f64, physics: &ThomasFermi) -> f64 {
    physics.density(v)
}
