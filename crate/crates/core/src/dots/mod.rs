//! Quantum mechanics on a channel potential: eigenstates, localized orbitals,
//! tunnel coupling, the Hubbard bridge to exchange, and charge stability maps.

mod eigen;
mod hubbard;
mod localize;
mod stability;
mod sweep;


use thiserror::Error;

use crate::device::{DeviceError, TuningStrategy};
use crate::electrostatics::ElectrostaticsError;

pub use crate::electrostatics::PotentialProfile1D;
pub use eigen::{hopping_ev, solve_schrodinger_1d, EigenSolution};
pub use hubbard::{exchange_from_hubbard, HubbardParams, DEFAULT_CHARGING_HZ};
pub use localize::{maximally_localized_basis, LocalizedBasis, GAP_RATIO_WARNING};
pub use stability::{stability_diagram, StabilityMap, StabilityModel, TransitionLine, VoltageRange};
pub use sweep::{
    analyse_double_dot, log_slope, slope_dec_per_volt, tunnel_coupling_sweep, DoubleDotAnalysis, SweepOptions,
    TunnelCouplingCurve, TunnelPoint,
};

#[derive(Debug, Error)]
pub enum DotsError {
    #[error("requested {requested} eigenstates but only {available} are available")]
    TooManyStates { requested: usize, available: usize },
    #[error("eigenvector {state} did not converge (residual {residual:.3e} eV)")]
    EigenNonConvergence { state: usize, residual: f64 },
    #[error("merged dots: {0}")]
    MergedDots(String),
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("{0}")]
    Domain(String),
    #[error("need at least 3 valid points, got {0}")]
    TooFewPoints(usize),
    #[error("unknown gate `{0}`")]
    UnknownGate(String),
    #[error("`{gate}` is not a barrier between two plungers under the {strategy} strategy")]
    NotABarrier { gate: String, strategy: TuningStrategy },
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Electrostatics(#[from] ElectrostaticsError),
}
