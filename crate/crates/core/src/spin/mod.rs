//! Exchange-coupled spin qubits under piecewise-constant control.
//!
//! Frequencies are in Hz and times in seconds throughout; Hamiltonians are
//! stored as `H/h`, so a segment of length `dt` evolves by `exp(-i 2π H dt)`.
//! Basis index bit `k` is the state of qubit `k` (1 = up); index 0 is all down.

mod evolve;
mod experiments;
mod hamiltonian;
mod sequence;
mod state;
mod system;


use thiserror::Error;

pub use evolve::{evolve, propagator};
pub use experiments::{
    branch_frequencies, conditional_phase_weight, find_branches, initialize_odd_parity, residual_zz_coefficient,
    simulate_dcz, simulate_exchange_spectroscopy, simulate_rabi, DczOptions, InitMode, InitReport, SpectroscopyMap,
    SpectroscopyOptions, TraceOptions,
};
pub use hamiltonian::{build_hamiltonian, spin_operator, Axis, BarrierRamp, DriveTone, ExchangeModel, ExchangeTerm, Hamiltonian};
pub use sequence::{
    parity_measure, run_sequence, ExchangeWindow, MeasurementRecord, MeasurementResult, MicrowaveDrive, ParityOutcome,
    PulseElement, PulseSequence, ReadoutModel,
};
pub use state::QuantumState;
pub use system::{ExchangeCoupling, Qubit, SpinSystem, MAX_QUBITS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpinError {
    #[error("invalid spin system: {0}")]
    Invalid(String),
    #[error("unknown qubit `{0}`")]
    UnknownQubit(String),
    #[error("qubit index {0} out of range")]
    QubitIndex(usize),
    #[error("more than one drive on qubit {0} in the same segment")]
    DoubleDrive(usize),
    #[error("no exchange coupling configured between qubits {0} and {1}")]
    NoCoupling(usize, usize),
    #[error("invalid pulse element: {0}")]
    InvalidElement(String),
    #[error("conditional pulse refers to pair ({0},{1}) which has not been measured")]
    NoMeasurement(usize, usize),
    #[error("Rabi frequency must be positive")]
    ZeroRabi,
    #[error("state dimension {got} does not match {expected}")]
    Dimension { expected: usize, got: usize },
}
