//! Simulation and calibration toolkit for gate-defined Si/SiGe quantum-dot
//! spin qubits: device description, electrostatics, dot physics, spin
//! dynamics and exchange-tunability fitting.

pub mod calibration;
pub mod constants;
pub mod device;
pub mod dots;
pub mod electrostatics;
pub mod spin;
pub mod table;
