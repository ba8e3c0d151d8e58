//! Physical constants (SI, CODATA 2018 exact or recommended values).

use std::f64::consts::PI;

/// Elementary charge (C).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Planck constant (J s).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Reduced Planck constant (J s).
pub const HBAR: f64 = PLANCK / (2.0 * PI);
/// Free electron mass (kg).
pub const ELECTRON_MASS: f64 = 9.109_383_701_5e-31;
/// Vacuum permittivity (F/m).
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;

/// Conversion from an energy in eV to a frequency in Hz (E / h).
pub const HZ_PER_EV: f64 = ELEMENTARY_CHARGE / PLANCK;

pub const NM: f64 = 1e-9;
