use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::{DeviceError, VoltageConfiguration};

/// Relative singular-value floor below which a virtual-gate matrix is rejected.
pub const SINGULAR_TOLERANCE: f64 = 1e-10;

/// Linear map from virtual-gate increments to physical-gate increments.
///
/// Column `j` holds the physical response to a unit step on virtual gate
/// `names[j]`; row `i` belongs to physical gate `gates[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualGateMatrix {
    names: Vec<String>,
    gates: Vec<String>,
    matrix: DMatrix<f64>,
}

impl VirtualGateMatrix {
    pub fn new(names: Vec<String>, gates: Vec<String>, matrix: DMatrix<f64>) -> Result<Self, DeviceError> {
        let n = names.len();
        if gates.len() != n || matrix.nrows() != n || matrix.ncols() != n {
            return Err(DeviceError::Invariant(format!(
                "virtual-gate matrix must be square and match {n} names (got {}x{} with {} physical gates)",
                matrix.nrows(),
                matrix.ncols(),
                gates.len()
            )));
        }
        for (i, a) in names.iter().enumerate() {
            if names[..i].contains(a) {
                return Err(DeviceError::Invariant(format!("duplicate virtual gate name `{a}`")));
            }
        }
        for (i, a) in gates.iter().enumerate() {
            if gates[..i].contains(a) {
                return Err(DeviceError::Invariant(format!("physical gate `{a}` appears twice in the virtual-gate map")));
            }
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(DeviceError::Invariant("virtual-gate matrix has non-finite entries".into()));
        }
        if n > 0 {
            let sv = matrix.clone().singular_values();
            let max = sv.max();
            let min = sv.min();
            if max == 0.0 || min / max < SINGULAR_TOLERANCE {
                return Err(DeviceError::SingularVirtualMatrix { ratio: if max == 0.0 { 0.0 } else { min / max } });
            }
        }
        Ok(Self { names, gates, matrix })
    }

    pub fn identity(names: Vec<String>, gates: Vec<String>) -> Self {
        let n = names.len();
        Self { names, gates, matrix: DMatrix::identity(n, n) }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn gates(&self) -> &[String] {
        &self.gates
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `v_phys = v_base + M * dv`; entries of `base` not covered by the map pass through.
    pub fn apply(&self, base: &VoltageConfiguration, dv: &BTreeMap<String, f64>) -> Result<VoltageConfiguration, DeviceError> {
        let mut increments = nalgebra::DVector::zeros(self.names.len());
        for (name, &value) in dv {
            let j = self
                .names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| DeviceError::UnknownVirtualGate(name.clone()))?;
            increments[j] += value;
        }
        let physical = &self.matrix * increments;
        let mut out = base.clone();
        for (i, gate) in self.gates.iter().enumerate() {
            let entry = out.entry_mut(gate).ok_or_else(|| DeviceError::UnknownGate(gate.clone()))?;
            *entry += physical[i];
        }
        Ok(out)
    }
}
