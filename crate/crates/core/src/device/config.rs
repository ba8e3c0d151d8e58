//! JSON document schema for device configs.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{
    assign_roles, check_voltage_cover, DeviceDescription, DeviceError, GateElectrode, LayerKind, Limits, MaterialLayer,
    Span, TuningStrategy, VirtualGateMatrix, VoltageConfiguration, DEFAULT_BREAKDOWN_V,
};
use crate::spin::SpinSystem;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    pub stack: Vec<MaterialLayer>,
    pub gates: Vec<GateConfig>,
    pub strategy: TuningStrategy,
    pub voltages: VoltagesConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub virtual_gates: Option<VirtualGatesConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limits: Option<LimitsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spin: Option<SpinSystem>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateConfig {
    pub id: String,
    pub layer: u8,
    pub x0: f64,
    pub x1: f64,
    /// Vertical extent of the electrode above its plane, nm (0 for a thin sheet).
    #[serde(default, skip_serializing_if = "is_zero")]
    pub thickness: f64,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

/// Either one voltage map for the declared strategy, or one map per strategy.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VoltagesConfig {
    PerStrategy(BTreeMap<TuningStrategy, BTreeMap<String, f64>>),
    Flat(BTreeMap<String, f64>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VirtualGatesConfig {
    pub names: Vec<String>,
    /// Physical gate per matrix row; defaults to the names with a leading `v` removed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gates: Option<Vec<String>>,
    /// Row-major.
    pub matrix: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsConfig {
    #[serde(default = "default_breakdown")]
    pub breakdown_v: f64,
}

fn default_breakdown() -> f64 {
    DEFAULT_BREAKDOWN_V
}

fn schema(field: impl Into<String>, message: impl Into<String>) -> DeviceError {
    DeviceError::Schema { field: field.into(), message: message.into() }
}

impl DeviceConfig {
    pub fn parse(text: &str) -> Result<Self, DeviceError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let field = if path.is_empty() || path == "." { "<document>".to_string() } else { path };
            schema(field, e.into_inner().to_string())
        })
    }

    pub fn validate(self) -> Result<DeviceDescription, DeviceError> {
        let stack = validate_stack(self.stack)?;

        let mut gates = Vec::with_capacity(self.gates.len());
        for (i, g) in self.gates.into_iter().enumerate() {
            if gates.iter().any(|e: &GateElectrode| e.id == g.id) {
                return Err(DeviceError::DuplicateGate(g.id));
            }
            if !(1..=3).contains(&g.layer) {
                return Err(schema(format!("gates[{i}].layer"), format!("metal layer {} not in 1..=3", g.layer)));
            }
            if !(g.x0.is_finite() && g.x1.is_finite()) || g.x0 >= g.x1 {
                return Err(DeviceError::Invariant(format!("gate `{}` needs x0 < x1 (got {} .. {})", g.id, g.x0, g.x1)));
            }
            if !(g.thickness >= 0.0 && g.thickness.is_finite()) {
                return Err(schema(format!("gates[{i}].thickness"), "thickness must be non-negative"));
            }
            gates.push(GateElectrode {
                id: g.id,
                metal_layer: g.layer,
                span: Span { x0: g.x0, x1: g.x1 },
                thickness: g.thickness,
            });
        }
        for (i, a) in gates.iter().enumerate() {
            for b in &gates[i + 1..] {
                if a.metal_layer == b.metal_layer && a.span.x0 < b.span.x1 && b.span.x0 < a.span.x1 {
                    return Err(DeviceError::OverlappingElectrodes(a.id.clone(), b.id.clone(), a.metal_layer));
                }
            }
            if !stack.iter().any(|l| l.gate_level == Some(a.metal_layer)) {
                return Err(DeviceError::Invariant(format!(
                    "gate `{}` is on metal layer {} but no stack layer hosts that level",
                    a.id, a.metal_layer
                )));
            }
        }

        let limits = Limits {
            breakdown_v: self.limits.map(|l| l.breakdown_v).unwrap_or(DEFAULT_BREAKDOWN_V),
        };
        if !(limits.breakdown_v > 0.0) {
            return Err(schema("limits.breakdown_v", "breakdown limit must be positive"));
        }

        let mut presets = BTreeMap::new();
        match self.voltages {
            VoltagesConfig::Flat(map) => {
                presets.insert(self.strategy, VoltageConfiguration::new(map));
            }
            VoltagesConfig::PerStrategy(map) => {
                for (s, v) in map {
                    presets.insert(s, VoltageConfiguration::new(v));
                }
            }
        }
        if !presets.contains_key(&self.strategy) {
            return Err(DeviceError::MissingPreset(self.strategy));
        }
        for v in presets.values() {
            check_voltage_cover(&gates, v)?;
            v.check_breakdown(limits.breakdown_v)?;
        }

        let layout = assign_roles(gates, self.strategy)?;

        let virtual_gates = match self.virtual_gates {
            None => None,
            Some(vg) => {
                let n = vg.names.len();
                if vg.matrix.len() != n * n {
                    return Err(schema(
                        "virtual_gates.matrix",
                        format!("expected {} entries for {n} names, got {}", n * n, vg.matrix.len()),
                    ));
                }
                let physical = vg.gates.unwrap_or_else(|| {
                    vg.names.iter().map(|n| n.strip_prefix('v').unwrap_or(n).to_string()).collect()
                });
                let physical = physical
                    .into_iter()
                    .map(|name| layout.find(&name).map(|i| layout.gates()[i].id.clone()).ok_or(DeviceError::UnknownGate(name)))
                    .collect::<Result<Vec<_>, _>>()?;
                Some(VirtualGateMatrix::new(vg.names, physical, DMatrix::from_row_slice(n, n, &vg.matrix))?)
            }
        };

        if let Some(spin) = &self.spin {
            spin.validate().map_err(|e| schema("spin", e.to_string()))?;
        }

        Ok(DeviceDescription { stack, layout, presets, virtual_gates, limits, spin: self.spin })
    }

    pub(super) fn from_description(d: &DeviceDescription) -> Self {
        let voltages = if d.presets.len() == 1 {
            VoltagesConfig::Flat(d.voltages().as_map().clone())
        } else {
            VoltagesConfig::PerStrategy(d.presets.iter().map(|(s, v)| (*s, v.as_map().clone())).collect())
        };
        Self {
            stack: d.stack.clone(),
            gates: d
                .gates()
                .iter()
                .map(|g| GateConfig { id: g.id.clone(), layer: g.metal_layer, x0: g.span.x0, x1: g.span.x1, thickness: g.thickness })
                .collect(),
            strategy: d.strategy(),
            voltages,
            virtual_gates: d.virtual_gates.as_ref().map(|m| VirtualGatesConfig {
                names: m.names().to_vec(),
                gates: Some(m.gates().to_vec()),
                matrix: (0..m.matrix().nrows())
                    .flat_map(|i| (0..m.matrix().ncols()).map(move |j| (i, j)))
                    .map(|(i, j)| m.matrix()[(i, j)])
                    .collect(),
            }),
            limits: Some(LimitsConfig { breakdown_v: d.limits.breakdown_v }),
            spin: d.spin.clone(),
        }
    }
}

fn validate_stack(stack: Vec<MaterialLayer>) -> Result<Vec<MaterialLayer>, DeviceError> {
    if stack.is_empty() {
        return Err(schema("stack", "at least one layer is required"));
    }
    for (i, l) in stack.iter().enumerate() {
        if !(l.thickness.is_finite() && l.thickness > 0.0) {
            return Err(DeviceError::Invariant(format!("layer `{}` (stack[{i}]) must have positive thickness", l.name)));
        }
        if !(l.permittivity.is_finite() && l.permittivity >= 1.0) {
            return Err(DeviceError::Invariant(format!("layer `{}` (stack[{i}]) needs relative permittivity >= 1", l.name)));
        }
        if let Some(level) = l.gate_level {
            if !(1..=3).contains(&level) {
                return Err(schema(format!("stack[{i}].gate_level"), format!("metal layer {level} not in 1..=3")));
            }
            if stack[..i].iter().any(|o| o.gate_level == Some(level)) {
                return Err(DeviceError::Invariant(format!("metal layer {level} is hosted by more than one stack layer")));
            }
        }
    }
    let wells: Vec<usize> = stack.iter().enumerate().filter(|(_, l)| l.kind == LayerKind::QuantumWell).map(|(i, _)| i).collect();
    if wells.len() != 1 {
        return Err(DeviceError::Invariant(format!(
            "exactly one quantum_well layer is required (found {})",
            wells.len()
        )));
    }
    let well = wells[0];
    if let Some(l) = stack[..=well].iter().find(|l| l.gate_level.is_some()) {
        return Err(DeviceError::Invariant(format!("gate level on `{}` lies at or below the 2DEG plane", l.name)));
    }
    Ok(stack)
}
