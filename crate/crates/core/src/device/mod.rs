//! Declarative device description: heterostructure stack, gate layout, tuning
//! strategy, voltages and virtual gates.

mod config;
mod roles;
mod virtual_gates;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spin::SpinSystem;

pub use config::DeviceConfig;
pub use roles::{assign_roles, GateLayout, GateRole, TuningStrategy};
pub use virtual_gates::{VirtualGateMatrix, SINGULAR_TOLERANCE};

/// Default maximum voltage difference between any two gates (V).
pub const DEFAULT_BREAKDOWN_V: f64 = 4.0;

#[derive(Debug, Error)]
pub enum DeviceError {
    #[error("config not found: {0}")]
    NotFound(String),
    #[error("failed to read {path}: {message}")]
    Io { path: String, message: String },
    #[error("schema violation at `{field}`: {message}")]
    Schema { field: String, message: String },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("duplicate gate id `{0}`")]
    DuplicateGate(String),
    #[error("overlapping electrodes `{0}` and `{1}` on metal layer {2}")]
    OverlappingElectrodes(String, String, u8),
    #[error("invalid gate layout: {0}")]
    Layout(String),
    #[error("unknown gate `{0}`")]
    UnknownGate(String),
    #[error("unknown virtual gate `{0}`")]
    UnknownVirtualGate(String),
    #[error("no voltage given for gate `{0}`")]
    MissingVoltage(String),
    #[error("no voltage preset for the {0} strategy")]
    MissingPreset(TuningStrategy),
    #[error("virtual-gate matrix is numerically singular (singular-value ratio {ratio:.3e})")]
    SingularVirtualMatrix { ratio: f64 },
    #[error("voltage difference {diff:.4} V between `{a}` and `{b}` exceeds the breakdown limit {limit} V")]
    Breakdown { a: String, b: String, diff: f64, limit: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Dielectric,
    SemiconductorBarrier,
    QuantumWell,
    Substrate,
}

/// One layer of the heterostructure; layers are listed bottom-up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialLayer {
    pub name: String,
    /// nm
    pub thickness: f64,
    pub permittivity: f64,
    pub kind: LayerKind,
    /// Electrodes of this metal layer sit on the top surface of this layer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate_level: Option<u8>,
}

/// Closed interval along the channel, in nm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Span {
    pub x0: f64,
    pub x1: f64,
}

impl Span {
    pub fn center(&self) -> f64 {
        0.5 * (self.x0 + self.x1)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x0 && x <= self.x1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateElectrode {
    pub id: String,
    /// 1 = screening layer, 2 and 3 = nanogate layers.
    pub metal_layer: u8,
    pub span: Span,
    /// Vertical extent above the electrode plane, nm.
    pub thickness: f64,
}

/// Gate voltages keyed by physical gate id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VoltageConfiguration(BTreeMap<String, f64>);

impl VoltageConfiguration {
    pub fn new(map: BTreeMap<String, f64>) -> Self {
        Self(map)
    }

    pub fn get(&self, gate: &str) -> Option<f64> {
        self.0.get(gate).copied()
    }

    pub fn set(&mut self, gate: impl Into<String>, volts: f64) {
        self.0.insert(gate.into(), volts);
    }

    pub fn entry_mut(&mut self, gate: &str) -> Option<&mut f64> {
        self.0.get_mut(gate)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &f64)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_map(&self) -> &BTreeMap<String, f64> {
        &self.0
    }

    /// Largest pairwise difference and the gates realising it.
    pub fn max_difference(&self) -> Option<(String, String, f64)> {
        let (lo, hi) = self.0.iter().fold((None::<(&String, f64)>, None::<(&String, f64)>), |(lo, hi), (k, &v)| {
            let lo = match lo {
                Some((_, lv)) if lv <= v => lo,
                _ => Some((k, v)),
            };
            let hi = match hi {
                Some((_, hv)) if hv >= v => hi,
                _ => Some((k, v)),
            };
            (lo, hi)
        });
        let (lo, hi) = (lo?, hi?);
        Some((lo.0.clone(), hi.0.clone(), hi.1 - lo.1))
    }

    pub fn check_breakdown(&self, limit: f64) -> Result<(), DeviceError> {
        if let Some((a, b, diff)) = self.max_difference() {
            if diff > limit {
                return Err(DeviceError::Breakdown { a, b, diff, limit });
            }
        }
        Ok(())
    }
}

/// Electron count per dot, e.g. `(3,1,1,3)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChargeConfiguration(pub Vec<u32>);

impl fmt::Display for ChargeConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|n| n.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

impl std::str::FromStr for ChargeConfiguration {
    type Err = DeviceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let inner = s.trim().trim_start_matches('(').trim_end_matches(')');
        inner
            .split(',')
            .map(|p| {
                p.trim().parse::<u32>().map_err(|_| DeviceError::Schema {
                    field: "charge".into(),
                    message: format!("`{p}` is not a non-negative electron count"),
                })
            })
            .collect::<Result<Vec<_>, _>>()
            .map(ChargeConfiguration)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Limits {
    pub breakdown_v: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Self { breakdown_v: DEFAULT_BREAKDOWN_V }
    }
}

/// A fully validated device. Immutable; modifiers return new values.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceDescription {
    stack: Vec<MaterialLayer>,
    layout: GateLayout,
    presets: BTreeMap<TuningStrategy, VoltageConfiguration>,
    virtual_gates: Option<VirtualGateMatrix>,
    limits: Limits,
    spin: Option<SpinSystem>,
}

impl DeviceDescription {
    pub fn from_json_str(text: &str) -> Result<Self, DeviceError> {
        DeviceConfig::parse(text)?.validate()
    }

    /// Read and validate a device config file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, DeviceError> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(DeviceError::NotFound(path.display().to_string()));
        }
        let text = std::fs::read_to_string(path)
            .map_err(|e| DeviceError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_json_str(&text)
    }

    pub fn to_config(&self) -> DeviceConfig {
        DeviceConfig::from_description(self)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_config()).expect("device config serializes")
    }

    pub fn stack(&self) -> &[MaterialLayer] {
        &self.stack
    }

    pub fn layout(&self) -> &GateLayout {
        &self.layout
    }

    pub fn gates(&self) -> &[GateElectrode] {
        self.layout.gates()
    }

    pub fn strategy(&self) -> TuningStrategy {
        self.layout.strategy()
    }

    pub fn limits(&self) -> Limits {
        self.limits
    }

    pub fn spin(&self) -> Option<&SpinSystem> {
        self.spin.as_ref()
    }

    /// Voltages for the active strategy.
    pub fn voltages(&self) -> &VoltageConfiguration {
        &self.presets[&self.strategy()]
    }

    pub fn voltage_presets(&self) -> &BTreeMap<TuningStrategy, VoltageConfiguration> {
        &self.presets
    }

    pub fn dot_count(&self) -> usize {
        self.layout.dot_count()
    }

    /// Gate index by physical id or role label.
    pub fn find_gate(&self, name: &str) -> Result<usize, DeviceError> {
        self.layout.find(name).ok_or_else(|| DeviceError::UnknownGate(name.to_string()))
    }

    pub fn gate_voltage(&self, index: usize) -> f64 {
        self.voltages().get(&self.gates()[index].id).expect("validated voltages cover every gate")
    }

    /// Switch the gate-role assignment; the stored preset for that strategy becomes active.
    pub fn with_strategy(&self, strategy: TuningStrategy) -> Result<Self, DeviceError> {
        if !self.presets.contains_key(&strategy) {
            return Err(DeviceError::MissingPreset(strategy));
        }
        let layout = assign_roles(self.layout.gates().to_vec(), strategy)?;
        Ok(Self { layout, ..self.clone() })
    }

    /// Replace the active strategy's voltages.
    pub fn with_voltages(&self, voltages: VoltageConfiguration) -> Result<Self, DeviceError> {
        check_voltage_cover(self.layout.gates(), &voltages)?;
        voltages.check_breakdown(self.limits.breakdown_v)?;
        let mut presets = self.presets.clone();
        presets.insert(self.strategy(), voltages);
        Ok(Self { presets, ..self.clone() })
    }

    pub fn with_gate_voltage(&self, gate: &str, volts: f64) -> Result<Self, DeviceError> {
        let idx = self.find_gate(gate)?;
        let mut v = self.voltages().clone();
        v.set(self.gates()[idx].id.clone(), volts);
        self.with_voltages(v)
    }

    /// Add `dv` to one gate of the active preset.
    pub fn with_gate_offset(&self, gate: &str, dv: f64) -> Result<Self, DeviceError> {
        let idx = self.find_gate(gate)?;
        self.with_gate_voltage(gate, self.gate_voltage(idx) + dv)
    }

    pub fn with_spin(&self, spin: Option<SpinSystem>) -> Self {
        Self { spin, ..self.clone() }
    }

    /// Configured virtual gates, or the identity over all gates named `v<label>`.
    pub fn virtual_gates(&self) -> VirtualGateMatrix {
        match &self.virtual_gates {
            Some(m) => m.clone(),
            None => VirtualGateMatrix::identity(
                self.layout.labels().iter().map(|l| format!("v{l}")).collect(),
                self.gates().iter().map(|g| g.id.clone()).collect(),
            ),
        }
    }

    pub fn explicit_virtual_gates(&self) -> Option<&VirtualGateMatrix> {
        self.virtual_gates.as_ref()
    }

    /// Physical voltages after a virtual-gate step, checked against the breakdown limit.
    pub fn apply_virtual_gates(&self, dv: &BTreeMap<String, f64>) -> Result<VoltageConfiguration, DeviceError> {
        let out = self.virtual_gates().apply(self.voltages(), dv)?;
        out.check_breakdown(self.limits.breakdown_v)?;
        Ok(out)
    }

    pub fn well_index(&self) -> usize {
        self.stack.iter().position(|l| l.kind == LayerKind::QuantumWell).expect("validated stack has a well")
    }

    /// Height of the 2DEG plane (top of the quantum well) above the bottom of the stack, nm.
    pub fn two_deg_height(&self) -> f64 {
        self.stack[..=self.well_index()].iter().map(|l| l.thickness).sum()
    }

    /// Depth of the 2DEG below the top of the stack, nm.
    pub fn two_deg_depth(&self) -> f64 {
        self.stack[self.well_index() + 1..].iter().map(|l| l.thickness).sum()
    }

    pub fn total_height(&self) -> f64 {
        self.stack.iter().map(|l| l.thickness).sum()
    }

    /// Height above the stack bottom at which electrodes of `metal_layer` sit, nm.
    pub fn gate_height(&self, metal_layer: u8) -> Option<f64> {
        let mut z = 0.0;
        for layer in &self.stack {
            z += layer.thickness;
            if layer.gate_level == Some(metal_layer) {
                return Some(z);
            }
        }
        None
    }

    /// Relative permittivity at height `z` (nm); the top layer extends upward.
    pub fn permittivity_at(&self, z: f64) -> f64 {
        let mut top = 0.0;
        for layer in &self.stack {
            top += layer.thickness;
            if z < top {
                return layer.permittivity;
            }
        }
        self.stack.last().map(|l| l.permittivity).unwrap_or(1.0)
    }

    /// Channel extent covered by electrodes (min x0, max x1).
    pub fn gate_extent(&self) -> (f64, f64) {
        self.gates().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), g| (lo.min(g.span.x0), hi.max(g.span.x1)))
    }

    /// Median centre-to-centre distance between neighbouring nanogates, or the mean gate width.
    pub fn gate_pitch(&self) -> f64 {
        let mut centers: Vec<f64> =
            self.gates().iter().filter(|g| g.metal_layer != 1).map(|g| g.span.center()).collect();
        centers.sort_by(f64::total_cmp);
        let mut gaps: Vec<f64> = centers.windows(2).map(|w| w[1] - w[0]).collect();
        if gaps.is_empty() {
            let n = self.gates().len().max(1) as f64;
            return self.gates().iter().map(|g| g.span.width()).sum::<f64>() / n;
        }
        gaps.sort_by(f64::total_cmp);
        gaps[gaps.len() / 2]
    }
}

pub(crate) fn check_voltage_cover(gates: &[GateElectrode], voltages: &VoltageConfiguration) -> Result<(), DeviceError> {
    for g in gates {
        match voltages.get(&g.id) {
            Some(v) if v.is_finite() => {}
            Some(_) => return Err(DeviceError::Invariant(format!("voltage for `{}` is not finite", g.id))),
            None => return Err(DeviceError::MissingVoltage(g.id.clone())),
        }
    }
    for (k, _) in voltages.iter() {
        if !gates.iter().any(|g| &g.id == k) {
            return Err(DeviceError::UnknownGate(k.clone()));
        }
    }
    Ok(())
}

/// Load a device config file.
pub fn load_device_config(path: impl AsRef<Path>) -> Result<DeviceDescription, DeviceError> {
    DeviceDescription::load(path)
}

/// The reference device shipped with the crate (nine equal-width nanogates, two screening gates).
pub fn reference_device() -> DeviceDescription {
    DeviceDescription::from_json_str(REFERENCE_DEVICE_JSON).expect("bundled reference device is valid")
}

pub const REFERENCE_DEVICE_JSON: &str = include_str!("../../data/device_reference.json");
