use std::fmt;

use serde::{Deserialize, Serialize};

use super::{DeviceError, GateElectrode};

/// Which nanogate layer hosts the plungers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TuningStrategy {
    /// Plungers on metal layer 2 (closer to the 2DEG), barriers on layer 3.
    Conventional,
    /// Barriers on metal layer 2, plungers on layer 3.
    Interchanged,
}

impl TuningStrategy {
    pub const ALL: [TuningStrategy; 2] = [TuningStrategy::Conventional, TuningStrategy::Interchanged];

    pub fn plunger_layer(self) -> u8 {
        match self {
            TuningStrategy::Conventional => 2,
            TuningStrategy::Interchanged => 3,
        }
    }

    pub fn barrier_layer(self) -> u8 {
        match self {
            TuningStrategy::Conventional => 3,
            TuningStrategy::Interchanged => 2,
        }
    }

    pub fn other(self) -> Self {
        match self {
            TuningStrategy::Conventional => TuningStrategy::Interchanged,
            TuningStrategy::Interchanged => TuningStrategy::Conventional,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TuningStrategy::Conventional => "conventional",
            TuningStrategy::Interchanged => "interchanged",
        }
    }
}

impl fmt::Display for TuningStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for TuningStrategy {
    type Err = DeviceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "conventional" => Ok(TuningStrategy::Conventional),
            "interchanged" => Ok(TuningStrategy::Interchanged),
            other => Err(DeviceError::Schema {
                field: "strategy".into(),
                message: format!("unknown strategy `{other}` (expected conventional or interchanged)"),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateRole {
    Screening,
    Plunger,
    Barrier,
}

/// Electrodes together with the role and display label each one plays under a strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct GateLayout {
    gates: Vec<GateElectrode>,
    roles: Vec<GateRole>,
    labels: Vec<String>,
    strategy: TuningStrategy,
}

impl GateLayout {
    pub fn gates(&self) -> &[GateElectrode] {
        &self.gates
    }

    pub fn roles(&self) -> &[GateRole] {
        &self.roles
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn strategy(&self) -> TuningStrategy {
        self.strategy
    }

    pub fn role_of(&self, index: usize) -> GateRole {
        self.roles[index]
    }

    /// Resolve a gate by physical id or by its role label (`P2`, `B3`, ...).
    pub fn find(&self, name: &str) -> Option<usize> {
        self.gates
            .iter()
            .position(|g| g.id == name)
            .or_else(|| self.labels.iter().position(|l| l == name))
    }

    /// Indices of the plunger gates ordered along the channel.
    pub fn plungers(&self) -> Vec<usize> {
        self.sorted_with_role(GateRole::Plunger)
    }

    pub fn barriers(&self) -> Vec<usize> {
        self.sorted_with_role(GateRole::Barrier)
    }

    pub fn dot_count(&self) -> usize {
        self.roles.iter().filter(|r| **r == GateRole::Plunger).count()
    }

    /// The plungers immediately to the left and right of a barrier gate.
    pub fn plungers_around(&self, barrier: usize) -> Option<(usize, usize)> {
        let c = self.gates[barrier].span.center();
        let plungers = self.plungers();
        let left = plungers.iter().rev().copied().find(|&p| self.gates[p].span.center() < c)?;
        let right = plungers.iter().copied().find(|&p| self.gates[p].span.center() > c)?;
        Some((left, right))
    }

    fn sorted_with_role(&self, role: GateRole) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.gates.len()).filter(|&i| self.roles[i] == role).collect();
        idx.sort_by(|&a, &b| self.gates[a].span.center().total_cmp(&self.gates[b].span.center()));
        idx
    }
}

/// Label gates for a strategy.
///
/// Layer-1 electrodes are always screening gates. Nanogates on layers 2 and 3
/// must alternate along the channel; the strategy decides which layer hosts the
/// plungers. Plungers are numbered left to right, and the barrier between
/// plungers `k` and `k+1` is labelled `B{k+1}`.
pub fn assign_roles(gates: Vec<GateElectrode>, strategy: TuningStrategy) -> Result<GateLayout, DeviceError> {
    let mut nano: Vec<usize> = (0..gates.len()).filter(|&i| gates[i].metal_layer != 1).collect();
    nano.sort_by(|&a, &b| gates[a].span.center().total_cmp(&gates[b].span.center()));

    if !nano.is_empty() {
        let has2 = nano.iter().any(|&i| gates[i].metal_layer == 2);
        let has3 = nano.iter().any(|&i| gates[i].metal_layer == 3);
        if !(has2 && has3) {
            return Err(DeviceError::Layout("layers 2 and 3 must both carry nanogates".into()));
        }
        for w in nano.windows(2) {
            if gates[w[0]].metal_layer == gates[w[1]].metal_layer {
                return Err(DeviceError::Layout(format!(
                    "nanogates `{}` and `{}` are adjacent on the same layer; layer-2/layer-3 electrodes must alternate",
                    gates[w[0]].id, gates[w[1]].id
                )));
            }
        }
    }

    let roles: Vec<GateRole> = gates
        .iter()
        .map(|g| match g.metal_layer {
            1 => GateRole::Screening,
            l if l == strategy.plunger_layer() => GateRole::Plunger,
            _ => GateRole::Barrier,
        })
        .collect();

    let mut labels: Vec<String> = gates.iter().map(|g| g.id.clone()).collect();
    let mut plunger_count = 0;
    for &i in &nano {
        match roles[i] {
            GateRole::Plunger => {
                plunger_count += 1;
                labels[i] = format!("P{plunger_count}");
            }
            GateRole::Barrier => labels[i] = format!("B{}", plunger_count + 1),
            GateRole::Screening => unreachable!(),
        }
    }

    Ok(GateLayout { gates, roles, labels, strategy })
}
