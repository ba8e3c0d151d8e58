use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::eigen::{solve_schrodinger_1d, EigenSolution};
use super::localize::{maximally_localized_basis, LocalizedBasis};
use super::DotsError;
use crate::device::{DeviceDescription, GateRole, TuningStrategy};
use crate::electrostatics::{
    build_grid, potential_profile, solve_selfconsistent, GridSpec, PotentialProfile1D, SimulationGrid,
    SolverSettings,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepOptions {
    pub grid: GridSpec,
    pub solver: SolverSettings,
    pub mass_ratio: f64,
    /// Minimum number of nodes in the resampled double-well window.
    pub window_nodes: usize,
    /// Eigenstates computed per point (the third checks isolation of the doublet).
    pub states: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { grid: GridSpec::default(), solver: SolverSettings::default(), mass_ratio: 0.19, window_nodes: 400, states: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TunnelPoint {
    /// Absolute voltage on the swept barrier, V.
    pub v: f64,
    /// `None` when the point is flagged.
    pub tc_hz: Option<f64>,
    pub flag: Option<String>,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TunnelCouplingCurve {
    pub strategy: TuningStrategy,
    /// Role label of the swept gate (`B3`, ...).
    pub barrier: String,
    /// Physical electrode id of the swept gate.
    pub gate: String,
    pub points: Vec<TunnelPoint>,
}

impl TunnelCouplingCurve {
    /// `(v, t_c)` for unflagged points.
    pub fn valid(&self) -> Vec<(f64, f64)> {
        self.points.iter().filter_map(|p| p.tc_hz.map(|t| (p.v, t))).collect()
    }

    pub fn flagged(&self) -> usize {
        self.points.iter().filter(|p| p.tc_hz.is_none()).count()
    }

    /// True if every point is valid and `t_c` rises strictly with `v`.
    pub fn is_monotone_increasing(&self) -> bool {
        self.flagged() == 0 && self.valid().windows(2).all(|w| w[1].1 > w[0].1)
    }
}

/// The double-well analysis at one voltage configuration.
#[derive(Debug, Clone)]
pub struct DoubleDotAnalysis {
    /// Full-width profile along the channel.
    pub profile: PotentialProfile1D,
    /// Resampled window around the plunger pair.
    pub window: PotentialProfile1D,
    pub iterations: usize,
    pub residual: f64,
    pub outcome: Result<(EigenSolution, LocalizedBasis), String>,
}

impl DoubleDotAnalysis {
    pub fn tunnel_coupling_hz(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|(_, b)| b.tunnel_coupling_hz())
    }
}

struct Target {
    gate: String,
    label: String,
    window: (f64, f64),
}

fn resolve(device: &DeviceDescription, barrier: &str) -> Result<Target, DotsError> {
    let layout = device.layout();
    let idx = layout.find(barrier).ok_or_else(|| DotsError::UnknownGate(barrier.to_string()))?;
    if layout.role_of(idx) != GateRole::Barrier {
        return Err(DotsError::NotABarrier { gate: barrier.to_string(), strategy: device.strategy() });
    }
    let (l, r) = layout.plungers_around(idx).ok_or_else(|| DotsError::NotABarrier {
        gate: barrier.to_string(),
        strategy: device.strategy(),
    })?;
    let pitch = device.gate_pitch();
    let (cl, cr) = (layout.gates()[l].span.center(), layout.gates()[r].span.center());
    Ok(Target {
        gate: layout.gates()[idx].id.clone(),
        label: layout.labels()[idx].clone(),
        window: (cl - pitch, cr + pitch),
    })
}

fn analyse(
    grid: &SimulationGrid,
    window: (f64, f64),
    opts: &SweepOptions,
) -> Result<DoubleDotAnalysis, DotsError> {
    let sol = solve_selfconsistent(grid, &opts.solver)?;
    let profile = potential_profile(&sol.field);
    let nodes = opts.window_nodes.max(3);
    let win = profile.resample(window.0, window.1, nodes)?;
    let outcome = match solve_schrodinger_1d(&win, opts.mass_ratio, opts.states.max(2)) {
        Err(e) => return Err(e),
        Ok(eigs) => match maximally_localized_basis(&eigs) {
            Ok(b) => Ok((eigs, b)),
            Err(DotsError::MergedDots(msg)) => Err(msg),
            Err(e) => return Err(e),
        },
    };
    Ok(DoubleDotAnalysis { profile, window: win, iterations: sol.iterations, residual: sol.residual, outcome })
}

/// Self-consistent profile, eigenstates and localized basis for the dot pair around `barrier`.
pub fn analyse_double_dot(
    device: &DeviceDescription,
    barrier: &str,
    opts: &SweepOptions,
) -> Result<DoubleDotAnalysis, DotsError> {
    let target = resolve(device, barrier)?;
    let grid = build_grid(device, opts.grid)?;
    analyse(&grid, target.window, opts)
}

/// Tunnel coupling versus the absolute voltage on `barrier` (a physical id or a role label).
///
/// All other electrodes keep their values from the strategy's preset. Points
/// where the two dots merge are flagged rather than failing the sweep.
pub fn tunnel_coupling_sweep(
    device: &DeviceDescription,
    strategy: TuningStrategy,
    barrier: &str,
    v_values: &[f64],
    opts: &SweepOptions,
) -> Result<TunnelCouplingCurve, DotsError> {
    if v_values.is_empty() {
        return Err(DotsError::Domain("empty voltage list".into()));
    }
    if v_values.iter().any(|v| !v.is_finite()) || v_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(DotsError::Domain("barrier voltages must be finite and strictly increasing".into()));
    }
    let device = device.with_strategy(strategy)?;
    let target = resolve(&device, barrier)?;
    let devices = v_values
        .iter()
        .map(|&v| device.with_gate_voltage(&target.gate, v))
        .collect::<Result<Vec<_>, _>>()?;
    let base = build_grid(&device, opts.grid)?;
    let points = devices
        .par_iter()
        .zip(v_values.par_iter())
        .map(|(d, &v)| {
            let grid = base.with_voltages_of(d)?;
            let a = analyse(&grid, target.window, opts)?;
            Ok(match a.outcome {
                Ok((_, basis)) => TunnelPoint {
                    v,
                    tc_hz: Some(basis.tunnel_coupling_hz()),
                    flag: None,
                    iterations: a.iterations,
                    warnings: basis.warnings,
                },
                Err(msg) => TunnelPoint {
                    v,
                    tc_hz: None,
                    flag: Some(format!("merged dots: {msg}")),
                    iterations: a.iterations,
                    warnings: Vec::new(),
                },
            })
        })
        .collect::<Result<Vec<_>, DotsError>>()?;
    Ok(TunnelCouplingCurve { strategy, barrier: target.label, gate: target.gate, points })
}

/// Least-squares slope of `log10 t_c` against `v`, over points inside `window` when given.
pub fn slope_dec_per_volt(curve: &TunnelCouplingCurve, window: Option<(f64, f64)>) -> Result<f64, DotsError> {
    let pts: Vec<(f64, f64)> =
        curve.valid().into_iter().filter(|(v, _)| window.is_none_or(|(a, b)| *v >= a && *v <= b)).collect();
    log_slope(&pts)
}

/// Least-squares slope of `log10 y` against `x`.
pub fn log_slope(points: &[(f64, f64)]) -> Result<f64, DotsError> {
    if points.len() < 3 {
        return Err(DotsError::TooFewPoints(points.len()));
    }
    if let Some((_, y)) = points.iter().find(|(_, y)| !(*y > 0.0 && y.is_finite())) {
        return Err(DotsError::Domain(format!("non-positive value {y} on a log scale")));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1.log10()).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1.log10() - my)).sum();
    if !(sxx > 0.0) {
        return Err(DotsError::Domain("all points share one voltage".into()));
    }
    Ok(sxy / sxx)
}
