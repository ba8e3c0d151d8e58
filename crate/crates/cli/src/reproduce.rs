use anyhow::{anyhow, bail, Result};
use serde::Serialize;

use dotlab::calibration::{fit_exponential, ExponentialFit};
use dotlab::device::TuningStrategy;
use dotlab::dots::SweepOptions;
use dotlab::spin::{BarrierRamp, ExchangeModel, SpinSystem};
use dotlab::table::Table;

use crate::commands::{dcz_trace, linspace, time_grid, spectroscopy_map, spectroscopy_table, tunnel_sweeps, Context, CurveSummary, DczSummary};
use crate::output::OutputDir;
use crate::{Figure, ReadoutArgs};

const BARRIER: &str = "B3";
const PAIR: (usize, usize) = (0, 1);

fn sweep_voltages() -> Vec<f64> {
    linspace(0.0, 0.3, 31)
}

fn tau_grid() -> Vec<f64> {
    time_grid(4e-6, 160)
}

/// Exchange model per strategy for the first coupled pair.
///
/// The configured coupling belongs to the interchanged strategy. The
/// conventional rate is scaled by the ratio of simulated tunnel-coupling
/// slopes, since `J ∝ t_c²` keeps that ratio in decades per volt.
struct StrategySystems {
    sweeps: Vec<CurveSummary>,
    slope_ratio: f64,
    systems: Vec<(TuningStrategy, SpinSystem)>,
}

fn strategy_systems(ctx: &Context, out: &mut OutputDir) -> Result<StrategySystems> {
    let sweeps = tunnel_sweeps(ctx, out, &TuningStrategy::ALL, BARRIER, &sweep_voltages(), &SweepOptions::default())?;
    let slope = |s: TuningStrategy| {
        sweeps
            .iter()
            .find(|c| c.strategy == s)
            .and_then(|c| c.slope_dec_per_v)
            .ok_or_else(|| anyhow!("no tunnel-coupling slope for the {s} strategy"))
    };
    let slope_ratio = slope(TuningStrategy::Conventional)? / slope(TuningStrategy::Interchanged)?;
    let inter = ctx.spin()?.clone();
    let mut conv = inter.clone();
    let (a, b) = PAIR;
    let k = conv
        .exchange
        .iter()
        .position(|c| {
            let (x, y) = inter.coupling_indices(c);
            (x, y) == (a, b) || (x, y) == (b, a)
        })
        .ok_or_else(|| anyhow!("the first two qubits are not coupled"))?;
    conv.exchange[k].rate_per_v *= slope_ratio;
    Ok(StrategySystems {
        sweeps,
        slope_ratio,
        systems: vec![(TuningStrategy::Conventional, conv), (TuningStrategy::Interchanged, inter)],
    })
}

fn amplitude_for(system: &SpinSystem, j: f64) -> Result<f64> {
    Ok(system.coupling(PAIR.0, PAIR.1).ok_or_else(|| anyhow!("the first two qubits are not coupled"))?.amplitude_for(j))
}

#[derive(Serialize)]
struct Fig2c {
    barrier_v: (f64, f64),
    curves: Vec<CurveSummary>,
    slope_ratio_interchanged_over_conventional: Option<f64>,
}

#[derive(Serialize)]
struct Fig3 {
    strategy: TuningStrategy,
    rate_per_v: f64,
    tunnel_slope_ratio: f64,
    branches: Vec<crate::commands::BranchRow>,
}

#[derive(Serialize)]
struct Fig4a {
    traces: Vec<DczSummary>,
}

#[derive(Serialize)]
struct StrategyFit {
    strategy: TuningStrategy,
    points: Vec<DczSummary>,
    fit: ExponentialFit,
}

#[derive(Serialize)]
struct Fig4b {
    tunnel_curves: Vec<CurveSummary>,
    tunnel_slope_ratio: f64,
    strategies: Vec<StrategyFit>,
    tunability_ratio: f64,
}

pub fn run(ctx: &Context, out: &mut OutputDir, fig: Figure, r: &ReadoutArgs) -> Result<()> {
    let trace = ctx.trace_options(r)?;
    match fig {
        Figure::F2c => {
            let curves = tunnel_sweeps(ctx, out, &TuningStrategy::ALL, BARRIER, &sweep_voltages(), &SweepOptions::default())?;
            let ratio = match (curves[0].slope_dec_per_v, curves[1].slope_dec_per_v) {
                (Some(c), Some(i)) => Some(i / c),
                _ => None,
            };
            out.json("fig2c.json", &Fig2c { barrier_v: (0.0, 0.3), curves, slope_ratio_interchanged_over_conventional: ratio })
        }
        Figure::F3b | Figure::F3c => {
            let (strategy, v_max) = match fig {
                Figure::F3b => (TuningStrategy::Conventional, 0.4),
                _ => (TuningStrategy::Interchanged, 0.28),
            };
            let s = strategy_systems(ctx, out)?;
            let system = &s.systems.iter().find(|(k, _)| *k == strategy).expect("both strategies built").1;
            let (map, branches) = spectroscopy_map(system, PAIR.0, PAIR.1, &linspace(0.0, v_max, 15), 481, None, BarrierRamp::Adiabatic, &trace)?;
            let name = if matches!(fig, Figure::F3b) { "fig3b" } else { "fig3c" };
            out.csv(&format!("{name}_spectroscopy.csv"), &spectroscopy_table(&map))?;
            let rate = system.coupling(PAIR.0, PAIR.1).map_or(f64::NAN, |c| c.rate_per_v);
            out.json(&format!("{name}.json"), &Fig3 { strategy, rate_per_v: rate, tunnel_slope_ratio: s.slope_ratio, branches })
        }
        Figure::F4a => {
            let system = ctx.spin()?;
            let amps = linspace(amplitude_for(system, 1e6)?, amplitude_for(system, 8e6)?, 6);
            let tau = tau_grid();
            let mut t = Table::new(&["amplitude_v", "tau_s", "p_odd"]);
            let mut traces = Vec::new();
            for &a in &amps {
                let (p, summary) = dcz_trace(system, PAIR, a, &tau, ExchangeModel::Secular, &trace)?;
                for (x, y) in tau.iter().zip(&p) {
                    t.push_numbers(&[a, *x, *y]);
                }
                traces.push(summary);
            }
            out.csv("fig4a_dcz.csv", &t)?;
            out.json("fig4a.json", &Fig4a { traces })
        }
        Figure::F4b => {
            let s = strategy_systems(ctx, out)?;
            let tau = tau_grid();
            let mut strategies = Vec::new();
            for (strategy, system) in &s.systems {
                let amps = linspace(amplitude_for(system, 1e6)?, amplitude_for(system, 8e6)?, 8);
                let mut points = Vec::new();
                let mut t = Table::new(&["v_volts", "j_hz"]);
                for &a in &amps {
                    let (_, summary) = dcz_trace(system, PAIR, a, &tau, ExchangeModel::Secular, &trace)?;
                    if let Some(j) = summary.j_fitted_hz {
                        t.push_numbers(&[a, j]);
                    }
                    points.push(summary);
                }
                let fitted: Vec<(f64, f64)> = points.iter().filter_map(|p| p.j_fitted_hz.map(|j| (p.amplitude_v, j))).collect();
                if fitted.len() < 3 {
                    bail!("only {} dCZ fits succeeded for the {strategy} strategy", fitted.len());
                }
                out.csv(&format!("fig4b_j_{strategy}.csv"), &t)?;
                strategies.push(StrategyFit { strategy: *strategy, fit: fit_exponential(&fitted, None)?, points });
            }
            let dec = |k: TuningStrategy| strategies.iter().find(|f| f.strategy == k).map(|f| f.fit.tunability_dec_per_v).unwrap_or(f64::NAN);
            let tunability_ratio = dec(TuningStrategy::Interchanged) / dec(TuningStrategy::Conventional);
            out.json("fig4b.json", &Fig4b { tunnel_curves: s.sweeps, tunnel_slope_ratio: s.slope_ratio, strategies, tunability_ratio })
        }
    }
}
