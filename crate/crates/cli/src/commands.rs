use std::path::Path;

use anyhow::{anyhow, bail, Context as _, Result};
use serde::Serialize;

use dotlab::calibration::{
    extract_j_from_dcz, fit_damped_sinusoid, lever_arm_comparison, tunability_report,
    DampedSinusoidFit, PairCurve, TunabilityReport,
};
use dotlab::device::{reference_device, DeviceDescription, TuningStrategy};
use dotlab::dots::{
    slope_dec_per_volt, stability_diagram, tunnel_coupling_sweep, StabilityModel, SweepOptions, VoltageRange,
};
use dotlab::electrostatics::{
    build_grid, potential_profile, solve_selfconsistent, GridSpec, SolverSettings,
};
use dotlab::spin::{
    branch_frequencies, find_branches, BarrierRamp, simulate_dcz, simulate_exchange_spectroscopy, simulate_rabi, DczOptions,
    ExchangeModel, ReadoutModel, SpectroscopyMap, SpectroscopyOptions, SpinSystem, TraceOptions,
};
use dotlab::table::Table;

use crate::output::OutputDir;
use crate::{Common, GridArgs, ReadoutArgs, StrategyArg, StrategyChoice};

pub struct Context {
    pub device: DeviceDescription,
    pub config_label: String,
    pub seed: u64,
}

impl Context {
    pub fn new(common: &Common) -> Result<Self> {
        let (device, config_label) = match &common.config {
            Some(p) => (DeviceDescription::load(p)?, p.display().to_string()),
            None => (reference_device(), "<bundled reference device>".to_string()),
        };
        Ok(Self { device, config_label, seed: common.seed.unwrap_or(0) })
    }

    pub fn spin(&self) -> Result<&SpinSystem> {
        self.device.spin().ok_or_else(|| anyhow!("the device config has no `spin` section"))
    }

    pub fn trace_options(&self, r: &ReadoutArgs) -> Result<TraceOptions> {
        let readout = if r.ideal_readout { ReadoutModel::ideal() } else { ReadoutModel::from_snr(r.snr)? };
        Ok(TraceOptions { readout: readout.with_seed(self.seed), shots: r.shots })
    }
}

/// `points` samples from 0 in steps of `tmax / points`.
pub fn time_grid(tmax: f64, points: usize) -> Vec<f64> {
    (0..points).map(|k| tmax * k as f64 / points as f64).collect()
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
    }
}

fn solver(g: &GridArgs) -> SolverSettings {
    let base = match g.damping {
        Some(l) => SolverSettings::damped(l),
        None => SolverSettings::default(),
    };
    SolverSettings { tolerance: g.tolerance, max_iterations: g.max_iterations, ..base }
}

fn sweep_options(g: &GridArgs) -> SweepOptions {
    SweepOptions { grid: GridSpec::new(g.nx, g.nz), solver: solver(g), ..SweepOptions::default() }
}

fn parse_list(s: &str, n: usize, what: &str) -> Result<Vec<f64>> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("{what}: expected {n} comma-separated numbers, got `{s}`"))?;
    if n > 0 && v.len() != n {
        bail!("{what}: expected {n} comma-separated numbers, got {}", v.len());
    }
    Ok(v)
}

fn parse_range(s: &str) -> Result<VoltageRange> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || anyhow!("voltage range must be START:STOP:POINTS, got `{s}`");
    if parts.len() != 3 {
        return Err(bad());
    }
    Ok(VoltageRange::new(
        parts[0].parse().map_err(|_| bad())?,
        parts[1].parse().map_err(|_| bad())?,
        parts[2].parse().map_err(|_| bad())?,
    ))
}

/// Control and target indices from `A,B`.
pub fn parse_pair(system: &SpinSystem, s: &str) -> Result<(usize, usize)> {
    let names: Vec<&str> = s.split(',').map(str::trim).collect();
    if names.len() != 2 {
        bail!("--pair must name two qubits as CONTROL,TARGET, got `{s}`");
    }
    Ok((system.qubit_index(names[0])?, system.qubit_index(names[1])?))
}

fn apply_overrides(device: &DeviceDescription, set: &[String]) -> Result<DeviceDescription> {
    let mut d = device.clone();
    for s in set {
        let (gate, v) = s.split_once('=').ok_or_else(|| anyhow!("--set expects GATE=VOLTS, got `{s}`"))?;
        let v: f64 = v.trim().parse().with_context(|| format!("--set {s}: not a number"))?;
        d = d.with_gate_voltage(gate.trim(), v)?;
    }
    Ok(d)
}

#[derive(Serialize)]
struct PotentialSidecar {
    strategy: TuningStrategy,
    voltages: Vec<(String, f64)>,
    iterations: usize,
    residual_v: f64,
    nx: usize,
    nz: usize,
}

pub fn simulate_potential(
    ctx: &Context,
    out: &mut OutputDir,
    strategy: Option<StrategyArg>,
    set: &[String],
    sweep: Option<&str>,
    (from, to, points): (f64, f64, usize),
    g: &GridArgs,
) -> Result<()> {
    let mut device = ctx.device.clone();
    if let Some(s) = strategy {
        device = device.with_strategy(s.into())?;
    }
    let device = apply_overrides(&device, set)?;
    let devices: Vec<(String, DeviceDescription)> = match sweep {
        None => vec![("potential".to_string(), device.clone())],
        Some(gate) => linspace(from, to, points)
            .iter()
            .enumerate()
            .map(|(k, &v)| Ok((format!("potential_{k:03}"), device.with_gate_voltage(gate, v)?)))
            .collect::<Result<_>>()?,
    };
    let base = build_grid(&device, GridSpec::new(g.nx, g.nz))?;
    let settings = solver(g);
    for (stem, d) in devices {
        let grid = base.with_voltages_of(&d)?;
        let sol = solve_selfconsistent(&grid, &settings)?;
        let p = potential_profile(&sol.field);
        let mut t = Table::new(&["x_nm", "U_eV"]);
        for (x, u) in p.x_nm.iter().zip(&p.u_ev) {
            t.push_numbers(&[*x, *u]);
        }
        out.csv(&format!("{stem}.csv"), &t)?;
        out.json(
            &format!("{stem}.json"),
            &PotentialSidecar {
                strategy: d.strategy(),
                voltages: d.voltages().iter().map(|(k, v)| (k.clone(), *v)).collect(),
                iterations: sol.iterations,
                residual_v: sol.residual,
                nx: grid.nx(),
                nz: grid.nz(),
            },
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
pub struct CurveSummary {
    pub strategy: TuningStrategy,
    pub barrier: String,
    pub gate: String,
    pub slope_dec_per_v: Option<f64>,
    pub monotone: bool,
    pub flagged: usize,
}

pub fn sweep_tunnel_coupling(
    ctx: &Context,
    out: &mut OutputDir,
    choice: StrategyChoice,
    barrier: &str,
    (from, to, points): (f64, f64, usize),
    g: &GridArgs,
) -> Result<()> {
    let strategies: Vec<TuningStrategy> = match choice {
        StrategyChoice::Conventional => vec![TuningStrategy::Conventional],
        StrategyChoice::Interchanged => vec![TuningStrategy::Interchanged],
        StrategyChoice::Both => TuningStrategy::ALL.to_vec(),
    };
    let v = linspace(from, to, points);
    let summary = tunnel_sweeps(ctx, out, &strategies, barrier, &v, &sweep_options(g))?;
    out.json("tunnel_summary.json", &summary)
}

/// Runs and writes one `tunnel_<strategy>.csv` per strategy.
pub fn tunnel_sweeps(
    ctx: &Context,
    out: &mut OutputDir,
    strategies: &[TuningStrategy],
    barrier: &str,
    v: &[f64],
    opts: &SweepOptions,
) -> Result<Vec<CurveSummary>> {
    let mut summary = Vec::new();
    for &s in strategies {
        let curve = tunnel_coupling_sweep(&ctx.device, s, barrier, v, opts)?;
        let mut t = Table::new(&["v_volts", "tc_hz", "flag"]);
        for p in &curve.points {
            t.push_cells(vec![
                dotlab::table::fmt_num(p.v),
                p.tc_hz.map_or_else(String::new, dotlab::table::fmt_num),
                p.flag.clone().unwrap_or_default(),
            ]);
        }
        out.csv(&format!("tunnel_{s}.csv"), &t)?;
        summary.push(CurveSummary {
            strategy: s,
            barrier: curve.barrier.clone(),
            gate: curve.gate.clone(),
            slope_dec_per_v: slope_dec_per_volt(&curve, None).ok(),
            monotone: curve.is_monotone_increasing(),
            flagged: curve.flagged(),
        });
    }
    Ok(summary)
}

pub fn stability(
    out: &mut OutputDir,
    charging: &str,
    mutual: f64,
    lever: &str,
    v1: &str,
    v2: &str,
    max_electrons: u32,
) -> Result<()> {
    let ec = parse_list(charging, 2, "--charging")?;
    let a = parse_list(lever, 4, "--lever")?;
    let model = StabilityModel { charging_ev: [ec[0], ec[1]], mutual_ev: mutual, lever_arms: [[a[0], a[1]], [a[2], a[3]]] };
    let map = stability_diagram(&model, parse_range(v1)?, parse_range(v2)?, max_electrons)?;
    let mut t = Table::new(&["v1", "v2", "n1", "n2"]);
    for (i, x) in map.v1.iter().enumerate() {
        for (j, y) in map.v2.iter().enumerate() {
            let n = map.occupation[i][j];
            t.push_numbers(&[*x, *y, n[0] as f64, n[1] as f64]);
        }
    }
    out.csv("stability.csv", &t)?;
    out.json("stability_transitions.json", &map.transitions)
}

pub fn rabi(
    ctx: &Context,
    out: &mut OutputDir,
    qubit: &str,
    tmax: f64,
    points: usize,
    detuning: f64,
    r: &ReadoutArgs,
) -> Result<()> {
    let system = ctx.spin()?;
    let q = system.qubit_index(qubit)?;
    let t = time_grid(tmax, points);
    let drive = (detuning != 0.0).then(|| system.qubits[q].larmor_hz + detuning);
    let p = simulate_rabi(system, q, &t, drive, &ctx.trace_options(r)?)?;
    let mut tab = Table::new(&["t_s", "p_odd"]);
    for (a, b) in t.iter().zip(&p) {
        tab.push_numbers(&[*a, *b]);
    }
    out.csv("rabi.csv", &tab)
}

#[derive(Serialize)]
pub struct BranchRow {
    pub v_volts: f64,
    pub j_configured_hz: f64,
    pub exact_branches_hz: (f64, f64),
    pub observed_peaks_hz: Vec<f64>,
    /// Separation of the two strongest observed peaks.
    pub j_observed_hz: Option<f64>,
}

/// Spectroscopy map with a frequency grid that covers both branches at every amplitude.
pub fn spectroscopy_map(
    system: &SpinSystem,
    control: usize,
    target: usize,
    v: &[f64],
    f_points: usize,
    rabi: Option<f64>,
    ramp: BarrierRamp,
    trace: &TraceOptions,
) -> Result<(SpectroscopyMap, Vec<BranchRow>)> {
    let rabi_hz = rabi.unwrap_or(system.qubits[target].rabi_hz);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut exact = Vec::new();
    for &x in v {
        let (d, u) = branch_frequencies(system, control, target, x)?;
        lo = lo.min(d.min(u));
        hi = hi.max(d.max(u));
        exact.push((d, u));
    }
    let pad = 5.0 * rabi_hz;
    let f = linspace(lo - pad, hi + pad, f_points);
    let opts = SpectroscopyOptions { trace: trace.clone(), rabi_hz: Some(rabi_hz), duration: None, ramp };
    let map = simulate_exchange_spectroscopy(system, control, target, &f, v, &opts)?;
    let coupling = system.coupling(control, target).ok_or_else(|| anyhow!("qubits are not coupled"))?;
    let rows = v
        .iter()
        .zip(&map.p)
        .zip(exact)
        .map(|((&x, p), e)| {
            let peaks = find_branches(&f, p);
            let j_observed_hz = (peaks.len() >= 2).then(|| (peaks[0] - peaks[1]).abs());
            BranchRow { v_volts: x, j_configured_hz: coupling.exchange_hz(x), exact_branches_hz: e, observed_peaks_hz: peaks, j_observed_hz }
        })
        .collect();
    Ok((map, rows))
}

pub fn spectroscopy_table(map: &SpectroscopyMap) -> Table {
    let mut t = Table::new(&["v_volts", "f_hz", "p_up"]);
    for (i, v) in map.v_values.iter().enumerate() {
        for (j, f) in map.f_values.iter().enumerate() {
            t.push_numbers(&[*v, *f, map.p[i][j]]);
        }
    }
    t
}

pub fn spectroscopy(
    ctx: &Context,
    out: &mut OutputDir,
    pair: &str,
    (v_from, v_to, v_points): (f64, f64, usize),
    f_points: usize,
    rabi: Option<f64>,
    ramp: BarrierRamp,
    r: &ReadoutArgs,
) -> Result<()> {
    let system = ctx.spin()?;
    let (c, t) = parse_pair(system, pair)?;
    let v = linspace(v_from, v_to, v_points);
    let (map, rows) = spectroscopy_map(system, c, t, &v, f_points, rabi, ramp, &ctx.trace_options(r)?)?;
    out.csv("spectroscopy.csv", &spectroscopy_table(&map))?;
    out.json("spectroscopy_branches.json", &rows)
}

#[derive(Serialize)]
pub struct DczSummary {
    pub amplitude_v: f64,
    pub j_configured_hz: f64,
    pub fit: Option<DampedSinusoidFit>,
    pub j_fitted_hz: Option<f64>,
    pub fit_error: Option<String>,
}

pub fn dcz_trace(
    system: &SpinSystem,
    pair: (usize, usize),
    amplitude: f64,
    tau: &[f64],
    exchange: ExchangeModel,
    trace: &TraceOptions,
) -> Result<(Vec<f64>, DczSummary)> {
    let opts = DczOptions { trace: trace.clone(), offsets: Vec::new(), exchange };
    let p = simulate_dcz(system, pair.0, pair.1, amplitude, tau, &opts)?;
    let j = system.coupling(pair.0, pair.1).ok_or_else(|| anyhow!("qubits are not coupled"))?.exchange_hz(amplitude);
    let summary = match fit_damped_sinusoid(tau, &p) {
        Ok(fit) => DczSummary {
            amplitude_v: amplitude,
            j_configured_hz: j,
            j_fitted_hz: Some(extract_j_from_dcz(&fit)),
            fit: Some(fit),
            fit_error: None,
        },
        Err(e) => DczSummary { amplitude_v: amplitude, j_configured_hz: j, fit: None, j_fitted_hz: None, fit_error: Some(e.to_string()) },
    };
    Ok((p, summary))
}

#[allow(clippy::too_many_arguments)]
pub fn dcz(
    ctx: &Context,
    out: &mut OutputDir,
    pair: &str,
    amplitude: f64,
    tmax: f64,
    points: usize,
    exchange: ExchangeModel,
    r: &ReadoutArgs,
) -> Result<()> {
    let system = ctx.spin()?;
    let pair = parse_pair(system, pair)?;
    let tau = time_grid(tmax, points);
    let (p, summary) = dcz_trace(system, pair, amplitude, &tau, exchange, &ctx.trace_options(r)?)?;
    let mut t = Table::new(&["tau_s", "p_odd"]);
    for (a, b) in tau.iter().zip(&p) {
        t.push_numbers(&[*a, *b]);
    }
    out.csv("dcz.csv", &t)?;
    out.json("dcz_fit.json", &summary)
}

fn read_curve(path: &Path) -> Result<Vec<(f64, f64)>> {
    if !path.exists() {
        bail!("curve file not found: {}", path.display());
    }
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut pts = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |k: usize| -> Result<f64> {
            rec.get(k)
                .ok_or_else(|| anyhow!("{}: row {} has fewer than two columns", path.display(), i + 2))?
                .trim()
                .parse()
                .with_context(|| format!("{}: row {}, column {}", path.display(), i + 2, k + 1))
        };
        pts.push((num(0)?, num(1)?));
    }
    Ok(pts)
}

pub fn fit_tunability(out: &mut OutputDir, specs: &[String], window: Option<&str>) -> Result<()> {
    let mut curves = Vec::new();
    for s in specs {
        let mut it = s.splitn(3, ':');
        let (Some(pair), Some(strategy), Some(path)) = (it.next(), it.next(), it.next()) else {
            bail!("--curve expects PAIR:STRATEGY:PATH, got `{s}`");
        };
        let strategy: TuningStrategy = strategy.parse().map_err(|e| anyhow!("--curve {s}: {e}"))?;
        curves.push(PairCurve { pair: pair.to_string(), strategy, points: read_curve(Path::new(path))? });
    }
    let window = window.map(|w| parse_list(w, 2, "--window").map(|v| (v[0], v[1]))).transpose()?;
    let report = tunability_report(&curves, window)?;
    print!("{}", report.to_table());
    out.json("tunability.json", &report)
}

#[derive(Serialize)]
struct FullReport {
    tunability: TunabilityReport,
    lever_arm: Option<dotlab::calibration::LeverArmComparison>,
}

pub fn report(out: &mut OutputDir, path: &Path, lever: Option<&str>) -> Result<()> {
    if !path.exists() {
        bail!("report input not found: {}", path.display());
    }
    let text = std::fs::read_to_string(path)?;
    let tunability: TunabilityReport =
        serde_json::from_str(&text).with_context(|| format!("{} is not a tunability report", path.display()))?;
    let mut table = tunability.to_table();
    let lever_arm = match lever {
        Some(l) => {
            let ratios = parse_list(l, tunability.pairs.len(), "--lever")?;
            let cmp = lever_arm_comparison(&ratios, &tunability.ratios())?;
            let labels: Vec<String> = tunability.pairs.iter().map(|p| p.pair.clone()).collect();
            table.push('\n');
            table.push_str(&cmp.to_table(&labels));
            Some(cmp)
        }
        None => None,
    };
    print!("{table}");
    out.write("report.txt", &table)?;
    out.json("report.json", &FullReport { tunability, lever_arm })
}
