//! Acceptance criteria, one line each. Exits non-zero if any criterion fails.

use std::f64::consts::LN_10;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, Matrix4};

use dotlab::calibration::{
    extract_j_from_dcz, fit_damped_sinusoid, fit_exponential, lever_arm_comparison, readout_error_from_snr,
    readout_fidelity_from_snr, tunability_report, PairCurve,
};
use dotlab::constants::{ELECTRON_MASS, ELEMENTARY_CHARGE, HBAR, VACUUM_PERMITTIVITY};
use dotlab::device::{reference_device, DeviceDescription, TuningStrategy};
use dotlab::dots::{
    maximally_localized_basis, slope_dec_per_volt, solve_schrodinger_1d, tunnel_coupling_sweep, PotentialProfile1D,
    SweepOptions,
};
use dotlab::electrostatics::{build_grid, solve_poisson, solve_selfconsistent, GridSpec, SolverSettings, ThomasFermi};
use dotlab::spin::{
    branch_frequencies, find_branches, parity_measure, simulate_dcz, simulate_exchange_spectroscopy, DczOptions,
    ExchangeModel, ParityOutcome, QuantumState, ReadoutModel, SpectroscopyOptions, SpinSystem,
};

struct Criterion {
    id: u8,
    name: &'static str,
    budget: Duration,
    run: fn() -> String,
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "electrostatics oracles", budget: Duration::from_secs(10), run: electrostatics },
        Criterion { id: 2, name: "tunnel coupling", budget: Duration::from_secs(5), run: tunnel_coupling },
        Criterion { id: 3, name: "strategy contrast", budget: Duration::from_secs(300), run: strategy_contrast },
        Criterion { id: 4, name: "dCZ frequency law", budget: Duration::from_secs(30), run: dcz_law },
        Criterion { id: 5, name: "exchange spectroscopy", budget: Duration::from_secs(60), run: spectroscopy },
        Criterion { id: 6, name: "tunability fits", budget: Duration::from_secs(1), run: tunability },
        Criterion { id: 7, name: "readout model", budget: Duration::from_secs(30), run: readout },
        Criterion { id: 8, name: "determinism", budget: Duration::from_secs(120), run: determinism },
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for c in criteria {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(c.run));
        let elapsed = start.elapsed();
        let (ok, detail) = match result {
            Ok(detail) if elapsed <= c.budget => (true, detail),
            Ok(detail) => (false, format!("{detail}; over the {:?} budget", c.budget)),
            Err(e) => {
                let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
                (false, msg.unwrap_or_else(|| "panicked".into()))
            }
        };
        failed += usize::from(!ok);
        println!(
            "criterion {} {:<22} {} ({:.2} s): {}",
            c.id,
            c.name,
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            detail
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

// ---------- 1 ----------

const T_OX: f64 = 20.0;
const EPS_OX: f64 = 9.0;
const T_SC: f64 = 30.0;
const EPS_SC: f64 = 13.2;

fn plate(vg: f64) -> DeviceDescription {
    DeviceDescription::from_json_str(&format!(
        r#"{{
        "stack": [
            {{ "name": "well", "thickness": {T_SC}, "permittivity": {EPS_SC}, "kind": "quantum_well" }},
            {{ "name": "oxide", "thickness": {T_OX}, "permittivity": {EPS_OX}, "kind": "dielectric", "gate_level": 1 }}
        ],
        "gates": [ {{ "id": "G", "layer": 1, "x0": -100.0, "x1": 100.0 }} ],
        "strategy": "conventional",
        "voltages": {{ "G": {vg} }}
    }}"#
    ))
    .unwrap()
}

fn electrostatics() -> String {
    let zero = build_grid(&reference_device(), GridSpec::default()).unwrap().with_uniform_voltage(0.0);
    let vmax = solve_poisson(&zero, None).unwrap().values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(vmax < 1e-12, "zero-voltage solve reaches {vmax} V");

    let vg = 0.3;
    let grid = build_grid(&plate(vg), GridSpec::new(64, 32).with_extent(-100.0, 100.0)).unwrap();
    let divider = vg * (T_SC / EPS_SC) / (T_OX / EPS_OX + T_SC / EPS_SC);
    let f = solve_poisson(&grid, None).unwrap();
    let div_err = f.two_deg_row().iter().map(|v| ((v - divider) / divider).abs()).fold(0.0, f64::max);
    assert!(div_err < 1e-3, "divider relative error {div_err}");

    // Scalar root of V - V_divider - σ_TF(V) / C, C the two capacitances in parallel.
    let tf = ThomasFermi::default();
    let c = VACUUM_PERMITTIVITY * (EPS_OX / (T_OX * 1e-9) + EPS_SC / (T_SC * 1e-9));
    let (mut lo, mut hi) = (-2.0, 2.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid - divider - tf.density(mid) / c > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let oracle = 0.5 * (lo + hi);
    let sol = solve_selfconsistent(&grid, &SolverSettings::default()).unwrap();
    let tf_err = sol.field.two_deg_row().iter().map(|v| (v - oracle).abs()).fold(0.0, f64::max);
    assert!(tf_err < 1e-5, "Thomas-Fermi plate off by {tf_err} V");
    format!("|V|max {vmax:.1e} V, divider {div_err:.1e} rel, TF plate {tf_err:.1e} V")
}

// ---------- 2 ----------

fn double_well(tilt_ev: f64) -> PotentialProfile1D {
    let (depth, a, w) = (0.01, 40.0, 15.0);
    let g = |x: f64, c: f64| (-(x - c).powi(2) / (2.0 * w * w)).exp();
    let x: Vec<f64> = (0..601).map(|i| -150.0 + 0.5 * i as f64).collect();
    let u = x.iter().map(|&x| -depth * (g(x, -a) + g(x, a)) + tilt_ev * x / (2.0 * a)).collect();
    PotentialProfile1D::new(x, u).unwrap()
}

/// Two lowest levels by dense diagonalisation of the same finite-difference operator.
fn dense_levels(p: &PotentialProfile1D, mass: f64) -> (f64, f64) {
    let dx = (p.x_nm[1] - p.x_nm[0]) * 1e-9;
    let t = HBAR * HBAR / (2.0 * mass * ELECTRON_MASS * dx * dx) / ELEMENTARY_CHARGE;
    let n = p.len() - 2;
    let h = DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
        0 => p.u_ev[i + 1] + 2.0 * t,
        1 => -t,
        _ => 0.0,
    });
    let mut e: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    e.sort_by(f64::total_cmp);
    (e[0], e[1])
}

fn tunnel_coupling() -> String {
    let mass = 0.19;
    let sym = double_well(0.0);
    let b = maximally_localized_basis(&solve_schrodinger_1d(&sym, mass, 3).unwrap()).unwrap();
    let tc = b.hamiltonian[0][1].abs();
    let (e0, e1) = dense_levels(&sym, mass);
    let rel = (tc - 0.5 * (e1 - e0)).abs() / tc;
    assert!(rel < 1e-3, "t_c {tc} eV vs half splitting {} eV", 0.5 * (e1 - e0));
    let mut worst: f64 = 0.0;
    for frac in [-1.0, -0.5, 0.25, 0.5, 1.0] {
        let eigs = solve_schrodinger_1d(&double_well(frac * tc), mass, 3).unwrap();
        let t = maximally_localized_basis(&eigs).unwrap().hamiltonian[0][1].abs();
        worst = worst.max((t - tc).abs() / tc);
    }
    assert!(worst < 0.05, "asymmetric t_c drifts by {worst:.3e}");
    format!("t_c = {:.3} GHz, symmetric error {rel:.1e}, worst detuned drift {worst:.1e} rel", tc * 2.417989242e5)
}

// ---------- 3 ----------

fn strategy_contrast() -> String {
    let dev = reference_device();
    let v: Vec<f64> = (0..=30).map(|k| 0.01 * k as f64).collect();
    let mut slopes = Vec::new();
    for s in [TuningStrategy::Conventional, TuningStrategy::Interchanged] {
        let curve = tunnel_coupling_sweep(&dev, s, "B3", &v, &SweepOptions::default()).unwrap();
        assert!(curve.is_monotone_increasing(), "{s}: t_c not monotone ({} flagged)", curve.flagged());
        slopes.push(slope_dec_per_volt(&curve, None).unwrap());
    }
    let ratio = slopes[1] / slopes[0];
    assert!(ratio >= 1.5, "slope ratio {ratio:.3}");
    format!("slopes {:.3} / {:.3} dec/V, ratio {ratio:.3}", slopes[0], slopes[1])
}

// ---------- 4 ----------

fn dcz_trace(j: f64, offsets: Vec<f64>, exchange: ExchangeModel) -> (Vec<f64>, Vec<f64>) {
    let s = SpinSystem::pair(50.0 * j, 1e4, 30.0, 5e6);
    let v = s.exchange[0].amplitude_for(j);
    let t: Vec<f64> = (0..160).map(|k| k as f64 * 25e-9).collect();
    let p = simulate_dcz(&s, 0, 1, v, &t, &DczOptions { offsets, exchange, ..Default::default() }).unwrap();
    (t, p)
}

fn dcz_law() -> String {
    let mut worst: f64 = 0.0;
    for model in [ExchangeModel::Secular, ExchangeModel::Heisenberg] {
        for j in [1e6f64, 4e6, 10e6] {
            let (t, p) = dcz_trace(j, vec![], model);
            let jf = extract_j_from_dcz(&fit_damped_sinusoid(&t, &p).unwrap());
            let rel = (jf - j).abs() / j;
            assert!(rel < 0.01, "{model:?} J = {j}: recovered {jf}");
            worst = worst.max(rel);
        }
    }
    let (_, base) = dcz_trace(4e6, vec![], ExchangeModel::Secular);
    let mut echo: f64 = 0.0;
    for offsets in [vec![10e6, 0.0], vec![0.0, -7e6], vec![3e6, 9.5e6]] {
        let (_, p) = dcz_trace(4e6, offsets, ExchangeModel::Secular);
        echo = echo.max(base.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    assert!(echo < 1e-6, "echo leaves {echo}");
    format!("worst relative J error {worst:.1e}, echo residue {echo:.1e}")
}

// ---------- 5 ----------

/// Target transition frequencies for control down / up from the exact 4×4 lab-frame spectrum.
fn oracle_branches(f1: f64, f2: f64, j: f64) -> (f64, f64) {
    let z = |up: bool| if up { 0.5 } else { -0.5 };
    let mut h = Matrix4::zeros();
    for s in 0..4usize {
        let (u1, u2) = (s & 1 == 1, s & 2 == 2);
        h[(s, s)] = f1 * z(u1) + f2 * z(u2) + j * (z(u1) * z(u2) - 0.25);
    }
    h[(1, 2)] = 0.5 * j;
    h[(2, 1)] = 0.5 * j;
    let eig = h.symmetric_eigen();
    let level = |basis: usize| {
        let k = (0..4).max_by(|&a, &b| eig.eigenvectors[(basis, a)].abs().total_cmp(&eig.eigenvectors[(basis, b)].abs())).unwrap();
        eig.eigenvalues[k]
    };
    (level(2) - level(0), level(3) - level(1))
}

fn spectroscopy() -> String {
    let mut worst: f64 = 0.0;
    for j in [1e6f64, 10e6, 100e6] {
        let rabi = (0.1 * j).min(0.5e6);
        let s = SpinSystem::pair(400e6, 1e4, 30.0, rabi);
        let v = s.exchange[0].amplitude_for(j);
        let (od, ou) = oracle_branches(s.qubits[0].larmor_hz, s.qubits[1].larmor_hz, j);
        let centre = 0.5 * (od + ou);
        let span = (ou - od).abs() + 6.0 * rabi;
        let n = (span / (0.05 * rabi)).ceil() as usize + 1;
        let f: Vec<f64> = (0..n).map(|k| centre - 0.5 * span + k as f64 * span / (n - 1) as f64).collect();
        let map = simulate_exchange_spectroscopy(&s, 0, 1, &f, &[v], &SpectroscopyOptions::default()).unwrap();
        let peaks = find_branches(&f, &map.p[0]);
        assert!(peaks.len() >= 2, "J = {j}: {} peaks", peaks.len());
        let split = (peaks[0] - peaks[1]).abs();
        let err = (split - (ou - od).abs()).abs();
        assert!(err < 0.1 * map.linewidth(), "J = {j}: split {split} vs oracle {}", (ou - od).abs());
        worst = worst.max(err / map.linewidth());
    }
    let dev = reference_device();
    let system = dev.spin().unwrap();
    let j = system.coupling(0, 1).unwrap().exchange_hz(0.28);
    assert!((80e6..=120e6).contains(&j), "J(0.28 V) = {j}");
    let (d, u) = branch_frequencies(system, 0, 1, 0.28).unwrap();
    format!("worst split error {worst:.3} linewidths, J(0.28 V) = {:.1} MHz, branch gap {:.1} MHz", j / 1e6, (u - d) / 1e6)
}

// ---------- 6 ----------

fn decades(a: f64, dec: f64) -> Vec<(f64, f64)> {
    (0..8).map(|k| 0.03 * k as f64).map(|v| (v, a * (LN_10 * dec * v).exp())).collect()
}

fn tunability() -> String {
    let fit = fit_exponential(&decades(1e5, 16.6), None).unwrap();
    assert!((fit.tunability_dec_per_v - 16.6).abs() < 1e-9, "{}", fit.tunability_dec_per_v);
    let measured = [("Q1-Q2", 16.6, 7.25), ("Q2-Q3", 11.4, 3.87), ("Q3-Q4", 15.4, 4.32)];
    let curves: Vec<PairCurve> = measured
        .iter()
        .flat_map(|&(p, i, c)| {
            [(TuningStrategy::Interchanged, i), (TuningStrategy::Conventional, c)]
                .map(|(strategy, d)| PairCurve { pair: p.into(), strategy, points: decades(2e5, d) })
        })
        .collect();
    let ratios: Vec<f64> = tunability_report(&curves, None).unwrap().ratios().iter().map(|r| (r * 100.0).round() / 100.0).collect();
    assert_eq!(ratios, vec![2.29, 2.95, 3.56]);
    let excess: Vec<f64> = lever_arm_comparison(&[1.75, 3.18, 2.71], &[2.29, 2.95, 3.56])
        .unwrap()
        .excess
        .iter()
        .map(|e| (e * 1000.0).round() / 1000.0)
        .collect();
    assert_eq!(excess, vec![1.309, 0.928, 1.314]);
    format!("16.6 dec/V error {:.1e}, ratios {ratios:?}, excess {excess:?}", (fit.tunability_dec_per_v - 16.6).abs())
}

// ---------- 7 ----------

fn readout() -> String {
    let f = readout_fidelity_from_snr(10.6).unwrap();
    assert!(f > 0.999, "F(10.6) = {f}");
    let mut worst: f64 = 0.0;
    for (k, snr) in [4.97, 6.54, 7.48, 10.6, 13.9].into_iter().enumerate() {
        let model = ReadoutModel::from_snr(snr).unwrap().with_seed(2024 + k as u64);
        let mut rng = model.rng(0);
        let odd = QuantumState::from_spins(&[true, false]);
        let shots = 100_000;
        let flips = (0..shots).filter(|_| parity_measure(&odd, 0, 1, &model, &mut rng).0 == ParityOutcome::Even).count();
        let p = readout_error_from_snr(snr).unwrap();
        let sigma = (shots as f64 * p * (1.0 - p)).sqrt().max(1.0);
        let z = (flips as f64 - shots as f64 * p).abs() / sigma;
        assert!(z <= 3.0, "snr {snr}: {flips} flips vs {:.2} expected", shots as f64 * p);
        worst = worst.max(z);
    }
    format!("F(10.6) = {f:.9}, worst deviation {worst:.2} sigma")
}

// ---------- 8 ----------

fn dotlab(dir: &Path, args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_dotlab")).current_dir(dir).env_remove("DOTLAB_SEED").args(args).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn determinism() -> String {
    let tmp = std::env::temp_dir().join(format!("dotlab-acceptance-{}", std::process::id()));
    let _ = fs::remove_dir_all(&tmp);
    fs::create_dir_all(&tmp).unwrap();
    let curve = "v_volts,j_hz\n0,1e5\n0.1,1e6\n0.2,1.2e7\n";
    fs::write(tmp.join("a.csv"), curve).unwrap();
    fs::write(tmp.join("b.csv"), "v_volts,j_hz\n0,1e5\n0.1,4e5\n0.2,1.5e6\n").unwrap();
    let runs: Vec<(&str, Vec<&str>)> = vec![
        ("potential", vec!["simulate-potential", "--nx", "128", "--nz", "64"]),
        ("tunnel", vec!["sweep-tunnel-coupling", "--nx", "200", "--nz", "80", "--points", "4", "--to", "0.15"]),
        ("stability", vec!["stability-diagram"]),
        ("rabi", vec!["rabi"]),
        ("rabi-shots", vec!["rabi", "--shots", "300", "--seed", "5"]),
        ("spectroscopy", vec!["exchange-spectroscopy", "--v-points", "3", "--f-points", "61"]),
        ("spectroscopy-shots", vec!["exchange-spectroscopy", "--v-points", "3", "--f-points", "61", "--shots", "100", "--seed", "6"]),
        ("dcz", vec!["dcz", "--amplitude", "0.2"]),
        ("dcz-shots", vec!["dcz", "--amplitude", "0.2", "--shots", "200", "--seed", "7"]),
        ("fit", vec!["fit-tunability", "--curve", "P:interchanged:a.csv", "--curve", "P:conventional:b.csv"]),
    ];
    let mut compared = 0;
    for (name, args) in &runs {
        for rep in ["1", "2"] {
            let dir = format!("{name}-{rep}");
            let mut a = args.clone();
            a.extend(["--output-dir", &dir]);
            dotlab(&tmp, &a);
        }
        for entry in fs::read_dir(tmp.join(format!("{name}-1"))).unwrap() {
            let file = entry.unwrap().file_name();
            if file == "manifest.json" {
                continue;
            }
            let a = fs::read(tmp.join(format!("{name}-1")).join(&file)).unwrap();
            let b = fs::read(tmp.join(format!("{name}-2")).join(&file)).unwrap();
            assert!(a == b, "{name}: {} differs between runs", file.to_string_lossy());
            compared += 1;
        }
    }
    dotlab(&tmp, &["report", "--tunability", "fit-1/tunability.json", "--output-dir", "report-1"]);
    dotlab(&tmp, &["report", "--tunability", "fit-1/tunability.json", "--output-dir", "report-2"]);
    for f in ["report.txt", "report.json"] {
        assert!(fs::read(tmp.join("report-1").join(f)).unwrap() == fs::read(tmp.join("report-2").join(f)).unwrap());
        compared += 1;
    }
    let _ = fs::remove_dir_all(&tmp);
    format!("{compared} output files byte-identical across {} commands", runs.len() + 1)
}

