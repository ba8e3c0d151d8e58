use proptest::prelude::*;

use super::*;
use crate::constants::VACUUM_PERMITTIVITY;
use crate::device::{reference_device, DeviceDescription, TuningStrategy};

const T1: f64 = 20.0;
const EPS1: f64 = 9.0;
const T2: f64 = 30.0;
const EPS2: f64 = 13.2;

fn parallel_plate(vg: f64) -> DeviceDescription {
    let json = format!(
        r#"{{
        "stack": [
            {{ "name": "well", "thickness": {T2}, "permittivity": {EPS2}, "kind": "quantum_well" }},
            {{ "name": "oxide", "thickness": {T1}, "permittivity": {EPS1}, "kind": "dielectric", "gate_level": 1 }}
        ],
        "gates": [ {{ "id": "G", "layer": 1, "x0": -100.0, "x1": 100.0 }} ],
        "strategy": "conventional",
        "voltages": {{ "G": {vg} }}
    }}"#
    );
    DeviceDescription::from_json_str(&json).unwrap()
}

fn plate_grid(vg: f64) -> SimulationGrid {
    build_grid(&parallel_plate(vg), GridSpec::new(64, 32).with_extent(-100.0, 100.0)).unwrap()
}

fn divider(vg: f64) -> f64 {
    vg * (T2 / EPS2) / (T1 / EPS1 + T2 / EPS2)
}

/// Interface potential of the plate capacitor with a Thomas-Fermi sheet, by bisection on
/// `g(V) = V - V_lin - σ_TF(V) / C_eff`, which is strictly increasing.
fn plate_bisection(vg: f64, tf: &ThomasFermi) -> f64 {
    let c_eff = VACUUM_PERMITTIVITY * (EPS1 / (T1 * 1e-9) + EPS2 / (T2 * 1e-9));
    let vlin = divider(vg);
    let g = |v: f64| v - vlin - tf.density(v) / c_eff;
    let (mut lo, mut hi) = (-2.0, 2.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn thomas_fermi_reference_value() {
    let tf = ThomasFermi::default();
    let s = thomas_fermi_density(0.01, &tf);
    assert!((s - -0.0025432624833582445).abs() < 1e-15, "{s}");
    assert_eq!(thomas_fermi_density(-0.1, &tf), 0.0);
    assert_eq!(thomas_fermi_density(0.0, &tf), 0.0);
}

#[test]
fn zero_voltages_give_zero_field() {
    let dev = reference_device();
    let grid = build_grid(&dev, GridSpec::new(128, 64)).unwrap().with_uniform_voltage(0.0);
    let f = solve_poisson(&grid, None).unwrap();
    assert!(f.values().iter().all(|v| v.abs() < 1e-12));
    let p = potential_profile(&f);
    assert!(p.u_ev.iter().all(|u| u.abs() < 1e-12));
}

#[test]
fn parallel_plate_divider() {
    let grid = plate_grid(0.3);
    let f = solve_poisson(&grid, None).unwrap();
    let expect = divider(0.3);
    for v in f.two_deg_row() {
        assert!(((v - expect) / expect).abs() < 1e-3, "{v} vs {expect}");
    }
    let p = potential_profile(&f);
    for u in &p.u_ev {
        assert!((u + expect).abs() < 1e-3 * expect);
    }
    assert!(f.residual(None) < 1e-10);
}

#[test]
fn parallel_plate_thomas_fermi_matches_bisection() {
    let tf = ThomasFermi::default();
    let grid = plate_grid(0.3);
    let oracle = plate_bisection(0.3, &tf);
    assert!(oracle > 0.0 && oracle < divider(0.3));
    for settings in [SolverSettings::default(), SolverSettings::damped(0.05)] {
        let sol = solve_selfconsistent(&grid, &settings).unwrap();
        for v in sol.field.two_deg_row() {
            assert!((v - oracle).abs() < 1e-5, "{:?}: {v} vs {oracle}", settings.scheme);
        }
        assert!(sol.charge.sigma.iter().all(|s| *s < 0.0));
        assert!(sol.field.residual(Some(&sol.charge)) < 1e-8);
    }
}

#[test]
fn overdamped_plate_mixing_reports_oscillation() {
    // The plate's quantum-to-geometric capacitance ratio is about 32, so λ = 0.1
    // overshoots: the linearised update factor is 0.9 - 3.2 < -1.
    let grid = plate_grid(0.3);
    let err = solve_selfconsistent(&grid, &SolverSettings::damped(0.1)).unwrap_err();
    assert!(matches!(err, ElectrostaticsError::Oscillation { .. }), "{err}");
}

#[test]
fn depleted_device_converges_in_one_iteration() {
    let dev = reference_device();
    let grid = build_grid(&dev, GridSpec::new(128, 64)).unwrap().with_uniform_voltage(-1.0);
    let free = solve_poisson(&grid, None).unwrap();
    for settings in [SolverSettings::default(), SolverSettings::damped(0.1)] {
        let sol = solve_selfconsistent(&grid, &settings).unwrap();
        assert_eq!(sol.iterations, 1);
        assert!(sol.charge.sigma.iter().all(|s| *s == 0.0));
        assert_eq!(sol.field.values(), free.values());
    }
}

#[test]
fn reference_grid_aligns_two_deg_row() {
    let dev = reference_device();
    let grid = build_grid(&dev, GridSpec::default()).unwrap();
    assert!(!grid.gates_snapped());
    assert!((grid.z(grid.two_deg_row()) - dev.two_deg_height()).abs() < 1e-9);
    let depth = grid.z(grid.nz() - 1) - grid.z(grid.two_deg_row());
    assert!(depth >= dev.two_deg_depth() - 1e-9);
    assert!((dev.two_deg_depth() - 101.0).abs() < 1e-12);
    for g in ["S_L", "G2_3", "G3_2"] {
        let nodes = grid.gate_nodes(g);
        assert!(!nodes.is_empty());
        let gate = &dev.gates()[dev.find_gate(g).unwrap()];
        let h = dev.gate_height(gate.metal_layer).unwrap();
        assert!(nodes.iter().any(|&(_, j)| (grid.z(j) - h).abs() < 1e-9));
        for (i, j) in nodes {
            assert!(grid.z(j) >= h - 1e-9 && grid.z(j) <= h + gate.thickness + grid.dz());
            let half = 0.5 * grid.dx() + 1e-9;
            assert!(grid.x(i) >= gate.span.x0 - half && grid.x(i) <= gate.span.x1 + half);
            assert_eq!(grid.dirichlet_value(i, j), dev.voltages().get(g));
        }
    }
    for i in 0..grid.nx() {
        assert_eq!(grid.dirichlet_value(i, 0), Some(0.0));
    }
}

#[test]
fn uniform_stack_has_constant_permittivity() {
    let json = r#"{
        "stack": [
            { "name": "a", "thickness": 50.0, "permittivity": 11.7, "kind": "substrate" },
            { "name": "b", "thickness": 10.0, "permittivity": 11.7, "kind": "quantum_well" },
            { "name": "c", "thickness": 40.0, "permittivity": 11.7, "kind": "dielectric", "gate_level": 1 }
        ],
        "gates": [ { "id": "G", "layer": 1, "x0": 0.0, "x1": 40.0 } ],
        "strategy": "conventional",
        "voltages": { "G": 0.1 }
    }"#;
    let dev = DeviceDescription::from_json_str(json).unwrap();
    let grid = build_grid(&dev, GridSpec::new(64, 40)).unwrap();
    for i in 0..grid.nx() {
        for j in 0..grid.nz() {
            assert_eq!(grid.permittivity(i, j), 11.7);
        }
    }
}

#[test]
fn grid_errors() {
    let dev = reference_device();
    assert!(matches!(build_grid(&dev, GridSpec::new(63, 160)), Err(ElectrostaticsError::Resolution(_))));
    assert!(matches!(build_grid(&dev, GridSpec::new(400, 31)), Err(ElectrostaticsError::Resolution(_))));
    let err = build_grid(&dev, GridSpec::new(128, 64).with_extent(-50.0, 400.0)).unwrap_err();
    assert!(matches!(err, ElectrostaticsError::GateOutsideDomain { ref gate, .. } if gate == "S_L"), "{err}");
    let plate = parallel_plate(0.1);
    assert!(build_grid(&plate, GridSpec::new(64, 32).with_extent(-50.0, 50.0)).is_err());
}

#[test]
fn grids_share_geometry_across_voltages_and_strategies() {
    let dev = reference_device();
    let a = build_grid(&dev, GridSpec::new(128, 64)).unwrap();
    let other = dev.with_strategy(TuningStrategy::Conventional).unwrap();
    let b = build_grid(&other, GridSpec::new(128, 64)).unwrap();
    assert!(a.shares_geometry(&b));
    assert_ne!(a.gate_voltages(), b.gate_voltages());
}

#[test]
fn invalid_settings_rejected() {
    let grid = plate_grid(0.1);
    for s in [
        SolverSettings { tolerance: 0.0, ..Default::default() },
        SolverSettings { damping: 0.0, ..Default::default() },
        SolverSettings { damping: 1.5, ..Default::default() },
        SolverSettings { max_iterations: 0, ..Default::default() },
    ] {
        assert!(matches!(solve_selfconsistent(&grid, &s), Err(ElectrostaticsError::Settings(_))));
    }
}

#[test]
fn iteration_cap_reports_last_residual() {
    let grid = plate_grid(0.3);
    let s = SolverSettings { max_iterations: 3, ..SolverSettings::damped(0.02) };
    match solve_selfconsistent(&grid, &s) {
        Err(ElectrostaticsError::NonConvergence { iterations, residual }) => {
            assert_eq!(iterations, 3);
            assert!(residual > 0.0);
        }
        other => panic!("{other:?}"),
    }
}

fn small_reference_grid() -> SimulationGrid {
    build_grid(&reference_device(), GridSpec::new(96, 48)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn superposition(
        va in proptest::collection::vec(-1.0f64..1.0, 11),
        vb in proptest::collection::vec(-1.0f64..1.0, 11),
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
    ) {
        let grid = small_reference_grid();
        let fa = solve_poisson(&grid.with_gate_voltages(va.clone()).unwrap(), None).unwrap();
        let fb = solve_poisson(&grid.with_gate_voltages(vb.clone()).unwrap(), None).unwrap();
        let mix: Vec<f64> = va.iter().zip(&vb).map(|(x, y)| a * x + b * y).collect();
        let fm = solve_poisson(&grid.with_gate_voltages(mix).unwrap(), None).unwrap();
        for k in 0..fm.values().len() {
            let expect = a * fa.values()[k] + b * fb.values()[k];
            prop_assert!((fm.values()[k] - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn maximum_principle(v in proptest::collection::vec(-1.0f64..1.0, 11)) {
        let grid = small_reference_grid().with_gate_voltages(v.clone()).unwrap();
        let f = solve_poisson(&grid, None).unwrap();
        let lo = v.iter().copied().fold(0.0, f64::min);
        let hi = v.iter().copied().fold(0.0, f64::max);
        for x in f.values() {
            prop_assert!(*x >= lo - 1e-12 && *x <= hi + 1e-12);
        }
    }

    #[test]
    fn thomas_fermi_monotone_and_continuous(a in -0.5f64..0.5, d in 0.0f64..0.5, ef in -0.05f64..0.05) {
        let tf = ThomasFermi { fermi_energy_ev: ef, ..Default::default() };
        let (x, y) = (tf.density(a), tf.density(a + d));
        prop_assert!(y <= x);
        prop_assert!(x <= 0.0);
        prop_assert!((x - y).abs() <= tf.quantum_capacitance() * d * (1.0 + 1e-12));
    }
}
