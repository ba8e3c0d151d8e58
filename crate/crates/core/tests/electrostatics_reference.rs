//! Reference-device checks for the self-consistent electrostatics.

use dotlab::device::{reference_device, DeviceDescription, GateRole, TuningStrategy};
use dotlab::electrostatics::{
    build_grid, potential_profile, solve_selfconsistent, GridSpec, PotentialProfile1D, SolverSettings,
};

const STRATEGIES: [TuningStrategy; 2] = [TuningStrategy::Conventional, TuningStrategy::Interchanged];

fn device(s: TuningStrategy) -> DeviceDescription {
    reference_device().with_strategy(s).unwrap()
}

/// Centres of the plungers on either side of B3.
fn pair_centres(dev: &DeviceDescription) -> (f64, f64) {
    let lay = dev.layout();
    let (l, r) = lay.plungers_around(lay.find("B3").unwrap()).unwrap();
    (lay.gates()[l].span.center(), lay.gates()[r].span.center())
}

/// Barrier maximum between the pair minus the deeper of the two well minima, eV.
fn barrier_height(p: &PotentialProfile1D, (xl, xr): (f64, f64)) -> f64 {
    let half = 0.25 * (xr - xl);
    let ul = p.value_at(p.argmin_in(xl - half, xl + half).unwrap());
    let ur = p.value_at(p.argmin_in(xr - half, xr + half).unwrap());
    p.max_in(xl, xr).unwrap() - ul.min(ur)
}

fn profile(dev: &DeviceDescription, spec: GridSpec) -> PotentialProfile1D {
    let grid = build_grid(dev, spec).unwrap();
    potential_profile(&solve_selfconsistent(&grid, &SolverSettings::default()).unwrap().field)
}

#[test]
fn charge_sits_under_plungers_not_screening_gates() {
    for s in STRATEGIES {
        let dev = device(s);
        let grid = build_grid(&dev, GridSpec::default()).unwrap();
        let sol = solve_selfconsistent(&grid, &SolverSettings::default()).unwrap();
        let sigma = &sol.charge.sigma;
        let lay = dev.layout();
        for (k, g) in lay.gates().iter().enumerate() {
            match lay.role_of(k) {
                GateRole::Plunger => {
                    let i = (0..grid.nx()).min_by(|&a, &b| (grid.x(a) - g.span.center()).abs().total_cmp(&(grid.x(b) - g.span.center()).abs())).unwrap();
                    assert!(sigma[i] < 0.0, "{s}: no charge under plunger {}", g.id);
                }
                GateRole::Screening => {
                    for i in (0..grid.nx()).filter(|&i| g.span.contains(grid.x(i))) {
                        assert_eq!(sigma[i], 0.0, "{s}: charge under screening gate {} at {}", g.id, grid.x(i));
                    }
                }
                GateRole::Barrier => {}
            }
        }
    }
}

#[test]
fn interchanged_minima_lie_under_plungers() {
    let dev = device(TuningStrategy::Interchanged);
    let p = profile(&dev, GridSpec::default());
    let lay = dev.layout();
    let (l, r) = lay.plungers_around(lay.find("B3").unwrap()).unwrap();
    let (xl, xr) = pair_centres(&dev);
    let mid = 0.5 * (xl + xr);
    let left = p.argmin_in(xl - 0.5 * (mid - xl), mid).unwrap();
    let right = p.argmin_in(mid, xr + 0.5 * (xr - mid)).unwrap();
    assert!(lay.gates()[l].span.contains(left), "left minimum at {left}");
    assert!(lay.gates()[r].span.contains(right), "right minimum at {right}");
    assert!(p.max_in(left, right).unwrap() > p.value_at(left).max(p.value_at(right)));
}

#[test]
fn raising_b3_lowers_the_barrier_monotonically() {
    for s in STRATEGIES {
        let dev = device(s);
        let base = build_grid(&dev, GridSpec::default()).unwrap();
        let gate = dev.layout().gates()[dev.layout().find("B3").unwrap()].id.clone();
        let v0 = dev.voltages().get(&gate).unwrap();
        let centres = pair_centres(&dev);
        let heights: Vec<f64> = (0..=6)
            .map(|k| {
                let d = dev.with_gate_voltage(&gate, v0 + 0.05 * k as f64).unwrap();
                let grid = base.with_voltages_of(&d).unwrap();
                let sol = solve_selfconsistent(&grid, &SolverSettings::default()).unwrap();
                barrier_height(&potential_profile(&sol.field), centres)
            })
            .collect();
        assert!(heights.windows(2).all(|w| w[1] < w[0]), "{s}: {heights:?}");
    }
}

#[test]
fn grid_refinement_changes_barrier_by_under_two_percent() {
    for s in STRATEGIES {
        let dev = device(s);
        let centres = pair_centres(&dev);
        let coarse = barrier_height(&profile(&dev, GridSpec::default()), centres);
        let fine = barrier_height(&profile(&dev, GridSpec::default().doubled()), centres);
        let change = (fine - coarse).abs() / coarse;
        println!("{s}: barrier {:.4} meV -> {:.4} meV ({:.2}%)", coarse * 1e3, fine * 1e3, change * 100.0);
        assert!(change < 0.02, "{s}: {:.2}%", change * 100.0);
    }
}

fn assert_contracting(history: &[f64]) {
    assert!(history.len() > 4);
    for w in history[3..].windows(2) {
        assert!(w[1] < w[0], "residual rose from {} to {}", w[0], w[1]);
    }
}

#[test]
#[ignore = "fails: the sheet quantum capacitance is ~100x the gate capacitance, so λ = 0.1 overshoots"]
fn damped_mixing_contracts_at_default_damping() {
    for s in STRATEGIES {
        let grid = build_grid(&device(s), GridSpec::default()).unwrap();
        let sol = solve_selfconsistent(&grid, &SolverSettings::damped(0.1)).unwrap();
        assert_contracting(&sol.history);
    }
}

#[test]
fn damped_mixing_converges_to_newton_solution_at_small_damping() {
    for s in STRATEGIES {
        let grid = build_grid(&device(s), GridSpec::default()).unwrap();
        let settings = SolverSettings { max_iterations: 2000, ..SolverSettings::damped(0.01) };
        let damped = solve_selfconsistent(&grid, &settings).unwrap();
        let newton = solve_selfconsistent(&grid, &SolverSettings::default()).unwrap();
        let diff = damped
            .field
            .two_deg_row()
            .iter()
            .zip(newton.field.two_deg_row())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-4, "{s}: damped and Newton differ by {diff} V");
    }
}
