use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::grid::SimulationGrid;
use super::{ElectrostaticsError, ThomasFermi};
use crate::constants::{NM, VACUUM_PERMITTIVITY};

/// Updates without progress after which damped mixing is declared oscillating.
const OSCILLATION_WINDOW: usize = 10;
const MAX_BACKTRACKS: usize = 40;

/// Sheet charge density (C/m²) at each node of the 2DEG row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargeSheet {
    pub sigma: Vec<f64>,
}

impl ChargeSheet {
    pub fn zeros(n: usize) -> Self {
        Self { sigma: vec![0.0; n] }
    }

    /// Carriers per unit length of channel (1/m), integrating over the row.
    pub fn line_density(&self, dx_nm: f64) -> f64 {
        let n = self.sigma.len();
        self.sigma
            .iter()
            .enumerate()
            .map(|(i, s)| if i == 0 || i + 1 == n { 0.5 * s } else { *s })
            .sum::<f64>()
            * dx_nm
            * NM
            / -crate::constants::ELEMENTARY_CHARGE
    }
}

/// Electrostatic potential (V) on every grid node.
#[derive(Debug, Clone)]
pub struct PotentialField {
    grid: SimulationGrid,
    values: Vec<f64>,
}

impl PotentialField {
    pub fn grid(&self) -> &SimulationGrid {
        &self.grid
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.geom.idx(i, j)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Potential along the 2DEG row.
    pub fn two_deg_row(&self) -> Vec<f64> {
        let j = self.grid.two_deg_row();
        (0..self.grid.nx()).map(|i| self.get(i, j)).collect()
    }

    /// Largest violation of the discrete conservation law at free nodes, in units of the RHS.
    pub fn residual(&self, charge: Option<&ChargeSheet>) -> f64 {
        let g = &self.grid.geom;
        let mut flux = vec![0.0; g.nx * g.nz];
        let mut add = |p: usize, q: usize, c: f64| {
            let d = c * (self.values[p] - self.values[q]);
            flux[p] += d;
            flux[q] -= d;
        };
        for i in 0..g.nx {
            for j in 0..g.nz {
                let k = g.idx(i, j);
                if i + 1 < g.nx {
                    add(k, g.idx(i + 1, j), coupling_x(&self.grid, j));
                }
                if j + 1 < g.nz {
                    add(k, g.idx(i, j + 1), coupling_z(&self.grid, i, j));
                }
            }
        }
        let mut worst: f64 = 0.0;
        for i in 0..g.nx {
            for j in 0..g.nz {
                if self.grid.is_dirichlet(i, j) {
                    continue;
                }
                let mut src = 0.0;
                if let (Some(c), true) = (charge, j == g.row2) {
                    src = c.sigma[i] * g.width(i) * NM / VACUUM_PERMITTIVITY;
                }
                worst = worst.max((flux[g.idx(i, j)] - src).abs());
            }
        }
        worst
    }
}

fn coupling_x(grid: &SimulationGrid, j: usize) -> f64 {
    let g = &grid.geom;
    let mut h = 0.0;
    if j > 0 {
        h += 0.5 * g.dz * g.eps_arith[j - 1];
    }
    if j + 1 < g.nz {
        h += 0.5 * g.dz * g.eps_arith[j];
    }
    h / g.dx
}

fn coupling_z(grid: &SimulationGrid, i: usize, j: usize) -> f64 {
    let g = &grid.geom;
    g.eps_harm[j] * g.width(i) / g.dz
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixingScheme {
    /// Newton iteration on the sheet charge with the exact linear response of the 2DEG row.
    Newton,
    /// `σ ← (1-λ) σ + λ σ_TF(V)` with a full Poisson solve per step.
    DampedMixing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    /// Convergence threshold on the largest 2DEG-row potential change between iterations, V.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Mixing fraction λ for [`MixingScheme::DampedMixing`].
    pub damping: f64,
    pub scheme: MixingScheme,
    pub physics: ThomasFermi,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_iterations: 500,
            damping: 0.1,
            scheme: MixingScheme::Newton,
            physics: ThomasFermi::default(),
        }
    }
}

impl SolverSettings {
    pub fn damped(damping: f64) -> Self {
        Self { scheme: MixingScheme::DampedMixing, damping, ..Self::default() }
    }

    fn validate(&self) -> Result<(), ElectrostaticsError> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(ElectrostaticsError::Settings(format!("tolerance {} must be positive", self.tolerance)));
        }
        if self.max_iterations == 0 {
            return Err(ElectrostaticsError::Settings("max_iterations must be at least 1".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(ElectrostaticsError::Settings(format!("damping {} must lie in (0, 1]", self.damping)));
        }
        let p = &self.physics;
        if !(p.valley_degeneracy > 0.0 && p.mass_ratio > 0.0 && p.fermi_energy_ev.is_finite()) {
            return Err(ElectrostaticsError::Settings("Thomas-Fermi parameters must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SelfConsistentSolution {
    pub field: PotentialField,
    pub charge: ChargeSheet,
    pub iterations: usize,
    /// Final potential change on the 2DEG row, V.
    pub residual: f64,
    /// Potential change after each iteration.
    pub history: Vec<f64>,
}

/// Solve Poisson's equation with fixed electrode voltages and an optional 2DEG sheet charge.
pub fn solve_poisson(grid: &SimulationGrid, charge: Option<&ChargeSheet>) -> Result<PotentialField, ElectrostaticsError> {
    let g = &grid.geom;
    if let Some(c) = charge {
        if c.sigma.len() != g.nx {
            return Err(ElectrostaticsError::ChargeLength { expected: g.nx, got: c.sigma.len() });
        }
    }
    let factor = g.factor()?;
    let mut rhs = vec![0.0; g.nx * g.nz];
    for i in 0..g.nx {
        for j in 0..g.nz {
            if let Some(v) = grid.dirichlet_value(i, j) {
                rhs[g.idx(i, j)] = v;
            }
        }
    }
    for &(p, q, c) in g.couplings() {
        rhs[p] += c * rhs_dirichlet(grid, q);
    }
    if let Some(c) = charge {
        for (i, s) in c.sigma.iter().enumerate() {
            rhs[g.idx(i, g.row2)] += s * g.width(i) * NM / VACUUM_PERMITTIVITY;
        }
    }
    factor.solve_in_place(&mut rhs);
    Ok(PotentialField { grid: grid.clone(), values: rhs })
}

fn rhs_dirichlet(grid: &SimulationGrid, k: usize) -> f64 {
    let nz = grid.geom.nz;
    grid.dirichlet_value(k / nz, k % nz).expect("coupling targets a Dirichlet node")
}

/// Self-consistent Thomas-Fermi charge and potential.
pub fn solve_selfconsistent(
    grid: &SimulationGrid,
    settings: &SolverSettings,
) -> Result<SelfConsistentSolution, ElectrostaticsError> {
    settings.validate()?;
    match settings.scheme {
        MixingScheme::Newton => newton(grid, settings),
        MixingScheme::DampedMixing => damped(grid, settings),
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn damped(grid: &SimulationGrid, s: &SolverSettings) -> Result<SelfConsistentSolution, ElectrostaticsError> {
    let nx = grid.nx();
    let lambda = s.damping;
    let mut sigma = vec![0.0; nx];
    let mut field = solve_poisson(grid, None)?;
    let mut u = field.two_deg_row();
    let mut history = Vec::new();
    for k in 1..=s.max_iterations {
        for (sg, v) in sigma.iter_mut().zip(&u) {
            *sg = (1.0 - lambda) * *sg + lambda * s.physics.density(*v);
        }
        let sheet = ChargeSheet { sigma: sigma.clone() };
        field = solve_poisson(grid, Some(&sheet))?;
        let u_new = field.two_deg_row();
        let r = max_abs_diff(&u_new, &u);
        u = u_new;
        if !r.is_finite() {
            return Err(ElectrostaticsError::Oscillation { steps: k, residual: r });
        }
        history.push(r);
        if r < s.tolerance {
            return Ok(SelfConsistentSolution { field, charge: sheet, iterations: k, residual: r, history });
        }
        // No step in the last window got below where the window started.
        let h = history.len();
        if h > OSCILLATION_WINDOW && history[h - OSCILLATION_WINDOW..].iter().all(|&x| x >= history[h - OSCILLATION_WINDOW - 1]) {
            return Err(ElectrostaticsError::Oscillation { steps: OSCILLATION_WINDOW, residual: r });
        }
    }
    Err(ElectrostaticsError::NonConvergence {
        iterations: s.max_iterations,
        residual: history.last().copied().unwrap_or(f64::NAN),
    })
}

/// Row potential `u_lin + R σ` using cached response columns.
fn row_potential(grid: &SimulationGrid, u_lin: &[f64], sigma: &[f64]) -> Result<Vec<f64>, ElectrostaticsError> {
    let mut u = u_lin.to_vec();
    for (m, &s) in sigma.iter().enumerate() {
        if s != 0.0 {
            let col = grid.geom.row_response(m)?;
            for (ui, c) in u.iter_mut().zip(col.iter()) {
                *ui += c * s;
            }
        }
    }
    Ok(u)
}

fn tf_residual(physics: &ThomasFermi, sigma: &[f64], u: &[f64]) -> Vec<f64> {
    sigma.iter().zip(u).map(|(s, v)| s - physics.density(*v)).collect()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Semismooth Newton on `F(σ) = σ - σ_TF(u_lin + R σ)`.
fn newton(grid: &SimulationGrid, s: &SolverSettings) -> Result<SelfConsistentSolution, ElectrostaticsError> {
    let nx = grid.nx();
    let cq = s.physics.quantum_capacitance();
    let ef = s.physics.fermi_energy_ev;
    let u_lin = solve_poisson(grid, None)?.two_deg_row();
    let mut sigma = vec![0.0; nx];
    let mut u = u_lin.clone();
    let mut f = tf_residual(&s.physics, &sigma, &u);
    let mut history = Vec::new();

    for k in 1..=s.max_iterations {
        let active: Vec<usize> = (0..nx).filter(|&i| u[i] + ef > 0.0).collect();
        let mut step = vec![0.0; nx];
        for i in 0..nx {
            if u[i] + ef <= 0.0 {
                step[i] = -sigma[i];
            }
        }
        if !active.is_empty() {
            // (I + C_q R_AA) Δσ_A = -F_A - C_q R_AI Δσ_I
            let na = active.len();
            let cols: Vec<_> = active.iter().map(|&m| grid.geom.row_response(m)).collect::<Result<_, _>>()?;
            let mut jac = DMatrix::<f64>::identity(na, na);
            for (b, col) in cols.iter().enumerate() {
                for (a, &i) in active.iter().enumerate() {
                    jac[(a, b)] += cq * col[i];
                }
            }
            let mut cross = vec![0.0; nx];
            for m in 0..nx {
                if step[m] != 0.0 {
                    let col = grid.geom.row_response(m)?;
                    for i in 0..nx {
                        cross[i] += col[i] * step[m];
                    }
                }
            }
            let rhs = DVector::from_iterator(na, active.iter().map(|&i| -f[i] - cq * cross[i]));
            let sol = jac.lu().solve(&rhs).ok_or(ElectrostaticsError::NotPositiveDefinite)?;
            for (a, &i) in active.iter().enumerate() {
                step[i] = sol[a];
            }
        }

        let f_norm = inf_norm(&f);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<f64> = sigma.iter().zip(&step).map(|(a, d)| a + t * d).collect();
            let u_t = row_potential(grid, &u_lin, &trial)?;
            let f_t = tf_residual(&s.physics, &trial, &u_t);
            if inf_norm(&f_t) <= (1.0 - 1e-4 * t) * f_norm || f_norm == 0.0 {
                accepted = Some((trial, u_t, f_t));
                break;
            }
            t *= 0.5;
        }
        let Some((trial, u_t, f_t)) = accepted else {
            return Err(ElectrostaticsError::NonConvergence {
                iterations: k,
                residual: history.last().copied().unwrap_or(f64::NAN),
            });
        };
        let r = max_abs_diff(&u_t, &u);
        sigma = trial;
        u = u_t;
        f = f_t;
        history.push(r);
        if r < s.tolerance {
            let charge = ChargeSheet { sigma };
            let field = solve_poisson(grid, Some(&charge))?;
            return Ok(SelfConsistentSolution { field, charge, iterations: k, residual: r, history });
        }
    }
    Err(ElectrostaticsError::NonConvergence {
        iterations: s.max_iterations,
        residual: history.last().copied().unwrap_or(f64::NAN),
    })
}
