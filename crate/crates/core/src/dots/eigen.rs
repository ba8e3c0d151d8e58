use nalgebra::DMatrix;
use serde::Serialize;

use super::DotsError;
use crate::constants::{ELECTRON_MASS, ELEMENTARY_CHARGE, HBAR, NM};
use crate::electrostatics::PotentialProfile1D;

const INVERSE_STEPS: usize = 4;
const RESIDUAL_TOLERANCE: f64 = 1e-9;

/// Lowest eigenpairs of the single-particle Hamiltonian on a 1D profile.
///
/// Wavefunctions are sampled on `x_nm` (zero at the hard-wall end points) and
/// normalised so that `Σ ψ² dx = 1` with `dx` in nm.
#[derive(Debug, Clone, Serialize)]
pub struct EigenSolution {
    pub x_nm: Vec<f64>,
    pub potential_ev: Vec<f64>,
    pub energies_ev: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl EigenSolution {
    pub fn dx(&self) -> f64 {
        (self.x_nm[self.x_nm.len() - 1] - self.x_nm[0]) / (self.x_nm.len() - 1) as f64
    }

    pub fn overlap(&self, a: usize, b: usize) -> f64 {
        self.states[a].iter().zip(&self.states[b]).map(|(p, q)| p * q).sum::<f64>() * self.dx()
    }
}

/// Kinetic hopping `ħ² / (2 m* dx²)` in eV.
pub fn hopping_ev(mass_ratio: f64, dx_nm: f64) -> f64 {
    HBAR * HBAR / (2.0 * mass_ratio * ELECTRON_MASS * (dx_nm * NM).powi(2)) / ELEMENTARY_CHARGE
}

/// Number of eigenvalues of the tridiagonal matrix below `x`.
fn sturm_count(d: &[f64], off: f64, x: f64) -> usize {
    let tiny = f64::MIN_POSITIVE.sqrt();
    let mut count = 0;
    let mut q = 1.0;
    for (i, &di) in d.iter().enumerate() {
        q = if i == 0 { di - x } else { (di - x) - off * off / q };
        if q.abs() < tiny {
            q = -tiny;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Solve `(T - s I) y = b` for symmetric tridiagonal `T` (diagonal `d`, constant
/// off-diagonal `off`) by elimination with partial pivoting.
fn shifted_solve(d: &[f64], off: f64, s: f64, b: &mut [f64], tiny: f64) {
    let n = d.len();
    let mut dd: Vec<f64> = d.iter().map(|x| x - s).collect();
    let mut du = vec![off; n.saturating_sub(1)];
    let mut dl = vec![off; n.saturating_sub(1)];
    let mut du2 = vec![0.0; n.saturating_sub(2)];
    let mut swapped = vec![false; n.saturating_sub(1)];
    for i in 0..n - 1 {
        if dd[i].abs() >= dl[i].abs() {
            if dd[i] == 0.0 {
                dd[i] = tiny;
            }
            let f = dl[i] / dd[i];
            dl[i] = f;
            dd[i + 1] -= f * du[i];
        } else {
            let f = dd[i] / dl[i];
            dd[i] = dl[i];
            dl[i] = f;
            let t = du[i];
            du[i] = dd[i + 1];
            dd[i + 1] = t - f * dd[i + 1];
            if i + 2 < n {
                du2[i] = du[i + 1];
                du[i + 1] = -f * du[i + 1];
            }
            swapped[i] = true;
        }
    }
    if dd[n - 1] == 0.0 {
        dd[n - 1] = tiny;
    }
    for i in 0..n - 1 {
        if swapped[i] {
            let t = b[i];
            b[i] = b[i + 1];
            b[i + 1] = t - dl[i] * b[i];
        } else {
            b[i + 1] -= dl[i] * b[i];
        }
    }
    b[n - 1] /= dd[n - 1];
    if n > 1 {
        b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / dd[n - 2];
    }
    for i in (0..n.saturating_sub(2)).rev() {
        b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / dd[i];
    }
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

fn apply(d: &[f64], off: f64, v: &[f64]) -> Vec<f64> {
    let n = d.len();
    (0..n)
        .map(|i| {
            let mut y = d[i] * v[i];
            if i > 0 {
                y += off * v[i - 1];
            }
            if i + 1 < n {
                y += off * v[i + 1];
            }
            y
        })
        .collect()
}

/// Lowest `k` eigenpairs of `-(ħ²/2m*) d²/dx² + U(x)` with `ψ = 0` at both ends of the profile.
///
/// Eigenvalues are bracketed by Sturm-sequence bisection, vectors come from
/// inverse iteration and a final Rayleigh-Ritz step on the computed subspace.
pub fn solve_schrodinger_1d(
    profile: &PotentialProfile1D,
    mass_ratio: f64,
    k: usize,
) -> Result<EigenSolution, DotsError> {
    let n_all = profile.len();
    if n_all < 3 {
        return Err(DotsError::Grid("profile needs at least three nodes".into()));
    }
    if !(mass_ratio > 0.0) {
        return Err(DotsError::Grid(format!("effective mass ratio {mass_ratio} must be positive")));
    }
    let n = n_all - 2;
    if k == 0 || k > n {
        return Err(DotsError::TooManyStates { requested: k, available: n });
    }
    let dx = profile.dx();
    let t = hopping_ev(mass_ratio, dx);
    let d: Vec<f64> = profile.u_ev[1..n_all - 1].iter().map(|u| u + 2.0 * t).collect();
    let off = -t;

    let lo0 = d.iter().copied().fold(f64::INFINITY, f64::min) - 2.0 * t;
    let hi0 = d.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 2.0 * t;
    let scale = lo0.abs().max(hi0.abs()).max(t);

    let mut values = Vec::with_capacity(k);
    for m in 0..k {
        let (mut lo, mut hi) = (lo0, hi0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if sturm_count(&d, off, mid) > m {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        values.push(0.5 * (lo + hi));
    }

    let tiny = f64::EPSILON * scale;
    let mut vecs: Vec<Vec<f64>> = Vec::with_capacity(k);
    for (m, &lam) in values.iter().enumerate() {
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.37 * ((i * (m + 1)) as f64 * 0.61).sin()).collect();
        normalize(&mut v);
        for _ in 0..INVERSE_STEPS {
            shifted_solve(&d, off, lam, &mut v, tiny);
            for prev in &vecs {
                let c: f64 = prev.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(prev).for_each(|(x, p)| *x -= c * p);
            }
            normalize(&mut v);
        }
        vecs.push(v);
    }

    // Rayleigh-Ritz on span(vecs)
    let tv: Vec<Vec<f64>> = vecs.iter().map(|v| apply(&d, off, v)).collect();
    let h = DMatrix::from_fn(k, k, |a, b| vecs[a].iter().zip(&tv[b]).map(|(x, y)| x * y).sum::<f64>());
    let h = 0.5 * (&h + h.transpose());
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let norm = dx.sqrt();
    let mut energies = Vec::with_capacity(k);
    let mut states = Vec::with_capacity(k);
    for &c in &order {
        let lam = eig.eigenvalues[c];
        let mut v = vec![0.0; n];
        for (a, va) in vecs.iter().enumerate() {
            let w = eig.eigenvectors[(a, c)];
            v.iter_mut().zip(va).for_each(|(x, y)| *x += w * y);
        }
        normalize(&mut v);
        let r = apply(&d, off, &v).iter().zip(&v).map(|(y, x)| (y - lam * x).abs()).fold(0.0, f64::max);
        if !(r <= RESIDUAL_TOLERANCE * scale) {
            return Err(DotsError::EigenNonConvergence { state: energies.len(), residual: r });
        }
        // Fix the sign: largest-magnitude sample positive.
        let big = v.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap_or(1.0);
        let sign = if big < 0.0 { -1.0 } else { 1.0 };
        let mut full = Vec::with_capacity(n_all);
        full.push(0.0);
        full.extend(v.iter().map(|x| sign * x / norm));
        full.push(0.0);
        energies.push(lam);
        states.push(full);
    }

    Ok(EigenSolution { x_nm: profile.x_nm.clone(), potential_ev: profile.u_ev.clone(), energies_ev: energies, states })
}
