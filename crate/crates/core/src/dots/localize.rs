use serde::Serialize;

use super::eigen::EigenSolution;
use super::DotsError;
use crate::constants::HZ_PER_EV;

/// Minimum ratio of the gap to the third level over the lowest splitting.
pub const GAP_RATIO_WARNING: f64 = 5.0;

/// Left/right orbitals obtained by diagonalising position within the lowest doublet.
#[derive(Debug, Clone, Serialize)]
pub struct LocalizedBasis {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    /// `[[ε_L, -t], [-t, ε_R]]` in eV.
    pub hamiltonian: [[f64; 2]; 2],
    pub center_left_nm: f64,
    pub center_right_nm: f64,
    pub warnings: Vec<String>,
}

impl LocalizedBasis {
    /// `|H_LR|` in Hz.
    pub fn tunnel_coupling_hz(&self) -> f64 {
        self.hamiltonian[0][1].abs() * HZ_PER_EV
    }

    /// `ε_L - ε_R` in eV.
    pub fn detuning_ev(&self) -> f64 {
        self.hamiltonian[0][0] - self.hamiltonian[1][1]
    }
}

/// Rotate the two lowest eigenstates into the pair that diagonalises `x`.
///
/// Fails with [`DotsError::MergedDots`] when the two centres are closer than a
/// grid spacing or when the potential has no barrier between them.
pub fn maximally_localized_basis(eigs: &EigenSolution) -> Result<LocalizedBasis, DotsError> {
    if eigs.states.len() < 2 {
        return Err(DotsError::TooManyStates { requested: 2, available: eigs.states.len() });
    }
    let dx = eigs.dx();
    let (p0, p1) = (&eigs.states[0], &eigs.states[1]);
    let xm = |a: &[f64], b: &[f64]| a.iter().zip(b).zip(&eigs.x_nm).map(|((p, q), x)| p * q * x).sum::<f64>() * dx;
    let (x00, x01, x11) = (xm(p0, p0), xm(p0, p1), xm(p1, p1));

    // Eigenvectors of [[x00, x01], [x01, x11]]: (cos θ, sin θ) and (-sin θ, cos θ)
    let theta = 0.5 * (2.0 * x01).atan2(x00 - x11);
    let (s, c) = theta.sin_cos();
    let a: Vec<f64> = p0.iter().zip(p1).map(|(u, v)| c * u + s * v).collect();
    let b: Vec<f64> = p0.iter().zip(p1).map(|(u, v)| -s * u + c * v).collect();
    let (xa, xb) = (xm(&a, &a), xm(&b, &b));
    let (e0, e1) = (eigs.energies_ev[0], eigs.energies_ev[1]);
    // H in the rotated basis: R diag(e0, e1) Rᵀ with rows (c, s) and (-s, c)
    let haa = c * c * e0 + s * s * e1;
    let hbb = s * s * e0 + c * c * e1;
    let hab = -c * s * e0 + s * c * e1;

    let (left, right, xl, xr, hl, hr) = if xa <= xb { (a, b, xa, xb, haa, hbb) } else { (b, a, xb, xa, hbb, haa) };

    if (xr - xl).abs() < dx {
        return Err(DotsError::MergedDots(format!("orbital centres {xl:.3} nm and {xr:.3} nm coincide")));
    }
    let u_at = |x: f64| {
        let i = (((x - eigs.x_nm[0]) / dx).round().max(0.0) as usize).min(eigs.x_nm.len() - 1);
        eigs.potential_ev[i]
    };
    let barrier = eigs
        .x_nm
        .iter()
        .zip(&eigs.potential_ev)
        .filter(|(x, _)| **x > xl && **x < xr)
        .map(|(_, u)| *u)
        .fold(f64::NEG_INFINITY, f64::max);
    if !(barrier > u_at(xl) && barrier > u_at(xr)) {
        return Err(DotsError::MergedDots(format!("no potential barrier between {xl:.2} nm and {xr:.2} nm")));
    }

    let mut warnings = Vec::new();
    let split = e1 - e0;
    match eigs.energies_ev.get(2) {
        Some(e2) if e2 - e1 < GAP_RATIO_WARNING * split => warnings.push(format!(
            "third level only {:.3e} eV above the doublet (splitting {:.3e} eV)",
            e2 - e1,
            split
        )),
        None => warnings.push("third level not computed; doublet isolation unchecked".into()),
        _ => {}
    }

    Ok(LocalizedBasis {
        left,
        right,
        hamiltonian: [[hl, hab], [hab, hr]],
        center_left_nm: xl,
        center_right_nm: xr,
        warnings,
    })
}
