use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{Hamiltonian, QuantumState};

/// `exp(-i 2π H dt)` by Hermitian eigendecomposition.
pub fn propagator(h: &DMatrix<Complex64>, dt: f64) -> DMatrix<Complex64> {
    let dim = h.nrows();
    if dt == 0.0 {
        return DMatrix::identity(dim, dim);
    }
    let herm = (h + h.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = herm.symmetric_eigen();
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (k, &e) in eig.eigenvalues.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, -TAU * e * dt);
        for r in 0..dim {
            scaled[(r, k)] *= phase;
        }
    }
    scaled * v.adjoint()
}

/// Evolve `state` for `dt` seconds under a constant Hamiltonian.
pub fn evolve(state: &QuantumState, h: &Hamiltonian, dt: f64) -> QuantumState {
    let mut out = state.clone();
    if dt > 0.0 {
        *out.amplitudes_mut() = propagator(&h.matrix, dt) * state.amplitudes();
    }
    out
}

/// Multiply by `exp(sign * i 2π Σ_k (frames[k] - reference) t Sz_k)`.
///
/// `sign = +1` moves a reference-frame state into the given frames at time `t`,
/// `sign = -1` moves it back.
pub(crate) fn change_frame(state: &mut QuantumState, frames: &[f64], reference: f64, t: f64, sign: f64) {
    let offsets: Vec<f64> = frames.iter().map(|f| f - reference).collect();
    if offsets.iter().all(|o| *o == 0.0) || t == 0.0 {
        return;
    }
    for (s, amp) in state.amplitudes_mut().iter_mut().enumerate() {
        let mut sz = 0.0;
        for (k, o) in offsets.iter().enumerate() {
            sz += if s >> k & 1 == 1 { 0.5 * o } else { -0.5 * o };
        }
        *amp *= Complex64::from_polar(1.0, sign * TAU * sz * t);
    }
}
