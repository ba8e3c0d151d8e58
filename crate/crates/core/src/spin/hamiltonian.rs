use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{SpinError, SpinSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Spin-1/2 operator `S_axis` acting on qubit `k` of an `n`-qubit register.
pub fn spin_operator(n: usize, k: usize, axis: Axis) -> DMatrix<Complex64> {
    let dim = 1 << n;
    let mut m = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        let up = i >> k & 1 == 1;
        let j = i ^ (1 << k);
        match axis {
            Axis::Z => m[(i, i)] = Complex64::new(if up { 0.5 } else { -0.5 }, 0.0),
            Axis::X => m[(i, j)] = Complex64::new(0.5, 0.0),
            // <up|Sy|down> = -i/2
            Axis::Y => m[(i, j)] = Complex64::new(0.0, if up { -0.5 } else { 0.5 }),
        }
    }
    m
}

/// Form of the exchange term between two qubits sharing a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExchangeModel {
    /// Full `J (S_a·S_b - 1/4)` including the flip-flop part.
    #[default]
    Heisenberg,
    /// Only `J (Sz_a Sz_b - 1/4)`, the large-gradient limit.
    Secular,
}

/// How a barrier pulse is switched on and off relative to the Zeeman gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BarrierRamp {
    /// Instantaneous switching: bare product states enter the exchange window unchanged.
    #[default]
    Sudden,
    /// Switching slow compared with the gradient: each bare state maps onto the
    /// window eigenstate it continues into, and back again at the end.
    Adiabatic,
}

/// A microwave tone driving one qubit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveTone {
    pub target: usize,
    pub frequency_hz: f64,
    pub rabi_hz: f64,
    pub phase: f64,
}

/// A barrier pulse of amplitude `amplitude_v` on the coupling between `a` and `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExchangeTerm {
    pub a: usize,
    pub b: usize,
    pub amplitude_v: f64,
}

/// `H/h` in Hz, expressed in a frame where qubit `i` rotates at `frames[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    pub matrix: DMatrix<Complex64>,
    pub frames: Vec<f64>,
}

/// Rotating-frame Hamiltonian for one constant segment.
///
/// Driven qubits sit in the frame of their drive tone; every other qubit
/// shares the frame of the first tone (or the system reference frame when
/// nothing is driven). Flip-flop exchange terms between qubits in different
/// frames oscillate at the frame difference and are dropped.
pub fn build_hamiltonian(
    system: &SpinSystem,
    drives: &[DriveTone],
    windows: &[ExchangeTerm],
) -> Result<Hamiltonian, SpinError> {
    build_hamiltonian_with_offsets(system, drives, windows, &[], ExchangeModel::Heisenberg)
}

/// As [`build_hamiltonian`], with an extra static Z detuning per qubit (Hz).
pub(crate) fn build_hamiltonian_with_offsets(
    system: &SpinSystem,
    drives: &[DriveTone],
    windows: &[ExchangeTerm],
    offsets: &[f64],
    model: ExchangeModel,
) -> Result<Hamiltonian, SpinError> {
    let n = system.n();
    let dim = 1 << n;

    let common = drives.first().map(|d| d.frequency_hz).unwrap_or_else(|| system.reference_hz());
    let mut frames = vec![common; n];
    let mut driven = vec![false; n];
    for d in drives {
        if d.target >= n {
            return Err(SpinError::QubitIndex(d.target));
        }
        if driven[d.target] {
            return Err(SpinError::DoubleDrive(d.target));
        }
        driven[d.target] = true;
        frames[d.target] = d.frequency_hz;
    }

    let mut shift = vec![0.0; n];
    let mut exchange = Vec::new();
    for w in windows {
        if w.a >= n || w.b >= n {
            return Err(SpinError::QubitIndex(w.a.max(w.b)));
        }
        if system.coupling(w.a, w.b).is_none() {
            return Err(SpinError::NoCoupling(w.a, w.b));
        }
        shift[w.a] += system.qubits[w.a].slope_hz_per_v * w.amplitude_v;
        shift[w.b] += system.qubits[w.b].slope_hz_per_v * w.amplitude_v;
    }
    for c in &system.exchange {
        let (a, b) = system.coupling_indices(c);
        let j = match windows.iter().find(|w| (w.a.min(w.b), w.a.max(w.b)) == (a, b)) {
            Some(w) => c.exchange_hz(w.amplitude_v),
            None => c.idle_hz,
        };
        if j != 0.0 {
            exchange.push((a, b, j));
        }
    }

    let delta: Vec<f64> = (0..n)
        .map(|i| system.qubits[i].larmor_hz + shift[i] + offsets.get(i).copied().unwrap_or(0.0) - frames[i])
        .collect();

    let mut h = DMatrix::<Complex64>::zeros(dim, dim);
    for s in 0..dim {
        let mut diag = 0.0;
        for (i, d) in delta.iter().enumerate() {
            diag += if s >> i & 1 == 1 { 0.5 * d } else { -0.5 * d };
        }
        for &(a, b, j) in &exchange {
            if (s >> a & 1) != (s >> b & 1) {
                diag -= 0.5 * j;
                if frames[a] == frames[b] && model == ExchangeModel::Heisenberg {
                    let t = s ^ (1 << a) ^ (1 << b);
                    h[(t, s)] += Complex64::new(0.5 * j, 0.0);
                }
            }
        }
        h[(s, s)] += Complex64::new(diag, 0.0);
        for d in drives {
            if s >> d.target & 1 == 0 {
                let up = s | (1 << d.target);
                let c = Complex64::from_polar(0.5 * d.rabi_hz, -d.phase);
                h[(up, s)] += c;
                h[(s, up)] += c.conj();
            }
        }
    }
    let ht = h.adjoint();
    let matrix = (h + ht) * Complex64::new(0.5, 0.0);
    Ok(Hamiltonian { matrix, frames })
}
