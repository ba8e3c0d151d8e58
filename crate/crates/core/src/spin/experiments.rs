use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use super::evolve::propagator;
use super::hamiltonian::{build_hamiltonian, BarrierRamp, DriveTone, ExchangeModel, ExchangeTerm};
use super::sequence::{ParityOutcome, PulseElement, PulseSequence, ReadoutModel, Runner};
use super::{ExchangeWindow, MicrowaveDrive, QuantumState, SpinError, SpinSystem};

/// How a probability trace is turned into measured data.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceOptions {
    pub readout: ReadoutModel,
    /// 0 returns exact probabilities (including the readout error); otherwise
    /// each point is the fraction of `shots` single-shot outcomes.
    pub shots: usize,
}

impl TraceOptions {
    pub fn exact() -> Self {
        Self::default()
    }

    /// Measured value at sweep point `index` for a true probability `p`.
    pub fn measure(&self, index: u64, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        if self.shots == 0 {
            return self.readout.apparent(p);
        }
        let mut rng = self.readout.rng(index);
        let err = 1.0 - self.readout.fidelity();
        let mut hits = 0usize;
        for _ in 0..self.shots {
            let truth = rng.random::<f64>() < p;
            let flip = rng.random::<f64>() < err;
            if truth != flip {
                hits += 1;
            }
        }
        hits as f64 / self.shots as f64
    }
}

fn partner(system: &SpinSystem, q: usize) -> usize {
    if q % 2 == 0 && q + 1 < system.n() {
        q + 1
    } else {
        q - 1
    }
}

fn check_pair(system: &SpinSystem, a: usize, b: usize) -> Result<(), SpinError> {
    for q in [a, b] {
        if q >= system.n() {
            return Err(SpinError::QubitIndex(q));
        }
    }
    if system.coupling(a, b).is_none() {
        return Err(SpinError::NoCoupling(a, b));
    }
    Ok(())
}

/// Parity-readout Rabi trace: drive `target` from all-down for each burst length.
///
/// `drive_hz` defaults to the target's resonance. The parity partner is the
/// other qubit of the target's readout pair.
pub fn simulate_rabi(
    system: &SpinSystem,
    target: usize,
    t_values: &[f64],
    drive_hz: Option<f64>,
    opts: &TraceOptions,
) -> Result<Vec<f64>, SpinError> {
    if target >= system.n() {
        return Err(SpinError::QubitIndex(target));
    }
    if !(system.qubits[target].rabi_hz > 0.0) {
        return Err(SpinError::ZeroRabi);
    }
    let other = partner(system, target);
    t_values
        .par_iter()
        .enumerate()
        .map(|(i, &t)| {
            let mut drive = MicrowaveDrive::resonant(system, target, t);
            if let Some(f) = drive_hz {
                drive.frequency_hz = f;
            }
            let seq = PulseSequence(vec![PulseElement::Drive(drive)]);
            let out = Runner::new(system, QuantumState::all_down(system.n()), &opts.readout, &[])
                .run(&seq, &mut opts.readout.rng(i as u64))?;
            Ok(opts.measure(i as u64, out.state.prob_odd(target, other)))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectroscopyOptions {
    pub trace: TraceOptions,
    /// Defaults to the target's configured Rabi frequency.
    pub rabi_hz: Option<f64>,
    /// Defaults to a π pulse, `1 / (2 Ω)`.
    pub duration: Option<f64>,
    /// Barrier switching. Adiabatic by default, so strong exchange does not
    /// leave a sudden-quench beat on top of the resonance line.
    pub ramp: BarrierRamp,
}

impl Default for SpectroscopyOptions {
    fn default() -> Self {
        Self { trace: TraceOptions::default(), rabi_hz: None, duration: None, ramp: BarrierRamp::Adiabatic }
    }
}

/// Target flip probability on a (barrier amplitude, drive frequency) grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectroscopyMap {
    pub v_values: Vec<f64>,
    pub f_values: Vec<f64>,
    /// `p[i][j]` belongs to `v_values[i]`, `f_values[j]`.
    pub p: Vec<Vec<f64>>,
    pub rabi_hz: f64,
}

impl SpectroscopyMap {
    /// Resolution of a π-pulse line, taken as the Rabi frequency.
    pub fn linewidth(&self) -> f64 {
        self.rabi_hz
    }
}

/// X on the control, then a π-length drive on the target during a barrier pulse.
pub fn simulate_exchange_spectroscopy(
    system: &SpinSystem,
    control: usize,
    target: usize,
    f_values: &[f64],
    v_values: &[f64],
    opts: &SpectroscopyOptions,
) -> Result<SpectroscopyMap, SpinError> {
    check_pair(system, control, target)?;
    let rabi = opts.rabi_hz.unwrap_or(system.qubits[target].rabi_hz);
    if !(rabi > 0.0) {
        return Err(SpinError::ZeroRabi);
    }
    let duration = opts.duration.unwrap_or(0.5 / rabi);
    let nf = f_values.len();
    let flat: Vec<f64> = (0..v_values.len() * nf)
        .into_par_iter()
        .map(|k| {
            let (v, f) = (v_values[k / nf], f_values[k % nf]);
            let seq = PulseSequence(vec![
                PulseElement::x(control),
                PulseElement::Segment {
                    drives: vec![DriveTone { target, frequency_hz: f, rabi_hz: rabi, phase: 0.0 }],
                    windows: vec![ExchangeTerm { a: control, b: target, amplitude_v: v }],
                    duration,
                },
            ]);
            let out = Runner::new(system, QuantumState::all_down(system.n()), &opts.trace.readout, &[])
                .with_ramp(opts.ramp)
                .run(&seq, &mut opts.trace.readout.rng(k as u64))?;
            Ok(opts.trace.measure(k as u64, out.state.prob_up(target)))
        })
        .collect::<Result<_, SpinError>>()?;
    let p = flat.chunks(nf.max(1)).map(<[f64]>::to_vec).collect();
    Ok(SpectroscopyMap { v_values: v_values.to_vec(), f_values: f_values.to_vec(), p, rabi_hz: rabi })
}

/// Target resonance for control down and control up at barrier amplitude `v`,
/// from exact diagonalisation of the undriven Hamiltonian (other qubits down).
pub fn branch_frequencies(system: &SpinSystem, control: usize, target: usize, v: f64) -> Result<(f64, f64), SpinError> {
    check_pair(system, control, target)?;
    let h = build_hamiltonian(system, &[], &[ExchangeTerm { a: control, b: target, amplitude_v: v }])?;
    let eig = h.matrix.symmetric_eigen();
    let energy_of = |basis: usize| {
        let k = (0..eig.eigenvalues.len())
            .max_by(|&a, &b| eig.eigenvectors[(basis, a)].norm_sqr().total_cmp(&eig.eigenvectors[(basis, b)].norm_sqr()))
            .expect("non-empty spectrum");
        eig.eigenvalues[k]
    };
    let (c, t) = (1 << control, 1 << target);
    let reference = system.reference_hz();
    let down = reference + energy_of(t) - energy_of(0);
    let up = reference + energy_of(c | t) - energy_of(c);
    Ok((down, up))
}

/// Local maxima of `p` above half the global maximum, refined by parabolic
/// interpolation and sorted by descending height.
pub fn find_branches(f_values: &[f64], p: &[f64]) -> Vec<f64> {
    let max = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) || p.len() < 3 {
        return Vec::new();
    }
    let mut peaks: Vec<(f64, f64)> = Vec::new();
    for i in 1..p.len() - 1 {
        if p[i] >= 0.5 * max && p[i] > p[i - 1] && p[i] >= p[i + 1] {
            let (a, b, c) = (p[i - 1], p[i], p[i + 1]);
            let denom = a - 2.0 * b + c;
            let shift = if denom != 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
            let step = 0.5 * (f_values[i + 1] - f_values[i - 1]);
            peaks.push((f_values[i] + shift * step, b));
        }
    }
    peaks.sort_by(|x, y| y.1.total_cmp(&x.1));
    peaks.into_iter().map(|(f, _)| f).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DczOptions {
    pub trace: TraceOptions,
    /// Static Z detuning per qubit (Hz) present throughout, not tracked by the pulses.
    pub offsets: Vec<f64>,
    /// Exchange form during the barrier pulses. The secular form makes the
    /// echo exact; the Heisenberg form adds the finite-gradient correction.
    pub exchange: ExchangeModel,
}

impl Default for DczOptions {
    fn default() -> Self {
        Self { trace: TraceOptions::default(), offsets: Vec::new(), exchange: ExchangeModel::Secular }
    }
}

/// Decoupled-CZ trace: X(t), exchange τ/2, X²(both), exchange τ/2, X²(both), X(t), parity readout.
///
/// The returned odd-parity probability oscillates at `J(v)/2` in τ.
pub fn simulate_dcz(
    system: &SpinSystem,
    control: usize,
    target: usize,
    amplitude_v: f64,
    tau_values: &[f64],
    opts: &DczOptions,
) -> Result<Vec<f64>, SpinError> {
    check_pair(system, control, target)?;
    tau_values
        .par_iter()
        .enumerate()
        .map(|(i, &tau)| {
            let half = PulseElement::Exchange(ExchangeWindow { a: control, b: target, amplitude_v, duration: 0.5 * tau });
            let seq = PulseSequence(vec![
                PulseElement::x(target),
                half.clone(),
                PulseElement::x2(control),
                PulseElement::x2(target),
                half,
                PulseElement::x2(control),
                PulseElement::x2(target),
                PulseElement::x(target),
            ]);
            let out = Runner::new(system, QuantumState::all_down(system.n()), &opts.trace.readout, &opts.offsets)
                .with_exchange(opts.exchange)
                .run(&seq, &mut opts.trace.readout.rng(i as u64))?;
            Ok(opts.trace.measure(i as u64, out.state.prob_odd(control, target)))
        })
        .collect()
}

/// Small parameter `J/Ω` of the conditional phase picked up while driving one qubit of a coupled pair.
pub fn residual_zz_coefficient(j_hz: f64, rabi_hz: f64) -> Result<f64, SpinError> {
    if !(rabi_hz > 0.0) {
        return Err(SpinError::ZeroRabi);
    }
    Ok(j_hz / rabi_hz)
}

/// `|Tr[(Z⊗Z) U]| / 4` for a resonant π pulse on `target` while the barrier sits at `amplitude_v`.
///
/// The control's free precession is removed from `U`; other qubits stay down.
pub fn conditional_phase_weight(
    system: &SpinSystem,
    control: usize,
    target: usize,
    amplitude_v: f64,
    rabi_hz: f64,
) -> Result<f64, SpinError> {
    check_pair(system, control, target)?;
    if !(rabi_hz > 0.0) {
        return Err(SpinError::ZeroRabi);
    }
    let f_t = system.qubits[target].larmor_hz;
    let duration = 0.5 / rabi_hz;
    let h = build_hamiltonian(
        system,
        &[DriveTone { target, frequency_hz: f_t, rabi_hz, phase: 0.0 }],
        &[ExchangeTerm { a: control, b: target, amplitude_v }],
    )?;
    let u = propagator(&h.matrix, duration);
    let delta_c = system.qubits[control].larmor_hz + system.qubits[control].slope_hz_per_v * amplitude_v - f_t;
    let basis = [0, 1 << target, 1 << control, (1 << control) | (1 << target)];
    let mut sub = DMatrix::<Complex64>::zeros(4, 4);
    for (r, &br) in basis.iter().enumerate() {
        let sz = if br >> control & 1 == 1 { 0.5 } else { -0.5 };
        let undo = Complex64::from_polar(1.0, 2.0 * PI * delta_c * duration * sz);
        for (c, &bc) in basis.iter().enumerate() {
            sub[(r, c)] = undo * u[(br, bc)];
        }
    }
    // Z⊗Z is +1 on parallel, -1 on antiparallel basis states.
    let zz = [1.0, -1.0, -1.0, 1.0];
    let tr: Complex64 = (0..4).map(|k| sub[(k, k)] * zz[k]).sum();
    Ok(tr.norm() / 4.0)
}

/// Second initialisation stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitMode {
    /// Parity measurement and conditional π only.
    ParityOnly,
    /// Followed by an ideal zCNOT from `control` onto `target`.
    IdealZcnot { control: usize, target: usize },
    /// Followed by a π pulse on `target` at its control-down branch during a barrier pulse.
    PhysicalCrot { control: usize, target: usize, amplitude_v: f64, rabi_hz: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitReport {
    pub state: QuantumState,
    pub outcome: ParityOutcome,
    pub corrected: bool,
}

/// Measure the parity of `(a, b)`, flip `designated` if it reads even, then run the optional zCNOT stage.
pub fn initialize_odd_parity<R: Rng + ?Sized>(
    system: &SpinSystem,
    state: &QuantumState,
    a: usize,
    b: usize,
    designated: usize,
    mode: InitMode,
    readout: &ReadoutModel,
    rng: &mut R,
) -> Result<InitReport, SpinError> {
    let mut seq = PulseSequence(vec![
        PulseElement::ParityMeasure { a, b },
        PulseElement::ConditionalPi { target: designated, a, b, condition: ParityOutcome::Even },
    ]);
    match mode {
        InitMode::ParityOnly => {}
        InitMode::IdealZcnot { control, target } => {
            seq.push(PulseElement::Zcnot { control, target });
        }
        InitMode::PhysicalCrot { control, target, amplitude_v, rabi_hz } => {
            let (f_down, _) = branch_frequencies(system, control, target, amplitude_v)?;
            seq.push(PulseElement::Segment {
                drives: vec![DriveTone { target, frequency_hz: f_down, rabi_hz, phase: 0.0 }],
                windows: vec![ExchangeTerm { a: control, b: target, amplitude_v }],
                duration: 0.5 / rabi_hz,
            });
        }
    }
    let out = Runner::new(system, state.clone(), readout, &[]).run(&seq, rng)?;
    let outcome = out.records[0].outcome;
    Ok(InitReport { state: out.state, outcome, corrected: outcome == ParityOutcome::Even })
}
