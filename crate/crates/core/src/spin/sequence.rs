use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::evolve::{change_frame, evolve};
use nalgebra::DMatrix;

use super::hamiltonian::{build_hamiltonian_with_offsets, BarrierRamp, DriveTone, ExchangeModel, ExchangeTerm};
use super::{QuantumState, SpinError, SpinSystem};
use crate::calibration::readout_fidelity_scaled;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParityOutcome {
    Even,
    Odd,
}

impl ParityOutcome {
    pub fn flipped(self) -> Self {
        match self {
            ParityOutcome::Even => ParityOutcome::Odd,
            ParityOutcome::Odd => ParityOutcome::Even,
        }
    }
}

/// Parity readout with a symmetric classical error `1 - F`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutModel {
    /// `None` means ideal readout (F = 1).
    pub snr: Option<f64>,
    pub integration_time_s: f64,
    pub seed: u64,
    /// Multiplies `snr` before conversion to a fidelity.
    pub snr_scale: f64,
}

impl Default for ReadoutModel {
    fn default() -> Self {
        Self::ideal()
    }
}

impl ReadoutModel {
    pub fn ideal() -> Self {
        Self { snr: None, integration_time_s: 2e-6, seed: 0, snr_scale: 1.0 }
    }

    pub fn from_snr(snr: f64) -> Result<Self, SpinError> {
        if !(snr.is_finite() && snr > 0.0) {
            return Err(SpinError::InvalidElement(format!("readout snr must be positive, got {snr}")));
        }
        Ok(Self { snr: Some(snr), ..Self::ideal() })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn fidelity(&self) -> f64 {
        match self.snr {
            Some(snr) => readout_fidelity_scaled(snr, self.snr_scale),
            None => 1.0,
        }
    }

    /// Independent stream for run `index` under this model's seed.
    pub fn rng(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }

    /// Probability of reporting "odd" given the true odd probability `p`.
    pub fn apparent(&self, p: f64) -> f64 {
        let f = self.fidelity();
        f * p + (1.0 - f) * (1.0 - p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MicrowaveDrive {
    pub target: usize,
    pub frequency_hz: f64,
    pub rabi_hz: f64,
    pub phase: f64,
    pub duration: f64,
}

impl MicrowaveDrive {
    /// Drive qubit `target` on its bare resonance with its configured Rabi frequency.
    pub fn resonant(system: &SpinSystem, target: usize, duration: f64) -> Self {
        Self {
            target,
            frequency_hz: system.qubits[target].larmor_hz,
            rabi_hz: system.qubits[target].rabi_hz,
            phase: 0.0,
            duration,
        }
    }

    fn tone(&self) -> DriveTone {
        DriveTone { target: self.target, frequency_hz: self.frequency_hz, rabi_hz: self.rabi_hz, phase: self.phase }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExchangeWindow {
    pub a: usize,
    pub b: usize,
    pub amplitude_v: f64,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PulseElement {
    Drive(MicrowaveDrive),
    Exchange(ExchangeWindow),
    Idle { duration: f64 },
    /// Simultaneous tones and barrier pulses held for `duration`.
    Segment { drives: Vec<DriveTone>, windows: Vec<ExchangeTerm>, duration: f64 },
    /// Instantaneous rotation by `angle` about `(cos phase, sin phase, 0)` in the target's own frame.
    Rotation { target: usize, angle: f64, phase: f64 },
    ParityMeasure { a: usize, b: usize },
    /// π rotation on `target` if the latest parity result of `(a, b)` equals `condition`.
    ConditionalPi { target: usize, a: usize, b: usize, condition: ParityOutcome },
    /// Flip `target` when `control` is down.
    Zcnot { control: usize, target: usize },
}

impl PulseElement {
    pub fn x(target: usize) -> Self {
        PulseElement::Rotation { target, angle: PI / 2.0, phase: 0.0 }
    }

    pub fn x2(target: usize) -> Self {
        PulseElement::Rotation { target, angle: PI, phase: 0.0 }
    }

    pub fn duration(&self) -> f64 {
        match self {
            PulseElement::Drive(d) => d.duration,
            PulseElement::Exchange(w) => w.duration,
            PulseElement::Idle { duration } | PulseElement::Segment { duration, .. } => *duration,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PulseSequence(pub Vec<PulseElement>);

impl PulseSequence {
    pub fn new() -> Self {
        Self(Vec::new())
    }

    pub fn push(&mut self, e: PulseElement) -> &mut Self {
        self.0.push(e);
        self
    }

    pub fn elements(&self) -> &[PulseElement] {
        &self.0
    }

    pub fn total_duration(&self) -> f64 {
        self.0.iter().map(PulseElement::duration).sum()
    }
}

impl FromIterator<PulseElement> for PulseSequence {
    fn from_iter<I: IntoIterator<Item = PulseElement>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementRecord {
    pub a: usize,
    pub b: usize,
    /// Reported outcome after readout error.
    pub outcome: ParityOutcome,
    /// Parity the state was projected onto.
    pub projected: ParityOutcome,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementResult {
    pub records: Vec<MeasurementRecord>,
    pub state: QuantumState,
    /// State just before the most recent parity measurement.
    pub pre_measurement: Option<QuantumState>,
    pub elapsed: f64,
}

/// Projective parity measurement of `(a, b)`, followed by a classical flip with probability `1 - F`.
pub fn parity_measure<R: Rng + ?Sized>(
    state: &QuantumState,
    a: usize,
    b: usize,
    readout: &ReadoutModel,
    rng: &mut R,
) -> (ParityOutcome, ParityOutcome, QuantumState) {
    let p_odd = state.prob_odd(a, b);
    let projected = if rng.random::<f64>() < p_odd { ParityOutcome::Odd } else { ParityOutcome::Even };
    let mut post = state.clone();
    for (s, amp) in post.amplitudes_mut().iter_mut().enumerate() {
        let odd = (s >> a & 1) != (s >> b & 1);
        if odd != (projected == ParityOutcome::Odd) {
            *amp = Complex64::new(0.0, 0.0);
        }
    }
    post.normalize();
    let flip = rng.random::<f64>() < 1.0 - readout.fidelity();
    let outcome = if flip { projected.flipped() } else { projected };
    (outcome, projected, post)
}

/// Apply `sequence` to `initial`, drawing measurement randomness from `readout.rng(0)`.
pub fn run_sequence(
    system: &SpinSystem,
    initial: &QuantumState,
    sequence: &PulseSequence,
    readout: &ReadoutModel,
) -> Result<MeasurementResult, SpinError> {
    let mut rng = readout.rng(0);
    Runner::new(system, initial.clone(), readout, &[]).run(sequence, &mut rng)
}

pub(crate) struct Runner<'a> {
    system: &'a SpinSystem,
    readout: &'a ReadoutModel,
    offsets: &'a [f64],
    exchange: ExchangeModel,
    ramp: BarrierRamp,
    reference: f64,
    pub(crate) time: f64,
    pub(crate) state: QuantumState,
    records: Vec<MeasurementRecord>,
    pre_measurement: Option<QuantumState>,
}

impl<'a> Runner<'a> {
    pub(crate) fn new(system: &'a SpinSystem, state: QuantumState, readout: &'a ReadoutModel, offsets: &'a [f64]) -> Self {
        Self {
            system,
            readout,
            offsets,
            exchange: ExchangeModel::Heisenberg,
            ramp: BarrierRamp::Sudden,
            reference: system.reference_hz(),
            time: 0.0,
            state,
            records: Vec::new(),
            pre_measurement: None,
        }
    }

    pub(crate) fn with_exchange(mut self, model: ExchangeModel) -> Self {
        self.exchange = model;
        self
    }

    pub(crate) fn with_ramp(mut self, ramp: BarrierRamp) -> Self {
        self.ramp = ramp;
        self
    }

    pub(crate) fn run<R: Rng + ?Sized>(mut self, sequence: &PulseSequence, rng: &mut R) -> Result<MeasurementResult, SpinError> {
        if self.state.n() != self.system.n() {
            return Err(SpinError::Dimension { expected: self.system.dim(), got: self.state.dim() });
        }
        for e in sequence.elements() {
            self.apply(e, rng)?;
        }
        Ok(MeasurementResult {
            records: self.records,
            state: self.state,
            pre_measurement: self.pre_measurement,
            elapsed: self.time,
        })
    }

    fn check(&self, q: usize) -> Result<(), SpinError> {
        if q < self.system.n() {
            Ok(())
        } else {
            Err(SpinError::QubitIndex(q))
        }
    }

    pub(crate) fn apply<R: Rng + ?Sized>(&mut self, e: &PulseElement, rng: &mut R) -> Result<(), SpinError> {
        match e {
            PulseElement::Drive(d) => self.segment(&[d.tone()], &[], d.duration),
            PulseElement::Exchange(w) => {
                self.segment(&[], &[ExchangeTerm { a: w.a, b: w.b, amplitude_v: w.amplitude_v }], w.duration)
            }
            PulseElement::Idle { duration } => self.segment(&[], &[], *duration),
            PulseElement::Segment { drives, windows, duration } => self.segment(drives, windows, *duration),
            PulseElement::Rotation { target, angle, phase } => {
                self.check(*target)?;
                self.rotate(*target, *angle, *phase);
                Ok(())
            }
            PulseElement::ParityMeasure { a, b } => {
                self.check(*a)?;
                self.check(*b)?;
                let (outcome, projected, post) = parity_measure(&self.state, *a, *b, self.readout, rng);
                self.pre_measurement = Some(std::mem::replace(&mut self.state, post));
                self.records.push(MeasurementRecord { a: *a, b: *b, outcome, projected, time: self.time });
                Ok(())
            }
            PulseElement::ConditionalPi { target, a, b, condition } => {
                self.check(*target)?;
                let last = self
                    .records
                    .iter()
                    .rev()
                    .find(|r| (r.a, r.b) == (*a, *b) || (r.a, r.b) == (*b, *a))
                    .ok_or(SpinError::NoMeasurement(*a, *b))?;
                if last.outcome == *condition {
                    self.rotate(*target, PI, 0.0);
                }
                Ok(())
            }
            PulseElement::Zcnot { control, target } => {
                self.check(*control)?;
                self.check(*target)?;
                if control == target {
                    return Err(SpinError::InvalidElement("zCNOT control and target coincide".into()));
                }
                let amps = self.state.amplitudes().clone();
                for (s, amp) in self.state.amplitudes_mut().iter_mut().enumerate() {
                    let src = if s >> control & 1 == 0 { s ^ (1 << target) } else { s };
                    *amp = amps[src];
                }
                Ok(())
            }
        }
    }

    fn segment(&mut self, drives: &[DriveTone], windows: &[ExchangeTerm], duration: f64) -> Result<(), SpinError> {
        if !(duration >= 0.0 && duration.is_finite()) {
            return Err(SpinError::InvalidElement(format!("duration must be non-negative, got {duration}")));
        }
        for d in drives {
            if !(d.rabi_hz >= 0.0) {
                return Err(SpinError::InvalidElement(format!("Rabi frequency must be non-negative, got {}", d.rabi_hz)));
            }
        }
        let h = build_hamiltonian_with_offsets(self.system, drives, windows, self.offsets, self.exchange)?;
        if duration == 0.0 {
            return Ok(());
        }
        let dressing = match self.ramp {
            BarrierRamp::Adiabatic if !windows.is_empty() => {
                let silent: Vec<DriveTone> = drives.iter().map(|d| DriveTone { rabi_hz: 0.0, ..*d }).collect();
                let h0 = build_hamiltonian_with_offsets(self.system, &silent, windows, self.offsets, self.exchange)?;
                Some(adiabatic_map(&h0.matrix))
            }
            _ => None,
        };
        change_frame(&mut self.state, &h.frames, self.reference, self.time, 1.0);
        if let Some(d) = &dressing {
            *self.state.amplitudes_mut() = d * self.state.amplitudes();
        }
        self.state = evolve(&self.state, &h, duration);
        if let Some(d) = &dressing {
            *self.state.amplitudes_mut() = d.adjoint() * self.state.amplitudes();
        }
        self.time += duration;
        change_frame(&mut self.state, &h.frames, self.reference, self.time, -1.0);
        Ok(())
    }

    fn rotate(&mut self, target: usize, angle: f64, phase: f64) {
        let mut frames = vec![self.reference; self.system.n()];
        frames[target] = self.system.qubits[target].larmor_hz;
        change_frame(&mut self.state, &frames, self.reference, self.time, 1.0);
        let (s, c) = (0.5 * angle).sin_cos();
        let to_up = Complex64::new(0.0, -s) * Complex64::from_polar(1.0, -phase);
        let to_down = Complex64::new(0.0, -s) * Complex64::from_polar(1.0, phase);
        let amps = self.state.amplitudes_mut();
        for i in 0..amps.len() {
            if i >> target & 1 == 0 {
                let j = i | (1 << target);
                let (down, up) = (amps[i], amps[j]);
                amps[i] = down * c + to_down * up;
                amps[j] = up * c + to_up * down;
            }
        }
        change_frame(&mut self.state, &frames, self.reference, self.time, -1.0);
    }
}

/// Unitary whose column `k` is the eigenvector of `h0` continuing bare state `k`.
///
/// Eigenvectors are paired with bare states greedily by overlap and phased so
/// the overlap is real and positive.
fn adiabatic_map(h0: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let dim = h0.nrows();
    let eig = h0.clone().symmetric_eigen();
    let v = &eig.eigenvectors;
    let mut pairs: Vec<(usize, usize)> = (0..dim).flat_map(|b| (0..dim).map(move |e| (b, e))).collect();
    pairs.sort_by(|x, y| v[*y].norm_sqr().total_cmp(&v[*x].norm_sqr()));
    let (mut bare_used, mut eig_used) = (vec![false; dim], vec![false; dim]);
    let mut out = DMatrix::zeros(dim, dim);
    for (b, e) in pairs {
        if bare_used[b] || eig_used[e] {
            continue;
        }
        bare_used[b] = true;
        eig_used[e] = true;
        let overlap = v[(b, e)];
        let phase = if overlap.norm() > 0.0 { overlap.conj() / overlap.norm() } else { Complex64::new(1.0, 0.0) };
        for r in 0..dim {
            out[(r, b)] = v[(r, e)] * phase;
        }
    }
    out
}
