use serde::{Deserialize, Serialize};

use super::DotsError;

/// Constant-interaction model of a double dot. Energies in eV, gate voltages in V.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityModel {
    pub charging_ev: [f64; 2],
    pub mutual_ev: f64,
    /// `lever_arms[i][j]`: coupling of gate `j` to dot `i`.
    pub lever_arms: [[f64; 2]; 2],
}

impl StabilityModel {
    pub fn validate(&self) -> Result<(), DotsError> {
        let ec = self.charging_ev;
        if !(ec[0] > 0.0 && ec[1] > 0.0) {
            return Err(DotsError::Domain("charging energies must be positive".into()));
        }
        if !(self.mutual_ev >= 0.0 && self.mutual_ev < ec[0].min(ec[1])) {
            return Err(DotsError::Domain("mutual charging energy must lie in [0, min E_C)".into()));
        }
        if self.lever_arms.iter().flatten().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(DotsError::Domain("lever arms must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn energy(&self, n: [u32; 2], v: [f64; 2]) -> f64 {
        let (n1, n2) = (n[0] as f64, n[1] as f64);
        let mut e = 0.5 * self.charging_ev[0] * n1 * n1 + 0.5 * self.charging_ev[1] * n2 * n2 + self.mutual_ev * n1 * n2;
        for (i, ni) in [n1, n2].into_iter().enumerate() {
            for (j, vj) in v.iter().enumerate() {
                e -= ni * self.lever_arms[i][j] * vj;
            }
        }
        e
    }

    /// Ground-state occupation; ties go to the lexicographically smallest `(n1, n2)`.
    pub fn ground_state(&self, v: [f64; 2], max_electrons: u32) -> [u32; 2] {
        let mut best = [0, 0];
        let mut best_e = f64::INFINITY;
        for n1 in 0..=max_electrons {
            for n2 in 0..=max_electrons {
                let e = self.energy([n1, n2], v);
                if e < best_e {
                    best_e = e;
                    best = [n1, n2];
                }
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoltageRange {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl VoltageRange {
    pub fn new(start: f64, stop: f64, points: usize) -> Self {
        Self { start, stop, points }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        let h = (self.stop - self.start) / (self.points - 1) as f64;
        (0..self.points).map(|k| self.start + k as f64 * h).collect()
    }
}

/// Boundary between two charge states, as midpoints between grid neighbours.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionLine {
    pub from: [u32; 2],
    pub to: [u32; 2],
    /// `(v1, v2)` points sorted by `v1`, then `v2`.
    pub points: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityMap {
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    /// `occupation[a][b]` at `(v1[a], v2[b])`.
    pub occupation: Vec<Vec<[u32; 2]>>,
    pub transitions: Vec<TransitionLine>,
}

pub fn stability_diagram(
    model: &StabilityModel,
    gate1: VoltageRange,
    gate2: VoltageRange,
    max_electrons: u32,
) -> Result<StabilityMap, DotsError> {
    model.validate()?;
    if max_electrons < 1 {
        return Err(DotsError::Domain("max_electrons must be at least 1".into()));
    }
    for r in [gate1, gate2] {
        if r.points == 0 || !r.start.is_finite() || !r.stop.is_finite() {
            return Err(DotsError::Domain("voltage ranges must be finite and non-empty".into()));
        }
    }
    let (v1, v2) = (gate1.values(), gate2.values());
    let occupation: Vec<Vec<[u32; 2]>> =
        v1.iter().map(|&a| v2.iter().map(|&b| model.ground_state([a, b], max_electrons)).collect()).collect();

    let mut lines: Vec<TransitionLine> = Vec::new();
    let mut push = |p: [u32; 2], q: [u32; 2], at: [f64; 2]| {
        let (from, to) = if p <= q { (p, q) } else { (q, p) };
        match lines.iter_mut().find(|l| l.from == from && l.to == to) {
            Some(l) => l.points.push(at),
            None => lines.push(TransitionLine { from, to, points: vec![at] }),
        }
    };
    for a in 0..v1.len() {
        for b in 0..v2.len() {
            let o = occupation[a][b];
            if a + 1 < v1.len() && occupation[a + 1][b] != o {
                push(o, occupation[a + 1][b], [0.5 * (v1[a] + v1[a + 1]), v2[b]]);
            }
            if b + 1 < v2.len() && occupation[a][b + 1] != o {
                push(o, occupation[a][b + 1], [v1[a], 0.5 * (v2[b] + v2[b + 1])]);
            }
        }
    }
    for l in &mut lines {
        l.points.sort_by(|p, q| p[0].total_cmp(&q[0]).then(p[1].total_cmp(&q[1])));
    }
    lines.sort_by(|p, q| (p.from, p.to).cmp(&(q.from, q.to)));
    Ok(StabilityMap { v1, v2, occupation, transitions: lines })
}
