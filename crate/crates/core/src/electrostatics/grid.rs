use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use super::banded::{BandCholesky, BandMatrix};
use super::ElectrostaticsError;
use crate::constants::{NM, VACUUM_PERMITTIVITY};
use crate::device::DeviceDescription;

pub const MIN_NX: usize = 64;
pub const MIN_NZ: usize = 32;
/// Lateral padding beyond the outermost electrode, in gate pitches.
pub const LATERAL_PADDING_PITCHES: f64 = 3.0;
/// Geometries whose factorisations are kept for reuse.
const CACHE_SLOTS: usize = 4;

/// Requested resolution. `nz` is a target: the row spacing is adjusted so the
/// 2DEG and the gate planes fall on grid rows, which can change the row count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nx: usize,
    pub nz: usize,
    /// Lateral domain `[x_min, x_max]` in nm; padded around the gates when absent.
    #[serde(default)]
    pub x_extent: Option<(f64, f64)>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { nx: 400, nz: 160, x_extent: None }
    }
}

impl GridSpec {
    pub fn new(nx: usize, nz: usize) -> Self {
        Self { nx, nz, x_extent: None }
    }

    pub fn with_extent(mut self, x_min: f64, x_max: f64) -> Self {
        self.x_extent = Some((x_min, x_max));
        self
    }

    pub fn doubled(&self) -> Self {
        Self { nx: 2 * self.nx, nz: 2 * self.nz, x_extent: self.x_extent }
    }
}

const FREE: i32 = -1;
const GROUND: i32 = -2;

pub(crate) struct Geometry {
    pub nx: usize,
    pub nz: usize,
    pub x0: f64,
    pub dx: f64,
    pub dz: f64,
    /// Arithmetic and harmonic mean permittivity of each cell row `[z_j, z_j+1]`.
    pub eps_arith: Vec<f64>,
    pub eps_harm: Vec<f64>,
    /// Per node: FREE, GROUND or a gate index.
    pub kind: Vec<i32>,
    pub gate_ids: Vec<String>,
    pub row2: usize,
    pub snapped: bool,
    fingerprint: String,
    factor: OnceLock<Result<BandCholesky, ElectrostaticsError>>,
    /// (free node, Dirichlet node, coupling)
    couplings: OnceLock<Vec<(usize, usize, f64)>>,
    columns: Mutex<HashMap<usize, Arc<Vec<f64>>>>,
}

impl std::fmt::Debug for Geometry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Geometry")
            .field("nx", &self.nx)
            .field("nz", &self.nz)
            .field("dx", &self.dx)
            .field("dz", &self.dz)
            .field("row2", &self.row2)
            .finish_non_exhaustive()
    }
}

impl Geometry {
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.nz + j
    }

    /// Control-volume width of column `i`, nm.
    pub fn width(&self, i: usize) -> f64 {
        if i == 0 || i == self.nx - 1 {
            0.5 * self.dx
        } else {
            self.dx
        }
    }

    /// Coupling between `(i, j)` and `(i + 1, j)`.
    fn ax(&self, j: usize) -> f64 {
        let mut h = 0.0;
        if j > 0 {
            h += 0.5 * self.dz * self.eps_arith[j - 1];
        }
        if j + 1 < self.nz {
            h += 0.5 * self.dz * self.eps_arith[j];
        }
        h / self.dx
    }

    /// Coupling between `(i, j)` and `(i, j + 1)`.
    fn az(&self, i: usize, j: usize) -> f64 {
        self.eps_harm[j] * self.width(i) / self.dz
    }

    fn for_each_edge(&self, mut f: impl FnMut(usize, usize, f64)) {
        for i in 0..self.nx {
            for j in 0..self.nz {
                let k = self.idx(i, j);
                if i + 1 < self.nx {
                    f(k, self.idx(i + 1, j), self.ax(j));
                }
                if j + 1 < self.nz {
                    f(k, self.idx(i, j + 1), self.az(i, j));
                }
            }
        }
    }

    fn assemble(&self) -> BandMatrix {
        let n = self.nx * self.nz;
        let mut a = BandMatrix::zeros(n, self.nz);
        self.for_each_edge(|p, q, c| {
            let (fp, fq) = (self.kind[p] == FREE, self.kind[q] == FREE);
            if fp {
                a.add(p, p, c);
            }
            if fq {
                a.add(q, q, c);
            }
            if fp && fq {
                a.add(q.max(p), q.min(p), -c);
            }
        });
        for k in 0..n {
            if self.kind[k] != FREE {
                a.add(k, k, 1.0);
            }
        }
        a
    }

    pub fn factor(&self) -> Result<&BandCholesky, ElectrostaticsError> {
        self.factor
            .get_or_init(|| self.assemble().cholesky().ok_or(ElectrostaticsError::NotPositiveDefinite))
            .as_ref()
            .map_err(Clone::clone)
    }

    pub fn couplings(&self) -> &[(usize, usize, f64)] {
        self.couplings.get_or_init(|| {
            let mut out = Vec::new();
            self.for_each_edge(|p, q, c| {
                let (fp, fq) = (self.kind[p] == FREE, self.kind[q] == FREE);
                if fp && !fq {
                    out.push((p, q, c));
                } else if fq && !fp {
                    out.push((q, p, c));
                }
            });
            out
        })
    }

    /// 2DEG-row potential (V) produced by a unit sheet charge (1 C/m²) on row node `i`,
    /// all electrodes grounded.
    pub fn row_response(&self, i: usize) -> Result<Arc<Vec<f64>>, ElectrostaticsError> {
        if let Some(c) = self.columns.lock().expect("column cache").get(&i) {
            return Ok(c.clone());
        }
        let factor = self.factor()?;
        let mut rhs = vec![0.0; self.nx * self.nz];
        rhs[self.idx(i, self.row2)] = self.width(i) * NM / VACUUM_PERMITTIVITY;
        factor.solve_in_place(&mut rhs);
        let col: Arc<Vec<f64>> = Arc::new((0..self.nx).map(|m| rhs[self.idx(m, self.row2)]).collect());
        self.columns.lock().expect("column cache").insert(i, col.clone());
        Ok(col)
    }
}

/// Finite-volume discretisation of a device cross-section with its electrode voltages.
///
/// Node `(i, j)` sits at `x = x0 + i dx`, `z = j dz` (nm, `z` measured up from
/// the grounded bottom boundary). Geometry and factorisation are shared between
/// grids that differ only in voltages.
#[derive(Debug, Clone)]
pub struct SimulationGrid {
    pub(crate) geom: Arc<Geometry>,
    pub(crate) gate_volts: Vec<f64>,
}

impl SimulationGrid {
    pub fn nx(&self) -> usize {
        self.geom.nx
    }

    pub fn nz(&self) -> usize {
        self.geom.nz
    }

    pub fn dx(&self) -> f64 {
        self.geom.dx
    }

    pub fn dz(&self) -> f64 {
        self.geom.dz
    }

    pub fn x(&self, i: usize) -> f64 {
        self.geom.x0 + i as f64 * self.geom.dx
    }

    pub fn z(&self, j: usize) -> f64 {
        j as f64 * self.geom.dz
    }

    pub fn x_nodes(&self) -> Vec<f64> {
        (0..self.nx()).map(|i| self.x(i)).collect()
    }

    pub fn two_deg_row(&self) -> usize {
        self.geom.row2
    }

    /// True if a gate plane could not be aligned with a row and was moved to the nearest one.
    pub fn gates_snapped(&self) -> bool {
        self.geom.snapped
    }

    /// Relative permittivity of the cell above node `(i, j)` (the cell below for the top row).
    pub fn permittivity(&self, _i: usize, j: usize) -> f64 {
        self.geom.eps_arith[j.min(self.nz() - 2)]
    }

    pub fn is_dirichlet(&self, i: usize, j: usize) -> bool {
        self.geom.kind[self.geom.idx(i, j)] != FREE
    }

    /// Fixed potential of a Dirichlet node.
    pub fn dirichlet_value(&self, i: usize, j: usize) -> Option<f64> {
        match self.geom.kind[self.geom.idx(i, j)] {
            FREE => None,
            GROUND => Some(0.0),
            g => Some(self.gate_volts[g as usize]),
        }
    }

    /// Nodes held at the voltage of electrode `id`.
    pub fn gate_nodes(&self, id: &str) -> Vec<(usize, usize)> {
        let Some(g) = self.geom.gate_ids.iter().position(|x| x == id) else {
            return Vec::new();
        };
        (0..self.nx())
            .flat_map(|i| (0..self.nz()).map(move |j| (i, j)))
            .filter(|&(i, j)| self.geom.kind[self.geom.idx(i, j)] == g as i32)
            .collect()
    }

    pub fn gate_voltages(&self) -> &[f64] {
        &self.gate_volts
    }

    /// Same geometry with the electrode voltages of `device`'s active preset.
    pub fn with_voltages_of(&self, device: &DeviceDescription) -> Result<Self, ElectrostaticsError> {
        let gate_volts = self
            .geom
            .gate_ids
            .iter()
            .map(|id| {
                device
                    .voltages()
                    .get(id)
                    .ok_or_else(|| ElectrostaticsError::Geometry(format!("device has no electrode `{id}`")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { geom: self.geom.clone(), gate_volts })
    }

    /// Same geometry with voltage `v` on every electrode.
    pub fn with_uniform_voltage(&self, v: f64) -> Self {
        Self { geom: self.geom.clone(), gate_volts: vec![v; self.gate_volts.len()] }
    }

    /// Same geometry with explicit electrode voltages (ordered as the device gates).
    pub fn with_gate_voltages(&self, volts: Vec<f64>) -> Result<Self, ElectrostaticsError> {
        if volts.len() != self.gate_volts.len() {
            return Err(ElectrostaticsError::Geometry(format!(
                "expected {} electrode voltages, got {}",
                self.gate_volts.len(),
                volts.len()
            )));
        }
        Ok(Self { geom: self.geom.clone(), gate_volts: volts })
    }

    pub fn shares_geometry(&self, other: &SimulationGrid) -> bool {
        Arc::ptr_eq(&self.geom, &other.geom)
    }
}

fn cache() -> &'static Mutex<Vec<Arc<Geometry>>> {
    static CACHE: OnceLock<Mutex<Vec<Arc<Geometry>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(Vec::new()))
}

/// Integrate `1/eps` and `eps` over `[z0, z1]` through the layer stack.
fn cell_means(device: &DeviceDescription, z0: f64, z1: f64) -> (f64, f64) {
    let mut bounds = vec![z0];
    let mut top = 0.0;
    for l in device.stack() {
        top += l.thickness;
        if top > z0 && top < z1 {
            bounds.push(top);
        }
    }
    bounds.push(z1);
    let (mut arith, mut inv) = (0.0, 0.0);
    for w in bounds.windows(2) {
        let eps = device.permittivity_at(0.5 * (w[0] + w[1]));
        arith += eps * (w[1] - w[0]);
        inv += (w[1] - w[0]) / eps;
    }
    let h = z1 - z0;
    (arith / h, h / inv)
}

fn is_multiple(h: f64, dz: f64) -> bool {
    let r = h / dz;
    (r - r.round()).abs() < 1e-6
}

/// Discretise `device` on a grid of roughly `spec.nx × spec.nz` nodes.
pub fn build_grid(device: &DeviceDescription, spec: GridSpec) -> Result<SimulationGrid, ElectrostaticsError> {
    if spec.nx < MIN_NX || spec.nz < MIN_NZ {
        return Err(ElectrostaticsError::Resolution(format!(
            "grid {}x{} is below the {}x{} floor",
            spec.nx, spec.nz, MIN_NX, MIN_NZ
        )));
    }
    let (xa, xb) = match spec.x_extent {
        Some((a, b)) => {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(ElectrostaticsError::Geometry(format!("invalid lateral extent [{a}, {b}]")));
            }
            for g in device.gates() {
                if g.span.x0 < a - 1e-9 || g.span.x1 > b + 1e-9 {
                    return Err(ElectrostaticsError::GateOutsideDomain {
                        gate: g.id.clone(),
                        x0: g.span.x0,
                        x1: g.span.x1,
                        lo: a,
                        hi: b,
                    });
                }
            }
            (a, b)
        }
        None => {
            let (lo, hi) = device.gate_extent();
            let pad = LATERAL_PADDING_PITCHES * device.gate_pitch();
            (lo - pad, hi + pad)
        }
    };
    let dx = (xb - xa) / (spec.nx - 1) as f64;

    let z2 = device.two_deg_height();
    let total = device.total_height();
    let mut levels: Vec<u8> = device.gates().iter().map(|g| g.metal_layer).collect();
    levels.sort_unstable();
    levels.dedup();
    let heights: Vec<f64> = levels
        .iter()
        .map(|&l| {
            device
                .gate_height(l)
                .ok_or_else(|| ElectrostaticsError::Geometry(format!("no stack layer hosts metal layer {l}")))
        })
        .collect::<Result<_, _>>()?;

    let dz_nominal = total / (spec.nz - 1) as f64;
    let m0 = (z2 / dz_nominal).ceil().max(1.0) as usize;
    let m_max = ((1.25 * m0 as f64).ceil() as usize).max(m0);
    let aligned = (m0..=m_max).map(|m| z2 / m as f64).find(|&dz| heights.iter().all(|&h| is_multiple(h, dz)));
    let (dz, snapped) = match aligned {
        Some(dz) => (dz, false),
        None => (z2 / m0 as f64, true),
    };
    let row2 = (z2 / dz).round() as usize;
    let nz = ((total / dz) - 1e-9).ceil() as usize + 1;
    if nz < MIN_NZ {
        return Err(ElectrostaticsError::Resolution(format!("only {nz} rows after aligning the 2DEG plane")));
    }

    let mut eps_arith = Vec::with_capacity(nz - 1);
    let mut eps_harm = Vec::with_capacity(nz - 1);
    for j in 0..nz - 1 {
        let (a, h) = cell_means(device, j as f64 * dz, (j + 1) as f64 * dz);
        eps_arith.push(a);
        eps_harm.push(h);
    }

    let nx = spec.nx;
    let mut kind = vec![FREE; nx * nz];
    for i in 0..nx {
        kind[i * nz] = GROUND;
    }
    let gate_ids: Vec<String> = device.gates().iter().map(|g| g.id.clone()).collect();
    for (g, gate) in device.gates().iter().enumerate() {
        let h = heights[levels.iter().position(|&l| l == gate.metal_layer).expect("level listed")];
        let j = ((h / dz).round() as usize).min(nz - 1);
        if j <= row2 {
            return Err(ElectrostaticsError::Geometry(format!("gate `{}` does not lie above the 2DEG plane", gate.id)));
        }
        let j_top = (((h + gate.thickness) / dz).round() as usize).clamp(j, nz - 1);
        // Edges round to the nearest node; a gate narrower than a cell keeps its centre node.
        let node = |x: f64| (((x - xa) / dx).round().max(0.0) as usize).min(nx - 1);
        let (i0, i1) = (node(gate.span.x0), node(gate.span.x1));
        for i in i0..=i1 {
            for jj in j..=j_top {
                kind[i * nz + jj] = g as i32;
            }
        }
    }

    let fingerprint = format!(
        "{:?}|{:?}|{nx}|{nz}|{xa:e}|{xb:e}|{dz:e}",
        device.stack(),
        device.gates().iter().map(|g| (&g.id, g.metal_layer, g.span.x0, g.span.x1, g.thickness)).collect::<Vec<_>>()
    );

    let mut slots = cache().lock().expect("grid cache");
    let geom = match slots.iter().position(|g| g.fingerprint == fingerprint) {
        Some(p) => {
            let g = slots.remove(p);
            slots.push(g.clone());
            g
        }
        None => {
            let g = Arc::new(Geometry {
                nx,
                nz,
                x0: xa,
                dx,
                dz,
                eps_arith,
                eps_harm,
                kind,
                gate_ids,
                row2,
                snapped,
                fingerprint,
                factor: OnceLock::new(),
                couplings: OnceLock::new(),
                columns: Mutex::new(HashMap::new()),
            });
            if slots.len() >= CACHE_SLOTS {
                slots.remove(0);
            }
            slots.push(g.clone());
            g
        }
    };
    drop(slots);

    let gate_volts = device.gates().iter().map(|g| device.voltages().get(&g.id).unwrap_or(0.0)).collect();
    Ok(SimulationGrid { geom, gate_volts })
}
