//! Passive (selector-free) crossbar arrays.
//!
//! Cell `(i, j)` joins row line `i` to column line `j`; its current flows
//! from the row into the column and follows the composite conduction model
//! of the cell state. Lines are ideal conductors.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::conduction::{conductance_with_multiplier, current_total, current_with_multiplier, ConductionParams};
use crate::device_state::{apply_pulse, sample_device, DeviceState, PulseSpec, SchemeKind, UpdateModel};
use crate::error::{ModelError, Result};
use crate::rng::derive_seed;

/// Largest side accepted by the dense nodal solver.
pub const MAX_DENSE_SIDE: usize = 64;
/// Largest |v| accepted by [`mvm_read`], V.
pub const READ_RANGE: f64 = 0.3;

const MAX_NEWTON_ITERATIONS: usize = 200;
const MAX_HALVINGS: usize = 40;
const KCL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Crossbar {
    pub rows: usize,
    pub cols: usize,
    /// Row-major cell states.
    pub cells: Vec<DeviceState>,
    pub p: ConductionParams,
    pub t_kelvin: f64,
}

impl Crossbar {
    /// Array of pristine devices with independent device-to-device draws.
    pub fn build(rows: usize, cols: usize, p: ConductionParams, sigma_d2d: f64, seed: u64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(ModelError::Dimension(format!("{rows}x{cols} array")));
        }
        p.validate()?;
        let cells = (0..rows * cols)
            .map(|k| sample_device(sigma_d2d, derive_seed(seed, k as u64)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            rows,
            cols,
            cells,
            p,
            t_kelvin: 300.0,
        })
    }

    /// Every cell in `state`.
    pub fn uniform(rows: usize, cols: usize, p: ConductionParams, state: DeviceState) -> Result<Self> {
        let mut x = Self::build(rows, cols, p, 0.0, 0)?;
        x.cells.iter_mut().for_each(|c| *c = state);
        Ok(x)
    }

    pub fn cell(&self, i: usize, j: usize) -> &DeviceState {
        &self.cells[i * self.cols + j]
    }

    pub fn cell_mut(&mut self, i: usize, j: usize) -> &mut DeviceState {
        &mut self.cells[i * self.cols + j]
    }

    fn multipliers(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.multiplier(&self.p)).collect()
    }

    fn check_cell(&self, (i, j): (usize, usize)) -> Result<()> {
        if i >= self.rows || j >= self.cols {
            return Err(ModelError::Dimension(format!(
                "cell ({i}, {j}) outside {}x{} array",
                self.rows, self.cols
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LineDrive {
    Voltage(f64),
    /// Held at 0 V by a transimpedance stage.
    VirtualGround,
    Floating,
}

impl LineDrive {
    fn voltage(self) -> Option<f64> {
        match self {
            LineDrive::Voltage(v) => Some(v),
            LineDrive::VirtualGround => Some(0.0),
            LineDrive::Floating => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasScheme {
    pub row_drive: Vec<LineDrive>,
    pub col_drive: Vec<LineDrive>,
}

impl BiasScheme {
    /// Selected row at `v`, selected column grounded, everything else floating.
    pub fn read_floating(rows: usize, cols: usize, (i, j): (usize, usize), v: f64) -> Self {
        let mut row_drive = vec![LineDrive::Floating; rows];
        let mut col_drive = vec![LineDrive::Floating; cols];
        row_drive[i] = LineDrive::Voltage(v);
        col_drive[j] = LineDrive::VirtualGround;
        Self { row_drive, col_drive }
    }

    /// Rows driven, columns at virtual ground.
    pub fn mvm(v_in: &[f64], cols: usize) -> Self {
        Self {
            row_drive: v_in.iter().map(|&v| LineDrive::Voltage(v)).collect(),
            col_drive: vec![LineDrive::VirtualGround; cols],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSolution {
    pub row_voltages: Vec<f64>,
    pub col_voltages: Vec<f64>,
    /// Row-major currents, row line to column line, A.
    pub cell_currents: Vec<f64>,
    /// Current delivered into each row line by its driver (zero when floating).
    pub row_currents: Vec<f64>,
    /// Current drawn out of each column line by its driver (zero when floating).
    pub col_currents: Vec<f64>,
    /// Largest |sum of currents| at a floating line.
    pub kcl_residual: f64,
    pub iterations: usize,
}

impl NetworkSolution {
    pub fn cell_current(&self, cols: usize, i: usize, j: usize) -> f64 {
        self.cell_currents[i * cols + j]
    }
}

#[derive(Clone, Copy)]
enum Node {
    Row(usize),
    Col(usize),
}

/// Kirchhoff solve for the voltages of floating lines.
///
/// Damped Newton iteration on the floating-line voltages, starting at the
/// mean of the driven voltages; the step is halved while it increases the
/// residual norm. Stops once the step is at voltage round-off.
pub fn solve_network(x: &Crossbar, b: &BiasScheme) -> Result<NetworkSolution> {
    if b.row_drive.len() != x.rows || b.col_drive.len() != x.cols {
        return Err(ModelError::Dimension(format!(
            "bias has {}x{} lines for a {}x{} array",
            b.row_drive.len(),
            b.col_drive.len(),
            x.rows,
            x.cols
        )));
    }
    if x.rows > MAX_DENSE_SIDE || x.cols > MAX_DENSE_SIDE {
        return Err(ModelError::Dimension(format!(
            "{}x{} exceeds the {MAX_DENSE_SIDE}x{MAX_DENSE_SIDE} dense-solver limit",
            x.rows, x.cols
        )));
    }
    let driven: Vec<f64> = b
        .row_drive
        .iter()
        .chain(&b.col_drive)
        .filter_map(|d| d.voltage())
        .collect();
    if driven.is_empty() {
        return Err(ModelError::Dimension("no driven line".into()));
    }
    let start = driven.iter().sum::<f64>() / driven.len() as f64;
    let v_scale = driven.iter().fold(1e-3f64, |m, v| m.max(v.abs()));
    let step_tol = 8.0 * f64::EPSILON * v_scale;

    let mut vr: Vec<f64> = b.row_drive.iter().map(|d| d.voltage().unwrap_or(start)).collect();
    let mut vc: Vec<f64> = b.col_drive.iter().map(|d| d.voltage().unwrap_or(start)).collect();
    let unknowns: Vec<Node> = (0..x.rows)
        .filter(|&i| b.row_drive[i].voltage().is_none())
        .map(Node::Row)
        .chain((0..x.cols).filter(|&j| b.col_drive[j].voltage().is_none()).map(Node::Col))
        .collect();
    let gm = x.multipliers();
    let (p, t, cols) = (&x.p, x.t_kelvin, x.cols);

    let residual = |vr: &[f64], vc: &[f64]| -> Result<Vec<f64>> {
        unknowns
            .iter()
            .map(|node| match *node {
                Node::Row(i) => (0..cols).try_fold(0.0, |acc, j| {
                    Ok(acc + current_with_multiplier(vr[i] - vc[j], t, p, gm[i * cols + j])?)
                }),
                Node::Col(j) => (0..vr.len()).try_fold(0.0, |acc, i| {
                    Ok(acc + current_with_multiplier(vc[j] - vr[i], t, p, gm[i * cols + j])?)
                }),
            })
            .collect()
    };
    let norm = |r: &[f64]| r.iter().map(|x| x * x).sum::<f64>().sqrt();
    let max_abs = |r: &[f64]| r.iter().fold(0.0f64, |m, x| m.max(x.abs()));

    let mut iterations = 0;
    let mut f = residual(&vr, &vc)?;
    let index_of = |node: Node| -> Option<usize> {
        unknowns.iter().position(|u| match (u, node) {
            (Node::Row(a), Node::Row(b)) => *a == b,
            (Node::Col(a), Node::Col(b)) => *a == b,
            _ => false,
        })
    };
    let row_index: Vec<Option<usize>> = (0..x.rows).map(|i| index_of(Node::Row(i))).collect();
    let col_index: Vec<Option<usize>> = (0..x.cols).map(|j| index_of(Node::Col(j))).collect();

    while !unknowns.is_empty() && max_abs(&f) > 0.0 {
        if iterations == MAX_NEWTON_ITERATIONS {
            return Err(ModelError::NoConvergence {
                iterations,
                residual: max_abs(&f),
            });
        }
        iterations += 1;
        let n = unknowns.len();
        let mut jac = DMatrix::<f64>::zeros(n, n);
        for i in 0..x.rows {
            for j in 0..cols {
                let g = conductance_with_multiplier(vr[i] - vc[j], t, p, gm[i * cols + j])?;
                if let Some(a) = row_index[i] {
                    jac[(a, a)] += g;
                    if let Some(c) = col_index[j] {
                        jac[(a, c)] -= g;
                    }
                }
                if let Some(c) = col_index[j] {
                    jac[(c, c)] += g;
                    if let Some(a) = row_index[i] {
                        jac[(c, a)] -= g;
                    }
                }
            }
        }
        let rhs = DVector::from_iterator(n, f.iter().map(|r| -r));
        let step = jac.lu().solve(&rhs).ok_or_else(|| ModelError::NoConvergence {
            iterations,
            residual: max_abs(&f),
        })?;

        let f_norm = norm(&f);
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let mut tr = vr.clone();
            let mut tc = vc.clone();
            for (k, node) in unknowns.iter().enumerate() {
                match *node {
                    Node::Row(i) => tr[i] += lambda * step[k],
                    Node::Col(j) => tc[j] += lambda * step[k],
                }
            }
            let ft = residual(&tr, &tc)?;
            if norm(&ft) < f_norm || (lambda == 1.0 && step.amax() <= step_tol) {
                vr = tr;
                vc = tc;
                f = ft;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted || step.amax() <= step_tol {
            break;
        }
    }
    let kcl_residual = max_abs(&f);
    if kcl_residual > KCL_TOL {
        return Err(ModelError::NoConvergence {
            iterations,
            residual: kcl_residual,
        });
    }

    let mut cell_currents = vec![0.0; x.rows * cols];
    for i in 0..x.rows {
        for j in 0..cols {
            cell_currents[i * cols + j] = current_with_multiplier(vr[i] - vc[j], t, p, gm[i * cols + j])?;
        }
    }
    let row_currents = (0..x.rows)
        .map(|i| {
            if row_index[i].is_some() {
                0.0
            } else {
                (0..cols).map(|j| cell_currents[i * cols + j]).sum()
            }
        })
        .collect();
    let col_currents = (0..cols)
        .map(|j| {
            if col_index[j].is_some() {
                0.0
            } else {
                (0..x.rows).map(|i| cell_currents[i * cols + j]).sum()
            }
        })
        .collect();
    Ok(NetworkSolution {
        row_voltages: vr,
        col_voltages: vc,
        cell_currents,
        row_currents,
        col_currents,
        kcl_residual,
        iterations,
    })
}

/// Column currents with rows at `v_in` and columns at virtual ground.
pub fn mvm_read(x: &Crossbar, v_in: &[f64]) -> Result<Vec<f64>> {
    if v_in.len() != x.rows {
        return Err(ModelError::Dimension(format!("{} inputs for {} rows", v_in.len(), x.rows)));
    }
    if let Some(&v) = v_in.iter().find(|v| !(v.abs() <= READ_RANGE + 1e-12)) {
        return Err(ModelError::OutOfRange {
            what: "v_in",
            value: v,
            constraint: "|v| must stay within the 0.3 V read range",
        });
    }
    let mut out = vec![0.0; x.cols];
    for (i, &v) in v_in.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        for (j, o) in out.iter_mut().enumerate() {
            *o += current_total(v, x.t_kelvin, &x.p, x.cell(i, j))?;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disturb {
    pub row: usize,
    pub col: usize,
    pub v_cell: f64,
    pub delta_w: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WriteReport {
    pub crossbar: Crossbar,
    pub selected_delta_w: f64,
    /// Every non-selected cell whose state moved.
    pub disturbed: Vec<Disturb>,
    /// Sum of |I V| t over all biased cells, J.
    pub energy_j: f64,
}

/// V/2 write: selected row at `v_write`, selected column at 0, every other
/// line at `v_write / 2`.
pub fn write_v_half<R: Rng + ?Sized>(
    x: &Crossbar,
    (si, sj): (usize, usize),
    pulse: &PulseSpec,
    kind: SchemeKind,
    m: &UpdateModel,
    rng: &mut R,
) -> Result<WriteReport> {
    x.check_cell((si, sj))?;
    let half = 0.5 * pulse.v_write;
    let mut next = x.clone();
    let mut disturbed = Vec::new();
    let mut energy = 0.0;
    let mut selected_delta_w = 0.0;
    for i in 0..x.rows {
        for j in 0..x.cols {
            let v_row = if i == si { pulse.v_write } else { half };
            let v_col = if j == sj { 0.0 } else { half };
            let v_cell = v_row - v_col;
            if v_cell == 0.0 {
                continue;
            }
            let before = *x.cell(i, j);
            energy += current_total(v_cell, x.t_kelvin, &x.p, &before)?.abs() * v_cell.abs() * pulse.t_width;
            let cell_pulse = PulseSpec {
                v_write: v_cell,
                t_width: pulse.t_width,
            };
            let out = apply_pulse(&before, &cell_pulse, kind, m, rng);
            *next.cell_mut(i, j) = out.state;
            if (i, j) == (si, sj) {
                selected_delta_w = out.delta_w;
            } else if out.delta_w != 0.0 {
                disturbed.push(Disturb {
                    row: i,
                    col: j,
                    v_cell,
                    delta_w: out.delta_w,
                });
            }
        }
    }
    Ok(WriteReport {
        crossbar: next,
        selected_delta_w,
        disturbed,
        energy_j: energy,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SneakMargin {
    pub i_selected: f64,
    pub i_sneak_worst: f64,
    /// `i_selected / i_sneak_worst`; infinite when no sneak path exists.
    pub margin: f64,
}

/// Reads one cell with every other line floating and compares its current
/// with the largest current through any other cell.
pub fn sneak_margin(x: &Crossbar, cell: (usize, usize), v_read: f64) -> Result<SneakMargin> {
    x.check_cell(cell)?;
    let (i, j) = cell;
    if x.rows < 2 || x.cols < 2 {
        let i_selected = current_total(v_read, x.t_kelvin, &x.p, x.cell(i, j))?.abs();
        return Ok(SneakMargin {
            i_selected,
            i_sneak_worst: 0.0,
            margin: f64::INFINITY,
        });
    }
    let sol = solve_network(x, &BiasScheme::read_floating(x.rows, x.cols, cell, v_read))?;
    let i_selected = sol.cell_current(x.cols, i, j).abs();
    let i_sneak_worst = sol
        .cell_currents
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != i * x.cols + j)
        .fold(0.0f64, |m, (_, c)| m.max(c.abs()));
    let margin = if i_sneak_worst > 0.0 {
        i_selected / i_sneak_worst
    } else {
        f64::INFINITY
    };
    Ok(SneakMargin {
        i_selected,
        i_sneak_worst,
        margin,
    })
}
