//! Brute-force nodal solver: nonlinear Gauss-Seidel with each floating
//! line settled by bisection on its own KCL equation.

use fenvm::conduction::current_total;
use fenvm::crossbar::{BiasScheme, Crossbar};
use fenvm::error::Result;

pub struct OracleSolution {
    pub row_voltages: Vec<f64>,
    pub col_voltages: Vec<f64>,
    pub cell_currents: Vec<f64>,
    pub sweeps: usize,
}

fn settle(lo: f64, hi: f64, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    loop {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            return Ok(m);
        }
        if f(m)? > 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
}

/// Solves with the floating lines bracketed by the driven voltages.
pub fn gauss_seidel(x: &Crossbar, b: &BiasScheme, max_sweeps: usize) -> Result<OracleSolution> {
    use fenvm::crossbar::LineDrive;
    let fixed = |d: &LineDrive| match *d {
        LineDrive::Voltage(v) => Some(v),
        LineDrive::VirtualGround => Some(0.0),
        LineDrive::Floating => None,
    };
    let driven: Vec<f64> = b.row_drive.iter().chain(&b.col_drive).filter_map(fixed).collect();
    let lo = driven.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = driven.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut vr: Vec<f64> = b.row_drive.iter().map(|d| fixed(d).unwrap_or(0.5 * (lo + hi))).collect();
    let mut vc: Vec<f64> = b.col_drive.iter().map(|d| fixed(d).unwrap_or(0.5 * (lo + hi))).collect();
    let (rows, cols, t) = (x.rows, x.cols, x.t_kelvin);
    let mut sweeps = 0;
    while sweeps < max_sweeps {
        sweeps += 1;
        let mut change = 0.0f64;
        for i in 0..rows {
            if fixed(&b.row_drive[i]).is_some() {
                continue;
            }
            let v = settle(lo, hi, |v| {
                (0..cols).try_fold(0.0, |acc, j| Ok(acc + current_total(v - vc[j], t, &x.p, x.cell(i, j))?))
            })?;
            change = change.max((v - vr[i]).abs());
            vr[i] = v;
        }
        for j in 0..cols {
            if fixed(&b.col_drive[j]).is_some() {
                continue;
            }
            let v = settle(lo, hi, |v| {
                (0..rows).try_fold(0.0, |acc, i| Ok(acc + current_total(v - vr[i], t, &x.p, x.cell(i, j))?))
            })?;
            change = change.max((v - vc[j]).abs());
            vc[j] = v;
        }
        if change <= 4.0 * f64::EPSILON * hi.abs().max(lo.abs()) {
            break;
        }
    }
    let mut cell_currents = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            cell_currents.push(current_total(vr[i] - vc[j], t, &x.p, x.cell(i, j))?);
        }
    }
    Ok(OracleSolution {
        row_voltages: vr,
        col_voltages: vc,
        cell_currents,
        sweeps,
    })
}
